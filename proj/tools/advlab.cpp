#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "advlab/analysis.hpp"
#include "advlab/checkpoint.hpp"
#include "advlab/config.hpp"
#include "advlab/error.hpp"
#include "advlab/textio.hpp"

namespace fs = std::filesystem;
using namespace advlab;

namespace {

// Options shared by every subcommand; flags always win over the config file.
struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  int threads = 1;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "experiment config JSON (a manifest works too)");
  cmd->add_option("--seed", o.seed, "root seed; overrides config and ADVLAB_SEED");
  cmd->add_option("--threads", o.threads, "worker threads for attacks")->check(CLI::PositiveNumber);
}

ExperimentConfig effective_config(const CommonOpts& o) {
  ExperimentConfig cfg;
  if (!o.config_path.empty()) cfg = load_experiment_config(o.config_path);
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.seed_explicit = true;
  } else if (!cfg.seed_explicit) {
    if (const char* env = std::getenv("ADVLAB_SEED")) {
      long long v;
      if (!parse_int(env, v) || v < 0) {
        throw ConfigError(std::string("ADVLAB_SEED must be a non-negative integer, got '") + env + "'");
      }
      cfg.seed = static_cast<std::uint64_t>(v);
      cfg.seed_explicit = true;
    }
  }
  if (o.out_dir) cfg.out_dir = *o.out_dir;
  return cfg;
}

void apply_piat_flag(ExperimentConfig& cfg, const std::string& v) {
  if (v == "off") {
    cfg.piat.enabled = false;
    return;
  }
  if (v == "rational") {
    cfg.piat.enabled = true;
    cfg.piat.schedule.kind = LambdaSchedule::Kind::rational;
    return;
  }
  if (v.rfind("fixed:", 0) == 0) {
    double value;
    if (!parse_double(std::string_view(v).substr(6), value)) {
      throw ConfigError("--piat fixed:<value> has a malformed value: '" + v + "'");
    }
    cfg.piat.enabled = true;
    cfg.piat.schedule.kind = LambdaSchedule::Kind::fixed;
    cfg.piat.schedule.fixed_value = value;
    return;
  }
  throw ConfigError("--piat expects off, rational or fixed:<value>, got '" + v + "'");
}

std::vector<double> parse_double_list(const std::string& text, const char* flag) {
  std::vector<double> out;
  for (const auto& field : split_fields(text, ',')) {
    double v;
    if (!parse_double(field, v)) {
      throw ConfigError(std::string(flag) + ": cannot parse '" + std::string(field) + "' as a number");
    }
    out.push_back(v);
  }
  return out;
}

void make_dir(const std::string& path) {
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec) throw IoError("cannot create directory " + path + ": " + ec.message());
}

LabeledDataset dataset_from_csv(const std::string& path, int expected_dim) {
  CsvSchema schema;
  schema.feature_dim = expected_dim;
  return load_csv(path, schema);
}

struct SplitDatasets {
  LabeledDataset train;
  LabeledDataset test;
};

SplitDatasets make_datasets(const ExperimentConfig& cfg) {
  SplitDatasets out;
  if (cfg.data.kind == "toy") {
    ToyConfig tc = cfg.data.toy;
    tc.seed = toy_train_seed(cfg);
    out.train = generate_toy(tc);
    tc.seed = toy_test_seed(cfg);
    out.test = generate_toy(tc);
  } else {
    out.train = dataset_from_csv(cfg.data.csv_train, cfg.model.input_dim);
    out.test = dataset_from_csv(cfg.data.csv_test, cfg.model.input_dim);
  }
  return out;
}

Model model_from_checkpoint(const Checkpoint& ckpt) {
  Model model(ckpt.model_spec, 0);
  model.set_params(ckpt.params);
  return model;
}

std::string metrics_row(const TrainRecord& r) {
  std::string row = std::to_string(r.epoch);
  row += ',';
  row += format_double(r.lambda_used);
  row += ',';
  row += format_double(r.loss);
  row += ',';
  row += format_double(r.clean_acc);
  row += ',';
  row += format_double(r.robust_acc_pgd);
  row += ',';
  row += std::to_string(r.wall_ms);
  row += '\n';
  return row;
}

// ---- subcommand bodies -----------------------------------------------------

struct GenDataOpts {
  CommonOpts common;
  std::string out_file;
  std::string split = "train";
  std::optional<int> n_per_class;
};

void cmd_gen_data(const GenDataOpts& o) {
  ExperimentConfig cfg = effective_config(o.common);
  if (o.n_per_class) cfg.data.toy.n_per_class = *o.n_per_class;
  cfg.data.validate();
  if (cfg.data.kind != "toy") {
    throw ConfigError("gen-data requires data.kind 'toy'; csv datasets already exist on disk");
  }
  if (o.split != "train" && o.split != "test") {
    throw ConfigError("--split must be 'train' or 'test', got '" + o.split + "'");
  }
  ToyConfig tc = cfg.data.toy;
  tc.seed = o.split == "train" ? toy_train_seed(cfg) : toy_test_seed(cfg);
  save_csv(generate_toy(tc), o.out_file);
  std::cout << "wrote " << 2 * tc.n_per_class << " rows to " << o.out_file << "\n";
}

struct TrainOpts {
  CommonOpts common;
  std::string resume_path;
  std::optional<int> epochs;
  std::optional<double> lr;
  std::optional<int> batch_size;
  std::optional<std::string> piat;
  std::optional<std::string> loss_kind;
  std::optional<double> mu;
  std::optional<std::string> attack_kind;
  std::optional<double> epsilon;
  std::optional<double> alpha;
  std::optional<int> steps;
};

void cmd_train(const TrainOpts& o) {
  ExperimentConfig cfg = effective_config(o.common);
  if (o.epochs) cfg.epochs = *o.epochs;
  if (o.lr) cfg.lr = *o.lr;
  if (o.batch_size) cfg.batch_size = *o.batch_size;
  if (o.piat) apply_piat_flag(cfg, *o.piat);
  if (o.loss_kind) cfg.loss.kind = loss_kind_from_string(*o.loss_kind);
  if (o.mu) cfg.loss.mu = *o.mu;
  if (o.attack_kind) cfg.attack_kind = attack_kind_from_string(*o.attack_kind);
  if (o.epsilon) cfg.attack.epsilon = *o.epsilon;
  if (o.alpha) cfg.attack.alpha = *o.alpha;
  if (o.steps) cfg.attack.steps = *o.steps;
  cfg.validate();

  make_dir(cfg.out_dir);
  make_dir(cfg.out_dir + "/analysis");
  write_text_file(cfg.out_dir + "/manifest.json", manifest_json(cfg));

  const SplitDatasets ds = make_datasets(cfg);
  Model model(cfg.model, model_init_seed(cfg));

  std::optional<Checkpoint> resume;
  if (!o.resume_path.empty()) resume = load_checkpoint(o.resume_path);

  const std::string metrics_path = cfg.out_dir + "/metrics.csv";
  const bool append = resume.has_value() && fs::exists(metrics_path);
  std::ofstream metrics(metrics_path, append ? std::ios::app : std::ios::trunc);
  if (!metrics) throw IoError("cannot open " + metrics_path + " for writing");
  if (!append) metrics << "epoch,lambda,loss,clean_acc,robust_acc_pgd,wall_ms\n";
  metrics.flush();

  TrainHooks hooks;
  hooks.on_epoch = [&metrics, &metrics_path](const Model&, const TrainRecord& rec) {
    metrics << metrics_row(rec);
    metrics.flush();
    if (!metrics) throw IoError("failed writing " + metrics_path);
  };

  const TrainResult result = train(cfg.train_config(), model, ds.train, ds.test, hooks,
                                   resume ? &*resume : nullptr, o.common.threads);

  BestState best;
  best.epoch = result.best_epoch;
  best.clean_acc = result.best_clean_acc;
  best.robust_acc = result.best_robust_acc;
  best.params = result.best_params;

  Checkpoint final_ckpt;
  final_ckpt.model_spec = cfg.model;
  final_ckpt.params = model.params();
  final_ckpt.velocity = result.final_velocity;
  final_ckpt.best = best;
  final_ckpt.epoch = cfg.epochs;
  save_checkpoint(final_ckpt, cfg.out_dir + "/ckpt_final");

  Checkpoint best_ckpt;
  best_ckpt.model_spec = cfg.model;
  best_ckpt.params = result.best_params;
  best_ckpt.epoch = result.best_epoch;
  save_checkpoint(best_ckpt, cfg.out_dir + "/ckpt_best");

  TrainRecord last;
  if (!result.records.empty()) last = result.records.back();
  nlohmann::ordered_json report;
  report["best"] = {{"epoch", result.best_epoch},
                    {"clean_acc", result.best_clean_acc},
                    {"robust_acc_pgd", result.best_robust_acc}};
  report["final"] = {{"epoch", last.epoch},
                     {"clean_acc", last.clean_acc},
                     {"robust_acc_pgd", last.robust_acc_pgd}};
  report["diff"] = {{"clean_acc", result.best_clean_acc - last.clean_acc},
                    {"robust_acc_pgd", result.best_robust_acc - last.robust_acc_pgd}};
  write_text_file(cfg.out_dir + "/report.json", report.dump(2) + "\n");

  std::cout << "trained " << cfg.epochs << " epochs; best robust_acc "
            << format_double(result.best_robust_acc) << " at epoch " << result.best_epoch
            << "; outputs in " << cfg.out_dir << "\n";
}

struct EvalOpts {
  CommonOpts common;
  std::string ckpt_path;
  std::string data_path;
  std::string out_file;
  std::optional<std::string> attacks;
  std::optional<double> epsilon;
  std::optional<double> alpha;
  std::optional<int> steps;
};

void cmd_eval(const EvalOpts& o) {
  ExperimentConfig cfg = effective_config(o.common);
  if (o.epsilon) cfg.attack.epsilon = *o.epsilon;
  if (o.alpha) cfg.attack.alpha = *o.alpha;
  if (o.steps) cfg.attack.steps = *o.steps;
  cfg.attack.validate();

  const Checkpoint ckpt = load_checkpoint(o.ckpt_path);
  const Model model = model_from_checkpoint(ckpt);

  LabeledDataset ds;
  if (!o.data_path.empty()) {
    ds = dataset_from_csv(o.data_path, ckpt.model_spec.input_dim);
  } else {
    if (cfg.data.kind != "toy") {
      throw ConfigError("eval needs --data, or a config with data.kind 'toy'");
    }
    ToyConfig tc = cfg.data.toy;
    tc.seed = toy_test_seed(cfg);
    ds = generate_toy(tc);
  }

  std::vector<std::string> names = cfg.analysis.eval_attacks;
  if (o.attacks) {
    names.clear();
    for (const auto& f : split_fields(*o.attacks, ',')) names.emplace_back(f);
  }
  std::vector<NamedAttack> attacks;
  for (const auto& name : names) {
    attacks.push_back(NamedAttack{name, attack_kind_from_string(name), cfg.attack});
  }

  const EvalReport report = evaluate(model, ds, attacks, cfg.seed, o.common.threads);
  write_text_file(o.out_file, eval_report_json(report));
  std::cout << "clean_acc " << format_double(report.clean_acc);
  for (const auto& [name, acc] : report.robust_acc) {
    std::cout << "; " << name << " " << format_double(acc);
  }
  std::cout << "; report in " << o.out_file << "\n";
}

struct BoundaryOpts {
  CommonOpts common;
  std::string ckpt_path;
  std::string out_file;
  std::optional<int> resolution;
  std::optional<double> x1_min, x1_max, x2_min, x2_max, x3;
};

void cmd_boundary(const BoundaryOpts& o) {
  ExperimentConfig cfg = effective_config(o.common);
  BoundaryOptions opt = cfg.analysis.boundary;
  if (o.resolution) opt.resolution = *o.resolution;
  if (o.x1_min) opt.x1_min = *o.x1_min;
  if (o.x1_max) opt.x1_max = *o.x1_max;
  if (o.x2_min) opt.x2_min = *o.x2_min;
  if (o.x2_max) opt.x2_max = *o.x2_max;
  if (o.x3) opt.x3 = *o.x3;

  const Checkpoint ckpt = load_checkpoint(o.ckpt_path);
  const Model model = model_from_checkpoint(ckpt);
  const BoundaryGrid grid = decision_boundary_grid(model, opt);
  write_text_file(o.out_file, boundary_csv(grid));
  std::cout << "wrote " << opt.resolution << "x" << opt.resolution << " boundary grid to "
            << o.out_file << "\n";
}

struct LandscapeOpts {
  CommonOpts common;
  std::string ckpt_path;
  std::string data_path;
  std::string out_file;
  std::optional<int> grid_n;
  std::optional<std::uint64_t> landscape_seed;
  std::optional<int> sample;
  std::optional<std::string> loss;
};

void cmd_landscape(const LandscapeOpts& o) {
  ExperimentConfig cfg = effective_config(o.common);
  LandscapeOptions opt = cfg.analysis.landscape;
  opt.attack_kind = cfg.attack_kind;
  opt.attack = cfg.attack;
  if (o.grid_n) opt.grid_n = *o.grid_n;
  if (o.landscape_seed) opt.seed = *o.landscape_seed;
  if (o.sample) opt.sample = *o.sample;
  if (o.loss) {
    if (*o.loss == "clean") {
      opt.loss = LandscapeLoss::clean;
    } else if (*o.loss == "adversarial") {
      opt.loss = LandscapeLoss::adversarial;
    } else {
      throw ConfigError("--loss must be 'clean' or 'adversarial', got '" + *o.loss + "'");
    }
  }

  const Checkpoint ckpt = load_checkpoint(o.ckpt_path);
  const Model model = model_from_checkpoint(ckpt);

  LabeledDataset ds;
  if (!o.data_path.empty()) {
    ds = dataset_from_csv(o.data_path, ckpt.model_spec.input_dim);
  } else {
    if (cfg.data.kind != "toy") {
      throw ConfigError("landscape needs --data, or a config with data.kind 'toy'");
    }
    ToyConfig tc = cfg.data.toy;
    tc.seed = toy_test_seed(cfg);
    ds = generate_toy(tc);
  }

  const LandscapeGrid grid = loss_landscape(model, ds, opt);
  write_text_file(o.out_file, landscape_csv(grid));
  std::cout << "wrote " << opt.grid_n << "x" << opt.grid_n << " landscape ("
            << flatness_score(grid) << " flatness) to " << o.out_file << "\n";
}

struct RatioOpts {
  CommonOpts common;
  std::string ckpt_a;
  std::string ckpt_b;
  std::string out_file;
  std::string data_path;
  std::string lambdas = "0.5,0.9,0.99";
  std::string shrinks = "0.01,0.001,0.0001";
  int probes = 16;
};

void cmd_check_ratios(const RatioOpts& o) {
  ExperimentConfig cfg = effective_config(o.common);
  const Checkpoint a = load_checkpoint(o.ckpt_a);
  const Checkpoint b = load_checkpoint(o.ckpt_b);
  if (!(a.model_spec == b.model_spec)) {
    throw CompatError("check-ratios: checkpoints describe different model specs");
  }
  if (o.probes < 1) throw ConfigError("--probes must be >= 1");

  const int d = a.model_spec.input_dim;
  Tensor probes;
  if (!o.data_path.empty()) {
    const LabeledDataset ds = dataset_from_csv(o.data_path, d);
    const int n = std::min(o.probes, ds.size());
    std::vector<double> v(ds.features.data().begin(),
                          ds.features.data().begin() + static_cast<size_t>(n) * d);
    probes = Tensor(Shape{n, d}, std::move(v));
  } else {
    Rng rng = derive_rng(cfg.seed, streams::kRatioProbes);
    std::vector<double> v(static_cast<size_t>(o.probes) * d);
    for (auto& x : v) x = rng.normal();
    probes = Tensor(Shape{o.probes, d}, std::move(v));
  }

  const std::vector<RatioRow> rows =
      interpolation_ratio_check(a.model_spec, a.params, b.params, probes,
                      parse_double_list(o.lambdas, "--lambdas"),
                      parse_double_list(o.shrinks, "--shrinks"));
  std::string csv = "shrink,lambda,mean_ratio\n";
  for (const auto& r : rows) {
    csv += format_double(r.shrink);
    csv += ',';
    csv += format_double(r.lambda);
    csv += ',';
    csv += format_double(r.mean_ratio);
    csv += '\n';
  }
  write_text_file(o.out_file, csv);
  std::cout << "wrote " << rows.size() << " ratio rows to " << o.out_file << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"advlab: a desk-scale adversarial-training laboratory"};
  app.require_subcommand(1);

  GenDataOpts gen;
  CLI::App* cmd_gen = app.add_subcommand("gen-data", "generate the two-circles dataset as CSV");
  add_common(cmd_gen, gen.common);
  cmd_gen->add_option("--out", gen.out_file, "output CSV path")->required();
  cmd_gen->add_option("--split", gen.split, "which split's seed to use: train or test");
  cmd_gen->add_option("--n-per-class", gen.n_per_class, "examples per class");

  TrainOpts tr;
  CLI::App* cmd_tr = app.add_subcommand("train", "run adversarial training");
  add_common(cmd_tr, tr.common);
  cmd_tr->add_option("--out", tr.common.out_dir, "output directory");
  cmd_tr->add_option("--resume", tr.resume_path, "checkpoint to resume from");
  cmd_tr->add_option("--epochs", tr.epochs, "number of epochs");
  cmd_tr->add_option("--lr", tr.lr, "learning rate");
  cmd_tr->add_option("--batch-size", tr.batch_size, "examples per batch");
  cmd_tr->add_option("--piat", tr.piat, "off, rational or fixed:<value>");
  cmd_tr->add_option("--loss", tr.loss_kind, "ce_adv, ce_plus_alp or ce_plus_nmse");
  cmd_tr->add_option("--mu", tr.mu, "weight of the normalized logit-matching term");
  cmd_tr->add_option("--attack", tr.attack_kind, "fgsm, ifgsm, mifgsm or pgd");
  cmd_tr->add_option("--epsilon", tr.epsilon, "attack budget");
  cmd_tr->add_option("--alpha", tr.alpha, "attack step size");
  cmd_tr->add_option("--steps", tr.steps, "attack iterations");

  EvalOpts ev;
  CLI::App* cmd_ev = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(cmd_ev, ev.common);
  cmd_ev->add_option("--ckpt", ev.ckpt_path, "checkpoint to evaluate")->required();
  cmd_ev->add_option("--data", ev.data_path, "evaluation CSV (defaults to the config's toy test split)");
  cmd_ev->add_option("--out", ev.out_file, "report JSON path")->required();
  cmd_ev->add_option("--attacks", ev.attacks, "comma list of attacks, e.g. pgd,fgsm");
  cmd_ev->add_option("--epsilon", ev.epsilon, "attack budget");
  cmd_ev->add_option("--alpha", ev.alpha, "attack step size");
  cmd_ev->add_option("--steps", ev.steps, "attack iterations");

  BoundaryOpts bd;
  CLI::App* cmd_bd = app.add_subcommand("boundary", "rasterize the decision boundary");
  add_common(cmd_bd, bd.common);
  cmd_bd->add_option("--ckpt", bd.ckpt_path, "checkpoint to rasterize")->required();
  cmd_bd->add_option("--out", bd.out_file, "output CSV path")->required();
  cmd_bd->add_option("--resolution", bd.resolution, "grid resolution per axis");
  cmd_bd->add_option("--x1-min", bd.x1_min, "grid x1 lower bound");
  cmd_bd->add_option("--x1-max", bd.x1_max, "grid x1 upper bound");
  cmd_bd->add_option("--x2-min", bd.x2_min, "grid x2 lower bound");
  cmd_bd->add_option("--x2-max", bd.x2_max, "grid x2 upper bound");
  cmd_bd->add_option("--x3", bd.x3, "fixed third feature");

  LandscapeOpts ls;
  CLI::App* cmd_ls = app.add_subcommand("landscape", "probe the loss surface around a checkpoint");
  add_common(cmd_ls, ls.common);
  cmd_ls->add_option("--ckpt", ls.ckpt_path, "checkpoint to probe")->required();
  cmd_ls->add_option("--data", ls.data_path, "evaluation CSV (defaults to the config's toy test split)");
  cmd_ls->add_option("--out", ls.out_file, "output CSV path")->required();
  cmd_ls->add_option("--grid-n", ls.grid_n, "odd grid size per axis");
  cmd_ls->add_option("--landscape-seed", ls.landscape_seed, "seed for directions and subsample");
  cmd_ls->add_option("--sample", ls.sample, "evaluation subsample size");
  cmd_ls->add_option("--loss", ls.loss, "clean or adversarial");

  RatioOpts rt;
  CLI::App* cmd_rt = app.add_subcommand("check-ratios",
                                        "measure interpolation displacement ratios between two checkpoints");
  add_common(cmd_rt, rt.common);
  cmd_rt->add_option("--ckpt-a", rt.ckpt_a, "base checkpoint")->required();
  cmd_rt->add_option("--ckpt-b", rt.ckpt_b, "target checkpoint")->required();
  cmd_rt->add_option("--out", rt.out_file, "output CSV path")->required();
  cmd_rt->add_option("--data", rt.data_path, "probe inputs CSV (defaults to seeded Gaussian probes)");
  cmd_rt->add_option("--lambdas", rt.lambdas, "comma list of interpolation weights in [0,1)");
  cmd_rt->add_option("--shrinks", rt.shrinks, "comma list of positive shrink factors");
  cmd_rt->add_option("--probes", rt.probes, "number of probe inputs");

  cmd_gen->callback([&] { cmd_gen_data(gen); });
  cmd_tr->callback([&] { cmd_train(tr); });
  cmd_ev->callback([&] { cmd_eval(ev); });
  cmd_bd->callback([&] { cmd_boundary(bd); });
  cmd_ls->callback([&] { cmd_landscape(ls); });
  cmd_rt->callback([&] { cmd_check_ratios(rt); });

  try {
    app.parse(argc, argv);
    return 0;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const CompatError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ShapeError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const SchemaError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const FormatError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const TrainError& e) {
    std::cerr << "training aborted: " << e.what() << "\n";
    return 4;
  } catch (const AttackError& e) {
    std::cerr << "training aborted: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
