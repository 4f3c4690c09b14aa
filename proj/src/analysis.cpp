#include "advlab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "advlab/error.hpp"
#include "advlab/textio.hpp"

namespace advlab {

namespace {

double fraction_correct(const Tensor& logits, const std::vector<int>& labels) {
  const std::vector<int> preds = argmax_rows(logits);
  long long hits = 0;
  for (size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double population_stddev(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return std::sqrt(var / n);
}

}  // namespace

double accuracy(const Model& model, const LabeledDataset& ds) {
  if (ds.size() == 0) throw UsageError("accuracy: empty dataset");
  return fraction_correct(model.forward(ds.features), ds.labels);
}

double robust_accuracy(const Model& model, const LabeledDataset& ds, AttackKind kind,
                       const AttackConfig& cfg, Rng* rng, int threads) {
  if (ds.size() == 0) throw UsageError("robust_accuracy: empty dataset");
  const Tensor x_adv = run_attack(kind, model, ds.features, ds.labels, cfg, rng, threads);
  return fraction_correct(model.forward(x_adv), ds.labels);
}

EvalReport evaluate(const Model& model, const LabeledDataset& ds,
                    const std::vector<NamedAttack>& attacks, std::uint64_t seed, int threads) {
  EvalReport report;
  report.clean_acc = accuracy(model, ds);
  report.attacks = attacks;
  for (size_t i = 0; i < attacks.size(); ++i) {
    Rng rng = derive_rng(seed, streams::kEval, i);
    report.robust_acc.emplace_back(
        attacks[i].name,
        robust_accuracy(model, ds, attacks[i].kind, attacks[i].config, &rng, threads));
  }
  return report;
}

void BoundaryOptions::validate() const {
  if (resolution < 2) throw ConfigError("boundary.resolution must be >= 2");
  if (!(x1_min < x1_max)) throw ConfigError("boundary requires x1_min < x1_max");
  if (!(x2_min < x2_max)) throw ConfigError("boundary requires x2_min < x2_max");
}

namespace {

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> xs(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) {
    xs[static_cast<size_t>(k)] = lo + (hi - lo) * (static_cast<double>(k) / (n - 1));
  }
  return xs;
}

}  // namespace

BoundaryGrid decision_boundary_grid(const Model& model, const BoundaryOptions& options) {
  options.validate();
  if (model.spec().input_dim != 3) {
    throw CompatError("decision_boundary_grid requires a 3-feature model, got input_dim " +
                      std::to_string(model.spec().input_dim));
  }
  const int res = options.resolution;
  BoundaryGrid grid;
  grid.options = options;
  grid.x1s = linspace(options.x1_min, options.x1_max, res);
  grid.x2s = linspace(options.x2_min, options.x2_max, res);

  std::vector<double> feat(static_cast<size_t>(res) * res * 3);
  for (int i2 = 0; i2 < res; ++i2) {
    for (int i1 = 0; i1 < res; ++i1) {
      const size_t off = (static_cast<size_t>(i2) * res + i1) * 3;
      feat[off + 0] = grid.x1s[static_cast<size_t>(i1)];
      feat[off + 1] = grid.x2s[static_cast<size_t>(i2)];
      feat[off + 2] = options.x3;
    }
  }
  const Tensor logits = model.forward(Tensor(Shape{res * res, 3}, std::move(feat)));
  const int C = logits.shape()[1];
  grid.preds = argmax_rows(logits);
  grid.margins.resize(static_cast<size_t>(res) * res);
  for (size_t cell = 0; cell < grid.margins.size(); ++cell) {
    const double* row = &logits.data()[cell * C];
    const int p = grid.preds[cell];
    double runner_up = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < C; ++j) {
      if (j != p) runner_up = std::max(runner_up, row[j]);
    }
    // A single-logit model has no runner-up; its margin is defined as 0.
    grid.margins[cell] = C > 1 ? row[p] - runner_up : 0.0;
  }
  return grid;
}

double boundary_delta(const BoundaryGrid& a, const BoundaryGrid& b) {
  if (a.x1s != b.x1s || a.x2s != b.x2s || a.options.x3 != b.options.x3) {
    throw UsageError("boundary_delta: grids were built over different domains");
  }
  if (a.preds.size() != b.preds.size()) {
    throw UsageError("boundary_delta: grids have different cell counts");
  }
  long long diff = 0;
  for (size_t i = 0; i < a.preds.size(); ++i) {
    if (a.preds[i] != b.preds[i]) ++diff;
  }
  return static_cast<double>(diff) / static_cast<double>(a.preds.size());
}

std::string boundary_csv(const BoundaryGrid& grid) {
  std::string out = "x1,x2,pred,margin\n";
  const size_t res = grid.x1s.size();
  for (size_t i2 = 0; i2 < res; ++i2) {
    for (size_t i1 = 0; i1 < res; ++i1) {
      const size_t cell = i2 * res + i1;
      out += format_double(grid.x1s[i1]);
      out += ',';
      out += format_double(grid.x2s[i2]);
      out += ',';
      out += std::to_string(grid.preds[cell]);
      out += ',';
      out += format_double(grid.margins[cell]);
      out += '\n';
    }
  }
  return out;
}

void LandscapeOptions::validate() const {
  if (grid_n < 3) throw ConfigError("landscape.grid_n must be >= 3");
  if (grid_n % 2 == 0) throw ConfigError("landscape.grid_n must be odd so the grid contains the center");
  if (sample < 1) throw ConfigError("landscape.sample must be >= 1");
  if (loss == LandscapeLoss::adversarial) attack.validate();
}

LandscapeGrid loss_landscape(const Model& model, const LabeledDataset& ds,
                             const LandscapeOptions& options) {
  options.validate();
  if (ds.size() == 0) throw UsageError("loss_landscape: empty dataset");

  // Seeded evaluation subsample (all rows when the dataset is small enough).
  const int n_rows = std::min(ds.size(), options.sample);
  std::vector<int> idx(static_cast<size_t>(ds.size()));
  std::iota(idx.begin(), idx.end(), 0);
  if (n_rows < ds.size()) {
    Rng rng = derive_rng(options.seed, streams::kLandscapeSubsample);
    for (int i = 0; i < n_rows; ++i) {
      const auto j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(ds.size() - i)));
      std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }
  }
  const int d = ds.dim();
  std::vector<double> feat(static_cast<size_t>(n_rows) * d);
  std::vector<int> labels(static_cast<size_t>(n_rows));
  for (int r = 0; r < n_rows; ++r) {
    const int src = idx[static_cast<size_t>(r)];
    for (int j = 0; j < d; ++j) {
      feat[static_cast<size_t>(r) * d + j] = ds.features.data()[static_cast<size_t>(src) * d + j];
    }
    labels[static_cast<size_t>(r)] = ds.labels[static_cast<size_t>(src)];
  }
  Tensor inputs(Shape{n_rows, d}, std::move(feat));
  if (options.loss == LandscapeLoss::adversarial) {
    // Perturbations are crafted once, at the center parameters, and reused
    // for every displaced evaluation.
    Rng rng = derive_rng(options.seed, streams::kLandscapeAttack);
    inputs = run_attack(options.attack_kind, model, inputs, labels, options.attack, &rng);
  }

  const ParamVector p0 = model.params();
  const int nparams = static_cast<int>(p0.values.size());

  const auto unit_direction = [&](std::uint64_t stream) {
    Rng rng = derive_rng(options.seed, stream);
    std::vector<double> u(static_cast<size_t>(nparams));
    for (auto& v : u) v = rng.normal();
    double norm = 0.0;
    for (double v : u) norm += v * v;
    norm = std::sqrt(norm);
    if (norm < kNormGuard) throw UsageError("loss_landscape: degenerate probe direction");
    for (auto& v : u) v /= norm;
    return u;
  };
  const std::vector<double> u = unit_direction(streams::kLandscapeDirU);
  const std::vector<double> v = unit_direction(streams::kLandscapeDirV);

  // Symmetric magnitudes over [-1, 1]: m[k] = (k - half) / half, so the
  // center is exactly 0 and m[n-1-k] == -m[k] bitwise.
  const int n = options.grid_n;
  const int half = (n - 1) / 2;
  std::vector<double> ms(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) {
    ms[static_cast<size_t>(k)] = static_cast<double>(k - half) / static_cast<double>(half);
  }

  LandscapeGrid grid;
  grid.m1s = ms;
  grid.m2s = ms;
  grid.seed = options.seed;
  grid.loss_kind = options.loss;
  grid.losses.resize(static_cast<size_t>(n) * n);

  Model work = model;
  ParamVector p = p0;
  for (int i1 = 0; i1 < n; ++i1) {
    for (int i2 = 0; i2 < n; ++i2) {
      const double m1 = ms[static_cast<size_t>(i1)];
      const double m2 = ms[static_cast<size_t>(i2)];
      p.values = p0.values;
      // Zero displacements are skipped outright, so the center cell runs on
      // bitwise-identical parameters.
      if (m1 != 0.0) {
        for (int j = 0; j < nparams; ++j) p.values[static_cast<size_t>(j)] += m1 * u[static_cast<size_t>(j)];
      }
      if (m2 != 0.0) {
        for (int j = 0; j < nparams; ++j) p.values[static_cast<size_t>(j)] += m2 * v[static_cast<size_t>(j)];
      }
      work.set_params(p);
      const Tensor loss = softmax_cross_entropy(work.forward(inputs), labels, Reduction::mean);
      grid.losses[static_cast<size_t>(i1) * n + i2] = loss.item();
    }
  }
  return grid;
}

double flatness_score(const LandscapeGrid& grid) {
  if (grid.losses.empty()) throw UsageError("flatness_score: empty grid");
  return population_stddev(grid.losses);
}

std::string landscape_csv(const LandscapeGrid& grid) {
  std::string out = "m1,m2,loss\n";
  const size_t n = grid.m1s.size();
  for (size_t i1 = 0; i1 < n; ++i1) {
    for (size_t i2 = 0; i2 < n; ++i2) {
      out += format_double(grid.m1s[i1]);
      out += ',';
      out += format_double(grid.m2s[i2]);
      out += ',';
      out += format_double(grid.losses[i1 * n + i2]);
      out += '\n';
    }
  }
  return out;
}

double oscillation_score(const std::vector<TrainRecord>& records, int window) {
  if (window < 2) throw UsageError("oscillation_score: window must be >= 2");
  if (window > static_cast<int>(records.size())) {
    throw UsageError("oscillation_score: window " + std::to_string(window) +
                     " exceeds record count " + std::to_string(records.size()));
  }
  const size_t start = records.size() - static_cast<size_t>(window);
  std::vector<double> diffs;
  diffs.reserve(static_cast<size_t>(window) - 1);
  for (size_t i = start + 1; i < records.size(); ++i) {
    diffs.push_back(records[i].robust_acc_pgd - records[i - 1].robust_acc_pgd);
  }
  return population_stddev(diffs);
}

std::vector<RatioRow> interpolation_ratio_check(const MlpSpec& spec, const ParamVector& theta_i,
                                        const ParamVector& theta_i1, const Tensor& probes,
                                        const std::vector<double>& lambdas,
                                        const std::vector<double>& shrinks) {
  spec.validate();
  if (!theta_i.layout_compatible(theta_i1) || theta_i.values.size() != theta_i1.values.size()) {
    throw CompatError("interpolation_ratio_check: parameter snapshots have different layouts");
  }
  if (theta_i.values == theta_i1.values) {
    throw DomainError("interpolation_ratio_check: parameter snapshots are identical");
  }
  for (double l : lambdas) {
    if (!(l >= 0.0 && l < 1.0)) throw DomainError("interpolation_ratio_check: lambda must lie in [0,1)");
  }
  for (double s : shrinks) {
    if (!(s > 0.0)) throw DomainError("interpolation_ratio_check: shrink must be > 0");
  }
  if (probes.rank() != 2 || probes.shape()[0] < 1) {
    throw ShapeError("interpolation_ratio_check: probes must be a non-empty rank-2 batch");
  }

  Model work(spec, 0);
  work.set_params(theta_i);
  const Tensor f_i = work.forward(probes);
  const int P = probes.shape()[0];
  const int C = f_i.shape()[1];

  const auto row_dist = [C](const Tensor& a, const Tensor& b, int row) {
    double sq = 0.0;
    for (int j = 0; j < C; ++j) {
      const double diff = a.data()[static_cast<size_t>(row) * C + j] -
                          b.data()[static_cast<size_t>(row) * C + j];
      sq += diff * diff;
    }
    return std::sqrt(sq);
  };

  std::vector<RatioRow> rows;
  for (double s : shrinks) {
    ParamVector theta_s = theta_i;
    for (size_t j = 0; j < theta_s.values.size(); ++j) {
      theta_s.values[j] = theta_i.values[j] + s * (theta_i1.values[j] - theta_i.values[j]);
    }
    work.set_params(theta_s);
    const Tensor f_s = work.forward(probes);
    std::vector<double> denom(static_cast<size_t>(P));
    for (int pr = 0; pr < P; ++pr) denom[static_cast<size_t>(pr)] = row_dist(f_s, f_i, pr);

    for (double lambda : lambdas) {
      const ParamVector theta_tilde = interpolate_params(theta_i, theta_s, lambda);
      work.set_params(theta_tilde);
      const Tensor f_t = work.forward(probes);
      double sum = 0.0;
      int used = 0;
      for (int pr = 0; pr < P; ++pr) {
        const double den = (1.0 - lambda) * denom[static_cast<size_t>(pr)];
        if (den == 0.0) continue;  // the probe saw no output displacement
        sum += row_dist(f_t, f_i, pr) / den;
        ++used;
      }
      if (used == 0) {
        throw DomainError("interpolation_ratio_check: no probe produced a measurable displacement");
      }
      rows.push_back(RatioRow{s, lambda, sum / used});
    }
  }
  return rows;
}

}  // namespace advlab
