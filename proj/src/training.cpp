#include "advlab/training.hpp"

#include <chrono>
#include <cmath>

#include "advlab/analysis.hpp"
#include "advlab/error.hpp"

namespace advlab {

void LambdaSchedule::validate() const {
  if (kind == Kind::fixed) {
    if (!(fixed_value >= 0.0 && fixed_value <= 1.0)) {
      throw ConfigError("schedule.value must lie in [0,1]");
    }
    return;
  }
  if (!(a >= 0.0 && b >= 0.0 && c >= 0.0 && d >= 0.0)) {
    throw ConfigError("schedule coefficients must be >= 0");
  }
  // c >= a and d >= b keep (a*n + b) <= (c*n + d) for every n >= 0, so the
  // weight never leaves [0,1].
  if (c < a) throw ConfigError("schedule requires c >= a to keep lambda <= 1");
  if (d < b) throw ConfigError("schedule requires d >= b to keep lambda <= 1");
  if (c + d <= 0.0) throw ConfigError("schedule requires c + d > 0");
}

double lambda_at(const LambdaSchedule& schedule, int n) {
  schedule.validate();
  if (n < 1) throw DomainError("lambda_at: epoch numbering starts at 1, got " + std::to_string(n));
  if (schedule.kind == LambdaSchedule::Kind::fixed) return schedule.fixed_value;
  return (schedule.a * n + schedule.b) / (schedule.c * n + schedule.d);
}

void LrSchedule::validate() const {
  if (boundaries.size() != values.size()) {
    throw ConfigError("lr_schedule.boundaries and lr_schedule.values differ in length");
  }
  for (size_t i = 0; i < boundaries.size(); ++i) {
    if (boundaries[i] < 1) throw ConfigError("lr_schedule.boundaries must be >= 1");
    if (i > 0 && boundaries[i] <= boundaries[i - 1]) {
      throw ConfigError("lr_schedule.boundaries must be strictly increasing");
    }
    if (!(values[i] > 0.0)) throw ConfigError("lr_schedule.values must be > 0");
  }
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1, got " + std::to_string(epochs));
  if (!(lr > 0.0)) throw ConfigError("train.lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train.momentum must lie in [0,1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be >= 0");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  attack.validate();
  loss.validate();
  piat.schedule.validate();
  if (lr_schedule) lr_schedule->validate();
}

void sgd_momentum_step(std::vector<double>& params, const std::vector<double>& grads,
                       SgdState& state, double lr, double momentum, double weight_decay) {
  if (params.size() != grads.size()) {
    throw ShapeError("sgd_momentum_step: params/grads size mismatch: " +
                     std::to_string(params.size()) + " vs " + std::to_string(grads.size()));
  }
  if (state.velocity.empty()) state.velocity.assign(params.size(), 0.0);
  if (state.velocity.size() != params.size()) {
    throw ShapeError("sgd_momentum_step: velocity size mismatch: " +
                     std::to_string(state.velocity.size()) + " vs " + std::to_string(params.size()));
  }
  for (double g : grads) {
    if (!std::isfinite(g)) throw TrainError("sgd_momentum_step: non-finite gradient");
  }
  for (size_t i = 0; i < params.size(); ++i) {
    state.velocity[i] = momentum * state.velocity[i] + (grads[i] + weight_decay * params[i]);
    params[i] -= lr * state.velocity[i];
  }
}

ParamVector interpolate_params(const ParamVector& prev, const ParamVector& cur, double lambda) {
  if (!prev.layout_compatible(cur)) {
    throw CompatError("interpolate_params: parameter layouts differ");
  }
  if (prev.values.size() != cur.values.size()) {
    throw CompatError("interpolate_params: parameter counts differ");
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw DomainError("interpolate_params: lambda must lie in [0,1]");
  }
  // The endpoints return the operand itself so no rounding is introduced.
  if (lambda == 0.0) return cur;
  if (lambda == 1.0) return prev;
  ParamVector out;
  out.layout = cur.layout;
  out.values.resize(cur.values.size());
  for (size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] = lambda * prev.values[i] + (1.0 - lambda) * cur.values[i];
  }
  return out;
}

namespace {

double lr_at(const TrainConfig& cfg, int epoch) {
  double lr = cfg.lr;
  if (cfg.lr_schedule) {
    for (size_t k = 0; k < cfg.lr_schedule->boundaries.size(); ++k) {
      if (epoch >= cfg.lr_schedule->boundaries[k]) lr = cfg.lr_schedule->values[k];
    }
  }
  return lr;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, Model& model, const LabeledDataset& train_ds,
                  const LabeledDataset& test_ds, const TrainHooks& hooks,
                  const Checkpoint* resume, int threads) {
  cfg.validate();
  if (train_ds.size() == 0 || test_ds.size() == 0) {
    throw ConfigError("train: datasets must be non-empty");
  }
  if (train_ds.dim() != model.spec().input_dim || test_ds.dim() != model.spec().input_dim) {
    throw CompatError("train: dataset dimension does not match model input_dim");
  }
  if (train_ds.num_classes > model.spec().output_dim ||
      test_ds.num_classes > model.spec().output_dim) {
    throw CompatError("train: dataset has more classes than model outputs");
  }

  TrainResult result;
  SgdState state;
  int start_epoch = 0;
  ParamVector prev_interp;
  if (resume) {
    if (!(resume->model_spec == model.spec())) {
      throw CompatError("train: resume checkpoint was written for a different model spec");
    }
    if (resume->epoch < 0 || resume->epoch > cfg.epochs) {
      throw ConfigError("train: resume epoch " + std::to_string(resume->epoch) +
                        " outside [0," + std::to_string(cfg.epochs) + "]");
    }
    model.set_params(resume->params);
    if (resume->velocity) state.velocity = *resume->velocity;
    if (resume->best) {
      result.best_epoch = resume->best->epoch;
      result.best_clean_acc = resume->best->clean_acc;
      result.best_robust_acc = resume->best->robust_acc;
      result.best_params = resume->best->params;
    }
    start_epoch = resume->epoch;
    prev_interp = resume->params;
  } else {
    prev_interp = model.params();
  }

  for (int epoch = start_epoch + 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng shuffle_rng = derive_rng(cfg.seed, streams::kShuffle, static_cast<std::uint64_t>(epoch));
    const std::vector<Batch> epoch_batches =
        batches(train_ds, cfg.batch_size, shuffle_rng, true);
    const double lr = lr_at(cfg, epoch);

    double loss_sum = 0.0;
    for (size_t k = 0; k < epoch_batches.size(); ++k) {
      const Batch& batch = epoch_batches[k];
      Rng attack_rng = derive_rng(cfg.seed, streams::kAttack, static_cast<std::uint64_t>(epoch), k);
      const Tensor x_adv = run_attack(cfg.attack_kind, model, batch.features, batch.labels,
                                      cfg.attack, &attack_rng, threads);
      const std::string where =
          "epoch " + std::to_string(epoch) + " batch " + std::to_string(k + 1);
      double loss_value;
      std::vector<double> grads;
      {
        Tape tape;
        model.watch_params(tape);
        const Tensor loss = total_loss(model, batch.features, x_adv, batch.labels, cfg.loss);
        loss_value = loss.item();
        if (!std::isfinite(loss_value)) throw TrainError(where + ": non-finite loss");
        backward(loss);
        grads = model.flat_grads();
      }
      for (double g : grads) {
        if (!std::isfinite(g)) throw TrainError(where + ": non-finite gradient");
      }
      ParamVector p = model.params();
      sgd_momentum_step(p.values, grads, state, lr, cfg.momentum, cfg.weight_decay);
      model.set_params(p);
      loss_sum += loss_value;
    }

    const double lambda = cfg.piat.enabled
                              ? lambda_at(cfg.piat.schedule, epoch)
                              : 0.0;
    ParamVector interp = interpolate_params(prev_interp, model.params(), lambda);
    model.set_params(interp);
    prev_interp = std::move(interp);

    const double clean = accuracy(model, test_ds);
    Rng eval_rng = derive_rng(cfg.seed, streams::kEval, static_cast<std::uint64_t>(epoch));
    const double robust =
        robust_accuracy(model, test_ds, AttackKind::pgd, cfg.attack, &eval_rng, threads);

    TrainRecord rec;
    rec.epoch = epoch;
    rec.lambda_used = lambda;
    rec.loss = loss_sum / static_cast<double>(epoch_batches.size());
    rec.clean_acc = clean;
    rec.robust_acc_pgd = robust;
    rec.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    result.records.push_back(rec);

    if (robust > result.best_robust_acc) {
      result.best_epoch = epoch;
      result.best_clean_acc = clean;
      result.best_robust_acc = robust;
      result.best_params = model.params();
    }
    if (hooks.on_epoch) hooks.on_epoch(model, rec);
  }

  result.final_velocity = state.velocity;
  return result;
}

}  // namespace advlab
