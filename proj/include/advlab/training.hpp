#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "advlab/attacks.hpp"
#include "advlab/checkpoint.hpp"
#include "advlab/data.hpp"
#include "advlab/model.hpp"
#include "advlab/objectives.hpp"

namespace advlab {

// End-of-epoch interpolation weight. The rational form (a*n + b) / (c*n + d)
// starts small and grows toward a/c, so early epochs stay close to the
// freshly trained parameters while later epochs lean on the running anchor.
struct LambdaSchedule {
  enum class Kind { fixed, rational };
  Kind kind = Kind::rational;
  double fixed_value = 0.0;
  double a = 1.0;
  double b = 1.0;
  double c = 1.0;
  double d = 10.0;

  void validate() const;
};

// Weight for epoch n; epoch numbering starts at 1.
double lambda_at(const LambdaSchedule& schedule, int n);

struct PiatConfig {
  bool enabled = true;
  LambdaSchedule schedule;
};

// Piecewise-constant learning-rate override: lr becomes values[k] once the
// epoch reaches boundaries[k].
struct LrSchedule {
  std::vector<int> boundaries;
  std::vector<double> values;

  void validate() const;
};

struct TrainConfig {
  int epochs = 50;
  double lr = 0.5;
  double momentum = 0.9;
  double weight_decay = 0.0;
  int batch_size = 128;
  AttackKind attack_kind = AttackKind::pgd;
  AttackConfig attack;
  LossConfig loss;
  PiatConfig piat;
  std::uint64_t seed = 1;
  std::optional<LrSchedule> lr_schedule;

  void validate() const;
};

struct TrainRecord {
  int epoch = 0;
  double lambda_used = 0.0;
  double loss = 0.0;            // mean batch loss over the epoch
  double clean_acc = 0.0;       // test accuracy at the epoch-end parameters
  double robust_acc_pgd = 0.0;  // test accuracy under the configured attack
  long long wall_ms = 0;
};

struct SgdState {
  std::vector<double> velocity;  // lazily sized on the first step
};

// Heavy-ball update: v <- momentum * v + (g + weight_decay * theta);
// theta <- theta - lr * v.
void sgd_momentum_step(std::vector<double>& params, const std::vector<double>& grads,
                       SgdState& state, double lr, double momentum, double weight_decay);

// lambda * prev + (1 - lambda) * cur, elementwise. The endpoints are exact:
// lambda == 0 returns cur unchanged and lambda == 1 returns prev unchanged.
ParamVector interpolate_params(const ParamVector& prev, const ParamVector& cur, double lambda);

struct TrainHooks {
  // Runs after each epoch's record is final; the model holds that epoch's
  // deployable (post-interpolation) parameters.
  std::function<void(const Model& model, const TrainRecord& record)> on_epoch;
};

struct TrainResult {
  std::vector<TrainRecord> records;
  int best_epoch = 0;
  double best_clean_acc = 0.0;
  double best_robust_acc = -1.0;
  ParamVector best_params;
  std::vector<double> final_velocity;
};

// Adversarial training with optional end-of-epoch parameter interpolation.
// Each epoch trains from the previous epoch's deployable parameters, then
// blends the result with them using lambda_at(epoch). All randomness is
// derived from cfg.seed per (purpose, epoch, batch), so a run resumed from a
// checkpoint replays the exact remaining stream of an uninterrupted run.
TrainResult train(const TrainConfig& cfg, Model& model, const LabeledDataset& train_ds,
                  const LabeledDataset& test_ds, const TrainHooks& hooks = {},
                  const Checkpoint* resume = nullptr, int threads = 1);

}  // namespace advlab
