#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "advlab/data.hpp"
#include "advlab/model.hpp"
#include "advlab/rng.hpp"
#include "advlab/tensor.hpp"

namespace advlab {

enum class AttackKind { fgsm, ifgsm, mifgsm, pgd };

std::string attack_kind_to_string(AttackKind k);
AttackKind attack_kind_from_string(const std::string& s);

struct AttackConfig {
  double epsilon = 0.1;        // l-inf budget around the clean input
  double alpha = 0.05;         // per-step size (fgsm steps by epsilon instead)
  int steps = 5;               // iteration count for the iterative attacks
  double momentum_decay = 1.0; // gradient-memory factor of the momentum attack
  bool random_start = false;   // uniform start in the epsilon ball (pgd only)
  std::optional<InputBox> input_box;

  void validate() const;
};

struct AttackStats {
  // Elements that landed strictly outside the epsilon ball before projection.
  long long projection_hits = 0;
};

// Scalar attack objective over one batch. The default sums per-example cross
// entropies, which keeps each example's input gradient independent of the
// rest of the batch.
using LossFn = std::function<Tensor(const Tensor& logits, const std::vector<int>& labels)>;
LossFn ce_sum_loss();

// Supplies d(loss)/d(input) at a given input; attacks never look at the model
// directly, so tests can drive them with scripted gradients.
using GradFn = std::function<Tensor(const Tensor& x)>;

// Single step of size epsilon along the gradient sign.
Tensor fgsm_core(const GradFn& grad_fn, const Tensor& x, const AttackConfig& cfg,
                 AttackStats* stats = nullptr);

// Shared loop of the iterative attacks: step alpha times the sign of the
// (optionally momentum-accumulated) gradient, then project back onto the
// epsilon ball around x0 and clip to the box. x_init is where the loop
// starts; it must already satisfy both constraints.
Tensor iterated_core(const GradFn& grad_fn, const Tensor& x0, const Tensor& x_init,
                     const AttackConfig& cfg, bool use_momentum,
                     AttackStats* stats = nullptr);

Tensor fgsm(const Model& model, const LossFn& loss, const Tensor& x,
            const std::vector<int>& y, const AttackConfig& cfg, AttackStats* stats = nullptr);
Tensor ifgsm(const Model& model, const LossFn& loss, const Tensor& x,
             const std::vector<int>& y, const AttackConfig& cfg, AttackStats* stats = nullptr);
Tensor mifgsm(const Model& model, const LossFn& loss, const Tensor& x,
              const std::vector<int>& y, const AttackConfig& cfg, AttackStats* stats = nullptr);

// rng drives the random start and is required when cfg.random_start is set.
Tensor pgd(const Model& model, const LossFn& loss, const Tensor& x,
           const std::vector<int>& y, const AttackConfig& cfg, Rng* rng = nullptr,
           AttackStats* stats = nullptr);

// Dispatch by kind with the default cross-entropy objective. threads > 1
// splits the batch into row chunks attacked concurrently; every example is
// perturbed independently, so the result is identical for any thread count.
Tensor run_attack(AttackKind kind, const Model& model, const Tensor& x,
                  const std::vector<int>& y, const AttackConfig& cfg,
                  Rng* rng = nullptr, int threads = 1, AttackStats* stats = nullptr);

}  // namespace advlab
