#pragma once

#include <string>
#include <vector>

#include "advlab/model.hpp"
#include "advlab/tensor.hpp"

namespace advlab {

enum class LossKind { ce_adv, ce_plus_alp, ce_plus_nmse };

std::string loss_kind_to_string(LossKind k);
LossKind loss_kind_from_string(const std::string& s);

struct LossConfig {
  LossKind kind = LossKind::ce_adv;
  double mu = 5.0;          // weight of the normalized logit-matching term
  double alp_weight = 1.0;  // weight of the plain logit-pairing term

  void validate() const;
};

// Mean cross entropy of the model on adversarial inputs.
Tensor ce_adv_loss(const Model& model, const Tensor& x_adv, const std::vector<int>& y);

// Mean squared l2 distance between raw clean and adversarial logits.
Tensor alp_loss(const Tensor& logits_clean, const Tensor& logits_adv);

// Softmax probability of the true class on the clean logits, detached from
// the graph: the result is plain data, never differentiated through.
std::vector<double> clean_true_class_prob(const Tensor& logits_clean, const std::vector<int>& y);

// Mean over the batch of (1 - p_clean_b) * || u_b - v_b ||^2 where u, v are
// the l2-normalized clean and adversarial logit rows. p_clean is treated as
// a constant weight per example.
Tensor nmse_loss(const Tensor& logits_clean, const Tensor& logits_adv,
                 const std::vector<double>& p_clean);

// Adversarial cross entropy plus the regularizer selected by cfg.kind.
// x is only forwarded when the regularizer needs clean logits.
Tensor total_loss(const Model& model, const Tensor& x, const Tensor& x_adv,
                  const std::vector<int>& y, const LossConfig& cfg);

}  // namespace advlab
