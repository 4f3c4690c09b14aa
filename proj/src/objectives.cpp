#include "advlab/objectives.hpp"

#include "advlab/error.hpp"

namespace advlab {

std::string loss_kind_to_string(LossKind k) {
  switch (k) {
    case LossKind::ce_adv: return "ce_adv";
    case LossKind::ce_plus_alp: return "ce_plus_alp";
    case LossKind::ce_plus_nmse: return "ce_plus_nmse";
  }
  throw UsageError("unknown loss kind enum value");
}

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "ce_adv") return LossKind::ce_adv;
  if (s == "ce_plus_alp") return LossKind::ce_plus_alp;
  if (s == "ce_plus_nmse") return LossKind::ce_plus_nmse;
  throw ConfigError("unknown loss kind '" + s + "'; expected ce_adv, ce_plus_alp or ce_plus_nmse");
}

void LossConfig::validate() const {
  if (!(mu >= 0.0)) throw ConfigError("loss.mu must be >= 0");
  if (!(alp_weight >= 0.0)) throw ConfigError("loss.alp_weight must be >= 0");
}

Tensor ce_adv_loss(const Model& model, const Tensor& x_adv, const std::vector<int>& y) {
  return softmax_cross_entropy(model.forward(x_adv), y, Reduction::mean);
}

namespace {

void check_logit_pair(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": logits must be rank-2 with equal shapes, got " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

}  // namespace

Tensor alp_loss(const Tensor& logits_clean, const Tensor& logits_adv) {
  check_logit_pair("alp_loss", logits_clean, logits_adv);
  const int B = logits_clean.shape()[0];
  const Tensor d = sub(logits_clean, logits_adv);
  return scale(sum(mul(d, d)), 1.0 / B);
}

std::vector<double> clean_true_class_prob(const Tensor& logits_clean, const std::vector<int>& y) {
  const int B = logits_clean.shape()[0], C = logits_clean.shape()[1];
  if (static_cast<int>(y.size()) != B) {
    throw ShapeError("clean_true_class_prob: got " + std::to_string(y.size()) +
                     " labels for batch size " + std::to_string(B));
  }
  for (int b = 0; b < B; ++b) {
    if (y[b] < 0 || y[b] >= C) {
      throw DomainError("clean_true_class_prob: label " + std::to_string(y[b]) +
                        " out of range [0," + std::to_string(C) + ")");
    }
  }
  const std::vector<double> probs = softmax_rows(logits_clean);
  std::vector<double> p(static_cast<size_t>(B));
  for (int b = 0; b < B; ++b) p[static_cast<size_t>(b)] = probs[static_cast<size_t>(b) * C + y[b]];
  return p;
}

Tensor nmse_loss(const Tensor& logits_clean, const Tensor& logits_adv,
                 const std::vector<double>& p_clean) {
  check_logit_pair("nmse_loss", logits_clean, logits_adv);
  const int B = logits_clean.shape()[0], C = logits_clean.shape()[1];
  if (static_cast<int>(p_clean.size()) != B) {
    throw ShapeError("nmse_loss: got " + std::to_string(p_clean.size()) +
                     " weights for batch size " + std::to_string(B));
  }
  for (double p : p_clean) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("nmse_loss: p_clean entries must lie in [0,1]");
  }
  const Tensor u = row_normalize(logits_clean);
  const Tensor v = row_normalize(logits_adv);
  const Tensor d = sub(u, v);
  // Constant weight tensor: row b scales by (1 - p_b) / B, folding the batch
  // mean into the same elementwise product.
  std::vector<double> w(static_cast<size_t>(B) * C);
  for (int b = 0; b < B; ++b) {
    const double wb = (1.0 - p_clean[static_cast<size_t>(b)]) / B;
    for (int j = 0; j < C; ++j) w[static_cast<size_t>(b) * C + j] = wb;
  }
  return sum(mul(mul(d, d), Tensor(logits_clean.shape(), std::move(w))));
}

Tensor total_loss(const Model& model, const Tensor& x, const Tensor& x_adv,
                  const std::vector<int>& y, const LossConfig& cfg) {
  cfg.validate();
  const Tensor logits_adv = model.forward(x_adv);
  const Tensor ce = softmax_cross_entropy(logits_adv, y, Reduction::mean);
  switch (cfg.kind) {
    case LossKind::ce_adv:
      return ce;
    case LossKind::ce_plus_alp: {
      const Tensor logits_clean = model.forward(x);
      return add(ce, scale(alp_loss(logits_clean, logits_adv), cfg.alp_weight));
    }
    case LossKind::ce_plus_nmse: {
      const Tensor logits_clean = model.forward(x);
      const std::vector<double> p = clean_true_class_prob(logits_clean, y);
      return add(ce, scale(nmse_loss(logits_clean, logits_adv, p), cfg.mu));
    }
  }
  throw UsageError("unknown loss kind enum value");
}

}  // namespace advlab
