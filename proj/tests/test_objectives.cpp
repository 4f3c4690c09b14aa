#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "advlab/error.hpp"
#include "advlab/model.hpp"
#include "advlab/objectives.hpp"
#include "advlab/rng.hpp"
#include "advlab/tensor.hpp"
#include "oracles.hpp"

using namespace advlab;

namespace {

MlpSpec small_spec() {
  MlpSpec spec;
  spec.input_dim = 3;
  spec.hidden_dims = {4};
  spec.output_dim = 2;
  return spec;
}

Tensor random_batch(int n, int d, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(static_cast<size_t>(n) * d);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor(Shape{n, d}, std::move(v));
}

std::vector<int> random_labels(int n, int c, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> y(static_cast<size_t>(n));
  for (auto& l : y) l = static_cast<int>(rng.below(static_cast<std::uint64_t>(c)));
  return y;
}

// Checks the model-parameter gradient of `value` against central differences
// of the identical tape-free evaluation.
void check_param_gradient(Model& model, const std::function<Tensor()>& loss_expr,
                          const std::function<double(const std::vector<double>&)>& eval_at,
                          double tol) {
  std::vector<double> analytic;
  {
    Tape tape;
    model.watch_params(tape);
    backward(loss_expr());
    analytic = model.flat_grads();
  }
  const std::vector<double> numeric =
      oracles::central_diff(eval_at, model.params().values, 1e-6);
  CHECK(oracles::max_rel_err(analytic, numeric) < tol);
}

}  // namespace

TEST_CASE("loss kind strings round-trip") {
  for (LossKind k : {LossKind::ce_adv, LossKind::ce_plus_alp, LossKind::ce_plus_nmse}) {
    CHECK(loss_kind_from_string(loss_kind_to_string(k)) == k);
  }
  CHECK_THROWS_AS(loss_kind_from_string("trades"), ConfigError);
}

TEST_CASE("loss config validation") {
  LossConfig cfg;
  cfg.mu = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = LossConfig{};
  cfg.alp_weight = -0.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("adversarial cross entropy at the clean point is the clean cross entropy") {
  const Model m(small_spec(), 3);
  const Tensor x = random_batch(5, 3, 4);
  const auto y = random_labels(5, 2, 5);
  const double direct = softmax_cross_entropy(m.forward(x), y, Reduction::mean).item();
  CHECK(ce_adv_loss(m, x, y).item() == direct);
}

TEST_CASE("logit pairing distance matches hand-computed values") {
  // Rows [1,0] vs [0,1]: difference [1,-1], squared sum 2, batch of one.
  CHECK(alp_loss(Tensor(Shape{1, 2}, {1.0, 0.0}), Tensor(Shape{1, 2}, {0.0, 1.0})).item() == 2.0);
  // Two identical rows plus the pair above: mean over the batch halves it.
  const Tensor a(Shape{2, 2}, {3.0, -2.0, 1.0, 0.0});
  const Tensor b(Shape{2, 2}, {3.0, -2.0, 0.0, 1.0});
  CHECK(alp_loss(a, b).item() == 1.0);
}

TEST_CASE("logit pairing is symmetric and vanishes only at equality") {
  Rng rng(6);
  std::vector<double> av(8), bv(8);
  for (auto& v : av) v = rng.uniform(-3.0, 3.0);
  for (auto& v : bv) v = rng.uniform(-3.0, 3.0);
  const Tensor a(Shape{4, 2}, std::move(av));
  const Tensor b(Shape{4, 2}, std::move(bv));
  CHECK(alp_loss(a, b).item() == alp_loss(b, a).item());
  CHECK(alp_loss(a, b).item() > 0.0);
  CHECK(alp_loss(a, a).item() == 0.0);
}

TEST_CASE("logit pairing scales quadratically") {
  const Tensor a(Shape{2, 3}, {1.0, -0.5, 2.0, 0.25, 0.0, -1.5});
  const Tensor b(Shape{2, 3}, {0.5, 0.5, 1.0, -0.25, 1.0, 0.5});
  const auto scale_by = [](const Tensor& t, double c) {
    std::vector<double> v = t.data();
    for (auto& x : v) x *= c;
    return Tensor(t.shape(), std::move(v));
  };
  // Power-of-two scaling is exact in binary floating point.
  CHECK(alp_loss(scale_by(a, 4.0), scale_by(b, 4.0)).item() == 16.0 * alp_loss(a, b).item());
  CHECK(alp_loss(scale_by(a, 3.0), scale_by(b, 3.0)).item() ==
        doctest::Approx(9.0 * alp_loss(a, b).item()).epsilon(1e-14));
}

TEST_CASE("clean true-class probabilities come from a row softmax") {
  const Tensor logits(Shape{2, 2}, {0.0, 0.0, std::log(3.0), 0.0});
  const auto p = clean_true_class_prob(logits, {0, 0});
  CHECK(p[0] == 0.5);
  CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-15));
  const auto q = clean_true_class_prob(logits, {1, 1});
  CHECK(q[0] == 0.5);
  CHECK(q[1] == doctest::Approx(0.25).epsilon(1e-15));

  CHECK_THROWS_AS(clean_true_class_prob(logits, {0}), ShapeError);
  CHECK_THROWS_AS(clean_true_class_prob(logits, {0, 2}), DomainError);
}

TEST_CASE("normalized pairing hits its closed-form corners") {
  // Orthonormal rows: ||e1 - e2||^2 = 2.
  const Tensor e1(Shape{1, 2}, {1.0, 0.0});
  const Tensor e2(Shape{1, 2}, {0.0, 1.0});
  CHECK(nmse_loss(e1, e2, {0.0}).item() == 2.0);
  // Antipodal rows: the diameter of the unit sphere squared.
  const Tensor neg(Shape{1, 2}, {-1.0, 0.0});
  CHECK(nmse_loss(e1, neg, {0.0}).item() == 4.0);
  // Equal rows: zero regardless of scale.
  const Tensor big(Shape{1, 2}, {512.0, 0.0});
  CHECK(nmse_loss(e1, big, {0.0}).item() == 0.0);
  // Full confidence on the clean point mutes the example.
  CHECK(nmse_loss(e1, neg, {1.0}).item() == 0.0);
}

TEST_CASE("normalized pairing ignores logit scale") {
  Rng rng(7);
  std::vector<double> av(6), bv(6);
  for (auto& v : av) v = rng.uniform(-2.0, 2.0);
  for (auto& v : bv) v = rng.uniform(-2.0, 2.0);
  const Tensor a(Shape{3, 2}, av);
  const Tensor b(Shape{3, 2}, bv);
  const std::vector<double> p = {0.1, 0.6, 0.9};
  const double base = nmse_loss(a, b, p).item();

  const auto scale_by = [](const std::vector<double>& v, double c) {
    std::vector<double> out = v;
    for (auto& x : out) x *= c;
    return out;
  };
  // Power-of-two rescaling of either side reproduces the value bitwise.
  CHECK(nmse_loss(Tensor(a.shape(), scale_by(av, 8.0)), b, p).item() == base);
  CHECK(nmse_loss(a, Tensor(b.shape(), scale_by(bv, 0.25)), p).item() == base);
  // Arbitrary positive rescaling agrees to rounding error.
  CHECK(nmse_loss(Tensor(a.shape(), scale_by(av, 3.7)), b, p).item() ==
        doctest::Approx(base).epsilon(1e-13));
}

TEST_CASE("a muted example contributes exactly nothing") {
  const Tensor clean(Shape{2, 2}, {1.0, 0.0, 2.0, -1.0});
  const Tensor adv(Shape{2, 2}, {0.0, 1.0, -2.0, 1.0});
  // p=1 on the first row leaves only the second, at half weight from the
  // batch mean.
  const double both = nmse_loss(clean, adv, {1.0, 0.25}).item();
  const double second_only = nmse_loss(Tensor(Shape{1, 2}, {2.0, -1.0}),
                                       Tensor(Shape{1, 2}, {-2.0, 1.0}), {0.25})
                                 .item();
  CHECK(both == 0.5 * second_only);
}

TEST_CASE("normalized pairing stays within its geometric bounds") {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const int B = 1 + static_cast<int>(rng.below(4));
    const int C = 2 + static_cast<int>(rng.below(3));
    std::vector<double> av(static_cast<size_t>(B) * C), bv(av.size());
    for (auto& v : av) v = rng.uniform(-10.0, 10.0);
    for (auto& v : bv) v = rng.uniform(-10.0, 10.0);
    std::vector<double> p(static_cast<size_t>(B));
    for (auto& v : p) v = rng.uniform(0.0, 1.0);
    const double loss =
        nmse_loss(Tensor(Shape{B, C}, std::move(av)), Tensor(Shape{B, C}, std::move(bv)), p).item();
    CAPTURE(trial);
    CHECK(loss >= 0.0);
    CHECK(loss <= 4.0);
  }
}

TEST_CASE("pairing losses validate their inputs") {
  const Tensor a(Shape{2, 2}, {1.0, 0.0, 0.0, 1.0});
  const Tensor b(Shape{2, 3}, {1.0, 0.0, 0.0, 1.0, 0.0, 0.0});
  CHECK_THROWS_AS(alp_loss(a, b), ShapeError);
  CHECK_THROWS_AS(nmse_loss(a, b, {0.0, 0.0}), ShapeError);
  const Tensor c(Shape{2, 2}, {1.0, 0.0, 0.0, 1.0});
  CHECK_THROWS_AS(nmse_loss(a, c, {0.0}), ShapeError);
  CHECK_THROWS_AS(nmse_loss(a, c, {0.0, 1.5}), DomainError);
  CHECK_THROWS_AS(nmse_loss(a, c, {-0.1, 0.0}), DomainError);
}

TEST_CASE("total loss composes cross entropy with the selected regularizer") {
  const Model m(small_spec(), 11);
  const Tensor x = random_batch(4, 3, 12);
  const Tensor x_adv = random_batch(4, 3, 13);
  const auto y = random_labels(4, 2, 14);

  const Tensor logits_clean = m.forward(x);
  const Tensor logits_adv = m.forward(x_adv);
  const double ce = softmax_cross_entropy(logits_adv, y, Reduction::mean).item();

  LossConfig cfg;
  cfg.kind = LossKind::ce_adv;
  CHECK(total_loss(m, x, x_adv, y, cfg).item() == ce);

  cfg.kind = LossKind::ce_plus_alp;
  cfg.alp_weight = 0.5;
  const double alp = alp_loss(logits_clean, logits_adv).item();
  CHECK(total_loss(m, x, x_adv, y, cfg).item() == doctest::Approx(ce + 0.5 * alp).epsilon(1e-15));

  cfg.kind = LossKind::ce_plus_nmse;
  cfg.mu = 5.0;
  const auto p = clean_true_class_prob(logits_clean, y);
  const double nmse = nmse_loss(logits_clean, logits_adv, p).item();
  CHECK(total_loss(m, x, x_adv, y, cfg).item() == doctest::Approx(ce + 5.0 * nmse).epsilon(1e-15));
}

TEST_CASE("regularizers vanish when the adversarial batch is the clean batch") {
  const Model m(small_spec(), 15);
  const Tensor x = random_batch(4, 3, 16);
  const auto y = random_labels(4, 2, 17);
  LossConfig ce_only;
  const double ce = total_loss(m, x, x, y, ce_only).item();
  LossConfig with_alp;
  with_alp.kind = LossKind::ce_plus_alp;
  CHECK(total_loss(m, x, x, y, with_alp).item() == ce);
  LossConfig with_nmse;
  with_nmse.kind = LossKind::ce_plus_nmse;
  CHECK(total_loss(m, x, x, y, with_nmse).item() == ce);
}

TEST_CASE("parameter gradients of every loss match central differences") {
  Model m(small_spec(), 19);
  const Tensor x = random_batch(4, 3, 20);
  const Tensor x_adv = random_batch(4, 3, 21);
  const auto y = random_labels(4, 2, 22);

  const auto eval_with = [&](const std::vector<double>& theta,
                             const std::function<double()>& value) {
    ParamVector p = m.params();
    const std::vector<double> saved = p.values;
    p.values = theta;
    m.set_params(p);
    const double out = value();
    p.values = saved;
    m.set_params(p);
    return out;
  };

  SUBCASE("adversarial cross entropy") {
    check_param_gradient(
        m, [&] { return ce_adv_loss(m, x_adv, y); },
        [&](const std::vector<double>& theta) {
          return eval_with(theta, [&] { return ce_adv_loss(m, x_adv, y).item(); });
        },
        1e-5);
  }

  SUBCASE("cross entropy with logit pairing") {
    LossConfig cfg;
    cfg.kind = LossKind::ce_plus_alp;
    cfg.alp_weight = 0.75;
    check_param_gradient(
        m, [&] { return total_loss(m, x, x_adv, y, cfg); },
        [&](const std::vector<double>& theta) {
          return eval_with(theta, [&] { return total_loss(m, x, x_adv, y, cfg).item(); });
        },
        1e-5);
  }

  SUBCASE("normalized pairing with the confidence weights held fixed") {
    // The confidence weights are constants by definition, so the reference
    // evaluation must hold them at the base-point values.
    const std::vector<double> p_frozen = clean_true_class_prob(m.forward(x), y);
    const auto frozen_value = [&] {
      const Tensor lc = m.forward(x);
      const Tensor la = m.forward(x_adv);
      const Tensor ce = softmax_cross_entropy(la, y, Reduction::mean);
      return add(ce, scale(nmse_loss(lc, la, p_frozen), 5.0));
    };
    check_param_gradient(
        m, [&] { return frozen_value(); },
        [&](const std::vector<double>& theta) {
          return eval_with(theta, [&] { return frozen_value().item(); });
        },
        1e-5);
  }

  SUBCASE("the full objective differentiates like its frozen-weight form") {
    // total_loss recomputes the weights per call, yet its gradient must be
    // the frozen-weight gradient because the weights never join the graph.
    LossConfig cfg;
    cfg.kind = LossKind::ce_plus_nmse;
    std::vector<double> g_total, g_frozen;
    const std::vector<double> p_frozen = clean_true_class_prob(m.forward(x), y);
    {
      Tape tape;
      m.watch_params(tape);
      backward(total_loss(m, x, x_adv, y, cfg));
      g_total = m.flat_grads();
    }
    {
      Tape tape;
      m.watch_params(tape);
      const Tensor lc = m.forward(x);
      const Tensor la = m.forward(x_adv);
      backward(add(softmax_cross_entropy(la, y, Reduction::mean),
                   scale(nmse_loss(lc, la, p_frozen), 5.0)));
      g_frozen = m.flat_grads();
    }
    CHECK(g_total == g_frozen);
  }
}
