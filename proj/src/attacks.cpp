#include "advlab/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

#include "advlab/error.hpp"

namespace advlab {

std::string attack_kind_to_string(AttackKind k) {
  switch (k) {
    case AttackKind::fgsm: return "fgsm";
    case AttackKind::ifgsm: return "ifgsm";
    case AttackKind::mifgsm: return "mifgsm";
    case AttackKind::pgd: return "pgd";
  }
  throw UsageError("unknown attack kind enum value");
}

AttackKind attack_kind_from_string(const std::string& s) {
  if (s == "fgsm") return AttackKind::fgsm;
  if (s == "ifgsm") return AttackKind::ifgsm;
  if (s == "mifgsm") return AttackKind::mifgsm;
  if (s == "pgd") return AttackKind::pgd;
  throw ConfigError("unknown attack kind '" + s + "'; expected fgsm, ifgsm, mifgsm or pgd");
}

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0)) throw ConfigError("attack.epsilon must be >= 0");
  if (!(alpha > 0.0)) throw ConfigError("attack.alpha must be > 0");
  if (steps < 1) throw ConfigError("attack.steps must be >= 1, got " + std::to_string(steps));
  if (!(momentum_decay >= 0.0)) throw ConfigError("attack.momentum_decay must be >= 0");
  if (input_box) input_box->validate();
}

LossFn ce_sum_loss() {
  return [](const Tensor& logits, const std::vector<int>& labels) {
    return softmax_cross_entropy(logits, labels, Reduction::sum);
  };
}

namespace {

// sign with sign(0) == 0, so a zero gradient never moves the input.
double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void check_finite_grad(const Tensor& g) {
  for (double v : g.data()) {
    if (!std::isfinite(v)) throw AttackError("non-finite input gradient during attack");
  }
}

void check_box_dim(const AttackConfig& cfg, int d) {
  if (!cfg.input_box) return;
  const auto& box = *cfg.input_box;
  if ((box.lo.size() != 1 && static_cast<int>(box.lo.size()) != d) ||
      (box.hi.size() != 1 && static_cast<int>(box.hi.size()) != d)) {
    throw ConfigError("attack.input_box bounds do not match input dimension " + std::to_string(d));
  }
}

// Projects x onto the epsilon ball around x0, then clips into the box.
// Counts elements that were strictly outside the ball when stats is given.
void project_and_clip(Tensor& x, const Tensor& x0, const AttackConfig& cfg, AttackStats* stats) {
  const int d = x.shape()[1];
  auto& xv = x.data();
  const auto& ov = x0.data();
  for (size_t i = 0; i < xv.size(); ++i) {
    const double lo = ov[i] - cfg.epsilon;
    const double hi = ov[i] + cfg.epsilon;
    if (xv[i] < lo) {
      if (stats) ++stats->projection_hits;
      xv[i] = lo;
    } else if (xv[i] > hi) {
      if (stats) ++stats->projection_hits;
      xv[i] = hi;
    }
    if (cfg.input_box) {
      const int f = static_cast<int>(i) % d;
      xv[i] = std::clamp(xv[i], cfg.input_box->lo_at(f), cfg.input_box->hi_at(f));
    }
  }
}

GradFn model_grad_fn(const Model& model, const LossFn& loss, const std::vector<int>& y) {
  return [&model, &loss, &y](const Tensor& x) {
    Tape tape;
    Tensor xv = x;
    tape.watch(xv);
    const Tensor logits = model.forward(xv);
    const Tensor l = loss(logits, y);
    backward(l);
    return Tensor(x.shape(), xv.grad());
  };
}

void check_input(const Tensor& x, const AttackConfig& cfg) {
  cfg.validate();
  if (x.rank() != 2) throw ShapeError("attack input must be rank-2, got " + shape_str(x.shape()));
  check_box_dim(cfg, x.shape()[1]);
}

}  // namespace

Tensor fgsm_core(const GradFn& grad_fn, const Tensor& x, const AttackConfig& cfg, AttackStats* stats) {
  check_input(x, cfg);
  const Tensor g = grad_fn(x);
  if (g.shape() != x.shape()) {
    throw AttackError("gradient shape " + shape_str(g.shape()) + " does not match input " +
                      shape_str(x.shape()));
  }
  check_finite_grad(g);
  Tensor out = x;
  auto& ov = out.data();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] += cfg.epsilon * sign(g.data()[i]);
  project_and_clip(out, x, cfg, stats);
  return out;
}

Tensor iterated_core(const GradFn& grad_fn, const Tensor& x0, const Tensor& x_init,
                     const AttackConfig& cfg, bool use_momentum, AttackStats* stats) {
  check_input(x0, cfg);
  if (x_init.shape() != x0.shape()) {
    throw ShapeError("iterated_core: x_init shape " + shape_str(x_init.shape()) +
                     " does not match x0 " + shape_str(x0.shape()));
  }
  const int B = x0.shape()[0], d = x0.shape()[1];
  Tensor x = x_init;
  std::vector<double> g_acc;
  if (use_momentum) g_acc.assign(static_cast<size_t>(B) * d, 0.0);

  for (int step = 0; step < cfg.steps; ++step) {
    const Tensor g = grad_fn(x);
    if (g.shape() != x0.shape()) {
      throw AttackError("gradient shape " + shape_str(g.shape()) + " does not match input " +
                        shape_str(x0.shape()));
    }
    check_finite_grad(g);
    const double* dir = g.data().data();
    if (use_momentum) {
      // Per-example 1-norm normalization; a vanishing gradient contributes
      // nothing instead of amplifying noise.
      for (int b = 0; b < B; ++b) {
        const size_t off = static_cast<size_t>(b) * d;
        double n1 = 0.0;
        for (int j = 0; j < d; ++j) n1 += std::fabs(g.data()[off + j]);
        if (n1 < kNormGuard) {
          for (int j = 0; j < d; ++j) g_acc[off + j] = cfg.momentum_decay * g_acc[off + j];
        } else {
          for (int j = 0; j < d; ++j) {
            g_acc[off + j] = cfg.momentum_decay * g_acc[off + j] + g.data()[off + j] / n1;
          }
        }
      }
      dir = g_acc.data();
    }
    auto& xv = x.data();
    for (size_t i = 0; i < xv.size(); ++i) xv[i] += cfg.alpha * sign(dir[i]);
    project_and_clip(x, x0, cfg, stats);
  }
  return x;
}

Tensor fgsm(const Model& model, const LossFn& loss, const Tensor& x,
            const std::vector<int>& y, const AttackConfig& cfg, AttackStats* stats) {
  return fgsm_core(model_grad_fn(model, loss, y), x, cfg, stats);
}

Tensor ifgsm(const Model& model, const LossFn& loss, const Tensor& x,
             const std::vector<int>& y, const AttackConfig& cfg, AttackStats* stats) {
  return iterated_core(model_grad_fn(model, loss, y), x, x, cfg, false, stats);
}

Tensor mifgsm(const Model& model, const LossFn& loss, const Tensor& x,
              const std::vector<int>& y, const AttackConfig& cfg, AttackStats* stats) {
  return iterated_core(model_grad_fn(model, loss, y), x, x, cfg, true, stats);
}

namespace {

// Uniform start inside the epsilon ball, then box clip. Noise is drawn
// row-major over the whole batch so chunked and unchunked runs see the same
// values.
Tensor random_start_point(const Tensor& x, const AttackConfig& cfg, Rng& rng) {
  Tensor init = x;
  auto& v = init.data();
  for (size_t i = 0; i < v.size(); ++i) v[i] += rng.uniform(-cfg.epsilon, cfg.epsilon);
  project_and_clip(init, x, cfg, nullptr);
  return init;
}

}  // namespace

Tensor pgd(const Model& model, const LossFn& loss, const Tensor& x,
           const std::vector<int>& y, const AttackConfig& cfg, Rng* rng, AttackStats* stats) {
  check_input(x, cfg);
  Tensor init = x;
  if (cfg.random_start) {
    if (!rng) throw UsageError("pgd: random_start requires an rng");
    init = random_start_point(x, cfg, *rng);
  }
  return iterated_core(model_grad_fn(model, loss, y), x, init, cfg, false, stats);
}

namespace {

Tensor slice_rows(const Tensor& x, int r0, int r1) {
  const int d = x.shape()[1];
  std::vector<double> v(x.data().begin() + static_cast<size_t>(r0) * d,
                        x.data().begin() + static_cast<size_t>(r1) * d);
  return Tensor(Shape{r1 - r0, d}, std::move(v));
}

Tensor dispatch_rows(AttackKind kind, const Model& model, const LossFn& loss,
                     const Tensor& x0, const Tensor& x_init, const std::vector<int>& y,
                     const AttackConfig& cfg, AttackStats* stats) {
  const GradFn grad_fn = model_grad_fn(model, loss, y);
  switch (kind) {
    case AttackKind::fgsm: return fgsm_core(grad_fn, x0, cfg, stats);
    case AttackKind::ifgsm: return iterated_core(grad_fn, x0, x0, cfg, false, stats);
    case AttackKind::mifgsm: return iterated_core(grad_fn, x0, x0, cfg, true, stats);
    case AttackKind::pgd: return iterated_core(grad_fn, x0, x_init, cfg, false, stats);
  }
  throw UsageError("unknown attack kind enum value");
}

}  // namespace

Tensor run_attack(AttackKind kind, const Model& model, const Tensor& x,
                  const std::vector<int>& y, const AttackConfig& cfg,
                  Rng* rng, int threads, AttackStats* stats) {
  check_input(x, cfg);
  const int B = x.shape()[0], d = x.shape()[1];
  if (static_cast<int>(y.size()) != B) {
    throw ShapeError("run_attack: got " + std::to_string(y.size()) + " labels for batch size " +
                     std::to_string(B));
  }
  const LossFn loss = ce_sum_loss();

  Tensor x_init = x;
  if (kind == AttackKind::pgd && cfg.random_start) {
    if (!rng) throw UsageError("pgd: random_start requires an rng");
    x_init = random_start_point(x, cfg, *rng);
  }

  const int nthreads = std::max(1, std::min(threads, B));
  if (nthreads == 1) {
    return dispatch_rows(kind, model, loss, x, x_init, y, cfg, stats);
  }

  Tensor out(x.shape());
  std::vector<AttackStats> chunk_stats(static_cast<size_t>(nthreads));
  std::vector<std::exception_ptr> errors(static_cast<size_t>(nthreads));
  std::vector<std::thread> pool;
  const int chunk = (B + nthreads - 1) / nthreads;
  for (int t = 0; t < nthreads; ++t) {
    pool.emplace_back([&, t] {
      try {
        const int r0 = t * chunk;
        const int r1 = std::min(B, r0 + chunk);
        if (r0 >= r1) return;
        const Tensor cx = slice_rows(x, r0, r1);
        const Tensor ci = slice_rows(x_init, r0, r1);
        const std::vector<int> cy(y.begin() + r0, y.begin() + r1);
        const Tensor adv = dispatch_rows(kind, model, loss, cx, ci, cy, cfg,
                                         &chunk_stats[static_cast<size_t>(t)]);
        std::copy(adv.data().begin(), adv.data().end(),
                  out.data().begin() + static_cast<size_t>(r0) * d);
      } catch (...) {
        errors[static_cast<size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  if (stats) {
    for (const auto& s : chunk_stats) stats->projection_hits += s.projection_hits;
  }
  return out;
}

}  // namespace advlab
