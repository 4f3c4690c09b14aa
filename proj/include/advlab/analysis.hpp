#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "advlab/attacks.hpp"
#include "advlab/data.hpp"
#include "advlab/model.hpp"
#include "advlab/training.hpp"

namespace advlab {

// Fraction of examples whose predicted class matches the label.
double accuracy(const Model& model, const LabeledDataset& ds);

// Accuracy after perturbing every example with the given attack.
double robust_accuracy(const Model& model, const LabeledDataset& ds, AttackKind kind,
                       const AttackConfig& cfg, Rng* rng = nullptr, int threads = 1);

struct NamedAttack {
  std::string name;
  AttackKind kind = AttackKind::pgd;
  AttackConfig config;
};

struct EvalReport {
  double clean_acc = 0.0;
  // One entry per requested attack, in request order.
  std::vector<std::pair<std::string, double>> robust_acc;
  std::vector<NamedAttack> attacks;  // echo of the evaluated configurations
};

EvalReport evaluate(const Model& model, const LabeledDataset& ds,
                    const std::vector<NamedAttack>& attacks, std::uint64_t seed = 0,
                    int threads = 1);

// ---- decision boundary ------------------------------------------------------

struct BoundaryOptions {
  double x1_min = -1.5;
  double x1_max = 1.5;
  double x2_min = -1.5;
  double x2_max = 1.5;
  double x3 = 0.825;  // fixed third feature (center of the default band)
  int resolution = 61;

  void validate() const;
};

// Predictions over a regular (x1, x2) grid at fixed x3. Cells are stored
// with x2 as the outer index: cell (i1, i2) lives at preds[i2 * res + i1].
struct BoundaryGrid {
  BoundaryOptions options;
  std::vector<double> x1s, x2s;
  std::vector<int> preds;
  std::vector<double> margins;  // top logit minus runner-up, >= 0
};

// The model must take exactly 3 input features.
BoundaryGrid decision_boundary_grid(const Model& model, const BoundaryOptions& options);

// Fraction of grid cells whose predicted class differs. The grids must have
// been produced with identical options.
double boundary_delta(const BoundaryGrid& a, const BoundaryGrid& b);

// CSV with header x1,x2,pred,margin, rows in storage order.
std::string boundary_csv(const BoundaryGrid& grid);

// ---- loss landscape ---------------------------------------------------------

enum class LandscapeLoss { clean, adversarial };

struct LandscapeOptions {
  int grid_n = 21;  // odd and >= 3, so the undisplaced center is a cell
  std::uint64_t seed = 7;
  int sample = 256;  // evaluation subsample size
  LandscapeLoss loss = LandscapeLoss::clean;
  AttackKind attack_kind = AttackKind::pgd;
  AttackConfig attack;  // used by the adversarial variant

  void validate() const;
};

// Cross entropy of the model with parameters displaced by m1 * u + m2 * v,
// where u and v are seeded unit-norm Gaussian directions and m1, m2 sweep a
// symmetric grid over [-1, 1]. Cell (i1, i2) lives at losses[i1 * n + i2].
struct LandscapeGrid {
  std::vector<double> m1s, m2s;
  std::vector<double> losses;
  std::uint64_t seed = 0;
  LandscapeLoss loss_kind = LandscapeLoss::clean;
};

// Evaluates on a seeded subsample of ds (all of it when ds.size() <= sample).
// The adversarial variant crafts its perturbed inputs once, at the model's
// own parameters, and reuses them for every displaced evaluation. The model
// itself is never modified.
LandscapeGrid loss_landscape(const Model& model, const LabeledDataset& ds,
                             const LandscapeOptions& options);

// Population standard deviation over all cells; lower reads as flatter.
double flatness_score(const LandscapeGrid& grid);

// CSV with header m1,m2,loss, rows in storage order.
std::string landscape_csv(const LandscapeGrid& grid);

// ---- training-curve statistics ---------------------------------------------

// Population standard deviation of consecutive robust-accuracy differences
// over the trailing `window` records. Requires 2 <= window <= records.size().
double oscillation_score(const std::vector<TrainRecord>& records, int window);

// ---- interpolation geometry --------------------------------------------------

struct RatioRow {
  double shrink = 0.0;
  double lambda = 0.0;
  double mean_ratio = 0.0;
};

// For each shrink s, forms theta_s = theta_i + s * (theta_i1 - theta_i) and
// measures, averaged over probe inputs,
//   ||f(theta_tilde) - f(theta_i)|| / ((1 - lambda) * ||f(theta_s) - f(theta_i)||)
// with theta_tilde = lambda * theta_i + (1 - lambda) * theta_s. For a model
// linear in its parameters the ratio is identically 1; for smooth models it
// approaches 1 as s shrinks. lambdas must lie in [0, 1).
std::vector<RatioRow> interpolation_ratio_check(const MlpSpec& spec, const ParamVector& theta_i,
                                        const ParamVector& theta_i1, const Tensor& probes,
                                        const std::vector<double>& lambdas,
                                        const std::vector<double>& shrinks);

}  // namespace advlab
