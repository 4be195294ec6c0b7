#pragma once

#include <optional>
#include <vector>

#include "freedenoise/measure.hpp"
#include "freedenoise/transforms.hpp"

namespace freedenoise {

enum class SubordinationKind { Additive, MultiplicativePositive, MultiplicativeCircle };

struct SubordinationOptions {
  double tol_scale = 1e-12;  // converged when |T(w) - w| < tol_scale * (1 + |w|)
  int max_iterations = 10000;
  int damping_after = 200;  // engage damping once this many undamped steps ran
  double damping = 0.5;
  int aitken_every = 4;  // safeguarded Delta^2 extrapolation cadence (0 = off)
};

struct SubordinationPoint {
  Complex omega1{0.0, 0.0};
  Complex omega2{0.0, 0.0};
  double residual = 0.0;  // |G_mu(w1) - G_nu(w2)| or |eta_mu(w1) - eta_nu(w2)|
  int iterations = 0;
  bool converged = true;
};

// omega1 is always the subordination with respect to the first (signal) measure:
// G_{mu+nu}(z) = G_mu(omega1(z)) and psi_{mu x nu}(z) = psi_mu(omega1(z)).
class AdditiveSubordination {
 public:
  explicit AdditiveSubordination(MeasurePair pair, SubordinationOptions options = {});

  // Throws NoConvergence when the iteration stalls; sweep() flags instead.
  SubordinationPoint at(Complex z, std::optional<Complex> warm = std::nullopt) const;
  // Warm-started sweep: consecutive points reuse the previous fixed point within
  // fixed-size chunks, so results do not depend on the thread count. An optional
  // per-point seed (e.g. omega1 from a coarser epsilon level) fills chunk heads.
  std::vector<SubordinationPoint> sweep(const std::vector<Complex>& z,
                                        const std::vector<Complex>* warm_omega1 = nullptr) const;

  const Measure& mu() const { return pair_.first; }
  const Measure& nu() const { return pair_.second; }
  const ComplexTransformEvaluator& mu_eval() const { return eval_mu_; }
  const ComplexTransformEvaluator& nu_eval() const { return eval_nu_; }

 private:
  SubordinationPoint solve(Complex z, std::optional<Complex> warm) const;

  MeasurePair pair_;
  SubordinationOptions options_;
  ComplexTransformEvaluator eval_mu_, eval_nu_;
  bool mu_point_ = false, nu_point_ = false;
  double mu_loc_ = 0.0, nu_loc_ = 0.0;
};

// Handles both the positive-reals and unit-circle products through the
// eta-transform iteration; the ratio eta(w)/w is continued by the first
// moment at w = 0, which keeps Haar-type factors (eta identically 0) exact.
class MultiplicativeSubordination {
 public:
  explicit MultiplicativeSubordination(MeasurePair pair, SubordinationOptions options = {});

  SubordinationPoint at(Complex z, std::optional<Complex> warm = std::nullopt) const;
  std::vector<SubordinationPoint> sweep(const std::vector<Complex>& z,
                                        const std::vector<Complex>* warm_omega1 = nullptr) const;

  SubordinationKind kind() const { return kind_; }
  const Measure& mu() const { return pair_.first; }
  const Measure& nu() const { return pair_.second; }
  const ComplexTransformEvaluator& mu_eval() const { return eval_mu_; }
  const ComplexTransformEvaluator& nu_eval() const { return eval_nu_; }

 private:
  SubordinationPoint solve(Complex z, std::optional<Complex> warm) const;
  Complex eta_ratio_mu(Complex w) const;  // eta_mu(w)/w, continued at 0
  Complex eta_ratio_nu(Complex w) const;

  MeasurePair pair_;
  SubordinationOptions options_;
  SubordinationKind kind_;
  ComplexTransformEvaluator eval_mu_, eval_nu_;
  bool mu_point_ = false, nu_point_ = false;
  double mu_loc_ = 0.0, nu_loc_ = 0.0;  // circle: the unit-modulus point's angle
};

// lim_{z -> -inf} of the subordination function on (-inf, 0) for the
// positive-reals product; finite exactly when mu({0}) < nu({0}).
struct ZeroLimit {
  bool minus_infinity = true;
  double value = 0.0;  // psi_mu^{-1}(nu({0}) - 1), real negative, when finite
};

ZeroLimit omega_zero_limit(const MeasurePair& pair);

// psi_mu restricted to (-inf, 0) is a homeomorphism onto (mu({0})-1, 0);
// invert it by bisection in s = log(-u). Throws DomainViolation when y is
// outside the range.
double psi_inverse_negative(const Measure& mu, double y);

// Spot evaluations matching the batch classes.
Complex omega_additive(const MeasurePair& pair, Complex z);
Complex omega_multiplicative_positive(const MeasurePair& pair, Complex z);
Complex omega_circle(const MeasurePair& pair, Complex z);

struct BoundaryOptions {
  double eps = 1e-3;  // callers scale by support radius; circle: 1 - r
  int levels = 2;     // eps levels {eps, eps/2, ...}
  double im_threshold = 1e-6;       // regularity cut on the extrapolated omega
  double density_threshold = 1e-4;  // regularity cut on the target density
  // Optional per-node first-level eps (same size as the grid). Near a hard
  // support edge the boundary values at a fixed eps flatten out over a window
  // of width ~eps, which loses a sqrt(eps)-sized slice of mass from a density
  // that diverges there; shrinking eps in proportion to the distance from such
  // an edge keeps the relative error uniform along the grid. Levels halve
  // these the same way they halve the scalar eps.
  std::vector<double> eps_nodes;
};

struct BoundaryLevel {
  double eps = 0.0;
  // Per-node eps actually used at this level; empty means the uniform .eps.
  std::vector<double> eps_nodes;
  std::vector<Complex> omega1, omega2;
  // Target-transform boundary values at this level: G_{mu+nu}(t + i eps) for
  // the additive case, G_{mu x nu}(t + i eps) for the positive product, and
  // psi_{mu x nu}(r conj(t)) for the circle.
  std::vector<Complex> target_g;
  std::vector<double> residual;
};

struct AtomProbe {
  double location = 0.0;
  Complex omega1{0.0, 0.0};         // extrapolated boundary omega at the atom
  std::vector<Complex> g_levels;    // target transform at each eps level
};

struct SubordinationResult {
  SubordinationKind kind = SubordinationKind::Additive;
  std::vector<double> t_grid;  // reals, or angles in [0, 2pi) for the circle
  std::vector<BoundaryLevel> levels;
  std::vector<Complex> omega1, omega2;  // extrapolated boundary values
  std::vector<double> density;          // extrapolated target density (angle density on the circle)
  std::vector<char> in_U;
  std::vector<AtomProbe> atom_probes;
  std::optional<ZeroLimit> zero_limit;  // positive-reals case only
};

// Samples omega along the boundary grid at the eps levels, extrapolates, and
// classifies the regular set U. The multiplicative real-line evaluation point
// for a grid value t is 1/(t + i eps); the circle point for an angle theta is
// (1-eps) e^{-i theta}. Values are stored exactly as evaluated at those points.
SubordinationResult extend_to_boundary(const AdditiveSubordination& sub,
                                       const std::vector<double>& t_grid,
                                       const BoundaryOptions& options,
                                       const std::vector<double>& atom_candidates = {});
SubordinationResult extend_to_boundary(const MultiplicativeSubordination& sub,
                                       const std::vector<double>& t_grid,
                                       const BoundaryOptions& options,
                                       const std::vector<double>& atom_candidates = {});

}  // namespace freedenoise
