#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "freedenoise/measure.hpp"

namespace freedenoise {

using Complex = std::complex<double>;

// Samples of an analytic transform along a horizontal line Im z = eps
// (radius 1 - eps for circle measures).
struct BoundaryGrid {
  std::vector<double> t_grid;
  double eps = 0.0;
  // Per-node eps when the boundary values were sampled on an adaptive
  // schedule; empty means the uniform .eps applies everywhere.
  std::vector<double> eps_nodes;
  std::vector<Complex> values;
};

// Evaluates Cauchy/moment/Boolean-cumulant transforms of one measure.
// The density part is integrated cell by cell in closed form, so values
// stay accurate for imaginary parts far below the grid spacing.
class ComplexTransformEvaluator {
 public:
  explicit ComplexTransformEvaluator(const Measure& m);

  const Measure& measure() const { return measure_; }

  // G(z) = int 1/(z - t) dmu(t). Real z on the support is rejected.
  Complex cauchy(Complex z) const;
  Complex cauchy_density_only(Complex z) const;
  // F(z) = 1/G(z).
  Complex reciprocal(Complex z) const;
  // psi(z) = int z t / (1 - z t) dmu(t); series evaluation on the circle.
  Complex psi(Complex z) const;
  // eta = psi / (1 + psi).
  Complex eta(Complex z) const;
  // First moment (complex for circle measures): limit of eta(w)/w at 0.
  Complex first_moment() const { return first_moment_; }

  // (1/pi) Re G(t + i eps), Richardson-extrapolated over {eps, eps/2}.
  double hilbert(double t, double eps) const;

  BoundaryGrid sample_cauchy(const std::vector<double>& t_grid, double eps) const;

 private:
  Complex psi_circle(Complex z) const;

  Measure measure_;
  // density cell cache (real domains)
  std::vector<double> nodes_;
  std::vector<double> node_values_;
  std::vector<double> slopes_;
  double density_mass_ = 0.0;
  // circle quadrature cache: per-cell Gauss-Legendre nodes
  std::vector<double> gl_theta_;
  std::vector<double> gl_weight_density_;
  std::vector<Complex> gl_unit_;
  Complex first_moment_{0.0, 0.0};
};

Complex cauchy(const Measure& m, Complex z);
Complex psi(const Measure& m, Complex z);
Complex eta(const Measure& m, Complex z);
double hilbert(const Measure& m, double t, double eps);

// Linear Richardson step for vertical limits: value at eps and eps/2.
inline Complex extrapolate_levels(Complex at_eps, Complex at_half) {
  return 2.0 * at_half - at_eps;
}
inline double extrapolate_levels(double at_eps, double at_half) {
  return 2.0 * at_half - at_eps;
}

struct CandidateAtom {
  double location = 0.0;
  std::vector<Complex> values;  // G(location + i eps_k), one per level
};

struct InversionOptions {
  double atol_atom = 1e-3;        // minimum detectable atom mass
  double stability_rel = 0.2;     // max relative change of mass across levels
  double mass_defect_limit = 0.02;
  double clear_radius_mult = 3.0; // density zeroed within mult*max(eps, step) of atoms
  SupportDomain domain = SupportDomain::RealLine;
  // Blind maximum scan of the grid; disable when every possible atom location
  // is already known and passed as a candidate.
  bool scan_grid = true;
  // Atoms whose location and mass are known exactly (e.g. the origin atom of
  // the positive free product); inserted verbatim, shadowing nearby detections.
  std::vector<Atom> fixed_atoms;
};

struct DetectedAtom {
  double location = 0.0;
  double mass = 0.0;
  double level_change = 0.0;  // relative mass change between levels
  bool from_candidate = false;
};

struct InversionResult {
  Measure measure;
  double mass_defect = 0.0;  // total mass error before renormalization
  std::vector<DetectedAtom> atoms;
};

// Recovers a measure from Cauchy-transform samples at two (or more) epsilon
// levels, eps halving between consecutive levels. Densities come from the
// extrapolated imaginary part, atoms from pole fits that persist across
// levels, plus optional exact-location candidates.
InversionResult stieltjes_invert(const std::vector<BoundaryGrid>& levels,
                                 const InversionOptions& options = {},
                                 const std::vector<CandidateAtom>& candidates = {});

// Round-trip helper: sample the measure's Cauchy transform on a padded grid
// and invert it back.
InversionResult invert_from_measure(const Measure& m, std::size_t grid_size = kDefaultGridSize,
                                    double eps_rel = 1e-3);

}  // namespace freedenoise
