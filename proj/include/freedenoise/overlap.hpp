#pragma once

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "freedenoise/convolution.hpp"
#include "freedenoise/measure.hpp"

namespace freedenoise {

// Conditional law k_s of the observed element given that the signal equals s.
// For the additive model its Cauchy transform is G_{k_s}(z) = 1/(omega(z)-s)
// with omega the subordination function of the first factor.
struct KernelMeasure {
  double s = 0.0;
  Measure measure;
  // |raw recovered mass - 1| before the final normalization; the theory makes
  // k_s a probability measure, so this is a direct quality diagnostic.
  double mass_defect = 0.0;
};

// One atom gamma of the convolved law together with the unique conditioning
// point alpha (an atom of the first factor) that the kernel k_alpha charges:
// o(s, gamma) = 1/mu({alpha}) when s = alpha and 0 for every other s.
struct OverlapAtomBranch {
  double location = 0.0;     // atom of the convolved law (angle on the circle)
  double alpha = 0.0;        // paired atom of the first factor
  double value = 0.0;        // 1 / mu({alpha})
  double target_mass = 0.0;  // mass of the convolved law at `location`
  // |omega(boundary probe at location) - alpha| in the coordinates of the
  // subordination identity (reciprocal for the positive product, conjugate
  // angle on the circle). Small values confirm the pairing numerically.
  double indicator_residual = 0.0;
};

// The t = 0 column of the positive-product overlap, present exactly when the
// product carries an atom at the origin. For s > 0 the value is
// (1/nu({0})) / (1 - s * omega_limit) when nu({0}) > mu({0}) and 0 otherwise,
// with omega_limit = psi_mu^{-1}(nu({0}) - 1); at s = 0 it is 1/(mu x nu)({0}).
struct OverlapZeroBranch {
  double target_mass = 0.0;          // (mu x nu)({0})
  double origin_value = 0.0;         // o(0, 0)
  std::vector<double> values;        // o(s_i, 0), aligned with s_grid
  std::optional<double> omega_limit; // finite psi_mu^{-1}(nu({0}) - 1) if used
};

// Overlap function o(s, t) of the signal and the observed element, tabulated
// on supp(mu) x U where U is the regular bulk of the convolved law. Rows are
// indexed by s (atoms of mu plus a subsample of its density grid), columns by
// t (density nodes of the convolved law inside U). Weights turn the row and
// column sums into the defining integrals:
//   row_integral(i)    = int o(s_i, t) d(target)(t)  -> 1 (k_s is a probability),
//   column_integral(j) = int o(s, t_j) dmu(s)        -> 1 (marginal property).
struct OverlapTable {
  SupportDomain domain = SupportDomain::RealLine;

  std::vector<double> s_grid;     // sorted; angles in [0, 2 pi) on the circle
  std::vector<double> s_weights;  // quadrature weights of mu (atom + cell mass)

  std::vector<double> t_grid;     // bulk nodes inside U, sorted
  std::vector<double> t_weights;  // trapezoid cell masses of the target density
  // Half-open index ranges [first, second) of consecutive t nodes; queries
  // falling between two runs hit an excluded boundary point.
  std::vector<std::pair<std::size_t, std::size_t>> t_runs;
  // Per-column Cauchy consistency of the boundary density across the two
  // epsilon levels. Nodes closer to a branch point of the support than the
  // smoothing epsilon keep a divergent level ratio; they stay in the table
  // (their small cell masses belong in the row integrals) but pointwise
  // column checks are only meaningful where this flag is set.
  std::vector<char> t_regular;

  // values[i][j] = o(s_grid[i], t_grid[j]) >= 0.
  std::vector<std::vector<double>> values;

  std::vector<OverlapAtomBranch> atom_branches;
  std::optional<OverlapZeroBranch> zero_branch;  // positive product only

  // Tolerance scale used by value_at to match a query s to a branch alpha;
  // copied from the options the table was built with.
  double indicator_tol = 1e-6;

  double row_integral(std::size_t s_index) const;
  double column_integral(std::size_t t_index) const;

  // Bilinear interpolation on the bulk grid. Queries at an atom of the target
  // return the branch value (matching s to alpha with the scale-aware
  // tolerance below); queries at t = 0 of the positive product use the zero
  // branch; queries between two bulk runs throw UndefinedAtPoint; queries
  // outside the tabulated region return 0.
  double value_at(double s, double t) const;
};

struct OverlapOptions {
  // Used when an overlap call runs its own convolution.
  ConvolutionOptions convolution;
  // Density nodes of mu retained as table rows (atoms are always rows); the
  // full-resolution density still provides the row weights, so coarsening the
  // rows does not bias the column integrals.
  std::size_t s_rows_max = 257;
  // Scale factor of the indicator tolerance matching a query s to an atom
  // branch alpha: |s - alpha| <= tol * (1 + |s| + |alpha|) on the line,
  // the reciprocal form |1/s - 1/alpha| <= tol * (1 + 1/|s|) on the positive
  // axis, and angle distance <= 2 tol on the circle.
  double indicator_tol = 1e-6;
};

// Disintegration kernel of the additive model: Stieltjes inversion of
// z -> 1/(omega(z) - s) over the same boundary levels the convolution used,
// with atoms only at atoms gamma of the convolved law paired to alpha = s,
// each of mass (mu+nu)({gamma}) / mu({s}). s must lie in supp(mu).
KernelMeasure kernel_measure_additive(const MeasurePair& pair, double s,
                                      const OverlapOptions& options = {});
KernelMeasure kernel_measure_additive(const MeasurePair& pair, double s,
                                      const ConvolutionOutput& conv,
                                      const OverlapOptions& options = {});

// o(s,t) = -(1/pi) (1/f(t)) Im(1/(omega(t) - s)) on the bulk, where f is the
// density of mu+nu and omega the boundary subordination of the first factor.
OverlapTable overlap_additive(const MeasurePair& pair, const OverlapOptions& options = {});
OverlapTable overlap_additive(const MeasurePair& pair, const ConvolutionOutput& conv,
                              const OverlapOptions& options = {});

// Four-branch overlap of the positive product: on the bulk
// o(s,t) = -(1/pi) (1/(t f(t))) Im(1/(1 - omega(1/t) s)); positive atoms as
// branches; the t = 0 column from the finite limit of omega (zero branch).
OverlapTable overlap_multiplicative(const MeasurePair& pair, const OverlapOptions& options = {});
OverlapTable overlap_multiplicative(const MeasurePair& pair, const ConvolutionOutput& conv,
                                    const OverlapOptions& options = {});

// Unit-circle overlap: on the bulk, with unit-modulus points s and t,
// o(s,t) = (1/(2 pi f(t))) Re(2 omega(conj(t)) s / (1 - omega(conj(t)) s) + 1);
// grids store angles, f is the angle density of the product law.
OverlapTable overlap_circle(const MeasurePair& pair, const OverlapOptions& options = {});
OverlapTable overlap_circle(const MeasurePair& pair, const ConvolutionOutput& conv,
                            const OverlapOptions& options = {});

// Eigendecomposition handed to the empirical estimator: column k of `vectors`
// is the unit eigenvector for values[k] (an eigenvalue, or an eigenangle for
// unitary matrices).
struct SpectralDecomposition {
  std::vector<double> values;
  Eigen::MatrixXcd vectors;
};

// Empirical overlap measure sum_{k,l} |<u_k, v_l>|^2 / N delta_{(s_k, t_l)}
// of two N x N decompositions, rows sorted by s and columns by t.
struct DiscreteOverlap {
  std::vector<double> s_values;
  std::vector<double> t_values;
  std::vector<std::vector<double>> mass;  // mass[k][l] = |<u_k, v_l>|^2 / N
  // Row and column sums; both equal 1/N per entry exactly (Parseval), so they
  // reproduce the two empirical spectral distributions.
  std::vector<double> s_marginal;
  std::vector<double> t_marginal;
};

DiscreteOverlap empirical_overlap(const SpectralDecomposition& signal,
                                  const SpectralDecomposition& observed);

// 2-D histogram aggregation of one or many trials. `ratio` estimates the
// overlap function: bin mass divided by the product of the marginal bin
// masses (cells with an empty marginal get ratio 0).
struct BinnedOverlap {
  std::vector<double> s_edges;
  std::vector<double> t_edges;
  std::vector<std::vector<double>> mass;
  std::vector<std::vector<double>> ratio;
  std::vector<double> s_marginal_mass;
  std::vector<double> t_marginal_mass;
};

BinnedOverlap bin_overlap(const std::vector<DiscreteOverlap>& trials,
                          const std::vector<double>& s_edges,
                          const std::vector<double>& t_edges);
BinnedOverlap bin_overlap(const DiscreteOverlap& discrete,
                          const std::vector<double>& s_edges,
                          const std::vector<double>& t_edges);

// Freedman-Diaconis bin edges: width 2 IQR n^{-1/3}, spanning the sample
// range; falls back to a square-root rule when the IQR degenerates.
std::vector<double> freedman_diaconis_edges(std::vector<double> samples);

}  // namespace freedenoise
