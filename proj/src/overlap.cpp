#include "freedenoise/overlap.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <utility>
#include <vector>

#include "freedenoise/errors.hpp"
#include "freedenoise/subordination.hpp"
#include "freedenoise/transforms.hpp"

namespace freedenoise {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double circular_distance(double a, double b) {
  const double d = std::abs(wrap_angle(a) - wrap_angle(b));
  return std::min(d, kTwoPi - d);
}

// Tight match for locations that were produced by the same arithmetic
// (atom pairing, row construction), as opposed to user-supplied queries.
bool location_matches(SupportDomain domain, double a, double b) {
  if (domain == SupportDomain::UnitCircle) return circular_distance(a, b) <= 1e-9;
  return std::abs(a - b) <= 1e-9 * (1.0 + std::abs(a) + std::abs(b));
}

// Scale-aware indicator match of a query point s against a branch alpha. The
// positive product compares in reciprocal coordinates because its pairing
// identity reads omega(1/gamma) = 1/alpha.
bool query_matches_alpha(SupportDomain domain, double s, double alpha, double tol) {
  switch (domain) {
    case SupportDomain::RealLine:
      return std::abs(s - alpha) <= tol * (1.0 + std::abs(s) + std::abs(alpha));
    case SupportDomain::NonNegativeReals:
      if (!(s > 0.0) || !(alpha > 0.0)) return false;
      return std::abs(1.0 / s - 1.0 / alpha) <= tol * (1.0 + 1.0 / s);
    case SupportDomain::UnitCircle:
      return circular_distance(s, alpha) <= 2.0 * tol;
  }
  return false;
}

SubordinationKind kind_for(const ConvolutionOutput& conv) { return conv.subordination.kind; }

void require_kind(const ConvolutionOutput& conv, SubordinationKind kind, const char* op) {
  if (kind_for(conv) != kind) {
    std::ostringstream os;
    os << op << " needs a convolution output of the matching product";
    throw DomainViolation(os.str());
  }
}

// Rows of the table: atoms of mu plus a subsample of its density nodes. The
// weights are exact trapezoid cell masses of the full-resolution density
// (cells split halfway between retained nodes), so sum(weights) equals the
// total mass of mu up to the stored representation.
struct RowGrid {
  std::vector<double> nodes;
  std::vector<double> weights;
};

RowGrid make_row_grid(const Measure& mu, std::size_t rows_max) {
  std::vector<std::pair<double, double>> entries;
  for (const Atom& a : mu.atoms()) entries.emplace_back(a.location, a.mass);

  if (mu.has_density()) {
    const std::vector<double>& grid = mu.density().grid;
    const std::vector<double>& vals = mu.density().values;
    const std::size_t n = grid.size();
    std::vector<double> cdf(n, 0.0);
    for (std::size_t i = 1; i < n; ++i)
      cdf[i] = cdf[i - 1] + 0.5 * (vals[i - 1] + vals[i]) * (grid[i] - grid[i - 1]);

    std::size_t stride = 1;
    if (rows_max >= 2 && n > rows_max) stride = 1 + (n - 2) / (rows_max - 1);
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i + 1 < n; i += stride) keep.push_back(i);
    keep.push_back(n - 1);

    for (std::size_t k = 0; k < keep.size(); ++k) {
      const std::size_t lo_edge = k == 0 ? 0 : (keep[k - 1] + keep[k]) / 2;
      const std::size_t hi_edge = k + 1 == keep.size() ? n - 1 : (keep[k] + keep[k + 1]) / 2;
      entries.emplace_back(grid[keep[k]], cdf[hi_edge] - cdf[lo_edge]);
    }
  }

  std::sort(entries.begin(), entries.end());
  RowGrid rows;
  for (const auto& [node, weight] : entries) {
    if (!rows.nodes.empty() &&
        node - rows.nodes.back() <= 1e-12 * (1.0 + std::abs(node))) {
      rows.weights.back() += weight;  // atom sitting on a retained density node
      continue;
    }
    rows.nodes.push_back(node);
    rows.weights.push_back(weight);
  }
  return rows;
}

// Columns of the table: boundary nodes inside the regular set, each carrying
// the extrapolated subordination value, the stored target density, and a
// trapezoid cell mass. Weights are computed on the full sweep grid first so
// cells bordering excluded nodes keep their (tiny) half-contributions.
struct ColumnGrid {
  std::vector<double> nodes;
  std::vector<Complex> omega;
  std::vector<double> f;
  std::vector<double> weights;
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  std::vector<char> regular;
};

double level_density(SubordinationKind kind, Complex target_g) {
  return kind == SubordinationKind::MultiplicativeCircle
             ? (2.0 * target_g.real() + 1.0) / kTwoPi
             : -target_g.imag() / kPi;
}

ColumnGrid make_column_grid(const ConvolutionOutput& conv, double t_min,
                            const std::vector<double>& special_points) {
  const SubordinationResult& sres = conv.subordination;
  const std::size_t n = sres.t_grid.size();
  std::vector<double> fvals(n, 0.0), weights(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) fvals[i] = conv.result.density_at(sres.t_grid[i]);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double dt = sres.t_grid[i + 1] - sres.t_grid[i];
    weights[i] += 0.5 * dt * fvals[i];
    weights[i + 1] += 0.5 * dt * fvals[i + 1];
  }

  ColumnGrid cols;
  std::vector<std::size_t> source;
  std::size_t prev_source = std::numeric_limits<std::size_t>::max();
  for (std::size_t i = 0; i < n; ++i) {
    if (!sres.in_U[i]) continue;
    if (!(fvals[i] > 0.0)) continue;
    if (!(sres.t_grid[i] >= t_min)) continue;
    if (cols.nodes.empty() || prev_source + 1 != i)
      cols.runs.emplace_back(cols.nodes.size(), cols.nodes.size() + 1);
    else
      cols.runs.back().second = cols.nodes.size() + 1;
    cols.nodes.push_back(sres.t_grid[i]);
    cols.omega.push_back(sres.omega1[i]);
    cols.f.push_back(fvals[i]);
    cols.weights.push_back(weights[i]);
    source.push_back(i);
    prev_source = i;
  }

  // A column is regular when the boundary data resolved the density at its
  // node: the two epsilon levels must agree (Cauchy in epsilon) and the node
  // must sit well clear of any branch-point candidate relative to its own
  // smoothing epsilon. Closer in, the Poisson smoothing averages over the
  // singularity and the pointwise values are systematically off even though
  // their cell masses stay right. Branch-point candidates are the atoms and
  // support endpoints fed in by the caller plus the ends of each support run,
  // which locate the spectral band edges wherever they fall strictly inside
  // the arithmetic support bounds.
  std::vector<double> branch_points = special_points;
  const bool full_circle = sres.kind == SubordinationKind::MultiplicativeCircle &&
                           cols.runs.size() == 1 && cols.nodes.size() == n;
  if (!full_circle) {
    for (const auto& run : cols.runs) {
      branch_points.push_back(cols.nodes[run.first]);
      branch_points.push_back(cols.nodes[run.second - 1]);
    }
  }
  const BoundaryLevel& full = sres.levels[sres.levels.size() - 2];
  const BoundaryLevel& half = sres.levels.back();
  const double density_floor = 1e-4;  // default regular-set density threshold
  for (std::size_t c = 0; c < cols.nodes.size(); ++c) {
    const std::size_t i = source[c];
    const double f_full = level_density(sres.kind, full.target_g[i]);
    const double f_half = level_density(sres.kind, half.target_g[i]);
    const bool consistent =
        std::abs(f_half - f_full) <= 0.2 * std::max(std::abs(f_half), density_floor);
    const double eps_used = full.eps_nodes.empty() ? full.eps : full.eps_nodes[i];
    double dist = std::numeric_limits<double>::infinity();
    for (double p : branch_points) {
      const double d = sres.kind == SubordinationKind::MultiplicativeCircle
                           ? circular_distance(cols.nodes[c], p)
                           : std::abs(cols.nodes[c] - p);
      dist = std::min(dist, d);
    }
    const bool resolved = dist >= 30.0 * eps_used;
    cols.regular.push_back(consistent && resolved ? 1 : 0);
  }
  return cols;
}

double bulk_value(SubordinationKind kind, double s, double t, Complex omega, double f) {
  switch (kind) {
    case SubordinationKind::Additive: {
      const Complex d = omega - s;
      return std::max(0.0, d.imag() / (kPi * f * std::norm(d)));
    }
    case SubordinationKind::MultiplicativePositive: {
      const Complex d = 1.0 - omega * s;  // Im d = -s Im omega >= 0 on the bulk
      return std::max(0.0, d.imag() / (kPi * t * f * std::norm(d)));
    }
    case SubordinationKind::MultiplicativeCircle: {
      const Complex u = omega * std::polar(1.0, s);
      // Re((1+u)/(1-u)) = (1-|u|^2)/|1-u|^2 >= 0 inside the disk.
      return (1.0 - std::norm(u)) / (std::norm(1.0 - u) * kTwoPi * f);
    }
  }
  return 0.0;
}

double indicator_residual(SubordinationKind kind, const ConvolutionOutput& conv,
                          double location, double alpha) {
  for (const AtomProbe& probe : conv.subordination.atom_probes) {
    const bool same = kind == SubordinationKind::MultiplicativeCircle
                          ? circular_distance(probe.location, location) <= 1e-9
                          : std::abs(probe.location - location) <=
                                1e-9 * (1.0 + std::abs(location));
    if (!same) continue;
    switch (kind) {
      case SubordinationKind::Additive:
        return std::abs(probe.omega1 - alpha);
      case SubordinationKind::MultiplicativePositive:
        return alpha > 0.0 ? std::abs(probe.omega1 - 1.0 / alpha)
                           : std::numeric_limits<double>::quiet_NaN();
      case SubordinationKind::MultiplicativeCircle:
        return std::abs(probe.omega1 - std::polar(1.0, -alpha));
    }
  }
  return 0.0;  // closed-form path: the pairing is exact arithmetic
}

// A point-mass second factor makes every kernel k_s a point mass, which is no
// longer absolutely continuous with respect to a product that kept a density
// part; the table representation degenerates. (A point-mass first factor is
// fine: the single kernel is the product law itself.)
void reject_degenerate_point_mass(const MeasurePair& pair, SubordinationKind kind) {
  if (!pair.second.is_point_mass() || !pair.first.has_density()) return;
  if (kind == SubordinationKind::MultiplicativePositive &&
      pair.second.atoms().front().location == 0.0)
    return;  // product collapses to delta_0; nothing degenerates
  throw UnsupportedCase(
      "overlap table for a point-mass second factor against a density: the "
      "kernels are point masses and the overlap function degenerates");
}

OverlapTable build_table(const MeasurePair& pair, const ConvolutionOutput& conv,
                         const OverlapOptions& options, SubordinationKind kind) {
  reject_degenerate_point_mass(pair, kind);
  const Measure& mu = pair.first;
  const Measure& nu = pair.second;

  OverlapTable table;
  table.domain = conv.result.domain();
  table.indicator_tol = options.indicator_tol;

  RowGrid rows = make_row_grid(mu, options.s_rows_max);
  table.s_grid = std::move(rows.nodes);
  table.s_weights = std::move(rows.weights);

  const double t_min = kind == SubordinationKind::MultiplicativePositive
                           ? std::numeric_limits<double>::min()
                           : -std::numeric_limits<double>::infinity();
  std::vector<double> special_points;
  for (const ConvolvedAtom& atom : conv.atom_table) special_points.push_back(atom.location);
  if (kind == SubordinationKind::Additive) {
    special_points.push_back(mu.support_lo() + nu.support_lo());
    special_points.push_back(mu.support_hi() + nu.support_hi());
  } else if (kind == SubordinationKind::MultiplicativePositive) {
    special_points.push_back(mu.support_lo() * nu.support_lo());
    special_points.push_back(mu.support_hi() * nu.support_hi());
    special_points.push_back(0.0);
  }
  ColumnGrid cols = make_column_grid(conv, t_min, special_points);
  table.t_grid = std::move(cols.nodes);
  table.t_weights = std::move(cols.weights);
  table.t_runs = std::move(cols.runs);
  table.t_regular = std::move(cols.regular);

  table.values.assign(table.s_grid.size(), std::vector<double>(table.t_grid.size(), 0.0));
  for (std::size_t i = 0; i < table.s_grid.size(); ++i)
    for (std::size_t j = 0; j < table.t_grid.size(); ++j)
      table.values[i][j] =
          bulk_value(kind, table.s_grid[i], table.t_grid[j], cols.omega[j], cols.f[j]);

  for (const ConvolvedAtom& atom : conv.atom_table) {
    if (kind == SubordinationKind::MultiplicativePositive && atom.location == 0.0)
      continue;  // origin atom handled by the zero branch below
    const double alpha_mass = mu.atom_mass_at(atom.alpha);
    if (!(alpha_mass > 0.0))
      throw UnstableLimit("convolved atom paired to a location mu does not charge");
    OverlapAtomBranch branch;
    branch.location = atom.location;
    branch.alpha = atom.alpha;
    branch.value = 1.0 / alpha_mass;
    branch.target_mass = atom.mass;
    branch.indicator_residual = indicator_residual(kind, conv, atom.location, atom.alpha);
    table.atom_branches.push_back(branch);
  }

  if (kind == SubordinationKind::MultiplicativePositive) {
    // The product charges the origin with mass max(mu({0}), nu({0})); use the
    // rule directly so the branch carries exact arithmetic rather than the
    // numerically normalized result mass.
    const double mu0 = mu.atom_mass_at(0.0);
    const double nu0 = nu.atom_mass_at(0.0);
    const double m0 = std::max(mu0, nu0);
    if (m0 > 0.0) {
      OverlapZeroBranch zero;
      zero.target_mass = m0;
      zero.origin_value = 1.0 / m0;
      zero.values.assign(table.s_grid.size(), 0.0);
      if (nu0 > mu0) {
        // omega(z) -> psi_mu^{-1}(nu({0}) - 1) as z -> -infinity; nu({0}) = 1
        // collapses the product onto delta_0 and the limit is 0.
        const double limit = nu0 < 1.0 ? psi_inverse_negative(mu, nu0 - 1.0) : 0.0;
        zero.omega_limit = limit;
        for (std::size_t i = 0; i < table.s_grid.size(); ++i)
          zero.values[i] = (1.0 / nu0) / (1.0 - table.s_grid[i] * limit);
      } else {
        for (std::size_t i = 0; i < table.s_grid.size(); ++i)
          zero.values[i] = std::abs(table.s_grid[i]) <= 1e-12 ? 1.0 / m0 : 0.0;
      }
      table.zero_branch = std::move(zero);
    }
  }

  return table;
}

}  // namespace

double OverlapTable::row_integral(std::size_t s_index) const {
  if (s_index >= s_grid.size()) throw DomainViolation("overlap row index out of range");
  double total = 0.0;
  const std::vector<double>& row = values[s_index];
  for (std::size_t j = 0; j < row.size(); ++j) total += t_weights[j] * row[j];
  const double s = s_grid[s_index];
  for (const OverlapAtomBranch& branch : atom_branches)
    if (location_matches(domain, s, branch.alpha)) total += branch.value * branch.target_mass;
  if (zero_branch) total += zero_branch->values[s_index] * zero_branch->target_mass;
  return total;
}

double OverlapTable::column_integral(std::size_t t_index) const {
  if (t_index >= t_grid.size()) throw DomainViolation("overlap column index out of range");
  double total = 0.0;
  for (std::size_t i = 0; i < s_grid.size(); ++i)
    total += s_weights[i] * values[i][t_index];
  return total;
}

double OverlapTable::value_at(double s, double t) const {
  if (domain == SupportDomain::UnitCircle) {
    s = wrap_angle(s);
    t = wrap_angle(t);
  }

  for (const OverlapAtomBranch& branch : atom_branches)
    if (location_matches(domain, t, branch.location))
      return query_matches_alpha(domain, s, branch.alpha, indicator_tol) ? branch.value : 0.0;

  if (zero_branch && std::abs(t) <= 1e-12) {
    if (std::abs(s) <= 1e-12) return zero_branch->origin_value;
    if (s < 0.0) return 0.0;
    // Either the smooth closed form in s (second factor charges the origin
    // more heavily) or an indicator concentrated at s = 0.
    if (!zero_branch->omega_limit) return 0.0;
    return zero_branch->origin_value / (1.0 - s * *zero_branch->omega_limit);
  }

  // Bulk queries are defined only where the target density was resolved to
  // be positive: inside one of the support runs. Anywhere else the density
  // vanishes (or never converged) and the overlap function has no value.
  std::size_t run_first = 0, run_last = 0;
  bool t_in_run = false;
  for (const auto& run : t_runs) {
    if (run.second <= run.first) continue;
    if (t >= t_grid[run.first] && t <= t_grid[run.second - 1]) {
      run_first = run.first;
      run_last = run.second - 1;
      t_in_run = true;
      break;
    }
  }
  if (!t_in_run)
    throw UndefinedAtPoint("overlap undefined: t lies outside the bulk support runs");
  if (s_grid.empty() || s < s_grid.front() || s > s_grid.back()) return 0.0;

  const auto t_it =
      std::upper_bound(t_grid.begin() + run_first, t_grid.begin() + run_last + 1, t);
  std::size_t tj = t_it - t_grid.begin();
  if (tj > run_first) --tj;
  std::size_t tj_next = tj;
  double tw = 0.0;
  if (t > t_grid[tj] && tj < run_last) {
    tj_next = tj + 1;
    tw = (t - t_grid[tj]) / (t_grid[tj_next] - t_grid[tj]);
  }

  const auto s_it = std::upper_bound(s_grid.begin(), s_grid.end(), s);
  std::size_t si = s_it - s_grid.begin();
  if (si > 0) --si;
  std::size_t si_next = si;
  double sw = 0.0;
  if (s > s_grid[si] && si + 1 < s_grid.size()) {
    si_next = si + 1;
    sw = (s - s_grid[si]) / (s_grid[si_next] - s_grid[si]);
  }

  const double v00 = values[si][tj], v01 = values[si][tj_next];
  const double v10 = values[si_next][tj], v11 = values[si_next][tj_next];
  return (1.0 - sw) * ((1.0 - tw) * v00 + tw * v01) +
         sw * ((1.0 - tw) * v10 + tw * v11);
}

KernelMeasure kernel_measure_additive(const MeasurePair& pair, double s,
                                      const OverlapOptions& options) {
  return kernel_measure_additive(pair, s, free_add_convolve(pair, options.convolution),
                                 options);
}

KernelMeasure kernel_measure_additive(const MeasurePair& pair, double s,
                                      const ConvolutionOutput& conv,
                                      const OverlapOptions& options) {
  if (pair.domain() != SupportDomain::RealLine)
    throw DomainViolation("additive kernels are defined for real-line measures");
  require_kind(conv, SubordinationKind::Additive, "kernel_measure_additive");

  const Measure& mu = pair.first;
  const double s_atom_mass = mu.atom_mass_at(s);
  if (!(s_atom_mass > 0.0) && !(mu.density_at(s) > 0.0))
    throw DomainViolation("conditioning point lies outside supp(mu)");

  if (pair.second.is_point_mass()) {
    const double c = pair.second.atoms().front().location;
    return {s, Measure::point_mass(s + c), 0.0};
  }
  if (pair.first.is_point_mass()) return {s, conv.result, conv.mass_defect};

  const SubordinationResult& sres = conv.subordination;
  const std::size_t n_levels = sres.levels.size();
  std::vector<BoundaryGrid> grids;
  grids.reserve(2);
  for (std::size_t l = n_levels - 2; l < n_levels; ++l) {
    const BoundaryLevel& level = sres.levels[l];
    BoundaryGrid grid{sres.t_grid, level.eps, level.eps_nodes, {}};
    grid.values.resize(sres.t_grid.size());
    for (std::size_t i = 0; i < sres.t_grid.size(); ++i)
      grid.values[i] = 1.0 / (level.omega1[i] - s);
    grids.push_back(std::move(grid));
  }

  InversionOptions inv;
  inv.domain = SupportDomain::RealLine;
  inv.scan_grid = false;  // k_s charges only atoms of the product paired to s
  for (const ConvolvedAtom& atom : conv.atom_table)
    if (query_matches_alpha(SupportDomain::RealLine, s, atom.alpha, options.indicator_tol) &&
        s_atom_mass > 0.0)
      inv.fixed_atoms.push_back({atom.location, atom.mass / s_atom_mass});

  InversionResult result = stieltjes_invert(grids, inv);
  return {s, std::move(result.measure), result.mass_defect};
}

OverlapTable overlap_additive(const MeasurePair& pair, const OverlapOptions& options) {
  return overlap_additive(pair, free_add_convolve(pair, options.convolution), options);
}

OverlapTable overlap_additive(const MeasurePair& pair, const ConvolutionOutput& conv,
                              const OverlapOptions& options) {
  require_kind(conv, SubordinationKind::Additive, "overlap_additive");
  return build_table(pair, conv, options, SubordinationKind::Additive);
}

OverlapTable overlap_multiplicative(const MeasurePair& pair, const OverlapOptions& options) {
  return overlap_multiplicative(pair, free_mult_convolve_positive(pair, options.convolution),
                                options);
}

OverlapTable overlap_multiplicative(const MeasurePair& pair, const ConvolutionOutput& conv,
                                    const OverlapOptions& options) {
  require_kind(conv, SubordinationKind::MultiplicativePositive, "overlap_multiplicative");
  return build_table(pair, conv, options, SubordinationKind::MultiplicativePositive);
}

OverlapTable overlap_circle(const MeasurePair& pair, const OverlapOptions& options) {
  return overlap_circle(pair, free_mult_convolve_circle(pair, options.convolution), options);
}

OverlapTable overlap_circle(const MeasurePair& pair, const ConvolutionOutput& conv,
                            const OverlapOptions& options) {
  require_kind(conv, SubordinationKind::MultiplicativeCircle, "overlap_circle");
  return build_table(pair, conv, options, SubordinationKind::MultiplicativeCircle);
}

DiscreteOverlap empirical_overlap(const SpectralDecomposition& signal,
                                  const SpectralDecomposition& observed) {
  const Eigen::Index n = signal.vectors.rows();
  if (n == 0) throw DimensionMismatch("empty eigendecomposition");
  if (signal.vectors.cols() != n || observed.vectors.cols() != n ||
      observed.vectors.rows() != n)
    throw DimensionMismatch("eigendecompositions must be square and of equal size");
  if (signal.values.size() != static_cast<std::size_t>(n) ||
      observed.values.size() != static_cast<std::size_t>(n))
    throw DimensionMismatch("eigenvalue count must match the basis size");

  std::vector<std::size_t> ps(static_cast<std::size_t>(n)), pt(static_cast<std::size_t>(n));
  for (std::size_t k = 0; k < ps.size(); ++k) ps[k] = pt[k] = k;
  std::sort(ps.begin(), ps.end(),
            [&](std::size_t a, std::size_t b) { return signal.values[a] < signal.values[b]; });
  std::sort(pt.begin(), pt.end(), [&](std::size_t a, std::size_t b) {
    return observed.values[a] < observed.values[b];
  });

  const Eigen::MatrixXcd gram = signal.vectors.adjoint() * observed.vectors;

  DiscreteOverlap out;
  out.s_values.resize(ps.size());
  out.t_values.resize(pt.size());
  for (std::size_t k = 0; k < ps.size(); ++k) out.s_values[k] = signal.values[ps[k]];
  for (std::size_t l = 0; l < pt.size(); ++l) out.t_values[l] = observed.values[pt[l]];

  const double inv_n = 1.0 / static_cast<double>(n);
  out.mass.assign(ps.size(), std::vector<double>(pt.size(), 0.0));
  out.s_marginal.assign(ps.size(), 0.0);
  out.t_marginal.assign(pt.size(), 0.0);
  for (std::size_t k = 0; k < ps.size(); ++k) {
    for (std::size_t l = 0; l < pt.size(); ++l) {
      const double m =
          std::norm(gram(static_cast<Eigen::Index>(ps[k]), static_cast<Eigen::Index>(pt[l]))) *
          inv_n;
      out.mass[k][l] = m;
      out.s_marginal[k] += m;
      out.t_marginal[l] += m;
    }
  }
  return out;
}

namespace {

std::size_t bin_index(const std::vector<double>& edges, double x) {
  // Half-open bins [e_i, e_{i+1}), the last bin closed on the right; values
  // outside the edges map to size_t(-1).
  if (x < edges.front() || x > edges.back()) return std::numeric_limits<std::size_t>::max();
  const auto it = std::upper_bound(edges.begin(), edges.end(), x);
  std::size_t idx = it - edges.begin();
  if (idx == 0) return std::numeric_limits<std::size_t>::max();
  --idx;
  if (idx >= edges.size() - 1) idx = edges.size() - 2;  // x at the last edge
  return idx;
}

void validate_edges(const std::vector<double>& edges, const char* which) {
  if (edges.size() < 2) {
    std::ostringstream os;
    os << which << " histogram needs at least two edges";
    throw DomainViolation(os.str());
  }
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1])) {
      std::ostringstream os;
      os << which << " histogram edges must be strictly increasing";
      throw DomainViolation(os.str());
    }
}

}  // namespace

BinnedOverlap bin_overlap(const std::vector<DiscreteOverlap>& trials,
                          const std::vector<double>& s_edges,
                          const std::vector<double>& t_edges) {
  if (trials.empty()) throw DomainViolation("histogram aggregation needs at least one trial");
  validate_edges(s_edges, "signal");
  validate_edges(t_edges, "target");

  const std::size_t ns = s_edges.size() - 1;
  const std::size_t nt = t_edges.size() - 1;
  BinnedOverlap out;
  out.s_edges = s_edges;
  out.t_edges = t_edges;
  out.mass.assign(ns, std::vector<double>(nt, 0.0));
  out.ratio.assign(ns, std::vector<double>(nt, 0.0));
  out.s_marginal_mass.assign(ns, 0.0);
  out.t_marginal_mass.assign(nt, 0.0);

  const double inv_trials = 1.0 / static_cast<double>(trials.size());
  for (const DiscreteOverlap& trial : trials) {
    std::vector<std::size_t> sbin(trial.s_values.size());
    std::vector<std::size_t> tbin(trial.t_values.size());
    for (std::size_t k = 0; k < sbin.size(); ++k) sbin[k] = bin_index(s_edges, trial.s_values[k]);
    for (std::size_t l = 0; l < tbin.size(); ++l) tbin[l] = bin_index(t_edges, trial.t_values[l]);
    for (std::size_t k = 0; k < sbin.size(); ++k) {
      if (sbin[k] == std::numeric_limits<std::size_t>::max()) continue;
      out.s_marginal_mass[sbin[k]] += trial.s_marginal[k] * inv_trials;
      for (std::size_t l = 0; l < tbin.size(); ++l) {
        if (tbin[l] == std::numeric_limits<std::size_t>::max()) continue;
        out.mass[sbin[k]][tbin[l]] += trial.mass[k][l] * inv_trials;
      }
    }
    for (std::size_t l = 0; l < tbin.size(); ++l)
      if (tbin[l] != std::numeric_limits<std::size_t>::max())
        out.t_marginal_mass[tbin[l]] += trial.t_marginal[l] * inv_trials;
  }

  for (std::size_t i = 0; i < ns; ++i)
    for (std::size_t j = 0; j < nt; ++j) {
      const double denom = out.s_marginal_mass[i] * out.t_marginal_mass[j];
      out.ratio[i][j] = denom > 0.0 ? out.mass[i][j] / denom : 0.0;
    }
  return out;
}

BinnedOverlap bin_overlap(const DiscreteOverlap& discrete, const std::vector<double>& s_edges,
                          const std::vector<double>& t_edges) {
  return bin_overlap(std::vector<DiscreteOverlap>{discrete}, s_edges, t_edges);
}

std::vector<double> freedman_diaconis_edges(std::vector<double> samples) {
  if (samples.size() < 2)
    throw InsufficientData("Freedman-Diaconis binning needs at least two samples");
  std::sort(samples.begin(), samples.end());
  const double lo = samples.front();
  const double hi = samples.back();
  if (!(hi > lo))
    throw InsufficientData("Freedman-Diaconis binning needs a non-degenerate sample range");

  const double n = static_cast<double>(samples.size());
  const auto quantile = [&](double p) {
    const double pos = p * (n - 1.0);
    const std::size_t lo_idx = static_cast<std::size_t>(pos);
    const std::size_t hi_idx = std::min<std::size_t>(lo_idx + 1, samples.size() - 1);
    const double frac = pos - static_cast<double>(lo_idx);
    return (1.0 - frac) * samples[lo_idx] + frac * samples[hi_idx];
  };
  const double iqr = quantile(0.75) - quantile(0.25);
  double width = 2.0 * iqr / std::cbrt(n);
  if (!(width > 0.0)) width = (hi - lo) / std::ceil(std::sqrt(n));

  std::size_t bins = static_cast<std::size_t>(std::ceil((hi - lo) / width));
  bins = std::clamp<std::size_t>(bins, 1, 4096);
  std::vector<double> edges(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i)
    edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  edges.back() = hi;
  return edges;
}

}  // namespace freedenoise
