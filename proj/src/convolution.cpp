#include "freedenoise/convolution.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "freedenoise/errors.hpp"

namespace freedenoise {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double circular_distance(double a, double b) {
  const double d = std::abs(wrap_angle(a) - wrap_angle(b));
  return std::min(d, kTwoPi - d);
}

double combine_locations(SubordinationKind kind, double alpha, double beta) {
  switch (kind) {
    case SubordinationKind::Additive:
      return alpha + beta;
    case SubordinationKind::MultiplicativePositive:
      return alpha * beta;
    case SubordinationKind::MultiplicativeCircle:
      return wrap_angle(alpha + beta);
  }
  return 0.0;
}

struct PairHit {
  double location = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
};

// Factor-atom pairs whose masses sum above one: the only locations where the
// convolution can carry an atom. At most one pair survives per location, since
// two pairs at the same spot would need combined factor mass above two.
std::vector<PairHit> atom_pair_hits(const MeasurePair& pair, SubordinationKind kind) {
  std::vector<PairHit> hits;
  for (const Atom& a : pair.first.atoms()) {
    for (const Atom& b : pair.second.atoms()) {
      if (!(a.mass + b.mass > 1.0)) continue;
      if (kind == SubordinationKind::MultiplicativePositive &&
          (!(a.location > 0.0) || !(b.location > 0.0)))
        continue;  // the origin atom follows the exact max rule instead
      hits.push_back({combine_locations(kind, a.location, b.location), a.location, b.location});
    }
  }
  return hits;
}

void validate_options(const ConvolutionOptions& options) {
  if (options.grid_size < 64) throw DomainViolation("convolution grid too small");
  if (options.levels < 2) throw DomainViolation("convolution needs at least two eps levels");
  if (!(options.eps_rel > 0.0)) throw DomainViolation("convolution eps must be positive");
  if (!(options.pad_rel >= 0.0)) throw DomainViolation("convolution padding must be nonnegative");
}

// Edge-clustered nodes on the arithmetic support [lo, hi] plus short tails on
// both sides, so the inversion sees the density decay to zero and an atom at
// an endpoint sits away from the grid boundary. The tails grow geometrically
// away from the support: the junction cell next to each endpoint must stay
// comparable to the innermost core cell, otherwise the trapezoid rule bridges
// a possibly huge endpoint value (densities can diverge at a hard edge)
// across a wide cell and fabricates mass.
std::vector<double> padded_support_grid(double lo, double hi, std::size_t n, double pad_rel) {
  const double span = std::max(hi - lo, 1e-3);
  const double pad = std::max(pad_rel, 1e-3) * span;
  const std::size_t tail = std::min<std::size_t>(12, n / 8);
  const std::size_t core = n - 2 * tail;
  const std::vector<double> inner = edge_clustered_grid(lo, hi, core);
  const auto tail_offsets = [&](double edge_cell) {
    std::vector<double> offsets(tail);
    const double h = std::clamp(edge_cell, 1e-14 * span, 0.5 * pad);
    const double rho = std::pow(pad / h, 1.0 / static_cast<double>(tail));
    double off = h;
    for (std::size_t k = 0; k < tail; ++k) {
      off *= rho;
      offsets[k] = off;
    }
    offsets.back() = pad;
    return offsets;
  };
  const std::vector<double> below = tail_offsets(inner[1] - inner[0]);
  const std::vector<double> above = tail_offsets(inner[core - 1] - inner[core - 2]);

  std::vector<double> grid;
  grid.reserve(n);
  for (std::size_t k = tail; k >= 1; --k) grid.push_back(lo - below[k - 1]);
  grid.insert(grid.end(), inner.begin(), inner.end());
  for (std::size_t k = 1; k <= tail; ++k) grid.push_back(hi + above[k - 1]);
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1]))
      grid[i] = std::nextafter(grid[i - 1], std::numeric_limits<double>::infinity());
  return grid;
}

std::vector<double> closed_angle_grid(std::size_t n) {
  std::vector<double> grid(n);
  for (std::size_t i = 0; i < n; ++i)
    grid[i] = kTwoPi * static_cast<double>(i) / static_cast<double>(n - 1);
  grid.back() = kTwoPi;
  return grid;
}

std::string irregular_note(const SubordinationResult& sres) {
  std::size_t excluded = 0;
  for (char flag : sres.in_U)
    if (!flag) ++excluded;
  std::ostringstream os;
  os << excluded << " of " << sres.in_U.size()
     << " boundary points outside the regular set";
  if (sres.zero_limit) {
    os << "; omega limit at 0-: ";
    if (sres.zero_limit->minus_infinity)
      os << "-infinity";
    else
      os << sres.zero_limit->value;
  }
  return os.str();
}

// Matches each atom of the recovered measure back to the factor pair that
// produced it. The origin atom of the positive product reports alpha = beta =
// 0, standing for the max-rule mass that needs no qualifying pair.
std::vector<ConvolvedAtom> build_atom_table(const Measure& result,
                                            const std::vector<PairHit>& hits,
                                            SubordinationKind kind) {
  std::vector<ConvolvedAtom> table;
  table.reserve(result.atoms().size());
  for (const Atom& a : result.atoms()) {
    ConvolvedAtom row{a.location, 0.0, 0.0, a.mass};
    const bool origin_rule =
        kind == SubordinationKind::MultiplicativePositive && a.location == 0.0;
    if (!origin_rule) {
      const PairHit* best = nullptr;
      double best_distance = std::numeric_limits<double>::infinity();
      for (const PairHit& hit : hits) {
        const double d = kind == SubordinationKind::MultiplicativeCircle
                             ? circular_distance(hit.location, a.location)
                             : std::abs(hit.location - a.location);
        if (d < best_distance) {
          best_distance = d;
          best = &hit;
        }
      }
      if (best != nullptr &&
          best_distance <= 1e-9 * std::max(1.0, std::abs(a.location))) {
        row.alpha = best->alpha;
        row.beta = best->beta;
      }
    }
    table.push_back(row);
  }
  return table;
}

// Closed-form path when one factor is a point mass: translation, dilation, or
// rotation of the other factor. The theorems behind the numerical pipeline
// assume neither factor is a point mass, but the operation itself is exact
// here; the boundary sweep is still attached for diagnostics.
ConvolutionOutput convolve_point_mass(const MeasurePair& pair, SubordinationKind kind,
                                      SubordinationResult sres) {
  const bool first_is_point = pair.first.is_point_mass();
  const Measure& other = first_is_point ? pair.second : pair.first;
  const double c = (first_is_point ? pair.first : pair.second).atoms().front().location;

  Measure result = [&] {
    switch (kind) {
      case SubordinationKind::Additive:
        return other.translated(c);
      case SubordinationKind::MultiplicativePositive:
        return c == 0.0 ? Measure::point_mass(0.0, SupportDomain::NonNegativeReals)
                        : other.dilated(c);
      case SubordinationKind::MultiplicativeCircle:
        return other.rotated(c);
    }
    throw DomainViolation("unknown convolution kind");
  }();

  std::vector<ConvolvedAtom> table;
  if (kind == SubordinationKind::MultiplicativePositive && c == 0.0) {
    table.push_back({0.0, 0.0, 0.0, 1.0});
  } else {
    for (const Atom& b : other.atoms()) {
      if (kind == SubordinationKind::MultiplicativePositive && b.location == 0.0) {
        table.push_back({0.0, 0.0, 0.0, b.mass});
        continue;
      }
      const double alpha = first_is_point ? c : b.location;
      const double beta = first_is_point ? b.location : c;
      table.push_back({combine_locations(kind, alpha, beta), alpha, beta, b.mass});
    }
    std::sort(table.begin(), table.end(),
              [](const ConvolvedAtom& x, const ConvolvedAtom& y) {
                return x.location < y.location;
              });
  }

  std::string note = irregular_note(sres);
  note += "; point-mass factor handled in closed form";
  return ConvolutionOutput{std::move(result), std::move(sres), std::move(table), 0.0,
                           std::move(note)};
}

struct SweepSetup {
  std::vector<double> grid;
  BoundaryOptions boundary;
  std::vector<PairHit> hits;
  std::vector<double> candidates;
};

SweepSetup prepare_sweep(const MeasurePair& pair, SubordinationKind kind,
                         const ConvolutionOptions& options) {
  SweepSetup setup;
  setup.hits = atom_pair_hits(pair, kind);
  setup.candidates.reserve(setup.hits.size());
  for (const PairHit& hit : setup.hits) setup.candidates.push_back(hit.location);

  if (kind == SubordinationKind::MultiplicativeCircle) {
    setup.grid = closed_angle_grid(options.grid_size);
    setup.boundary.eps = options.eps_rel;  // radial distance 1 - r
  } else {
    double lo = 0.0, hi = 0.0;
    if (kind == SubordinationKind::Additive) {
      lo = pair.first.support_lo() + pair.second.support_lo();
      hi = pair.first.support_hi() + pair.second.support_hi();
    } else {
      lo = pair.first.support_lo() * pair.second.support_lo();
      hi = pair.first.support_hi() * pair.second.support_hi();
    }
    setup.grid = padded_support_grid(lo, hi, options.grid_size, options.pad_rel);
    const double scale = std::max({std::abs(lo), std::abs(hi), 1e-12});
    setup.boundary.eps = options.eps_rel * scale;
    // Adaptive eps: the density can diverge like an inverse square root at
    // the arithmetic endpoints and next to paired atoms, where a uniform eps
    // flattens the boundary values over a window of width ~eps and loses a
    // sqrt(eps)-sized slice of mass. Shrinking eps with the distance to the
    // nearest such point keeps the relative error uniform along the grid.
    const double floor_eps = std::min(1e-9 * scale, setup.boundary.eps);
    setup.boundary.eps_nodes.reserve(setup.grid.size());
    for (double node : setup.grid) {
      double dist = std::min(std::abs(node - lo), std::abs(node - hi));
      for (const PairHit& hit : setup.hits)
        dist = std::min(dist, std::abs(node - hit.location));
      setup.boundary.eps_nodes.push_back(
          std::clamp(0.01 * dist, floor_eps, setup.boundary.eps));
    }
  }
  setup.boundary.levels = options.levels;
  return setup;
}

ConvolutionOutput convolve_real(const MeasurePair& pair, SubordinationKind kind,
                                SubordinationResult sres, const SweepSetup& setup) {
  // The last two levels are the ones the boundary extension extrapolated.
  std::vector<BoundaryGrid> boundary_levels;
  boundary_levels.reserve(2);
  for (std::size_t l = sres.levels.size() - 2; l < sres.levels.size(); ++l)
    boundary_levels.push_back({sres.t_grid, sres.levels[l].eps, sres.levels[l].eps_nodes,
                               sres.levels[l].target_g});

  std::vector<CandidateAtom> candidates;
  candidates.reserve(sres.atom_probes.size());
  for (const AtomProbe& probe : sres.atom_probes) {
    const std::size_t m = probe.g_levels.size();
    candidates.push_back(
        {probe.location, {probe.g_levels[m - 2], probe.g_levels[m - 1]}});
  }

  InversionOptions inv_options;
  inv_options.domain = pair.domain();
  inv_options.scan_grid = false;  // atoms can only sit at the paired locations
  if (kind == SubordinationKind::MultiplicativePositive) {
    const double zero_mass =
        std::max(pair.first.atom_mass_at(0.0), pair.second.atom_mass_at(0.0));
    if (zero_mass > 0.0) inv_options.fixed_atoms.push_back({0.0, zero_mass});
  }

  InversionResult inv = stieltjes_invert(boundary_levels, inv_options, candidates);
  std::vector<ConvolvedAtom> table = build_atom_table(inv.measure, setup.hits, kind);
  std::string note = irregular_note(sres);
  return ConvolutionOutput{std::move(inv.measure), std::move(sres), std::move(table),
                           inv.mass_defect, std::move(note)};
}

ConvolutionOutput convolve_circle(SubordinationResult sres, const SweepSetup& setup) {
  const std::size_t n = sres.t_grid.size();
  const std::size_t coarse_index = sres.levels.size() - 2;
  const std::size_t fine_index = sres.levels.size() - 1;
  const double eps_coarse = sres.levels[coarse_index].eps;
  const double eps_fine = sres.levels[fine_index].eps;
  const InversionOptions defaults;  // shared atom thresholds

  // Atom masses: (1 - r) psi(r conj(gamma)) tends to mass * r, so the linear
  // extrapolation over the two radii recovers the mass with both first-order
  // corrections cancelled.
  std::vector<Atom> atoms;
  for (const AtomProbe& probe : sres.atom_probes) {
    if (probe.g_levels.size() < 2) continue;
    const double m_coarse = eps_coarse * probe.g_levels[coarse_index].real();
    const double m_fine = eps_fine * probe.g_levels[fine_index].real();
    if (!(m_fine > 0.0)) continue;
    const double mass = extrapolate_levels(m_coarse, m_fine);
    const double change = std::abs(m_coarse / m_fine - 1.0);
    if (mass > defaults.atol_atom && change < defaults.stability_rel)
      atoms.push_back({probe.location, mass});
  }

  // Angle density with the detected atoms' analytic psi contributions removed
  // at each radius; the retrieval constant drops to the remaining mass.
  double atom_mass = 0.0;
  for (const Atom& a : atoms) atom_mass += a.mass;
  std::vector<double> density(n);
  for (std::size_t i = 0; i < n; ++i) {
    double level_values[2];
    for (std::size_t l = 0; l < 2; ++l) {
      const BoundaryLevel& level = sres.levels[coarse_index + l];
      const Complex z = (1.0 - level.eps) * std::polar(1.0, -sres.t_grid[i]);
      Complex psi = level.target_g[i];
      for (const Atom& a : atoms) {
        const Complex zg = z * std::polar(1.0, a.location);
        psi -= a.mass * zg / (1.0 - zg);
      }
      level_values[l] = 2.0 * psi.real() + (1.0 - atom_mass);
    }
    const double extrapolated = extrapolate_levels(level_values[0], level_values[1]);
    density[i] = std::isfinite(extrapolated) ? std::max(0.0, extrapolated) / kTwoPi : 0.0;
  }

  DensitySpec spec;
  spec.grid = sres.t_grid;
  spec.values = std::move(density);
  const double density_mass = trapezoid_mass(spec);
  const double total = atom_mass + density_mass;
  const double defect = std::abs(total - 1.0);
  if (defect > defaults.mass_defect_limit) {
    std::ostringstream os;
    os << "recovered mass " << total << " misses 1 by " << defect;
    throw MassDefect(os.str());
  }
  if (density_mass > 0.0) {
    const double scale = (1.0 - atom_mass) / density_mass;
    if (scale < 0.0) throw MassDefect("atom masses exceed total mass one");
    for (double& v : spec.values) v *= scale;
  }

  Measure result = Measure::make(
      SupportDomain::UnitCircle, std::move(atoms),
      density_mass > 0.0 ? std::optional<DensitySpec>(std::move(spec)) : std::nullopt,
      /*renormalize=*/true);
  std::vector<ConvolvedAtom> table =
      build_atom_table(result, setup.hits, SubordinationKind::MultiplicativeCircle);
  std::string note = irregular_note(sres);
  return ConvolutionOutput{std::move(result), std::move(sres), std::move(table), defect,
                           std::move(note)};
}

ConvolutionOutput convolve(const MeasurePair& pair, SubordinationKind kind,
                           const ConvolutionOptions& options) {
  validate_options(options);
  const SweepSetup setup = prepare_sweep(pair, kind, options);

  SubordinationResult sres = [&] {
    if (kind == SubordinationKind::Additive) {
      AdditiveSubordination sub(pair);
      return extend_to_boundary(sub, setup.grid, setup.boundary, setup.candidates);
    }
    MultiplicativeSubordination sub(pair);
    return extend_to_boundary(sub, setup.grid, setup.boundary, setup.candidates);
  }();

  if (pair.first.is_point_mass() || pair.second.is_point_mass())
    return convolve_point_mass(pair, kind, std::move(sres));
  if (kind == SubordinationKind::MultiplicativeCircle)
    return convolve_circle(std::move(sres), setup);
  return convolve_real(pair, kind, std::move(sres), setup);
}

}  // namespace

ConvolutionOutput free_add_convolve(const MeasurePair& pair, const ConvolutionOptions& options) {
  if (pair.domain() != SupportDomain::RealLine)
    throw DomainViolation("additive free convolution needs real-line measures");
  return convolve(pair, SubordinationKind::Additive, options);
}

ConvolutionOutput free_mult_convolve_positive(const MeasurePair& pair,
                                              const ConvolutionOptions& options) {
  if (pair.domain() != SupportDomain::NonNegativeReals)
    throw DomainViolation("positive free multiplication needs nonnegative measures");
  return convolve(pair, SubordinationKind::MultiplicativePositive, options);
}

ConvolutionOutput free_mult_convolve_circle(const MeasurePair& pair,
                                            const ConvolutionOptions& options) {
  if (pair.domain() != SupportDomain::UnitCircle)
    throw DomainViolation("circle free multiplication needs unit-circle measures");
  return convolve(pair, SubordinationKind::MultiplicativeCircle, options);
}

}  // namespace freedenoise
