#include "freedenoise/transforms.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

#include "freedenoise/errors.hpp"

namespace freedenoise {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// 4-point Gauss-Legendre rule on [-1, 1].
constexpr std::array<double, 4> kGlNode = {-0.8611363115940526, -0.3399810435848563,
                                           0.3399810435848563, 0.8611363115940526};
constexpr std::array<double, 4> kGlWeight = {0.3478548451374538, 0.6521451548625461,
                                             0.6521451548625461, 0.3478548451374538};

}  // namespace

ComplexTransformEvaluator::ComplexTransformEvaluator(const Measure& m) : measure_(m) {
  if (m.domain() == SupportDomain::UnitCircle) {
    if (m.has_density()) {
      const auto& grid = m.density().grid;
      const auto& values = m.density().values;
      const std::size_t cells = grid.size() - 1;
      gl_theta_.reserve(4 * cells);
      gl_weight_density_.reserve(4 * cells);
      gl_unit_.reserve(4 * cells);
      for (std::size_t c = 0; c < cells; ++c) {
        const double a = grid[c], b = grid[c + 1];
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        for (int j = 0; j < 4; ++j) {
          const double theta = mid + half * kGlNode[j];
          const double w = (theta - a) / (b - a);
          const double f = (1.0 - w) * values[c] + w * values[c + 1];
          gl_theta_.push_back(theta);
          gl_weight_density_.push_back(kGlWeight[j] * half * f);
          gl_unit_.push_back(std::exp(Complex(0.0, theta)));
        }
      }
    }
    first_moment_ = m.circle_moment(1);
  } else {
    if (m.has_density()) {
      nodes_ = m.density().grid;
      node_values_ = m.density().values;
      slopes_.resize(nodes_.size() - 1);
      for (std::size_t i = 0; i + 1 < nodes_.size(); ++i)
        slopes_[i] = (node_values_[i + 1] - node_values_[i]) / (nodes_[i + 1] - nodes_[i]);
      density_mass_ = trapezoid_mass(m.density());
    }
    first_moment_ = Complex(m.moment(1), 0.0);
  }
}

Complex ComplexTransformEvaluator::cauchy_density_only(Complex z) const {
  if (nodes_.empty()) return {0.0, 0.0};
  // Per cell [a, b] with linear density p(t), mid = (a+b)/2, u = (b-a)/(2(z-mid)):
  //   int p(t)/(z-t) dt = p(mid) * L + slope * q,
  //   L = log((z-a)/(z-b)) = 2 atanh(u),  q = (z-mid) * L - (b-a).
  // For small |u| both L and q are evaluated from the atanh series; the direct
  // log difference would cancel catastrophically against (b-a).
  Complex total{0.0, 0.0};
  for (std::size_t i = 0; i + 1 < nodes_.size(); ++i) {
    if (node_values_[i] == 0.0 && node_values_[i + 1] == 0.0) continue;
    const double a = nodes_[i], b = nodes_[i + 1];
    const double width = b - a;
    const Complex zm = z - 0.5 * (a + b);
    const Complex u = 0.5 * width / zm;
    const double p_mid = 0.5 * (node_values_[i] + node_values_[i + 1]);
    Complex big_l, q;
    if (std::norm(u) < 0.0625) {  // |u| < 1/4
      const Complex u2 = u * u;
      Complex term = u * u2;
      Complex tail{0.0, 0.0};
      for (int k = 1; k < 16; ++k) {
        const Complex contribution = term / static_cast<double>(2 * k + 1);
        tail += contribution;
        if (std::norm(contribution) < 1e-64 * std::norm(tail)) break;
        term *= u2;
      }
      big_l = 2.0 * (u + tail);
      q = 2.0 * zm * tail;
    } else {
      big_l = std::log(z - a) - std::log(z - b);
      q = zm * big_l - width;
    }
    total += p_mid * big_l + slopes_[i] * q;
  }
  return total;
}

Complex ComplexTransformEvaluator::cauchy(Complex z) const {
  if (measure_.domain() == SupportDomain::UnitCircle)
    throw DomainViolation("cauchy transform is defined for real-domain measures");
  if (z.imag() == 0.0) {
    const double x = z.real();
    for (const Atom& a : measure_.atoms()) {
      if (std::abs(x - a.location) < 1e-12 * (1.0 + std::abs(x)))
        throw PoleOnSupport("cauchy transform evaluated at an atom");
    }
    if (measure_.has_density() && x >= nodes_.front() && x <= nodes_.back()) {
      if (measure_.density_at(x) > 0.0)
        throw PoleOnSupport("cauchy transform evaluated inside the support");
      for (double node : nodes_) {
        if (x == node) throw PoleOnSupport("cauchy transform evaluated at a grid node");
      }
    }
  }
  Complex total = cauchy_density_only(z);
  for (const Atom& a : measure_.atoms()) total += a.mass / (z - a.location);
  return total;
}

Complex ComplexTransformEvaluator::reciprocal(Complex z) const { return 1.0 / cauchy(z); }

Complex ComplexTransformEvaluator::psi_circle(Complex z) const {
  Complex total{0.0, 0.0};
  for (const Atom& a : measure_.atoms()) {
    const Complex zu = z * std::exp(Complex(0.0, a.location));
    total += a.mass * zu / (1.0 - zu);
  }
  if (!measure_.has_density()) return total;

  const double r = std::abs(z);
  const double delta = 1.0 - r;
  const double peak = std::arg(std::conj(z));  // kernel peaks where z*e^{i theta} ~ r
  const auto& grid = measure_.density().grid;
  const auto& values = measure_.density().values;
  const double step = (grid.back() - grid.front()) / static_cast<double>(grid.size() - 1);
  const bool needs_refinement = delta < 4.0 * step && delta > 0.0;
  const double refine_window = needs_refinement ? 30.0 * std::max(delta, step) : 0.0;

  auto angular_distance = [&](double theta) {
    double d = std::abs(theta - peak);
    d = std::fmod(d, kTwoPi);
    return std::min(d, kTwoPi - d);
  };

  for (std::size_t c = 0; c + 1 < grid.size(); ++c) {
    const double a = grid[c], b = grid[c + 1];
    if (values[c] == 0.0 && values[c + 1] == 0.0) continue;
    if (needs_refinement && angular_distance(0.5 * (a + b)) < refine_window) {
      // Subdivide so each piece resolves the Poisson-kernel width.
      const int pieces = std::max(1, static_cast<int>(std::ceil((b - a) / (0.5 * delta))));
      for (int p = 0; p < pieces; ++p) {
        const double pa = a + (b - a) * p / pieces;
        const double pb = a + (b - a) * (p + 1) / pieces;
        const double mid = 0.5 * (pa + pb), half = 0.5 * (pb - pa);
        for (int j = 0; j < 4; ++j) {
          const double theta = mid + half * kGlNode[j];
          const double w = (theta - a) / (b - a);
          const double f = (1.0 - w) * values[c] + w * values[c + 1];
          const Complex zu = z * std::exp(Complex(0.0, theta));
          total += kGlWeight[j] * half * f * zu / (1.0 - zu);
        }
      }
    } else {
      for (std::size_t j = 4 * c; j < 4 * c + 4; ++j) {
        const Complex zu = z * gl_unit_[j];
        total += gl_weight_density_[j] * zu / (1.0 - zu);
      }
    }
  }
  return total;
}

Complex ComplexTransformEvaluator::psi(Complex z) const {
  if (measure_.domain() == SupportDomain::UnitCircle) {
    if (std::abs(z) >= 1.0)
      throw DomainViolation("circle moment transform needs |z| < 1");
    return psi_circle(z);
  }
  if (z == Complex(0.0, 0.0)) return {0.0, 0.0};
  // Atoms enter as z t m / (1 - z t) directly, so arguments whose reciprocal
  // falls next to an atom (far negative reals with a mass at the origin) stay
  // evaluable; only the density part routes through the Cauchy integral.
  Complex total(0.0, 0.0);
  for (const Atom& a : measure_.atoms()) {
    const Complex zt = z * a.location;
    total += a.mass * zt / (1.0 - zt);
  }
  if (measure_.has_density()) {
    const Complex inv = 1.0 / z;
    if (inv.imag() == 0.0 && measure_.density_at(inv.real()) > 0.0)
      throw PoleOnSupport("moment transform evaluated on the support");
    total += cauchy_density_only(inv) / z - density_mass_;
  }
  return total;
}

Complex ComplexTransformEvaluator::eta(Complex z) const {
  const Complex p = psi(z);
  return p / (1.0 + p);
}

double ComplexTransformEvaluator::hilbert(double t, double eps) const {
  if (measure_.domain() == SupportDomain::UnitCircle)
    throw DomainViolation("hilbert transform is defined for real-domain measures");
  if (!(eps > 0)) throw DomainViolation("hilbert transform needs eps > 0");
  const Complex g_eps = cauchy(Complex(t, eps));
  const Complex g_half = cauchy(Complex(t, 0.5 * eps));
  return extrapolate_levels(g_eps.real(), g_half.real()) / std::numbers::pi;
}

BoundaryGrid ComplexTransformEvaluator::sample_cauchy(const std::vector<double>& t_grid,
                                                      double eps) const {
  BoundaryGrid out;
  out.t_grid = t_grid;
  out.eps = eps;
  out.values.resize(t_grid.size());
  for (std::size_t i = 0; i < t_grid.size(); ++i)
    out.values[i] = cauchy(Complex(t_grid[i], eps));
  return out;
}

Complex cauchy(const Measure& m, Complex z) { return ComplexTransformEvaluator(m).cauchy(z); }
Complex psi(const Measure& m, Complex z) { return ComplexTransformEvaluator(m).psi(z); }
Complex eta(const Measure& m, Complex z) { return ComplexTransformEvaluator(m).eta(z); }
double hilbert(const Measure& m, double t, double eps) {
  return ComplexTransformEvaluator(m).hilbert(t, eps);
}

namespace {

struct PoleFit {
  double location = 0.0;
  double mass = 0.0;
  bool ok = false;
};

// Around an atom, -Im G(t + i eps) = mass * eps / ((t - gamma)^2 + eps^2)
// plus smooth background, so its reciprocal is close to a parabola in t.
// Fitting the parabola through three samples recovers gamma and mass.
PoleFit fit_pole(const std::vector<double>& t, const std::vector<double>& neg_im,
                 std::size_t center, double eps) {
  PoleFit fit;
  if (t.size() < 3) return fit;
  std::size_t i = std::clamp<std::size_t>(center, 1, t.size() - 2);
  const double x0 = t[i - 1], x1 = t[i], x2 = t[i + 1];
  const double y0 = neg_im[i - 1], y1 = neg_im[i], y2 = neg_im[i + 1];
  if (y0 <= 0 || y1 <= 0 || y2 <= 0) return fit;
  const double q0 = 1.0 / y0, q1 = 1.0 / y1, q2 = 1.0 / y2;
  // Divided differences for the quadratic through (x_k, q_k).
  const double d01 = (q1 - q0) / (x1 - x0);
  const double d12 = (q2 - q1) / (x2 - x1);
  const double a = (d12 - d01) / (x2 - x0);
  if (!(a > 0)) return fit;
  const double b = d01 - a * (x0 + x1);
  fit.location = -b / (2.0 * a);
  fit.mass = 1.0 / (a * eps);
  fit.ok = std::isfinite(fit.location) && std::isfinite(fit.mass) && fit.mass > 0;
  return fit;
}

}  // namespace

InversionResult stieltjes_invert(const std::vector<BoundaryGrid>& levels,
                                 const InversionOptions& options,
                                 const std::vector<CandidateAtom>& candidates) {
  if (levels.size() < 2) throw DimensionMismatch("stieltjes inversion needs two eps levels");
  const BoundaryGrid& coarse = levels[0];
  const BoundaryGrid& fine = levels[1];
  if (coarse.t_grid.size() != fine.t_grid.size())
    throw DimensionMismatch("eps levels must share one t grid");
  if (!(fine.eps < coarse.eps))
    throw DimensionMismatch("eps levels must decrease");
  const std::size_t n = coarse.t_grid.size();
  if (n < 3) throw DimensionMismatch("inversion grid too small");
  const std::vector<double>& t = coarse.t_grid;
  if (!coarse.eps_nodes.empty() &&
      (coarse.eps_nodes.size() != n || fine.eps_nodes.size() != n))
    throw DimensionMismatch("per-node eps must match the t grid");
  const auto eps_coarse_at = [&](std::size_t i) {
    return coarse.eps_nodes.empty() ? coarse.eps : coarse.eps_nodes[i];
  };
  const auto eps_fine_at = [&](std::size_t i) {
    return fine.eps_nodes.empty() ? fine.eps : fine.eps_nodes[i];
  };

  std::vector<double> neg_im_coarse(n), neg_im_fine(n), density(n);
  for (std::size_t i = 0; i < n; ++i) {
    neg_im_coarse[i] = -coarse.values[i].imag();
    neg_im_fine[i] = -fine.values[i].imag();
  }

  const double grid_step = (t.back() - t.front()) / static_cast<double>(n - 1);
  const double shadow_radius = options.clear_radius_mult * std::max(coarse.eps, grid_step);

  std::vector<DetectedAtom> atoms;
  for (const Atom& fixed : options.fixed_atoms)
    atoms.push_back({fixed.location, fixed.mass, 0.0, true});
  auto shadowed = [&](double location) {
    return std::any_of(atoms.begin(), atoms.end(), [&](const DetectedAtom& a) {
      return std::abs(a.location - location) < shadow_radius;
    });
  };

  for (const CandidateAtom& cand : candidates) {
    if (cand.values.size() < 2 || shadowed(cand.location)) continue;
    const double m_coarse = -coarse.eps * cand.values[0].imag();
    const double m_fine = -fine.eps * cand.values[1].imag();
    if (m_fine <= 0) continue;
    const double change = std::abs(m_coarse / m_fine - 1.0);
    const double mass = extrapolate_levels(m_coarse, m_fine);
    if (mass > options.atol_atom && change < options.stability_rel)
      atoms.push_back({cand.location, mass, change, true});
  }

  // Grid scan: mass estimates eps * (-Im G) that persist across levels mark
  // atoms; pure densities shrink by half when eps halves.
  for (std::size_t i = 1; options.scan_grid && i + 1 < n; ++i) {
    const double m_fine = eps_fine_at(i) * neg_im_fine[i];
    if (m_fine <= options.atol_atom) continue;
    if (!(neg_im_fine[i] >= neg_im_fine[i - 1] && neg_im_fine[i] >= neg_im_fine[i + 1]))
      continue;
    const double m_coarse = eps_coarse_at(i) * neg_im_coarse[i];
    if (std::abs(m_coarse / m_fine - 1.0) > options.stability_rel) continue;
    const PoleFit fit_fine = fit_pole(t, neg_im_fine, i, eps_fine_at(i));
    const PoleFit fit_coarse = fit_pole(t, neg_im_coarse, i, eps_coarse_at(i));
    if (!fit_fine.ok || !fit_coarse.ok) continue;
    const double mass = extrapolate_levels(fit_coarse.mass, fit_fine.mass);
    if (mass <= options.atol_atom) continue;
    const bool duplicate = std::any_of(atoms.begin(), atoms.end(), [&](const DetectedAtom& a) {
      return std::abs(a.location - fit_fine.location) <
             options.clear_radius_mult * std::max(coarse.eps, t[i] - t[i - 1]);
    });
    if (!duplicate)
      atoms.push_back({fit_fine.location, mass,
                       std::abs(fit_coarse.mass / fit_fine.mass - 1.0), false});
  }

  // Each atom's Poisson tail pollutes the density samples at distances
  // comparable to eps even after extrapolation; subtract the analytic pole
  // contribution at both levels so the density stays clean near the atom and
  // no real mass is discarded around it.
  for (std::size_t i = 0; i < n; ++i) {
    const double ec = eps_coarse_at(i);
    const double ef = eps_fine_at(i);
    for (const DetectedAtom& a : atoms) {
      const double d = t[i] - a.location;
      neg_im_coarse[i] -= a.mass * ec / (d * d + ec * ec);
      neg_im_fine[i] -= a.mass * ef / (d * d + ef * ef);
    }
    const double f = extrapolate_levels(neg_im_coarse[i], neg_im_fine[i]) / std::numbers::pi;
    density[i] = std::max(0.0, f);
  }

  // Grid-scanned atoms carry fitted-location error, which leaves a residual
  // spike after the subtraction; zero a window around those. Exact-location
  // atoms (fixed or candidate) cancel exactly and keep their local density.
  const double clear_radius = shadow_radius;
  for (const DetectedAtom& a : atoms) {
    if (a.from_candidate) continue;
    for (std::size_t i = 0; i < n; ++i) {
      if (std::abs(t[i] - a.location) <= clear_radius) density[i] = 0.0;
    }
  }

  DensitySpec spec;
  spec.grid = t;
  spec.values = density;
  if (options.domain == SupportDomain::NonNegativeReals) {
    std::size_t first = 0;
    while (first < n && spec.grid[first] < 0.0) ++first;
    spec.grid.erase(spec.grid.begin(), spec.grid.begin() + first);
    spec.values.erase(spec.values.begin(), spec.values.begin() + first);
  }

  double atom_mass = 0.0;
  for (const DetectedAtom& a : atoms) atom_mass += a.mass;
  const double density_mass = trapezoid_mass(spec);
  const double total = atom_mass + density_mass;
  const double defect = std::abs(total - 1.0);
  if (defect > options.mass_defect_limit) {
    std::ostringstream os;
    os << "recovered mass " << total << " misses 1 by " << defect;
    throw MassDefect(os.str());
  }

  // Atoms carry residue-level accuracy; absorb the defect into the density.
  if (density_mass > 0.0) {
    const double scale = (1.0 - atom_mass) / density_mass;
    if (scale < 0.0) throw MassDefect("atom masses exceed total mass one");
    for (double& v : spec.values) v *= scale;
  }

  std::vector<Atom> measure_atoms;
  measure_atoms.reserve(atoms.size());
  for (const DetectedAtom& a : atoms) {
    double loc = a.location;
    if (options.domain == SupportDomain::NonNegativeReals && loc < 0.0 &&
        loc > -clear_radius)
      loc = 0.0;
    measure_atoms.push_back({loc, a.mass});
  }

  InversionResult result{
      Measure::make(options.domain, std::move(measure_atoms),
                    density_mass > 0.0 ? std::optional<DensitySpec>(std::move(spec))
                                       : std::nullopt,
                    /*renormalize=*/true),
      defect, std::move(atoms)};
  return result;
}

InversionResult invert_from_measure(const Measure& m, std::size_t grid_size, double eps_rel) {
  if (m.domain() == SupportDomain::UnitCircle)
    throw DomainViolation("stieltjes inversion applies to real-domain measures");
  const double radius = std::max(m.support_radius(), 1e-12);
  const double eps = eps_rel * radius;
  // Pad on both sides even for nonnegative domains: sampling G at slightly
  // negative t is legitimate and keeps an atom at 0 away from the grid edge.
  const double span = std::max(m.support_hi() - m.support_lo(), 1e-12);
  const double lo = m.support_lo() - 0.025 * span;
  const double hi = m.support_hi() + 0.025 * span;

  std::vector<double> grid(grid_size);
  for (std::size_t i = 0; i < grid_size; ++i)
    grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(grid_size - 1);

  ComplexTransformEvaluator eval(m);
  std::vector<BoundaryGrid> levels{eval.sample_cauchy(grid, eps),
                                   eval.sample_cauchy(grid, 0.5 * eps)};
  InversionOptions options;
  options.domain = m.domain();
  return stieltjes_invert(levels, options);
}

}  // namespace freedenoise
