#include "freedenoise/measure.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "freedenoise/errors.hpp"

namespace freedenoise {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kMassTolerance = 1e-6;

void check_domain_point(SupportDomain domain, double x, const char* what) {
  if (!std::isfinite(x)) {
    std::ostringstream os;
    os << what << " is not finite";
    throw DomainViolation(os.str());
  }
  if (domain == SupportDomain::NonNegativeReals && x < 0) {
    std::ostringstream os;
    os << what << " " << x << " lies outside the nonnegative half-line";
    throw DomainViolation(os.str());
  }
}

}  // namespace

double wrap_angle(double theta) {
  double t = std::fmod(theta, kTwoPi);
  if (t < 0) t += kTwoPi;
  // fmod can round back up to 2*pi for tiny negative inputs
  if (t >= kTwoPi) t = 0.0;
  return t;
}

std::string to_string(SupportDomain domain) {
  switch (domain) {
    case SupportDomain::RealLine: return "real";
    case SupportDomain::NonNegativeReals: return "nonneg";
    case SupportDomain::UnitCircle: return "circle";
  }
  return "real";
}

SupportDomain support_domain_from_string(const std::string& name) {
  if (name == "real") return SupportDomain::RealLine;
  if (name == "nonneg") return SupportDomain::NonNegativeReals;
  if (name == "circle") return SupportDomain::UnitCircle;
  throw ParseError("unknown support domain '" + name + "'");
}

double trapezoid_mass(const DensitySpec& density) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < density.grid.size(); ++i) {
    total += 0.5 * (density.values[i] + density.values[i + 1]) *
             (density.grid[i + 1] - density.grid[i]);
  }
  return total;
}

Measure Measure::make(SupportDomain domain, std::vector<Atom> atoms,
                      std::optional<DensitySpec> density, bool renormalize) {
  Measure m;
  m.domain_ = domain;

  for (Atom& a : atoms) {
    if (!std::isfinite(a.mass) || a.mass < 0)
      throw DomainViolation("atom mass must be finite and nonnegative");
    if (domain == SupportDomain::UnitCircle) {
      if (!std::isfinite(a.location)) throw DomainViolation("atom angle is not finite");
      a.location = wrap_angle(a.location);
    } else {
      check_domain_point(domain, a.location, "atom location");
    }
  }
  atoms.erase(std::remove_if(atoms.begin(), atoms.end(),
                             [](const Atom& a) { return a.mass == 0.0; }),
              atoms.end());
  std::sort(atoms.begin(), atoms.end(),
            [](const Atom& a, const Atom& b) { return a.location < b.location; });
  for (std::size_t i = 0; i + 1 < atoms.size(); ++i) {
    if (atoms[i].location == atoms[i + 1].location)
      throw DomainViolation("duplicate atom location");
  }
  m.atoms_ = std::move(atoms);

  if (density && !density->grid.empty()) {
    DensitySpec& d = *density;
    if (d.grid.size() < 2) throw DomainViolation("density grid needs at least two nodes");
    if (d.grid.size() != d.values.size())
      throw DimensionMismatch("density grid and values differ in length");
    for (std::size_t i = 0; i < d.grid.size(); ++i) {
      check_domain_point(domain == SupportDomain::UnitCircle ? SupportDomain::RealLine : domain,
                         d.grid[i], "density grid node");
      if (!std::isfinite(d.values[i])) throw DomainViolation("density value is not finite");
      if (d.values[i] < -1e-12) throw DomainViolation("density value is negative");
      if (d.values[i] < 0) d.values[i] = 0.0;
      if (i > 0 && d.grid[i] <= d.grid[i - 1])
        throw DomainViolation("density grid must be strictly increasing");
    }
    if (domain == SupportDomain::UnitCircle &&
        (d.grid.front() < 0.0 || d.grid.back() > kTwoPi + 1e-12))
      throw DomainViolation("circle density grid must lie in [0, 2*pi]");
    m.density_ = std::move(d);
  }

  const double atom_mass = m.total_atom_mass();
  const double density_mass = m.has_density() ? trapezoid_mass(m.density_) : 0.0;
  const double total = atom_mass + density_mass;
  if (total <= 0.0) throw EmptyMeasure("measure has no mass");
  if (m.atoms_.empty() && density_mass <= 0.0) throw EmptyMeasure("measure has no mass");

  const double defect = total - 1.0;
  if (std::abs(defect) > kMassTolerance && !renormalize) {
    std::ostringstream os;
    os << "total mass " << total << " differs from 1 by more than " << kMassTolerance;
    throw NormalizationError(os.str());
  }
  if (!m.atoms_.empty() && m.has_density() && atom_mass < 1.0 && density_mass > 0.0) {
    // Atom masses are exact data (closed-form rules, explicit input); the
    // sampled density is the approximate part, so it alone absorbs the
    // normalization defect.
    const double density_scale = (1.0 - atom_mass) / density_mass;
    for (double& v : m.density_.values) v *= density_scale;
  } else {
    const double scale = 1.0 / total;
    for (Atom& a : m.atoms_) a.mass *= scale;
    for (double& v : m.density_.values) v *= scale;
  }
  m.normalization_defect_ = defect;

  if (domain == SupportDomain::UnitCircle) {
    m.lo_ = 0.0;
    m.hi_ = kTwoPi;
  } else {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const Atom& a : m.atoms_) {
      lo = std::min(lo, a.location);
      hi = std::max(hi, a.location);
    }
    if (m.has_density()) {
      lo = std::min(lo, m.density_.grid.front());
      hi = std::max(hi, m.density_.grid.back());
    }
    m.lo_ = lo;
    m.hi_ = hi;
  }
  return m;
}

Measure Measure::point_mass(double location, SupportDomain domain) {
  return make(domain, {{location, 1.0}}, std::nullopt);
}

// Chebyshev extrema pushed through a smoothstep: node spacing shrinks like
// the fourth power of the distance to either endpoint, which keeps the
// piecewise-linear mass defect negligible even for inverse-square-root edges.
std::vector<double> edge_clustered_grid(double lo, double hi, std::size_t n) {
  std::vector<double> grid(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double phase = std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1);
    const double x = 0.5 * (1.0 - std::cos(phase));
    grid[i] = lo + (hi - lo) * x * x * (3.0 - 2.0 * x);
  }
  grid.front() = lo;
  grid.back() = hi;
  // On fine grids the clustered steps can drop below one ulp of the edge
  // value; nudge forward so the grid stays strictly increasing.
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(grid[i] > grid[i - 1]))
      grid[i] = std::nextafter(grid[i - 1], std::numeric_limits<double>::infinity());
  }
  for (std::size_t i = n - 1; i-- > 1;) {
    if (!(grid[i] < grid[i + 1]))
      grid[i] = std::nextafter(grid[i + 1], -std::numeric_limits<double>::infinity());
  }
  return grid;
}

Measure Measure::semicircle(double variance, std::size_t grid_size) {
  if (!(variance > 0)) throw DomainViolation("semicircle variance must be positive");
  const double r = 2.0 * std::sqrt(variance);
  DensitySpec d;
  d.grid = edge_clustered_grid(-r, r, grid_size);
  d.values.resize(grid_size);
  for (std::size_t i = 0; i < grid_size; ++i) {
    const double t = d.grid[i];
    const double disc = std::max(0.0, 4.0 * variance - t * t);
    d.values[i] = std::sqrt(disc) / (2.0 * std::numbers::pi * variance);
  }
  return make(SupportDomain::RealLine, {}, std::move(d), /*renormalize=*/true);
}


Measure Measure::free_poisson(double lambda, std::size_t grid_size) {
  if (!(lambda > 0)) throw DomainViolation("free_poisson rate must be positive");
  const double lo = (1.0 - std::sqrt(lambda)) * (1.0 - std::sqrt(lambda));
  const double hi = (1.0 + std::sqrt(lambda)) * (1.0 + std::sqrt(lambda));
  DensitySpec d;
  d.grid = edge_clustered_grid(lo, hi, grid_size);
  d.values.resize(grid_size);
  for (std::size_t i = 0; i < grid_size; ++i) {
    const double t = d.grid[i];
    const double disc = std::max(0.0, 4.0 * lambda - (t - 1.0 - lambda) * (t - 1.0 - lambda));
    d.values[i] = t > 0 ? std::sqrt(disc) / (2.0 * std::numbers::pi * t) : 0.0;
  }
  std::vector<Atom> atoms;
  if (lambda < 1.0) atoms.push_back({0.0, 1.0 - lambda});
  return make(SupportDomain::NonNegativeReals, std::move(atoms), std::move(d),
              /*renormalize=*/true);
}

Measure Measure::arcsine(std::size_t grid_size) {
  DensitySpec d;
  d.grid = edge_clustered_grid(0.0, 4.0, grid_size);
  d.values.resize(grid_size);
  for (std::size_t i = 0; i < grid_size; ++i) {
    const double t = d.grid[i];
    const double prod = t * (4.0 - t);
    d.values[i] = prod > 0 ? 1.0 / (std::numbers::pi * std::sqrt(prod)) : 0.0;
  }
  // Endpoint values are finite placeholders; the integrable singularity mass
  // is restored by renormalization.
  d.values.front() = d.values[1];
  d.values.back() = d.values[grid_size - 2];
  return make(SupportDomain::NonNegativeReals, {}, std::move(d), /*renormalize=*/true);
}

Measure Measure::haar(std::size_t grid_size) {
  DensitySpec d;
  d.grid.resize(grid_size);
  d.values.assign(grid_size, 1.0 / kTwoPi);
  for (std::size_t i = 0; i < grid_size; ++i)
    d.grid[i] = kTwoPi * static_cast<double>(i) / static_cast<double>(grid_size - 1);
  d.grid.back() = kTwoPi;
  return make(SupportDomain::UnitCircle, {}, std::move(d), /*renormalize=*/true);
}

Measure Measure::builtin(const std::string& name, const std::map<std::string, double>& params,
                         std::size_t grid_size) {
  auto get = [&](const char* key, std::optional<double> fallback = std::nullopt) {
    auto it = params.find(key);
    if (it != params.end()) return it->second;
    if (fallback) return *fallback;
    throw ParseError("builtin '" + name + "' needs parameter '" + key + "'");
  };
  if (name == "semicircle") return semicircle(get("var", 1.0), grid_size);
  if (name == "free_poisson") return free_poisson(get("lambda"), grid_size);
  if (name == "arcsine") return arcsine(grid_size);
  if (name == "haar") return haar(grid_size);
  throw UnknownBuiltin("no builtin measure named '" + name + "'");
}

double Measure::support_radius() const {
  if (domain_ == SupportDomain::UnitCircle) return 1.0;
  return std::max(std::abs(lo_), std::abs(hi_));
}

double Measure::total_atom_mass() const {
  double total = 0.0;
  for (const Atom& a : atoms_) total += a.mass;
  return total;
}

double Measure::atom_mass_at(double location, double tol) const {
  if (domain_ == SupportDomain::UnitCircle) location = wrap_angle(location);
  for (const Atom& a : atoms_) {
    if (std::abs(a.location - location) <= tol) return a.mass;
  }
  return 0.0;
}

double Measure::density_at(double t) const {
  if (!has_density()) return 0.0;
  const auto& g = density_.grid;
  if (t < g.front() || t > g.back()) return 0.0;
  const auto it = std::upper_bound(g.begin(), g.end(), t);
  if (it == g.begin()) return density_.values.front();
  if (it == g.end()) return density_.values.back();
  const std::size_t i = static_cast<std::size_t>(it - g.begin()) - 1;
  const double w = (t - g[i]) / (g[i + 1] - g[i]);
  return (1.0 - w) * density_.values[i] + w * density_.values[i + 1];
}

double Measure::integrate(const std::function<double(double)>& f) const {
  double total = 0.0;
  for (const Atom& a : atoms_) {
    const double v = f(a.location);
    if (!std::isfinite(v)) throw NonFiniteIntegrand("integrand not finite at atom");
    total += a.mass * v;
  }
  if (has_density()) {
    const auto& g = density_.grid;
    const auto& rho = density_.values;
    double prev = f(g[0]) * rho[0];
    if (!std::isfinite(prev)) throw NonFiniteIntegrand("integrand not finite on grid");
    for (std::size_t i = 1; i < g.size(); ++i) {
      const double cur = f(g[i]) * rho[i];
      if (!std::isfinite(cur)) throw NonFiniteIntegrand("integrand not finite on grid");
      total += 0.5 * (prev + cur) * (g[i] - g[i - 1]);
      prev = cur;
    }
  }
  return total;
}

std::complex<double> Measure::integrate_complex(
    const std::function<std::complex<double>(double)>& f) const {
  const double re = integrate([&](double t) { return f(t).real(); });
  const double im = integrate([&](double t) { return f(t).imag(); });
  return {re, im};
}

double Measure::moment(int k) const {
  return integrate([k](double t) { return std::pow(t, k); });
}

double Measure::variance() const {
  const double m1 = moment(1);
  return moment(2) - m1 * m1;
}

std::complex<double> Measure::circle_moment(int n) const {
  if (domain_ != SupportDomain::UnitCircle)
    throw DomainViolation("circle_moment requires a circle measure");
  return integrate_complex([n](double theta) {
    return std::exp(std::complex<double>(0.0, n * theta));
  });
}

double Measure::quantile(double p) const {
  if (!(p > 0.0 && p < 1.0)) throw DomainViolation("quantile level must lie in (0, 1)");
  struct Piece {
    double lo, hi;     // support interval (lo == hi for an atom)
    double mass;
    double rho_lo, rho_hi;  // density node values, unused for atoms
  };
  std::vector<Piece> pieces;
  std::size_t ai = 0;
  auto push_atoms_below = [&](double x) {
    while (ai < atoms_.size() && atoms_[ai].location <= x) {
      pieces.push_back({atoms_[ai].location, atoms_[ai].location, atoms_[ai].mass, 0, 0});
      ++ai;
    }
  };
  if (has_density()) {
    const auto& g = density_.grid;
    const auto& rho = density_.values;
    for (std::size_t i = 0; i + 1 < g.size(); ++i) {
      push_atoms_below(g[i]);
      const double mass = 0.5 * (rho[i] + rho[i + 1]) * (g[i + 1] - g[i]);
      if (mass > 0) pieces.push_back({g[i], g[i + 1], mass, rho[i], rho[i + 1]});
    }
  }
  push_atoms_below(std::numeric_limits<double>::infinity());
  std::stable_sort(pieces.begin(), pieces.end(),
                   [](const Piece& a, const Piece& b) { return a.lo < b.lo; });

  double acc = 0.0;
  for (const Piece& piece : pieces) {
    if (p <= acc + piece.mass) {
      if (piece.lo == piece.hi) return piece.lo;
      const double target = p - acc;
      // Invert the quadratic CDF of the linear density on [lo, hi].
      const double h = piece.hi - piece.lo;
      const double a = 0.5 * (piece.rho_hi - piece.rho_lo) / h;
      const double b = piece.rho_lo;
      double x;
      if (std::abs(a) < 1e-14 * (std::abs(b) + 1e-300)) {
        x = b > 0 ? target / b : 0.5 * h;
      } else {
        const double disc = std::max(0.0, b * b + 4.0 * a * target);
        x = (-b + std::sqrt(disc)) / (2.0 * a);
      }
      return piece.lo + std::clamp(x, 0.0, h);
    }
    acc += piece.mass;
  }
  return pieces.empty() ? lo_ : pieces.back().hi;
}

Measure Measure::translated(double c) const {
  if (domain_ != SupportDomain::RealLine)
    throw DomainViolation("translation is defined for real-line measures");
  std::vector<Atom> atoms = atoms_;
  for (Atom& a : atoms) a.location += c;
  std::optional<DensitySpec> d;
  if (has_density()) {
    d = density_;
    for (double& t : d->grid) t += c;
  }
  return make(domain_, std::move(atoms), std::move(d), /*renormalize=*/true);
}

Measure Measure::dilated(double c) const {
  if (domain_ == SupportDomain::UnitCircle)
    throw DomainViolation("dilation is defined for real domains");
  if (!(c > 0)) throw DomainViolation("dilation factor must be positive");
  std::vector<Atom> atoms = atoms_;
  for (Atom& a : atoms) a.location *= c;
  std::optional<DensitySpec> d;
  if (has_density()) {
    d = density_;
    for (double& t : d->grid) t *= c;
    for (double& v : d->values) v /= c;
  }
  return make(domain_, std::move(atoms), std::move(d), /*renormalize=*/true);
}

Measure Measure::rotated(double angle) const {
  if (domain_ != SupportDomain::UnitCircle)
    throw DomainViolation("rotation is defined for circle measures");
  std::vector<Atom> atoms = atoms_;
  for (Atom& a : atoms) a.location = wrap_angle(a.location + angle);
  std::optional<DensitySpec> d;
  if (has_density()) {
    // Rotate the periodic density by resampling on the original grid.
    d = density_;
    for (std::size_t i = 0; i < d->grid.size(); ++i) {
      double theta = wrap_angle(d->grid[i] - angle);
      d->values[i] = density_at(theta);
    }
  }
  return make(domain_, std::move(atoms), std::move(d), /*renormalize=*/true);
}

MeasurePair::MeasurePair(Measure a, Measure b) : first(std::move(a)), second(std::move(b)) {
  if (first.domain() != second.domain())
    throw DimensionMismatch("measure pair must share a support domain");
}

}  // namespace freedenoise
