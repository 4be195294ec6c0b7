#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace freedenoise {

enum class SupportDomain { RealLine, NonNegativeReals, UnitCircle };

std::string to_string(SupportDomain domain);
SupportDomain support_domain_from_string(const std::string& name);

struct Atom {
  double location = 0.0;  // angle in [0, 2*pi) for UnitCircle measures
  double mass = 0.0;
};

// Sampled density, interpreted as piecewise linear between grid nodes and
// zero outside the grid. The grid must be strictly increasing.
struct DensitySpec {
  std::vector<double> grid;
  std::vector<double> values;
};

inline constexpr std::size_t kDefaultGridSize = 2048;

// Finite positive measure of total mass one: finitely many atoms plus an
// optional piecewise-linear density. Immutable after construction.
class Measure {
 public:
  // Validates domain membership and positivity, then rescales so the total
  // mass is exactly one. A pre-normalization defect above 1e-6 is rejected
  // unless renormalize is set. When atoms and a density coexist the density
  // alone absorbs the rescale: atom masses are exact data, the sampled
  // density is the approximate part.
  static Measure make(SupportDomain domain, std::vector<Atom> atoms,
                      std::optional<DensitySpec> density, bool renormalize = false);

  static Measure point_mass(double location, SupportDomain domain = SupportDomain::RealLine);

  // Named closed-form measures, sampled on edge-resolving grids:
  //   semicircle    var > 0        on [-2 sqrt(var), 2 sqrt(var)]
  //   free_poisson  lambda > 0     on [(1-sqrt(lambda))^2, (1+sqrt(lambda))^2],
  //                                plus (1-lambda) delta_0 when lambda < 1
  //   arcsine                      density 1/(pi sqrt(t(4-t))) on (0, 4)
  //   haar                         uniform on the unit circle
  static Measure semicircle(double variance, std::size_t grid_size = kDefaultGridSize);
  static Measure free_poisson(double lambda, std::size_t grid_size = kDefaultGridSize);
  static Measure arcsine(std::size_t grid_size = kDefaultGridSize);
  static Measure haar(std::size_t grid_size = kDefaultGridSize);
  static Measure builtin(const std::string& name, const std::map<std::string, double>& params,
                         std::size_t grid_size = kDefaultGridSize);

  SupportDomain domain() const { return domain_; }
  const std::vector<Atom>& atoms() const { return atoms_; }
  bool has_density() const { return !density_.grid.empty(); }
  const DensitySpec& density() const { return density_; }

  double support_lo() const { return lo_; }
  double support_hi() const { return hi_; }
  // Scale used for default epsilon choices; 1 for circle measures.
  double support_radius() const;

  double total_atom_mass() const;
  double atom_mass_at(double location, double tol = 1e-12) const;
  bool is_point_mass() const { return atoms_.size() == 1 && !has_density(); }

  // Piecewise-linear interpolation of the density part; zero off the grid.
  double density_at(double t) const;

  // Atom sum plus trapezoidal integral of f against the density.
  double integrate(const std::function<double(double)>& f) const;
  std::complex<double> integrate_complex(const std::function<std::complex<double>(double)>& f) const;

  double moment(int k) const;
  double mean() const { return moment(1); }
  double variance() const;
  // Circle moment m_n = integral of e^{i n theta}; moment(k) above is the
  // angle moment and is not used for circle transforms.
  std::complex<double> circle_moment(int n) const;

  // Left-continuous generalized inverse of the CDF at p in (0, 1).
  double quantile(double p) const;

  Measure translated(double c) const;       // real line only
  Measure dilated(double c) const;          // c > 0, real domains
  Measure rotated(double angle) const;      // circle only

  // Total mass discarded or rescaled during construction.
  double normalization_defect() const { return normalization_defect_; }

 private:
  Measure() = default;

  SupportDomain domain_ = SupportDomain::RealLine;
  std::vector<Atom> atoms_;   // sorted by location
  DensitySpec density_;
  double lo_ = 0.0;
  double hi_ = 0.0;
  double normalization_defect_ = 0.0;
};

struct MeasurePair {
  Measure first;
  Measure second;

  MeasurePair(Measure a, Measure b);
  SupportDomain domain() const { return first.domain(); }
};

double trapezoid_mass(const DensitySpec& density);

// Reduces an angle to the canonical circle parameterization [0, 2*pi).
double wrap_angle(double theta);

// Strictly increasing grid on [lo, hi] whose node spacing shrinks toward both
// endpoints, suitable for densities with inverse-square-root edge behaviour.
std::vector<double> edge_clustered_grid(double lo, double hi, std::size_t n);

}  // namespace freedenoise
