#include "freedenoise/subordination.hpp"

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <utility>

#include "freedenoise/errors.hpp"
#include "freedenoise/parallel.hpp"

namespace freedenoise {

namespace {

constexpr std::size_t kSweepChunk = 64;

std::string complex_str(Complex z) {
  std::ostringstream os;
  os << z.real() << (z.imag() < 0.0 ? " - " : " + ") << std::abs(z.imag()) << "i";
  return os.str();
}

struct IterationOutcome {
  Complex w{0.0, 0.0};
  int iterations = 0;
  bool converged = false;
};

// Damped Picard iteration with periodic safeguarded Aitken Delta^2 jumps.
// `valid` gates extrapolated candidates (and damped steps) so they stay where
// the map is defined; plain map outputs are trusted because every map used
// here is a self-map of its region. A jump is accepted only when it shrinks
// the step size, so the plain iteration's convergence guarantee is preserved.
// The acceleration matters for near-rotational maps (e.g. two-atom circle
// factors behave like w -> z^2 w, whose plain iteration needs ~|log tol|/eps
// steps at radius 1 - eps, but is geometric and hence solved exactly by one
// Delta^2 step).
template <class Map, class Valid>
IterationOutcome run_fixed_point(Complex w0, const SubordinationOptions& opt, const Map& map,
                                 const Valid& valid) {
  IterationOutcome out;
  Complex w = w0;
  Complex hist1 = w;  // previous iterate
  Complex hist2 = w;  // second-previous iterate
  int history = 0;    // consecutive steps available for extrapolation
  double last_step = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < opt.max_iterations; ++iter) {
    const Complex tw = map(w);
    const Complex delta = tw - w;
    const double step = std::abs(delta);
    if (step < opt.tol_scale * (1.0 + std::abs(tw))) {
      out.w = tw;
      out.iterations = iter + 1;
      out.converged = true;
      return out;
    }
    Complex next = iter >= opt.damping_after ? w + opt.damping * delta : tw;
    if (!valid(next)) next = tw;  // a damped step may cut across an excluded ray
    hist2 = hist1;
    hist1 = w;
    w = next;
    ++history;
    last_step = step;
    if (opt.aitken_every > 0 && history >= 2 && (iter + 1) % opt.aitken_every == 0) {
      const Complex d1 = w - hist1;
      const Complex d0 = hist1 - hist2;
      const Complex denom = d1 - d0;
      if (std::abs(denom) > 1e-300) {
        const Complex cand = w - d1 * d1 / denom;
        if (valid(cand)) {
          const Complex tc = map(cand);
          const double cand_step = std::abs(tc - cand);
          if (cand_step < 0.5 * last_step && valid(tc)) {
            if (cand_step < opt.tol_scale * (1.0 + std::abs(tc))) {
              out.w = tc;
              out.iterations = iter + 2;
              out.converged = true;
              return out;
            }
            hist2 = cand;
            hist1 = cand;
            w = tc;
            history = 1;
            last_step = cand_step;
          }
        }
      }
    }
  }
  out.w = w;
  out.iterations = opt.max_iterations;
  out.converged = false;
  return out;
}

std::vector<SubordinationPoint> sweep_with(
    const std::vector<Complex>& z, const std::vector<Complex>* warm,
    const std::function<SubordinationPoint(Complex, std::optional<Complex>)>& solve) {
  std::vector<SubordinationPoint> out(z.size());
  parallel_for_chunks(z.size(), kSweepChunk, [&](std::size_t begin, std::size_t end) {
    std::optional<Complex> carry;
    for (std::size_t i = begin; i < end; ++i) {
      std::optional<Complex> seed = carry;
      if (!seed && warm) seed = (*warm)[i];
      out[i] = solve(z[i], seed);
      carry = out[i].converged ? std::optional<Complex>(out[i].omega1) : std::nullopt;
    }
  });
  return out;
}

[[noreturn]] void throw_no_convergence(const char* what, Complex z, double residual) {
  std::ostringstream os;
  os << what << " subordination did not converge at z = " << complex_str(z) << " (residual "
     << residual << ")";
  throw NoConvergence(os.str());
}

}  // namespace

AdditiveSubordination::AdditiveSubordination(MeasurePair pair, SubordinationOptions options)
    : pair_(std::move(pair)),
      options_(options),
      eval_mu_(pair_.first),
      eval_nu_(pair_.second) {
  if (pair_.domain() == SupportDomain::UnitCircle)
    throw DomainViolation("additive free convolution needs factors on the real line");
  mu_point_ = pair_.first.is_point_mass();
  nu_point_ = pair_.second.is_point_mass();
  if (mu_point_) mu_loc_ = pair_.first.atoms().front().location;
  if (nu_point_) nu_loc_ = pair_.second.atoms().front().location;
}

SubordinationPoint AdditiveSubordination::solve(Complex z, std::optional<Complex> warm) const {
  SubordinationPoint p;
  try {
    if (nu_point_) {
      // Adding delta_c shifts: omega1(z) = z - c, omega2(z) = c + F_mu(z - c).
      p.omega1 = z - nu_loc_;
      p.omega2 = nu_loc_ + eval_mu_.reciprocal(p.omega1);
    } else if (mu_point_) {
      p.omega2 = z - mu_loc_;
      p.omega1 = mu_loc_ + eval_nu_.reciprocal(p.omega2);
    } else {
      const double sign = z.imag() >= 0.0 ? 1.0 : -1.0;
      auto valid = [sign](Complex w) { return sign * w.imag() > 0.0; };
      auto map = [&](Complex w) {
        const Complex inner = z + eval_mu_.reciprocal(w) - w;
        return z + eval_nu_.reciprocal(inner) - inner;
      };
      const Complex w0 = warm && valid(*warm) ? *warm : z;
      const IterationOutcome outcome = run_fixed_point(w0, options_, map, valid);
      p.omega1 = outcome.w;
      p.iterations = outcome.iterations;
      p.converged = outcome.converged;
      p.omega2 = z + eval_mu_.reciprocal(p.omega1) - p.omega1;
    }
    p.residual = std::abs(eval_mu_.cauchy(p.omega1) - eval_nu_.cauchy(p.omega2));
  } catch (const Error&) {
    p.converged = false;
    p.residual = std::numeric_limits<double>::infinity();
  }
  return p;
}

SubordinationPoint AdditiveSubordination::at(Complex z, std::optional<Complex> warm) const {
  SubordinationPoint p = solve(z, warm);
  if (!p.converged) throw_no_convergence("additive", z, p.residual);
  return p;
}

std::vector<SubordinationPoint> AdditiveSubordination::sweep(
    const std::vector<Complex>& z, const std::vector<Complex>* warm_omega1) const {
  return sweep_with(z, warm_omega1,
                    [this](Complex zi, std::optional<Complex> w) { return solve(zi, w); });
}

MultiplicativeSubordination::MultiplicativeSubordination(MeasurePair pair,
                                                         SubordinationOptions options)
    : pair_(std::move(pair)),
      options_(options),
      kind_(pair_.domain() == SupportDomain::UnitCircle ? SubordinationKind::MultiplicativeCircle
                                                        : SubordinationKind::MultiplicativePositive),
      eval_mu_(pair_.first),
      eval_nu_(pair_.second) {
  if (pair_.domain() == SupportDomain::RealLine)
    throw DomainViolation(
        "multiplicative free convolution needs nonnegative or unit-circle factors");
  mu_point_ = pair_.first.is_point_mass();
  nu_point_ = pair_.second.is_point_mass();
  if (mu_point_) mu_loc_ = pair_.first.atoms().front().location;
  if (nu_point_) nu_loc_ = pair_.second.atoms().front().location;
}

Complex MultiplicativeSubordination::eta_ratio_mu(Complex w) const {
  if (std::abs(w) < 1e-14) return eval_mu_.first_moment();
  return eval_mu_.eta(w) / w;
}

Complex MultiplicativeSubordination::eta_ratio_nu(Complex w) const {
  if (std::abs(w) < 1e-14) return eval_nu_.first_moment();
  return eval_nu_.eta(w) / w;
}

SubordinationPoint MultiplicativeSubordination::solve(Complex z,
                                                      std::optional<Complex> warm) const {
  const bool circle = kind_ == SubordinationKind::MultiplicativeCircle;
  auto factor_value = [circle](double loc) {
    return circle ? std::polar(1.0, loc) : Complex(loc, 0.0);
  };
  SubordinationPoint p;
  try {
    if (z == Complex(0.0, 0.0)) return p;  // eta(0) = 0 pins omega(0) = 0
    if (nu_point_) {
      const Complex c = factor_value(nu_loc_);
      if (std::abs(c) == 0.0) {
        // A delta_0 factor absorbs the product; the partner subordination
        // degenerates to its tangent slope at the origin.
        p.omega2 = z * eval_mu_.first_moment();
      } else {
        p.omega1 = c * z;
        p.omega2 = z * eta_ratio_mu(p.omega1);
      }
    } else if (mu_point_) {
      const Complex c = factor_value(mu_loc_);
      if (std::abs(c) == 0.0) {
        p.omega1 = z * eval_nu_.first_moment();
      } else {
        p.omega2 = c * z;
        p.omega1 = z * eta_ratio_nu(p.omega2);
      }
    } else {
      std::function<bool(Complex)> valid;
      if (circle) {
        valid = [](Complex w) { return std::abs(w) < 1.0; };
      } else if (z.imag() != 0.0) {
        // Queries at 1/(t + i eps) live in one open half-plane; keep
        // extrapolated candidates there (plain iterates may round the slit
        // through the negative axis on their own).
        const double sign = z.imag() > 0.0 ? 1.0 : -1.0;
        valid = [sign](Complex w) {
          return sign * w.imag() > 0.0 || (w.imag() == 0.0 && w.real() < 0.0);
        };
      } else {
        // Real negative z: the iteration stays on the negative axis.
        valid = [](Complex w) { return w.real() < 0.0; };
      }
      auto map = [&](Complex w) { return z * eta_ratio_nu(z * eta_ratio_mu(w)); };
      const Complex w0 = warm && valid(*warm) ? *warm : z;
      const IterationOutcome outcome = run_fixed_point(w0, options_, map, valid);
      p.omega1 = outcome.w;
      p.iterations = outcome.iterations;
      p.converged = outcome.converged;
      p.omega2 = z * eta_ratio_mu(p.omega1);
    }
    p.residual = std::abs(eval_mu_.eta(p.omega1) - eval_nu_.eta(p.omega2));
  } catch (const Error&) {
    p.converged = false;
    p.residual = std::numeric_limits<double>::infinity();
  }
  return p;
}

SubordinationPoint MultiplicativeSubordination::at(Complex z, std::optional<Complex> warm) const {
  SubordinationPoint p = solve(z, warm);
  if (!p.converged) throw_no_convergence("multiplicative", z, p.residual);
  return p;
}

std::vector<SubordinationPoint> MultiplicativeSubordination::sweep(
    const std::vector<Complex>& z, const std::vector<Complex>* warm_omega1) const {
  return sweep_with(z, warm_omega1,
                    [this](Complex zi, std::optional<Complex> w) { return solve(zi, w); });
}

double psi_inverse_negative(const Measure& mu, double y) {
  if (mu.domain() == SupportDomain::UnitCircle)
    throw DomainViolation("negative-axis moment-transform inverse needs a real-domain measure");
  const double floor_value = mu.atom_mass_at(0.0) - 1.0;
  if (!(y > floor_value && y < 0.0)) {
    std::ostringstream os;
    os << "value " << y << " is outside the negative-axis range (" << floor_value << ", 0)";
    throw DomainViolation(os.str());
  }
  const ComplexTransformEvaluator eval(mu);
  auto psi_at = [&](double s) { return eval.psi(Complex(-std::exp(s), 0.0)).real(); };
  // psi(-e^s) decreases in s from 0 toward mu({0}) - 1; bracket then bisect.
  double s_lo = -40.0, s_hi = 40.0;
  for (int round = 0; round < 60 && psi_at(s_lo) < y; ++round) s_lo -= 20.0;
  for (int round = 0; round < 60 && psi_at(s_hi) > y; ++round) s_hi += 20.0;
  if (psi_at(s_lo) < y || psi_at(s_hi) > y)
    throw NoConvergence("could not bracket the negative-axis moment-transform inverse");
  double s_mid = 0.5 * (s_lo + s_hi);
  for (int iter = 0; iter < 200; ++iter) {
    s_mid = 0.5 * (s_lo + s_hi);
    const double value = psi_at(s_mid);
    if (std::abs(value - y) < 1e-14) break;
    (value > y ? s_lo : s_hi) = s_mid;
  }
  return -std::exp(s_mid);
}

ZeroLimit omega_zero_limit(const MeasurePair& pair) {
  if (pair.domain() != SupportDomain::NonNegativeReals)
    throw DomainViolation("the zero limit applies to the nonnegative half-line product");
  const double mu0 = pair.first.atom_mass_at(0.0);
  const double nu0 = pair.second.atom_mass_at(0.0);
  if (mu0 >= nu0) return {true, 0.0};
  if (nu0 >= 1.0) return {false, 0.0};  // delta_0 partner: the limit collapses to the origin
  return {false, psi_inverse_negative(pair.first, nu0 - 1.0)};
}

Complex omega_additive(const MeasurePair& pair, Complex z) {
  return AdditiveSubordination(pair).at(z).omega1;
}

Complex omega_multiplicative_positive(const MeasurePair& pair, Complex z) {
  if (pair.domain() != SupportDomain::NonNegativeReals)
    throw DomainViolation("expected factors on the nonnegative half-line");
  return MultiplicativeSubordination(pair).at(z).omega1;
}

Complex omega_circle(const MeasurePair& pair, Complex z) {
  if (pair.domain() != SupportDomain::UnitCircle)
    throw DomainViolation("expected factors on the unit circle");
  return MultiplicativeSubordination(pair).at(z).omega1;
}

namespace {

Complex boundary_point(SubordinationKind kind, double t, double eps) {
  switch (kind) {
    case SubordinationKind::Additive:
      return {t, eps};
    case SubordinationKind::MultiplicativePositive:
      return 1.0 / Complex(t, eps);
    case SubordinationKind::MultiplicativeCircle:
      return (1.0 - eps) * std::polar(1.0, -t);
  }
  return {};
}

// Boundary samples of the product/sum transform, expressed through omega1:
// additive G(t + i eps), positive-product G(t + i eps) = (psi(omega1) + 1) / (t + i eps),
// circle psi at radius 1 - eps.
template <class Sub>
Complex target_transform(const Sub& sub, SubordinationKind kind, Complex omega1, double t,
                         double eps) {
  switch (kind) {
    case SubordinationKind::Additive:
      return sub.mu_eval().cauchy(omega1);
    case SubordinationKind::MultiplicativePositive:
      return (sub.mu_eval().psi(omega1) + 1.0) / Complex(t, eps);
    case SubordinationKind::MultiplicativeCircle:
      return sub.mu_eval().psi(omega1);
  }
  return {};
}

bool omega_regular(SubordinationKind kind, Complex omega1, double threshold) {
  switch (kind) {
    case SubordinationKind::Additive:
      return omega1.imag() > threshold;
    case SubordinationKind::MultiplicativePositive:
      return -omega1.imag() > threshold;
    case SubordinationKind::MultiplicativeCircle:
      return 1.0 - std::abs(omega1) > threshold;
  }
  return false;
}

template <class Sub>
SubordinationResult extend_impl(const Sub& sub, SubordinationKind kind,
                                const std::vector<double>& t_grid, const BoundaryOptions& options,
                                const std::vector<double>& atom_candidates) {
  if (options.levels < 2)
    throw DomainViolation("boundary extension needs at least two epsilon levels");
  if (!(options.eps > 0.0)) throw DomainViolation("boundary extension needs eps > 0");
  const std::size_t n = t_grid.size();
  const bool scheduled = !options.eps_nodes.empty();
  if (scheduled && options.eps_nodes.size() != n)
    throw DomainViolation("per-node eps schedule must match the grid size");
  if (scheduled)
    for (double e : options.eps_nodes)
      if (!(e > 0.0)) throw DomainViolation("per-node eps schedule must be positive");

  SubordinationResult res;
  res.kind = kind;
  res.t_grid = t_grid;
  const Complex not_a_number(std::numeric_limits<double>::quiet_NaN(),
                             std::numeric_limits<double>::quiet_NaN());
  std::vector<char> healthy(n, 1);
  res.levels.reserve(static_cast<std::size_t>(options.levels));
  const std::vector<Complex>* warm = nullptr;
  double eps = options.eps;
  double level_factor = 1.0;
  for (int level = 0; level < options.levels; ++level, eps *= 0.5, level_factor *= 0.5) {
    BoundaryLevel bl;
    bl.eps = eps;
    std::vector<Complex> z(n);
    if (scheduled) {
      bl.eps_nodes.resize(n);
      for (std::size_t i = 0; i < n; ++i) bl.eps_nodes[i] = options.eps_nodes[i] * level_factor;
    }
    const auto node_eps = [&](std::size_t i) { return scheduled ? bl.eps_nodes[i] : eps; };
    for (std::size_t i = 0; i < n; ++i) z[i] = boundary_point(kind, t_grid[i], node_eps(i));
    const std::vector<SubordinationPoint> pts = sub.sweep(z, warm);
    bl.omega1.resize(n);
    bl.omega2.resize(n);
    bl.residual.resize(n);
    bl.target_g.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      bl.omega1[i] = pts[i].omega1;
      bl.omega2[i] = pts[i].omega2;
      bl.residual[i] = pts[i].residual;
      if (!pts[i].converged) healthy[i] = 0;
      try {
        bl.target_g[i] = target_transform(sub, kind, pts[i].omega1, t_grid[i], node_eps(i));
      } catch (const Error&) {
        bl.target_g[i] = not_a_number;
        healthy[i] = 0;
      }
    }
    res.levels.push_back(std::move(bl));
    warm = &res.levels.back().omega1;
  }

  const BoundaryLevel& full = res.levels[res.levels.size() - 2];
  const BoundaryLevel& half = res.levels.back();
  res.omega1.resize(n);
  res.omega2.resize(n);
  res.density.resize(n);
  res.in_U.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    res.omega1[i] = extrapolate_levels(full.omega1[i], half.omega1[i]);
    res.omega2[i] = extrapolate_levels(full.omega2[i], half.omega2[i]);
    const Complex g = extrapolate_levels(full.target_g[i], half.target_g[i]);
    const double raw = kind == SubordinationKind::MultiplicativeCircle
                           ? (2.0 * g.real() + 1.0) / (2.0 * std::numbers::pi)
                           : -g.imag() / std::numbers::pi;
    res.density[i] = std::isfinite(raw) ? std::max(0.0, raw) : 0.0;
    res.in_U[i] = healthy[i] && omega_regular(kind, res.omega1[i], options.im_threshold) &&
                          res.density[i] > options.density_threshold
                      ? 1
                      : 0;
  }

  for (double loc : atom_candidates) {
    AtomProbe probe;
    probe.location = loc;
    std::vector<Complex> omega_levels(static_cast<std::size_t>(options.levels));
    for (int level = 0; level < options.levels; ++level) {
      const double eps_l = res.levels[static_cast<std::size_t>(level)].eps;
      const std::vector<Complex> zq{boundary_point(kind, loc, eps_l)};
      std::vector<Complex> seed;
      const std::vector<Complex>* seed_ptr = nullptr;
      if (level > 0) {
        seed = {omega_levels[static_cast<std::size_t>(level - 1)]};
        seed_ptr = &seed;
      }
      const std::vector<SubordinationPoint> pts = sub.sweep(zq, seed_ptr);
      omega_levels[static_cast<std::size_t>(level)] = pts[0].omega1;
      Complex g = not_a_number;
      try {
        g = target_transform(sub, kind, pts[0].omega1, loc, eps_l);
      } catch (const Error&) {
      }
      probe.g_levels.push_back(g);
    }
    probe.omega1 = extrapolate_levels(omega_levels[omega_levels.size() - 2],
                                      omega_levels.back());
    res.atom_probes.push_back(std::move(probe));
  }

  if (kind == SubordinationKind::MultiplicativePositive)
    res.zero_limit = omega_zero_limit(MeasurePair(sub.mu(), sub.nu()));
  return res;
}

}  // namespace

SubordinationResult extend_to_boundary(const AdditiveSubordination& sub,
                                       const std::vector<double>& t_grid,
                                       const BoundaryOptions& options,
                                       const std::vector<double>& atom_candidates) {
  return extend_impl(sub, SubordinationKind::Additive, t_grid, options, atom_candidates);
}

SubordinationResult extend_to_boundary(const MultiplicativeSubordination& sub,
                                       const std::vector<double>& t_grid,
                                       const BoundaryOptions& options,
                                       const std::vector<double>& atom_candidates) {
  return extend_impl(sub, sub.kind(), t_grid, options, atom_candidates);
}

}  // namespace freedenoise
