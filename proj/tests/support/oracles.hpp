#pragma once

// Closed-form transforms and quadrature routines used as test oracles.
// Everything here is computed directly from textbook formulas, independent
// of the library's piecewise-linear evaluators.

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <vector>

namespace oracle {

using Complex = std::complex<double>;

// Square root of w with the sign chosen so the result aligns with `like`,
// i.e. Re(conj(like) * sqrt) >= 0. Picks the branch that behaves like the
// polynomial part at infinity.
inline Complex aligned_sqrt(Complex w, Complex like) {
  Complex s = std::sqrt(w);
  if (s.real() * like.real() + s.imag() * like.imag() < 0) s = -s;
  return s;
}

// Semicircle with variance v: G(z) = (z - sqrt(z^2 - 4v)) / (2v).
inline Complex g_semicircle(double v, Complex z) {
  const Complex s = aligned_sqrt(z * z - 4.0 * v, z);
  return (z - s) / (2.0 * v);
}

inline double semicircle_density(double v, double t) {
  const double disc = 4.0 * v - t * t;
  return disc > 0 ? std::sqrt(disc) / (2.0 * std::numbers::pi * v) : 0.0;
}

// Free Poisson of rate lambda (mean lambda):
// G(z) = (z + 1 - lambda - sqrt((z - 1 - lambda)^2 - 4 lambda)) / (2z).
inline Complex g_free_poisson(double lambda, Complex z) {
  const Complex zeta = z - 1.0 - lambda;
  const Complex s = aligned_sqrt(zeta * zeta - 4.0 * lambda, zeta);
  return (z + 1.0 - lambda - s) / (2.0 * z);
}

inline double free_poisson_density(double lambda, double t) {
  const double disc = 4.0 * lambda - (t - 1.0 - lambda) * (t - 1.0 - lambda);
  return (disc > 0 && t > 0) ? std::sqrt(disc) / (2.0 * std::numbers::pi * t) : 0.0;
}

// Arcsine law on (0, 4): G(z) = 1 / sqrt(z(z - 4)), F(z) = sqrt(z(z - 4)),
// and the subordination function of the two-point self-convolution,
// omega(z) = z/2 + sqrt(z(z-4))/2.
inline Complex f_arcsine(Complex z) { return aligned_sqrt(z * (z - 4.0), z - 2.0); }
inline Complex g_arcsine(Complex z) { return 1.0 / f_arcsine(z); }
inline Complex omega_arcsine(Complex z) { return 0.5 * z + 0.5 * f_arcsine(z); }

inline double arcsine_density(double t) {
  const double prod = t * (4.0 - t);
  return prod > 0 ? 1.0 / (std::numbers::pi * std::sqrt(prod)) : 0.0;
}

// Symmetric two-point measure at +-1 convolves with itself to the arcsine
// law on (-2, 2); omega(z) = (z + sqrt(z^2 - 4)) / 2.
inline Complex g_arcsine_sym(Complex z) { return 1.0 / aligned_sqrt(z * z - 4.0, z); }
inline Complex omega_arcsine_sym(Complex z) {
  return 0.5 * (z + aligned_sqrt(z * z - 4.0, z));
}

// Overlap closed forms, each worked out by hand from the boundary values of
// the subordination functions above and re-checked by quadrature (the kernel
// densities below integrate to one and have mean s).

// Self-convolution of the half-half atoms at 0 and 2 (arcsine target):
// omega(t + i0) = t/2 + i sqrt(t(4-t))/2 on (0, 4), so
// o(s,t) = (t(4-t)/2) / ((t/2 - s)^2 + t(4-t)/4).
inline double overlap_arcsine(double s, double t) {
  const double prod = t * (4.0 - t);
  if (prod <= 0) return 0.0;
  const double d = 0.5 * t - s;
  return 0.5 * prod / (d * d + 0.25 * prod);
}

// The s = 0 kernel of the same pair: density f(t) o(0,t) simplifies to
// sqrt((4-t)/t) / (2 pi); mass 1, mean 1 (checked by the sin^2 substitution).
inline double kernel_arcsine_zero_density(double t) {
  return (t > 0 && t < 4.0) ? std::sqrt((4.0 - t) / t) / (2.0 * std::numbers::pi) : 0.0;
}

// Semicircle noise of variance v against any signal: on the bulk
// o(s,t) = v / ((t - s - v Re G(t))^2 + (v Im G(t))^2) where G is the
// boundary Cauchy transform of the convolved law (Im G = -pi f).
inline double overlap_semicircle_noise(double v, double s, double t, Complex g_boundary) {
  const double re = t - s - v * g_boundary.real();
  const double im = v * g_boundary.imag();
  return v / (re * re + im * im);
}

// Twin semicircles semicircle(1) + semicircle(1): target semicircle(2) with
// G(t + i0) = (t - i sqrt(8 - t^2))/4, so o(s,t) = 1/((3t/4 - s)^2 + (8-t^2)/16).
inline double overlap_twin_semicircle(double s, double t) {
  const double disc = 8.0 - t * t;
  if (disc <= 0) return 0.0;
  const double re = 0.75 * t - s;
  return 1.0 / (re * re + disc / 16.0);
}

// Haar first factor against a second factor of circle mean m: all mixed
// moments reduce to E((uv)^n | u) = m^n u^n, so the kernel at angle s is the
// Poisson (harmonic-measure) kernel at the interior point m e^{is} and
// o(s,t) = (1 - |m|^2) / |1 - m e^{i(s-t)}|^2 against the uniform target.
inline double overlap_haar_poisson(Complex m, double s_angle, double t_angle) {
  const Complex u = m * std::polar(1.0, s_angle - t_angle);
  return (1.0 - std::norm(u)) / std::norm(1.0 - u);
}

struct AtomSpec {
  double location;
  double mass;
};

inline Complex g_atomic(const std::vector<AtomSpec>& atoms, Complex z) {
  Complex total{0.0, 0.0};
  for (const auto& a : atoms) total += a.mass / (z - a.location);
  return total;
}

// Composite Simpson rule with an even number of panels.
template <typename F>
auto simpson(F&& fn, double a, double b, int n) -> decltype(fn(a)) {
  if (n % 2) ++n;
  const double h = (b - a) / n;
  auto total = fn(a) + fn(b);
  for (int i = 1; i < n; ++i) total += fn(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return total * (h / 3.0);
}

// Integrals against the closed-form densities, using substitutions that
// remove the edge singularities entirely.

// semicircle(v): t = 2 sqrt(v) sin(u), f dt = (2/pi) cos^2(u) du.
template <typename F>
auto integrate_semicircle(double v, F&& fn, int n = 4000) -> decltype(fn(0.0)) {
  const double r = 2.0 * std::sqrt(v);
  return simpson(
      [&](double u) { return fn(r * std::sin(u)) * (2.0 / std::numbers::pi) *
                             std::cos(u) * std::cos(u); },
      -0.5 * std::numbers::pi, 0.5 * std::numbers::pi, n);
}

// free_poisson(lambda) absolutely continuous part:
// t = 1 + lambda - 2 sqrt(lambda) cos(u), f dt = (2 lambda / pi) sin^2(u)/t du.
// For lambda < 1 the atom (1 - lambda) delta_0 must be added by the caller.
template <typename F>
auto integrate_free_poisson_ac(double lambda, F&& fn, int n = 4000) -> decltype(fn(1.0)) {
  return simpson(
      [&](double u) {
        const double t = 1.0 + lambda - 2.0 * std::sqrt(lambda) * std::cos(u);
        // At lambda = 1 the edge touches t = 0 where sin^2(u)/t is 0/0; there
        // it reduces algebraically to (1 + cos u)/2.
        const double ratio =
            t > 1e-9 ? std::sin(u) * std::sin(u) / t : 0.5 * (1.0 + std::cos(u));
        return fn(t) * (2.0 * lambda / std::numbers::pi) * ratio;
      },
      0.0, std::numbers::pi, n);
}

// arcsine on (0, 4): t = 2 - 2 cos(u), f dt = du / pi.
template <typename F>
auto integrate_arcsine(F&& fn, int n = 4000) -> decltype(fn(1.0)) {
  return simpson([&](double u) { return fn(2.0 - 2.0 * std::cos(u)) / std::numbers::pi; },
                 0.0, std::numbers::pi, n);
}

}  // namespace oracle
