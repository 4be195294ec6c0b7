#pragma once

#include <string>
#include <vector>

#include "freedenoise/measure.hpp"
#include "freedenoise/subordination.hpp"
#include "freedenoise/transforms.hpp"

namespace freedenoise {

// One atom of a free convolution together with the factor atoms that produced
// it: gamma = alpha + beta (additive), alpha * beta (positive product), or
// alpha + beta mod 2*pi (circle). The origin atom of the positive product
// stores alpha = beta = 0; its mass is max{mu({0}), nu({0})} even when only
// one factor charges the origin.
struct ConvolvedAtom {
  double location = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double mass = 0.0;
};

struct ConvolutionOptions {
  std::size_t grid_size = kDefaultGridSize;
  // Boundary distance, relative to the output support scale (absolute radial
  // distance 1 - r on the circle); halved once per extra level.
  double eps_rel = 1e-3;
  int levels = 2;
  // Grid padding beyond the arithmetic support bounds, relative to the span.
  double pad_rel = 0.025;
};

struct ConvolutionOutput {
  Measure result;
  SubordinationResult subordination;
  std::vector<ConvolvedAtom> atom_table;
  double mass_defect = 0.0;  // pre-renormalization mass error of the recovery
  // Bookkeeping for boundary points excluded from the regular set.
  std::string exceptional_set_note;
};

// Free additive convolution of two real-line measures. Atom locations come
// from scanning factor-atom pairs whose masses exceed one in total; their
// masses are extracted from the residue of the subordinated Cauchy transform.
// The density is recovered by Stieltjes inversion of G_mu(omega1(t + i eps)).
ConvolutionOutput free_add_convolve(const MeasurePair& pair,
                                    const ConvolutionOptions& options = {});

// Free multiplicative convolution on the nonnegative half-line. The atom at
// zero has mass max{mu({0}), nu({0})} exactly; positive atoms follow the same
// pairing-and-residue rule as the additive case.
ConvolutionOutput free_mult_convolve_positive(const MeasurePair& pair,
                                              const ConvolutionOptions& options = {});

// Free multiplicative convolution of two unit-circle measures. The angle
// density is retrieved from 2 Re psi(r e^{-i theta}) + 1 at radii r = 1 - eps,
// 1 - eps/2 with linear extrapolation; atoms again by residue extraction.
ConvolutionOutput free_mult_convolve_circle(const MeasurePair& pair,
                                            const ConvolutionOptions& options = {});

}  // namespace freedenoise
