#pragma once

#include "echosim/acoustics.hpp"

#include <vector>

namespace echosim::detail {

/// Label ids as floats, Gaussian-smoothed with edge clamping; `tmp` is
/// scratch of the same size.
void transition_field(const Label* labels, int height, int width, double sigma_px, float* field, float* tmp);

/// cos(theta) from a Sobel gradient of the smoothed transition field, scaled
/// to physical pixel spacing. 1 where the gradient vanishes.
void incidence_cosine(const float* field, int height, int width, double lateral_res, double axial_res, float* out);

/// Zero-padded separable PSF; `tmp` is scratch of the same size.
void apply_psf(const float* in, float* out, float* tmp, int height, int width, const PsfKernels& psf);

}  // namespace echosim::detail
