#pragma once

#include <complex>
#include <vector>

namespace paracalc::fft {

/// In-place complex DFT on an n^dim row-major array.
/// sign = -1 forward (unnormalized), +1 backward (unnormalized).
void transform(std::vector<std::complex<double>>& data, int dim, int n, int sign);

/// Forward transform scaled by 1/n^dim.
void forward_normalized(std::vector<std::complex<double>>& data, int dim, int n);

}  // namespace paracalc::fft
