#pragma once

#include <complex>

namespace spinnoise {

/// Faddeeva function w(z) = exp(-z^2) erfc(-iz).
///
/// Weideman's rational expansion with 40 terms in the upper half plane
/// (relative error ~1e-13 for the imaginary part over the whole half plane);
/// the lower half plane follows from w(z) = 2 exp(-z^2) - w(-z).
std::complex<double> faddeeva(std::complex<double> z);

}  // namespace spinnoise
