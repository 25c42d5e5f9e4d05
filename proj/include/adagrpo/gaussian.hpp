#pragma once

namespace adagrpo {

/// Complementary error function from W. J. Cody's rational Chebyshev
/// approximations (Math. Comp. 1969). Relative error near 1e-16 on the
/// whole real line.
double erfc_cody(double x);

/// Standard normal CDF. Exactly 0 below -8 and 1 above 8; throws
/// std::domain_error on NaN or infinite input.
double phi(double x);

}  // namespace adagrpo
