#pragma once

namespace qpump {

// Modified Bessel function of the second kind, order zero. x > 0.
double bessel_k0(double x);

// exp(x) * K0(x); stays representable for large x where K0 underflows.
double bessel_k0_scaled(double x);

// Modified Bessel function of the first kind, order zero.
double bessel_i0(double x);

}  // namespace qpump
