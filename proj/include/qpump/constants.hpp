#pragma once

#include <numbers>

namespace qpump {

// Unit conventions used throughout the toolkit:
//   - energies are stored as E/h in GHz (so "hbar*omega" and "h*nu" both map
//     to the same GHz number for a qubit of frequency nu),
//   - times in microseconds, rates in 1/us,
//   - temperatures in K, converted through kb_over_h.
struct Constants {
    // CODATA-derived conversions (kB/h and 1 meV / h).
    static constexpr double kb_over_h_ghz_per_k = 20.836619;
    static constexpr double mev_to_ghz = 241.798924;
    // Angular rate in 1/us corresponding to an energy E/h of 1 GHz.
    static constexpr double rate_scale_per_us = 2.0 * std::numbers::pi * 1e3;
};

}  // namespace qpump
