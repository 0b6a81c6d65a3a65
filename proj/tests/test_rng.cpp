#include <doctest.h>

#include <cmath>

#include "qpump/rng.hpp"

using qpump::Philox4x32;

TEST_CASE("Philox4x32-10 known-answer vectors") {
    // Reference vectors from the Random123 distribution.
    auto out = Philox4x32::block({0, 0, 0, 0}, {0, 0});
    CHECK(out[0] == 0x6627e8d5u);
    CHECK(out[1] == 0xe169c58du);
    CHECK(out[2] == 0xbc57ac4cu);
    CHECK(out[3] == 0x9b00dbd8u);

    out = Philox4x32::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                            {0xffffffffu, 0xffffffffu});
    CHECK(out[0] == 0x408f276du);
    CHECK(out[1] == 0x41c83b0eu);
    CHECK(out[2] == 0xa20bc7c6u);
    CHECK(out[3] == 0x6d5451fdu);

    out = Philox4x32::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                            {0xa4093822u, 0x299f31d0u});
    CHECK(out[0] == 0xd16cfe09u);
    CHECK(out[1] == 0x94fdccebu);
    CHECK(out[2] == 0x5001e420u);
    CHECK(out[3] == 0x24126ea1u);
}

TEST_CASE("streams are deterministic and distinct") {
    Philox4x32 a(123, 5, 0), b(123, 5, 0);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    Philox4x32 c(123, 6, 0), d(123, 5, 1), e(124, 5, 0);
    Philox4x32 base(123, 5, 0);
    bool all_equal_c = true, all_equal_d = true, all_equal_e = true;
    Philox4x32 base2(123, 5, 0), base3(123, 5, 0);
    for (int i = 0; i < 16; ++i) {
        all_equal_c &= base.next_u64() == c.next_u64();
        all_equal_d &= base2.next_u64() == d.next_u64();
        all_equal_e &= base3.next_u64() == e.next_u64();
    }
    CHECK_FALSE(all_equal_c);
    CHECK_FALSE(all_equal_d);
    CHECK_FALSE(all_equal_e);
}

TEST_CASE("uniform draws are open-interval and unbiased") {
    Philox4x32 rng(2024, 0, 0);
    const int n = 100000;
    double sum = 0;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        REQUIRE(u > 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    const double se = 1.0 / std::sqrt(12.0 * n);
    CHECK(std::fabs(sum / n - 0.5) < 5 * se);
}

TEST_CASE("exponential draws have the right mean") {
    Philox4x32 rng(7, 1, 2);
    const int n = 100000;
    const double rate = 0.25;
    double sum = 0;
    for (int i = 0; i < n; ++i) sum += rng.exponential(rate);
    const double se = (1.0 / rate) / std::sqrt(static_cast<double>(n));
    CHECK(std::fabs(sum / n - 1.0 / rate) < 5 * se);
}
