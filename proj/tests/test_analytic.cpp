#include <doctest.h>

#include <cmath>

#include "qpump/analytic.hpp"
#include "qpump/constants.hpp"
#include "qpump/validation.hpp"
#include "oracle_utils.hpp"

using namespace qpump;

namespace {

DeviceParams device_a() {
    DeviceParams d;
    d.gap_ghz = 0.233 * Constants::mev_to_ghz;
    d.me_small_table.f = {0.0, 0.0019, 0.004};
    d.me_small_table.me = {0.0, 0.240, 0.30};
    return d;
}

const DecayParams kFig1b{2.5, 23.0, 55.0};

}  // namespace

TEST_CASE("decay law") {
    CHECK(decay_population(0.0, kFig1b) == 1.0);

    SUBCASE("quasiparticle-free limit is a single exponential") {
        const DecayParams p{0.0, 23.0, 55.0};
        for (double t : {1.0, 10.0, 100.0})
            CHECK(decay_population(t, p) == doctest::Approx(std::exp(-t / 55.0)).epsilon(1e-15));
    }
    SUBCASE("device A parameters at t = 200 us, high-precision pin") {
        CHECK(decay_population(200.0, kFig1b) ==
              doctest::Approx(0.0021636788014523906).epsilon(1e-13));
    }
    SUBCASE("strictly decreasing, in (0,1]") {
        double prev = 1.0 + 1e-12;
        for (int i = 0; i <= 500; ++i) {
            const double p = decay_population(i * 1.0, kFig1b);
            CHECK(p > 0);
            CHECK(p < prev);
            prev = p;
        }
    }
    SUBCASE("long-time tail approaches exp(-n_avg) exp(-t/t1r)") {
        const double t = 400.0;
        const double tail = std::exp(-kFig1b.n_avg) * std::exp(-t / kFig1b.t1r_us);
        CHECK(decay_population(t, kFig1b) == doctest::Approx(tail).epsilon(1e-7));
    }
    SUBCASE("negative time is a domain error") {
        CHECK_THROWS_AS(decay_population(-1.0, kFig1b), std::domain_error);
    }
    SUBCASE("instantaneous log-slope decreases toward 1/t1r") {
        // d/dt[-ln p] must fall monotonically to the residual rate.
        const double h = 1e-3;
        double prev_rate = 1e300;
        for (double t = 1.0; t <= 500.0; t += 5.0) {
            const double rate = (std::log(decay_population(t - h, kFig1b)) -
                                 std::log(decay_population(t + h, kFig1b))) /
                                (2 * h);
            CHECK(rate <= prev_rate + 1e-12);
            CHECK(rate >= 1.0 / kFig1b.t1r_us - 1e-9);
            prev_rate = rate;
        }
        CHECK(prev_rate == doctest::Approx(1.0 / kFig1b.t1r_us).epsilon(1e-3));
    }
}

TEST_CASE("Poisson mixture reproduces the closed form") {
    const auto check = check_mixture_identity(5, 200);
    INFO(check.detail);
    CHECK(check.pass);
}

TEST_CASE("1/e decay time") {
    SUBCASE("single exponential gives exactly t1r") {
        CHECK(one_over_e_time({0.0, 23.0, 55.0}) == doctest::Approx(55.0).epsilon(1e-7));
    }
    SUBCASE("device A parameters against the grid-scan oracle") {
        const double t_star = one_over_e_time(kFig1b);
        const double scanned =
            oracle::one_over_e_scan([&](double t) { return decay_population(t, kFig1b); }, 2000.0);
        CHECK(t_star > 8.0);
        CHECK(t_star < 55.0);
        CHECK(t_star == doctest::Approx(scanned).epsilon(5e-4));
    }
    SUBCASE("pump-sequence endpoints reproduce the observed ordering") {
        const double before = one_over_e_time({2.2, 20.0, 55.0});
        const double after = one_over_e_time({0.5, 7.0, 55.0});
        CHECK(before < after);
        CHECK(after > 2.0 * before);
    }
    SUBCASE("monotone in t1r") {
        CHECK(one_over_e_time({2.5, 23.0, 80.0}) > one_over_e_time({2.5, 23.0, 55.0}));
    }
}

TEST_CASE("Poisson steady state") {
    SUBCASE("ratio two") {
        const auto s = poisson_steady(2.0, 1.0, 100);
        CHECK(s.mean == 2.0);
        CHECK(s.probs[0] == doctest::Approx(std::exp(-2.0)).epsilon(1e-12));
        double sum = 0;
        for (double p : s.probs) sum += p;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(s.tail_mass < 1e-12);
    }
    SUBCASE("reservoir rates from the recovery measurements") {
        const auto s = poisson_steady(1.0 / 150.0, 1.0 / 300.0, 200);
        CHECK(s.mean == doctest::Approx(2.0).epsilon(1e-15));
    }
    SUBCASE("empty bath gives a point mass") {
        const auto s = poisson_steady(0.0, 1.0, 50);
        CHECK(s.probs[0] == 1.0);
        CHECK(s.mean == 0.0);
    }
    SUBCASE("no steady state without an exit rate") {
        CHECK_THROWS_AS(poisson_steady(1.0, 0.0, 50), std::domain_error);
    }
}

TEST_CASE("mean quasiparticle recovery") {
    SUBCASE("steady state is a fixed point") {
        for (double t : {0.0, 100.0, 1e4})
            CHECK(mean_nqp(t, 2.0, 1.0 / 150, 1.0 / 300) == doctest::Approx(2.0).epsilon(1e-14));
    }
    SUBCASE("pinned value at one recovery time") {
        CHECK(mean_nqp(300.0, 0.6, 1.0 / 150, 1.0 / 300) ==
              doctest::Approx(1.4849687823599807).epsilon(1e-14));
    }
    SUBCASE("long-time limit") {
        CHECK(mean_nqp(1e7, 0.6, 1.0 / 150, 1.0 / 300) == doctest::Approx(2.0).epsilon(1e-10));
    }
}

TEST_CASE("thermal quasiparticle rate") {
    const auto dev = device_a();

    SUBCASE("pinned oracle values") {
        // Frozen from an independent high-precision evaluation with the
        // quadrature K0 reference.
        CHECK(thermal_rate(0.1, dev, 5.37) == doctest::Approx(7.71995874907412e-7).epsilon(1e-9));
        CHECK(thermal_rate(0.2, dev, 5.37) == doctest::Approx(0.913855152119011).epsilon(1e-9));
    }
    SUBCASE("gap suppression at low temperature") {
        CHECK(thermal_rate(0.001, dev, 5.37) == 0.0);             // underflows to zero
        CHECK(std::isfinite(thermal_rate_log(0.001, dev, 5.37)));  // log stays finite
    }
    SUBCASE("strictly increasing in temperature") {
        double prev = -1e300;
        for (double t = 0.02; t <= 0.3501; t += 0.005) {
            const double lg = thermal_rate_log(t, dev, 5.37);
            CHECK(lg > prev);
            prev = lg;
        }
    }
    SUBCASE("rate times the gap exponential stays polynomially bounded") {
        for (double t = 0.02; t <= 0.3501; t += 0.005) {
            const double kt = Constants::kb_over_h_ghz_per_k * t;
            const double g = thermal_rate_log(t, dev, 5.37) + dev.gap_ghz / kt;
            CHECK(std::isfinite(g));
            CHECK(g > 0.0);
            CHECK(g < 20.0);
        }
    }
    SUBCASE("temperature must be positive") {
        CHECK_THROWS_AS(thermal_rate(0.0, dev, 5.37), std::domain_error);
        CHECK_THROWS_AS(thermal_rate(-1.0, dev, 5.37), std::domain_error);
    }
}

TEST_CASE("total relaxation time") {
    const ThermalModel model{55.0, device_a()};

    SUBCASE("thermal term negligible at 100 mK") {
        CHECK(total_t1(0.1, model, 5.37) == doctest::Approx(55.0).epsilon(0.01));
    }
    SUBCASE("harmonic-sum limit at vanishing thermal rate") {
        CHECK(total_t1(0.02, model, 5.37) == doctest::Approx(55.0).epsilon(1e-10));
    }
    SUBCASE("equal rates halve t1ne") {
        // Find the temperature where the thermal rate crosses 1/t1ne.
        double lo = 0.1, hi = 0.35;
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            (thermal_rate(mid, model.device, 5.37) < 1.0 / model.t1ne_us ? lo : hi) = mid;
        }
        CHECK(total_t1(0.5 * (lo + hi), model, 5.37) ==
              doctest::Approx(model.t1ne_us / 2).epsilon(1e-6));
    }
    SUBCASE("bounded by both channels") {
        const double t1 = total_t1(0.25, model, 5.37);
        CHECK(t1 <= model.t1ne_us);
        CHECK(t1 <= 1.0 / thermal_rate(0.25, model.device, 5.37));
    }
}

TEST_CASE("flux dependence") {
    const auto dev = device_a();

    SUBCASE("qubit frequency") {
        CHECK(qubit_freq(0.0, dev) == dev.omega0_ghz);
        CHECK(qubit_freq(0.002, dev) == qubit_freq(-0.002, dev));
        const double f_star = dev.omega0_ghz / dev.eps_slope_ghz;
        CHECK(qubit_freq(f_star, dev) ==
              doctest::Approx(std::sqrt(2.0) * dev.omega0_ghz).epsilon(1e-14));
    }
    SUBCASE("t1qp at zero bias is exactly t1qp0") {
        const auto pt = t1qp_flux(0.0, 23.0, dev);
        CHECK(pt.t1qp_us == doctest::Approx(23.0).epsilon(1e-14));
        CHECK(pt.omega_ghz == dev.omega0_ghz);
        CHECK_FALSE(pt.clamped);
    }
    SUBCASE("matrix-element bracket at the crossover bias") {
        // ME_s = ME_L there, so the bracket is 1 + alpha = 1.54; with a flat
        // qubit the frequency factor drops out.
        auto flat = dev;
        flat.eps_slope_ghz = 0;
        const auto pt = t1qp_flux(0.0019, 23.0, flat);
        CHECK(pt.t1qp_us == doctest::Approx(23.0 / 1.54).epsilon(1e-12));
    }
    SUBCASE("closed-form identity at 50 grid points") {
        for (int i = 0; i < 50; ++i) {
            const double f = -0.004 + 0.008 * i / 49.0;
            const auto pt = t1qp_flux(f, 23.0, dev);
            const double me_s = dev.me_small_table.eval(f);
            const double expected_ratio = std::sqrt(dev.omega0_ghz / pt.omega_ghz) *
                                          (1.0 + dev.alpha * me_s * me_s /
                                                     (dev.me_large * dev.me_large));
            CHECK(23.0 / pt.t1qp_us == doctest::Approx(expected_ratio).epsilon(1e-12));
        }
    }
    SUBCASE("even in f") {
        for (double f : {0.0005, 0.0019, 0.0031}) {
            CHECK(t1qp_flux(f, 23.0, dev).t1qp_us ==
                  doctest::Approx(t1qp_flux(-f, 23.0, dev).t1qp_us).epsilon(1e-15));
        }
    }
    SUBCASE("clamp flag outside the table") {
        CHECK(t1qp_flux(0.01, 23.0, dev).clamped);
        CHECK_FALSE(t1qp_flux(0.004, 23.0, dev).clamped);
    }
}

TEST_CASE("characteristic energy estimate") {
    const double gap = 0.233 * Constants::mev_to_ghz;

    SUBCASE("equal populations give half the gap") {
        CHECK(energy_estimate(1.5, 1.5, gap) == doctest::Approx(gap / 2).epsilon(1e-14));
    }
    SUBCASE("pump-sequence drop reproduces the 70 mK scale") {
        const double de = energy_estimate(2.2, 0.5, gap);
        CHECK(de == doctest::Approx(1.45504).epsilon(1e-5));
        CHECK(de / Constants::kb_over_h_ghz_per_k * 1e3 == doctest::Approx(69.83).epsilon(1e-3));
    }
    SUBCASE("doubling the ratio quarters the energy") {
        const double base = energy_estimate(2.0, 1.0, gap);
        CHECK(energy_estimate(4.0, 1.0, gap) == doctest::Approx(base / 4).epsilon(1e-12));
    }
    SUBCASE("vanishing final population is an error") {
        CHECK_THROWS_AS(energy_estimate(2.0, 0.0, gap), std::domain_error);
    }
}

TEST_CASE("normalized quasiparticle density bound") {
    CHECK(xqp_upper_bound(2.5, 2.5e4) == doctest::Approx(1e-4).epsilon(1e-12));
    CHECK(xqp_upper_bound(0.0, 1e4) == 0.0);
    CHECK(xqp_upper_bound(5.0, 1e4) == doctest::Approx(2 * xqp_upper_bound(2.5, 1e4)));
    CHECK_THROWS_AS(xqp_upper_bound(1.0, 0.0), std::domain_error);
}
