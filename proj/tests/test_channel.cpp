#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <vector>

#include "mamr/channel.hpp"
#include "mamr/modem.hpp"
#include "mamr/rng.hpp"

using namespace mamr;
using channel::AntennaSetting;
using channel::ChannelConfig;
using modem::cplx;

namespace {

modem::ComplexSeries unit_signal(std::uint64_t seed, int length = 512) {
    modem::ModemParams p;
    p.signal_length = length;
    Rng rng(seed);
    return modem::modulate_linear(modem::ModulationType::QPSK, p, rng);
}

}  // namespace

TEST_CASE("fixed gains follow the configured phases") {
    ChannelConfig cfg;
    cfg.antennas = 2;
    cfg.fixed_phases = {0.0, std::numbers::pi / 2.0};
    Rng rng(1);
    const auto gains = channel::make_gains(cfg, rng);
    REQUIRE(gains.size() == 2);
    CHECK(gains[0].real() == Catch::Approx(1.0).margin(1e-15));
    CHECK(gains[0].imag() == Catch::Approx(0.0).margin(1e-15));
    CHECK(gains[1].real() == Catch::Approx(0.0).margin(1e-15));
    CHECK(gains[1].imag() == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("default fixed phases are evenly spaced and reproducible") {
    ChannelConfig cfg;
    cfg.antennas = 4;
    Rng a(1), b(99);
    const auto g1 = channel::make_gains(cfg, a);
    const auto g2 = channel::make_gains(cfg, b);
    CHECK(g1 == g2);  // fixed setting ignores the generator
    for (int i = 0; i < 4; ++i)
        CHECK(std::arg(g1[static_cast<std::size_t>(i)]) ==
              Catch::Approx(std::remainder(2.0 * std::numbers::pi * i / 4.0,
                                           2.0 * std::numbers::pi))
                  .margin(1e-12));
}

TEST_CASE("gains have unit magnitude in both settings") {
    Rng rng(7);
    for (auto setting : {AntennaSetting::Fixed, AntennaSetting::Random}) {
        ChannelConfig cfg;
        cfg.antennas = 16;
        cfg.setting = setting;
        const auto gains = channel::make_gains(cfg, rng);
        for (const auto& g : gains) CHECK(std::abs(std::abs(g) - 1.0) < 1e-12);
    }
}

TEST_CASE("random phases are uniform on [0, 2pi)") {
    // Kolmogorov-Smirnov against the uniform CDF; critical value for
    // alpha = 0.01 is 1.628 / sqrt(n)
    ChannelConfig cfg;
    cfg.antennas = 1;
    cfg.setting = AntennaSetting::Random;
    Rng rng(123);
    const int n = 10000;
    std::vector<double> phases;
    phases.reserve(n);
    for (int i = 0; i < n; ++i) {
        const auto g = channel::make_gains(cfg, rng);
        double phi = std::arg(g[0]);
        if (phi < 0) phi += 2.0 * std::numbers::pi;
        phases.push_back(phi / (2.0 * std::numbers::pi));
    }
    std::sort(phases.begin(), phases.end());
    double d = 0.0;
    for (int i = 0; i < n; ++i) {
        d = std::max(d, std::abs(phases[static_cast<std::size_t>(i)] - (i + 1.0) / n));
        d = std::max(d, std::abs(phases[static_cast<std::size_t>(i)] - static_cast<double>(i) / n));
    }
    CHECK(d * std::sqrt(static_cast<double>(n)) < 1.628);
}

TEST_CASE("infinite SNR with unity gain is the identity channel") {
    ChannelConfig cfg;
    cfg.antennas = 1;
    cfg.fixed_phases = {0.0};
    cfg.snr_db = std::numeric_limits<double>::infinity();
    const auto x = unit_signal(2);
    Rng rng(3);
    const auto ys = channel::receive(x, cfg, rng);
    REQUIRE(ys.size() == 1);
    CHECK(ys[0] == x);
}

TEST_CASE("0 dB means unit noise power") {
    ChannelConfig cfg;
    cfg.antennas = 1;
    cfg.fixed_phases = {0.0};
    cfg.snr_db = 0.0;
    const auto x = unit_signal(4);
    Rng rng(5);
    double noise_power = 0.0;
    const int reps = 200;
    for (int r = 0; r < reps; ++r) {
        const auto ys = channel::receive(x, cfg, rng);
        for (std::size_t n = 0; n < x.size(); ++n) noise_power += std::norm(ys[0][n] - x[n]);
    }
    noise_power /= static_cast<double>(reps) * x.size();
    CHECK(noise_power == Catch::Approx(1.0).epsilon(0.02));
}

TEST_CASE("measured SNR tracks the configured SNR within 0.2 dB") {
    const auto x = unit_signal(6);
    for (double snr : {-10.0, 0.0, 10.0, 20.0}) {
        ChannelConfig cfg;
        cfg.antennas = 2;
        cfg.snr_db = snr;
        Rng rng(static_cast<std::uint64_t>(snr + 100));
        double noise_power = 0.0;
        std::size_t count = 0;
        const auto gains = channel::make_gains(cfg, rng);
        for (int r = 0; r < 100; ++r) {
            const auto ys = channel::receive(x, cfg, rng);
            for (std::size_t a = 0; a < ys.size(); ++a)
                for (std::size_t n = 0; n < x.size(); ++n) {
                    noise_power += std::norm(ys[a][n] - gains[a] * x[n]);
                    ++count;
                }
        }
        const double measured = 10.0 * std::log10(1.0 / (noise_power / count));
        INFO("snr " << snr);
        CHECK(measured == Catch::Approx(snr).margin(0.2));
    }
}

TEST_CASE("noise is uncorrelated across antennas") {
    ChannelConfig cfg;
    cfg.antennas = 2;
    cfg.snr_db = 0.0;
    const auto x = unit_signal(8);
    Rng rng(9);
    const auto gains = channel::make_gains(cfg, rng);
    cplx cross(0.0, 0.0);
    double p1 = 0.0, p2 = 0.0;
    for (int r = 0; r < 200; ++r) {  // 200 * 512 > 1e5 noise samples
        const auto ys = channel::receive(x, cfg, rng);
        for (std::size_t n = 0; n < x.size(); ++n) {
            const cplx w1 = ys[0][n] - gains[0] * x[n];
            const cplx w2 = ys[1][n] - gains[1] * x[n];
            cross += w1 * std::conj(w2);
            p1 += std::norm(w1);
            p2 += std::norm(w2);
        }
    }
    CHECK(std::abs(cross) / std::sqrt(p1 * p2) < 0.05);
}

TEST_CASE("receive is reproducible for a fixed seed") {
    ChannelConfig cfg;
    cfg.antennas = 3;
    cfg.setting = AntennaSetting::Random;
    cfg.snr_db = 5.0;
    const auto x = unit_signal(10);
    Rng a(77), b(77);
    CHECK(channel::receive(x, cfg, a) == channel::receive(x, cfg, b));
}

TEST_CASE("non-finite input is rejected") {
    ChannelConfig cfg;
    modem::ComplexSeries x(16, cplx(1.0, 0.0));
    x[5] = cplx(std::numeric_limits<double>::quiet_NaN(), 0.0);
    Rng rng(1);
    CHECK_THROWS_AS(channel::receive(x, cfg, rng), std::invalid_argument);
}

TEST_CASE("channel config validation") {
    ChannelConfig cfg;
    cfg.antennas = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.antennas = 3;
    cfg.fixed_phases = {0.0, 1.0};  // wrong length
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
