#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <bit>
#include <complex>
#include <numbers>
#include <vector>

#include "mamr/modem.hpp"
#include "mamr/rng.hpp"

using namespace mamr;
using modem::cplx;
using modem::ModulationType;

namespace {

double mean_energy(const std::vector<cplx>& pts) {
    double e = 0.0;
    for (const auto& p : pts) e += std::norm(p);
    return e / static_cast<double>(pts.size());
}

double mean_power(const modem::ComplexSeries& x) {
    double p = 0.0;
    for (const auto& v : x) p += std::norm(v);
    return p / static_cast<double>(x.size());
}

int hamming(unsigned a, unsigned b) { return std::popcount(a ^ b); }

std::vector<cplx> convolve(const std::vector<cplx>& a, const std::vector<double>& b) {
    std::vector<cplx> out(a.size() + b.size() - 1);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t k = 0; k < b.size(); ++k) out[i + k] += a[i] * b[k];
    return out;
}

const std::vector<ModulationType> kLinear = {
    ModulationType::BPSK,  ModulationType::QPSK,  ModulationType::PSK8, ModulationType::OQPSK,
    ModulationType::QAM16, ModulationType::QAM32, ModulationType::QAM64,
    ModulationType::PAM4,  ModulationType::PAM8};

}  // namespace

TEST_CASE("modulation type is a bijection onto 0..11 with integer bits per symbol") {
    REQUIRE(modem::kNumModulations == 12);
    for (int i = 0; i < 12; ++i) {
        const auto m = static_cast<ModulationType>(i);
        CHECK(static_cast<int>(m) == i);
        CHECK(modem::modulation_from_string(modem::to_string(m)) == m);
        CHECK(modem::bits_per_symbol(m) >= 1);
        if (modem::is_linear(m))
            CHECK(modem::constellation(m).size() == (1u << modem::bits_per_symbol(m)));
    }
    CHECK(static_cast<int>(ModulationType::BPSK) == 0);
    CHECK(static_cast<int>(ModulationType::PAM8) == 11);
    CHECK_THROWS_AS(modem::modulation_from_string("AM"), std::invalid_argument);
}

TEST_CASE("constellations have unit average energy") {
    for (auto m : kLinear)
        CHECK(mean_energy(modem::constellation(m)) == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("constellation rejects FSK") {
    CHECK_THROWS_AS(modem::constellation(ModulationType::FSK2), std::invalid_argument);
    CHECK_THROWS_WITH(modem::constellation(ModulationType::FSK8),
                      Catch::Matchers::ContainsSubstring("not a linear modulation"));
}

TEST_CASE("BPSK and QPSK match their canonical forms") {
    const auto bpsk = modem::constellation(ModulationType::BPSK);
    REQUIRE(bpsk.size() == 2);
    CHECK(bpsk[0] == cplx(1.0, 0.0));
    CHECK(bpsk[1] == cplx(-1.0, 0.0));

    const auto qpsk = modem::constellation(ModulationType::QPSK);
    const double r = 1.0 / std::numbers::sqrt2;
    for (const auto& p : qpsk) {
        CHECK(std::abs(std::abs(p.real()) - r) < 1e-12);
        CHECK(std::abs(std::abs(p.imag()) - r) < 1e-12);
    }
    CHECK(mean_energy(qpsk) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("PAM4 and QAM16 match the normalization oracle") {
    // oracle: raw odd levels divided by sqrt(mean of squares)
    const auto pam4 = modem::constellation(ModulationType::PAM4);
    const std::vector<double> raw = {-3, -1, 1, 3};
    const double scale = std::sqrt((9 + 1 + 1 + 9) / 4.0);  // sqrt(5)
    std::vector<double> got;
    for (const auto& p : pam4) {
        CHECK(p.imag() == 0.0);
        got.push_back(p.real());
    }
    std::sort(got.begin(), got.end());
    for (std::size_t i = 0; i < raw.size(); ++i)
        CHECK(got[i] == Catch::Approx(raw[i] / scale).margin(1e-12));

    const auto qam16 = modem::constellation(ModulationType::QAM16);
    const double s16 = std::sqrt(10.0);  // sqrt of mean square of the {+-1,+-3} grid
    for (const auto& p : qam16) {
        const double i = std::abs(p.real() * s16), q = std::abs(p.imag() * s16);
        CHECK((std::abs(i - 1) < 1e-9 || std::abs(i - 3) < 1e-9));
        CHECK((std::abs(q - 1) < 1e-9 || std::abs(q - 3) < 1e-9));
    }
}

TEST_CASE("32QAM is the 32-point cross with unit energy") {
    const auto pts = modem::constellation(ModulationType::QAM32);
    REQUIRE(pts.size() == 32);
    const double s = std::sqrt(20.0);
    for (const auto& p : pts) {
        const double i = std::abs(p.real() * s), q = std::abs(p.imag() * s);
        CHECK((std::abs(i - 1) < 1e-9 || std::abs(i - 3) < 1e-9 || std::abs(i - 5) < 1e-9));
        CHECK_FALSE((i > 4.0 && q > 4.0));  // corners removed
    }
    CHECK(mean_energy(pts) == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("Gray adjacency holds for PSK and square QAM") {
    for (auto m : {ModulationType::BPSK, ModulationType::QPSK, ModulationType::PSK8,
                   ModulationType::QAM16, ModulationType::QAM64}) {
        const auto pts = modem::constellation(m);
        double dmin = 1e9;
        for (std::size_t a = 0; a < pts.size(); ++a)
            for (std::size_t b = a + 1; b < pts.size(); ++b)
                dmin = std::min(dmin, std::abs(pts[a] - pts[b]));
        for (std::size_t a = 0; a < pts.size(); ++a)
            for (std::size_t b = a + 1; b < pts.size(); ++b)
                if (std::abs(pts[a] - pts[b]) < dmin * 1.001) {
                    INFO(modem::to_string(m) << " labels " << a << "," << b);
                    CHECK(hamming(static_cast<unsigned>(a), static_cast<unsigned>(b)) == 1);
                }
    }
}

TEST_CASE("rrc taps: symmetry, unit energy, center maximum") {
    for (double rolloff : {0.2, 0.35, 0.5, 0.7}) {
        const auto taps = modem::rrc_taps(rolloff, 8, 6);
        REQUIRE(taps.size() == 49);
        for (std::size_t k = 0; k < taps.size(); ++k)
            CHECK(taps[k] == taps[taps.size() - 1 - k]);
        double e = 0.0;
        for (double v : taps) e += v * v;
        CHECK(e == Catch::Approx(1.0).margin(1e-9));
        CHECK(std::max_element(taps.begin(), taps.end()) - taps.begin() == 24);
    }
}

TEST_CASE("rrc taps reject rolloff outside (0,1)") {
    CHECK_THROWS_AS(modem::rrc_taps(0.0, 8, 6), std::domain_error);
    CHECK_THROWS_AS(modem::rrc_taps(1.0, 8, 6), std::domain_error);
    CHECK_THROWS_AS(modem::rrc_taps(-0.3, 8, 6), std::domain_error);
}

TEST_CASE("rrc matched pair satisfies the Nyquist criterion") {
    for (double rolloff : {0.2, 0.35, 0.5, 0.7}) {
        const auto taps = modem::rrc_taps(rolloff, 8, 6);
        std::vector<double> rc(2 * taps.size() - 1, 0.0);
        for (std::size_t i = 0; i < taps.size(); ++i)
            for (std::size_t k = 0; k < taps.size(); ++k) rc[i + k] += taps[i] * taps[k];
        const std::size_t center = taps.size() - 1;
        CHECK(rc[center] == Catch::Approx(1.0).margin(1e-9));
        for (int lag = 1; lag <= 6; ++lag) {
            INFO("rolloff " << rolloff << " lag " << lag);
            CHECK(std::abs(rc[center + static_cast<std::size_t>(8 * lag)]) <= 1e-3);
            CHECK(std::abs(rc[center - static_cast<std::size_t>(8 * lag)]) <= 1e-3);
        }
    }
}

TEST_CASE("linear modulation output has unit average power and exact length") {
    modem::ModemParams p;
    Rng rng(11);
    for (auto m : kLinear) {
        const auto x = modem::modulate_linear(m, p, rng);
        REQUIRE(static_cast<int>(x.size()) == p.signal_length);
        CHECK(mean_power(x) == Catch::Approx(1.0).margin(1e-6));
    }
}

TEST_CASE("modulate_linear is deterministic in its bit sequence") {
    modem::ModemParams p;
    std::vector<int> bits(2 * static_cast<std::size_t>(p.symbols() + p.rrc_span));
    Rng rng(5);
    for (auto& b : bits) b = rng.bit();
    const auto a = modem::modulate_linear(bits, ModulationType::QPSK, p);
    const auto b = modem::modulate_linear(bits, ModulationType::QPSK, p);
    CHECK(a == b);
}

TEST_CASE("modulate_linear rejects short bit sequences and FSK") {
    modem::ModemParams p;
    CHECK_THROWS_AS(modem::modulate_linear(std::vector<int>(10, 0), ModulationType::QPSK, p),
                    std::length_error);
    CHECK_THROWS_AS(modem::modulate_linear(std::vector<int>(1000, 0), ModulationType::FSK4, p),
                    std::invalid_argument);
}

TEST_CASE("BPSK all-zero bits gives constant sign at symbol instants") {
    modem::ModemParams p;
    const std::vector<int> bits(static_cast<std::size_t>(p.symbols() + p.rrc_span), 0);
    const auto x = modem::modulate_linear(bits, ModulationType::BPSK, p);
    const auto taps = modem::rrc_taps(p.rolloff, p.oversampling, p.rrc_span);
    const auto mf = convolve(x, taps);
    // symbol s peaks at matched-filter index s * oversampling; interior only
    for (int s = 4; s <= p.symbols(); ++s)
        CHECK(mf[static_cast<std::size_t>(s * p.oversampling)].real() > 0.0);
}

TEST_CASE("OQPSK delays the Q rail by half a symbol") {
    modem::ModemParams p;
    std::vector<int> bits(2 * static_cast<std::size_t>(p.symbols() + p.rrc_span));
    Rng rng(17);
    for (auto& b : bits) b = rng.bit();
    const auto oq = modem::modulate_linear(bits, ModulationType::OQPSK, p);
    const auto qp = modem::modulate_linear(bits, ModulationType::QPSK, p);
    CHECK(mean_power(oq) == Catch::Approx(1.0).margin(1e-6));

    // both outputs are per-instance power normalized, so the rails agree up
    // to one constant ratio: oq.Q[n] = c * qp.Q[n-4]
    double ratio = 0.0;
    for (std::size_t n = 4; n < oq.size(); ++n) {
        const double denom = qp[n - 4].imag();
        if (std::abs(denom) < 1e-3) continue;
        const double r = oq[n].imag() / denom;
        if (ratio == 0.0) ratio = r;
        CHECK(r == Catch::Approx(ratio).epsilon(1e-9));
    }
    CHECK(ratio == Catch::Approx(1.0).epsilon(0.02));
}

TEST_CASE("QPSK loopback demodulation recovers symbols with low EVM") {
    for (double rolloff : {0.2, 0.35, 0.5, 0.7}) {
        modem::ModemParams p;
        p.rolloff = rolloff;
        std::vector<int> bits(2 * static_cast<std::size_t>(p.symbols() + p.rrc_span));
        Rng rng(42);
        for (auto& b : bits) b = rng.bit();
        const auto x = modem::modulate_linear(bits, ModulationType::QPSK, p);
        const auto pts = modem::constellation(ModulationType::QPSK);
        const auto taps = modem::rrc_taps(rolloff, p.oversampling, p.rrc_span);
        const auto mf = convolve(x, taps);

        const auto symbol = [&](int s) {
            return pts[static_cast<std::size_t>((bits[static_cast<std::size_t>(2 * s)] << 1) |
                                                bits[static_cast<std::size_t>(2 * s + 1)])];
        };
        // least-squares gain over interior symbols, then the error vector
        cplx num(0.0, 0.0);
        double den = 0.0;
        const int lo = 10, hi = p.symbols() - 6;
        for (int s = lo; s <= hi; ++s) {
            const cplx v = mf[static_cast<std::size_t>(s * p.oversampling)];
            num += v * std::conj(symbol(s));
            den += std::norm(symbol(s));
        }
        const cplx gain = num / den;
        double err = 0.0, ref = 0.0;
        for (int s = lo; s <= hi; ++s) {
            const cplx v = mf[static_cast<std::size_t>(s * p.oversampling)] / gain;
            err += std::norm(v - symbol(s));
            ref += std::norm(symbol(s));
        }
        INFO("rolloff " << rolloff);
        CHECK(std::sqrt(err / ref) < 0.02);
    }
}

TEST_CASE("FSK tone lands at the expected FFT bin") {
    // 2FSK, constant symbol 1, h = 1: tone at +Rs/2 = 1/16 cycles/sample
    modem::ModemParams p;
    const std::vector<int> symbols(static_cast<std::size_t>(p.symbols()), 1);
    const auto x = modem::modulate_fsk(symbols, 2, p);
    const int n = p.signal_length;
    double best_mag = -1.0;
    int best_bin = 0;
    for (int k = 0; k < n; ++k) {
        cplx acc(0.0, 0.0);
        for (int t = 0; t < n; ++t)
            acc += x[static_cast<std::size_t>(t)] *
                   std::polar(1.0, -2.0 * std::numbers::pi * k * t / n);
        if (std::abs(acc) > best_mag) {
            best_mag = std::abs(acc);
            best_bin = k;
        }
    }
    CHECK(best_bin == n / 16);  // 0.0625 cycles/sample
}

TEST_CASE("FSK has exact unit envelope and continuous phase") {
    modem::ModemParams p;
    Rng rng(3);
    for (auto m : {ModulationType::FSK2, ModulationType::FSK4, ModulationType::FSK8}) {
        const auto x = modem::modulate_fsk(m, p, rng);
        for (const auto& v : x) CHECK(std::abs(std::abs(v) - 1.0) < 1e-12);
        // every phase increment, including at symbol boundaries, is one of
        // the tone frequencies
        const int order = modem::fsk_order(m);
        const double step = p.fsk_index / (2.0 * p.oversampling);
        for (std::size_t n = 0; n + 1 < x.size(); ++n) {
            const double freq = std::arg(x[n + 1] * std::conj(x[n])) / (2.0 * std::numbers::pi);
            bool on_tone = false;
            for (int tone = 0; tone < order; ++tone)
                if (std::abs(freq - (2.0 * tone - order + 1) * step) < 1e-9) on_tone = true;
            CHECK(on_tone);
        }
    }
}

TEST_CASE("constant-symbol FSK has constant phase increments") {
    modem::ModemParams p;
    const std::vector<int> symbols(static_cast<std::size_t>(p.symbols()), 2);
    const auto x = modem::modulate_fsk(symbols, 4, p);
    const double first = std::arg(x[1] * std::conj(x[0]));
    for (std::size_t n = 0; n + 1 < x.size(); ++n)
        CHECK(std::arg(x[n + 1] * std::conj(x[n])) == Catch::Approx(first).margin(1e-12));
}

TEST_CASE("FSK rejects aliasing configurations and bad symbols") {
    modem::ModemParams p;
    p.fsk_index = 2.0;  // 8FSK peak tone at 0.875 cycles/sample
    CHECK_THROWS_AS(modem::modulate_fsk(std::vector<int>(64, 0), 8, p), std::domain_error);
    modem::ModemParams ok;
    CHECK_THROWS_AS(modem::modulate_fsk(std::vector<int>(64, 9), 8, ok), std::invalid_argument);
    CHECK_THROWS_AS(modem::modulate_fsk(std::vector<int>(64, 0), 3, ok), std::invalid_argument);
}

TEST_CASE("frequency offset: identity, quarter-cycle rotation, magnitude preservation") {
    const modem::ComplexSeries ones(8, cplx(1.0, 0.0));
    const auto same = modem::apply_freq_offset(ones, 0.0);
    CHECK(same == ones);

    const auto quarter = modem::apply_freq_offset(ones, 0.25);
    const cplx expect[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    for (std::size_t n = 0; n < quarter.size(); ++n) {
        CHECK(quarter[n].real() == Catch::Approx(expect[n % 4].real()).margin(1e-12));
        CHECK(quarter[n].imag() == Catch::Approx(expect[n % 4].imag()).margin(1e-12));
    }

    modem::ModemParams p;
    Rng rng(9);
    const auto x = modem::modulate_linear(ModulationType::QAM16, p, rng);
    const auto y = modem::apply_freq_offset(x, 0.17);
    for (std::size_t n = 0; n < x.size(); ++n)
        CHECK(std::abs(y[n]) == Catch::Approx(std::abs(x[n])).margin(1e-12));
}

TEST_CASE("modem params validate their ranges") {
    modem::ModemParams p;
    p.signal_length = 100;  // not a multiple of 8
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = {};
    p.rolloff = 0.1;
    CHECK_THROWS_AS(p.validate(), std::domain_error);
    p = {};
    p.freq_offset = 0.3;
    CHECK_THROWS_AS(p.validate(), std::domain_error);
    p = {};
    p.offset_ref = modem::OffsetReference::SymbolRate;
    p.freq_offset = 0.2;
    CHECK(p.offset_cycles_per_sample() == Catch::Approx(0.025));
}
