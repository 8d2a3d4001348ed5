#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "mamr/rng.hpp"

namespace mamr::modem {

using cplx = std::complex<double>;

/// One complex baseband series; length is fixed by the producing operation.
using ComplexSeries = std::vector<cplx>;

/// The 12 recognized modulations. The enum value is the canonical label
/// index used in datasets, confusion matrices, and report files.
enum class ModulationType : std::uint8_t {
    BPSK = 0,
    QPSK = 1,
    PSK8 = 2,
    OQPSK = 3,
    FSK2 = 4,
    FSK4 = 5,
    FSK8 = 6,
    QAM16 = 7,
    QAM32 = 8,
    QAM64 = 9,
    PAM4 = 10,
    PAM8 = 11,
};

inline constexpr int kNumModulations = 12;

inline const char* to_string(ModulationType m) {
    switch (m) {
        case ModulationType::BPSK: return "BPSK";
        case ModulationType::QPSK: return "QPSK";
        case ModulationType::PSK8: return "8PSK";
        case ModulationType::OQPSK: return "OQPSK";
        case ModulationType::FSK2: return "2FSK";
        case ModulationType::FSK4: return "4FSK";
        case ModulationType::FSK8: return "8FSK";
        case ModulationType::QAM16: return "16QAM";
        case ModulationType::QAM32: return "32QAM";
        case ModulationType::QAM64: return "64QAM";
        case ModulationType::PAM4: return "4PAM";
        case ModulationType::PAM8: return "8PAM";
    }
    return "?";
}

inline ModulationType modulation_from_string(const std::string& name) {
    for (int i = 0; i < kNumModulations; ++i) {
        const auto m = static_cast<ModulationType>(i);
        if (name == to_string(m)) return m;
    }
    throw std::invalid_argument("unknown modulation: " + name);
}

inline bool is_fsk(ModulationType m) {
    return m == ModulationType::FSK2 || m == ModulationType::FSK4 || m == ModulationType::FSK8;
}

inline bool is_linear(ModulationType m) { return !is_fsk(m); }

inline int bits_per_symbol(ModulationType m) {
    switch (m) {
        case ModulationType::BPSK: return 1;
        case ModulationType::QPSK: return 2;
        case ModulationType::PSK8: return 3;
        case ModulationType::OQPSK: return 2;
        case ModulationType::FSK2: return 1;
        case ModulationType::FSK4: return 2;
        case ModulationType::FSK8: return 3;
        case ModulationType::QAM16: return 4;
        case ModulationType::QAM32: return 5;
        case ModulationType::QAM64: return 6;
        case ModulationType::PAM4: return 2;
        case ModulationType::PAM8: return 3;
    }
    return 0;
}

/// FSK tone count (2, 4, or 8). Throws for linear modulations.
inline int fsk_order(ModulationType m) {
    switch (m) {
        case ModulationType::FSK2: return 2;
        case ModulationType::FSK4: return 4;
        case ModulationType::FSK8: return 8;
        default: throw std::invalid_argument("not an FSK modulation");
    }
}

/// How the random frequency offset is scaled: a fraction of the sampling
/// frequency (the default) or of the symbol rate.
enum class OffsetReference : std::uint8_t { SampleRate = 0, SymbolRate = 1 };

struct ModemParams {
    int oversampling = 8;       ///< samples per symbol
    int signal_length = 512;    ///< output samples N; must be a multiple of oversampling
    double rolloff = 0.35;      ///< RRC roll-off, drawn from [0.2, 0.7] by datagen
    int rrc_span = 6;           ///< RRC truncation, in symbols
    double freq_offset = 0.0;   ///< |offset| <= 0.2, relative to offset_ref
    double fsk_index = 1.0;     ///< FSK modulation index h (tone spacing / symbol rate)
    OffsetReference offset_ref = OffsetReference::SampleRate;

    int symbols() const { return signal_length / oversampling; }

    void validate() const {
        if (oversampling < 1) throw std::invalid_argument("oversampling must be >= 1");
        if (signal_length <= 0 || signal_length % oversampling != 0)
            throw std::invalid_argument("signal_length must be a positive multiple of oversampling");
        if (rolloff < 0.2 || rolloff > 0.7)
            throw std::domain_error("rolloff must lie in [0.2, 0.7]");
        if (std::abs(freq_offset) > 0.2)
            throw std::domain_error("|freq_offset| must be <= 0.2");
        if (fsk_index <= 0.0) throw std::domain_error("fsk_index must be > 0");
    }

    /// Frequency offset in cycles per sample, after applying offset_ref.
    double offset_cycles_per_sample() const {
        return offset_ref == OffsetReference::SampleRate ? freq_offset
                                                         : freq_offset / oversampling;
    }
};

namespace detail {

/// Binary-reflected Gray code.
inline unsigned gray(unsigned v) { return v ^ (v >> 1); }

/// Gray-coded 1-D amplitude levels {-(L-1), ..., -1, +1, ..., +(L-1)} where
/// level index g = gray(bits) counts from the most negative level.
/// Adjacent levels differ in exactly one bit of `bits`.
inline std::vector<double> pam_levels(unsigned order) {
    std::vector<double> levels(order);
    for (unsigned bits = 0; bits < order; ++bits) {
        const unsigned position = [&] {
            // invert gray(): find the rank whose gray code equals `bits`
            for (unsigned r = 0; r < order; ++r)
                if (gray(r) == bits) return r;
            return 0u;
        }();
        levels[bits] = -static_cast<double>(order - 1) + 2.0 * position;
    }
    return levels;
}

inline void normalize_energy(std::vector<cplx>& pts) {
    double e = 0.0;
    for (const cplx& p : pts) e += std::norm(p);
    const double scale = 1.0 / std::sqrt(e / static_cast<double>(pts.size()));
    for (cplx& p : pts) p *= scale;
}

}  // namespace detail

/// Unit-average-energy constellation for a linear modulation, indexed by the
/// symbol's bit pattern (MSB-first). PSK and square QAM are Gray mapped;
/// 32QAM uses a cross grid with a quasi-Gray labeling. FSK is rejected.
inline std::vector<cplx> constellation(ModulationType mod) {
    using detail::gray;
    if (is_fsk(mod)) throw std::invalid_argument("not a linear modulation");

    std::vector<cplx> pts;
    switch (mod) {
        case ModulationType::BPSK:
            pts = {cplx(1.0, 0.0), cplx(-1.0, 0.0)};
            break;
        case ModulationType::QPSK:
        case ModulationType::OQPSK: {
            // per-rail antipodal mapping: bit0 -> I sign, bit1 -> Q sign
            pts.resize(4);
            for (unsigned b = 0; b < 4; ++b) {
                const double i = (b & 2) ? -1.0 : 1.0;
                const double q = (b & 1) ? -1.0 : 1.0;
                pts[b] = cplx(i, q);
            }
            break;
        }
        case ModulationType::PSK8: {
            // point at angle 2*pi*r/8 carries label gray(r)
            pts.resize(8);
            for (unsigned r = 0; r < 8; ++r) {
                const double a = 2.0 * std::numbers::pi * r / 8.0;
                pts[gray(r)] = cplx(std::cos(a), std::sin(a));
            }
            break;
        }
        case ModulationType::QAM16:
        case ModulationType::QAM64: {
            const unsigned side = mod == ModulationType::QAM16 ? 4 : 8;
            const unsigned rail_bits = side == 4 ? 2 : 3;
            const auto levels = detail::pam_levels(side);
            pts.resize(side * side);
            for (unsigned b = 0; b < side * side; ++b) {
                const unsigned bi = b >> rail_bits;          // high bits -> I
                const unsigned bq = b & (side - 1);          // low bits -> Q
                pts[b] = cplx(levels[bi], levels[bq]);
            }
            break;
        }
        case ModulationType::QAM32: {
            // 6x6 grid minus the four corners; labels follow a gray sequence
            // along the row-major enumeration (perfect Gray adjacency is not
            // achievable on a cross constellation).
            std::vector<cplx> grid;
            static constexpr double lv[6] = {-5, -3, -1, 1, 3, 5};
            for (double qi : lv)
                for (double ii : lv) {
                    if (std::abs(ii) == 5.0 && std::abs(qi) == 5.0) continue;
                    grid.emplace_back(ii, qi);
                }
            pts.resize(32);
            for (unsigned r = 0; r < 32; ++r) pts[gray(r)] = grid[r];
            break;
        }
        case ModulationType::PAM4:
        case ModulationType::PAM8: {
            const unsigned order = mod == ModulationType::PAM4 ? 4 : 8;
            const auto levels = detail::pam_levels(order);
            pts.resize(order);
            for (unsigned b = 0; b < order; ++b) pts[b] = cplx(levels[b], 0.0);
            break;
        }
        default:
            throw std::invalid_argument("not a linear modulation");
    }
    detail::normalize_energy(pts);
    return pts;
}

namespace detail {

/// Truncated analytic RRC impulse response, unit energy. The removable
/// singularities at t=0 and t=+-Tsym/(4*rolloff) take their analytic limits.
inline std::vector<double> rrc_taps_analytic(double rolloff, int oversampling,
                                             int span_symbols) {
    const int half = span_symbols * oversampling / 2;
    std::vector<double> taps(2 * half + 1);
    const double pi = std::numbers::pi;
    for (int k = -half; k <= half; ++k) {
        const double t = static_cast<double>(k) / oversampling;  // symbol periods
        double v;
        if (k == 0) {
            v = 1.0 - rolloff + 4.0 * rolloff / pi;
        } else if (std::abs(std::abs(t) - 1.0 / (4.0 * rolloff)) < 1e-12) {
            v = rolloff / std::numbers::sqrt2 *
                ((1.0 + 2.0 / pi) * std::sin(pi / (4.0 * rolloff)) +
                 (1.0 - 2.0 / pi) * std::cos(pi / (4.0 * rolloff)));
        } else {
            const double den = pi * t * (1.0 - std::pow(4.0 * rolloff * t, 2));
            v = (std::sin(pi * t * (1.0 - rolloff)) +
                 4.0 * rolloff * t * std::cos(pi * t * (1.0 + rolloff))) /
                den;
        }
        taps[static_cast<std::size_t>(k + half)] = v;
    }
    double e = 0.0;
    for (double v : taps) e += v * v;
    const double scale = 1.0 / std::sqrt(e);
    for (double& v : taps) v *= scale;
    return taps;
}

/// Gauss-Newton projection onto the matched-pair Nyquist constraint set:
/// autocorrelation 1 at lag 0 and 0 at lags m*oversampling. A hard-truncated
/// RRC misses these by up to a few percent at short spans; the minimal
/// correction restores them while leaving the pulse shape essentially
/// unchanged.
inline void enforce_nyquist(std::vector<double>& h, int oversampling, int span_symbols) {
    const int L = static_cast<int>(h.size());
    std::vector<int> lags{0};
    for (int m = 1; m < span_symbols; ++m)
        if (m * oversampling < L) lags.push_back(m * oversampling);
    const int M = static_cast<int>(lags.size());

    const auto autocorr = [&](int d) {
        double acc = 0.0;
        for (int k = 0; k + d < L; ++k) acc += h[static_cast<std::size_t>(k)] *
                                                h[static_cast<std::size_t>(k + d)];
        return acc;
    };

    for (int iter = 0; iter < 64; ++iter) {
        std::vector<double> c(static_cast<std::size_t>(M));
        double worst = 0.0;
        for (int m = 0; m < M; ++m) {
            c[static_cast<std::size_t>(m)] = autocorr(lags[static_cast<std::size_t>(m)]) -
                                             (m == 0 ? 1.0 : 0.0);
            worst = std::max(worst, std::abs(c[static_cast<std::size_t>(m)]));
        }
        if (worst < 1e-14) break;

        // J[m][k] = d c_m / d h_k
        std::vector<std::vector<double>> jac(static_cast<std::size_t>(M),
                                             std::vector<double>(static_cast<std::size_t>(L), 0.0));
        for (int m = 0; m < M; ++m) {
            const int d = lags[static_cast<std::size_t>(m)];
            for (int k = 0; k + d < L; ++k) {
                jac[static_cast<std::size_t>(m)][static_cast<std::size_t>(k)] +=
                    h[static_cast<std::size_t>(k + d)];
                jac[static_cast<std::size_t>(m)][static_cast<std::size_t>(k + d)] +=
                    h[static_cast<std::size_t>(k)];
            }
        }
        // solve (J J^T) lambda = c, then h -= J^T lambda
        std::vector<std::vector<double>> a(static_cast<std::size_t>(M),
                                           std::vector<double>(static_cast<std::size_t>(M + 1), 0.0));
        for (int i = 0; i < M; ++i) {
            for (int j = 0; j < M; ++j) {
                double dot = 0.0;
                for (int k = 0; k < L; ++k)
                    dot += jac[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] *
                           jac[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
                a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = dot;
            }
            a[static_cast<std::size_t>(i)][static_cast<std::size_t>(M)] =
                c[static_cast<std::size_t>(i)];
        }
        for (int col = 0; col < M; ++col) {  // Gaussian elimination, partial pivot
            int pivot = col;
            for (int row = col + 1; row < M; ++row)
                if (std::abs(a[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)]) >
                    std::abs(a[static_cast<std::size_t>(pivot)][static_cast<std::size_t>(col)]))
                    pivot = row;
            std::swap(a[static_cast<std::size_t>(col)], a[static_cast<std::size_t>(pivot)]);
            for (int row = col + 1; row < M; ++row) {
                const double f = a[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)] /
                                 a[static_cast<std::size_t>(col)][static_cast<std::size_t>(col)];
                for (int j = col; j <= M; ++j)
                    a[static_cast<std::size_t>(row)][static_cast<std::size_t>(j)] -=
                        f * a[static_cast<std::size_t>(col)][static_cast<std::size_t>(j)];
            }
        }
        std::vector<double> lambda(static_cast<std::size_t>(M));
        for (int row = M - 1; row >= 0; --row) {
            double acc = a[static_cast<std::size_t>(row)][static_cast<std::size_t>(M)];
            for (int j = row + 1; j < M; ++j)
                acc -= a[static_cast<std::size_t>(row)][static_cast<std::size_t>(j)] *
                       lambda[static_cast<std::size_t>(j)];
            lambda[static_cast<std::size_t>(row)] =
                acc / a[static_cast<std::size_t>(row)][static_cast<std::size_t>(row)];
        }
        for (int k = 0; k < L; ++k) {
            double step = 0.0;
            for (int m = 0; m < M; ++m)
                step += jac[static_cast<std::size_t>(m)][static_cast<std::size_t>(k)] *
                        lambda[static_cast<std::size_t>(m)];
            h[static_cast<std::size_t>(k)] -= step;
        }
        // keep even symmetry exact
        for (int k = 0; k < L / 2; ++k) {
            const double v = 0.5 * (h[static_cast<std::size_t>(k)] +
                                    h[static_cast<std::size_t>(L - 1 - k)]);
            h[static_cast<std::size_t>(k)] = v;
            h[static_cast<std::size_t>(L - 1 - k)] = v;
        }
    }
}

}  // namespace detail

/// Root raised-cosine taps: span_symbols * oversampling + 1 of them,
/// symmetric, unit energy, center tap maximal. The truncated analytic pulse
/// is refined so the matched pair meets the Nyquist zero-ISI criterion at
/// every symbol lag the filter spans.
inline std::vector<double> rrc_taps(double rolloff, int oversampling, int span_symbols) {
    if (rolloff <= 0.0 || rolloff >= 1.0) throw std::domain_error("rolloff must lie in (0, 1)");
    if (oversampling < 1 || span_symbols < 1)
        throw std::invalid_argument("oversampling and span must be >= 1");
    auto taps = detail::rrc_taps_analytic(rolloff, oversampling, span_symbols);
    detail::enforce_nyquist(taps, oversampling, span_symbols);
    return taps;
}

namespace detail {

/// Full convolution of the upsampled symbol train with the RRC taps.
inline ComplexSeries shape_symbols_full(const std::vector<cplx>& symbols, const ModemParams& p) {
    const int os = p.oversampling;
    const auto taps = rrc_taps(p.rolloff, os, p.rrc_span);
    const int up_len = static_cast<int>(symbols.size()) * os;

    ComplexSeries full(static_cast<std::size_t>(up_len + static_cast<int>(taps.size()) - 1),
                       cplx(0.0, 0.0));
    for (int s = 0; s < static_cast<int>(symbols.size()); ++s) {
        const cplx sym = symbols[static_cast<std::size_t>(s)];
        if (sym == cplx(0.0, 0.0)) continue;
        double* out = reinterpret_cast<double*>(full.data() + s * os);
        for (std::size_t k = 0; k < taps.size(); ++k) {
            out[2 * k] += sym.real() * taps[k];
            out[2 * k + 1] += sym.imag() * taps[k];
        }
    }
    return full;
}

/// Shape and cut out N fully-formed samples: `span` extra symbols are
/// generated and the group delay trimmed so the output never contains the
/// filter's edge transient.
inline ComplexSeries shape_symbols(const std::vector<cplx>& symbols, const ModemParams& p) {
    const auto full = shape_symbols_full(symbols, p);
    const int start = p.rrc_span * p.oversampling;
    return ComplexSeries(full.begin() + start, full.begin() + start + p.signal_length);
}

inline void normalize_power(ComplexSeries& x) {
    double p = 0.0;
    for (const cplx& v : x) p += std::norm(v);
    p /= static_cast<double>(x.size());
    const double scale = 1.0 / std::sqrt(p);
    for (cplx& v : x) v *= scale;
}

}  // namespace detail

/// Map bits onto constellation symbols, RRC-shape, and normalize the result
/// to unit average power. OQPSK delays the Q rail by oversampling/2 samples
/// after shaping. Needs bits_per_symbol * (N/oversampling + span) bits.
inline ComplexSeries modulate_linear(const std::vector<int>& bits, ModulationType mod,
                                     const ModemParams& p) {
    if (!is_linear(mod)) throw std::invalid_argument("not a linear modulation");
    p.validate();

    const int bps = bits_per_symbol(mod);
    const int n_sym = p.symbols() + p.rrc_span;  // span extra for transient trimming
    if (static_cast<int>(bits.size()) < n_sym * bps)
        throw std::length_error("need " + std::to_string(n_sym * bps) + " bits, got " +
                                std::to_string(bits.size()));

    const auto points = constellation(mod);
    std::vector<cplx> symbols(static_cast<std::size_t>(n_sym));
    for (int s = 0; s < n_sym; ++s) {
        unsigned index = 0;
        for (int b = 0; b < bps; ++b)
            index = (index << 1) | static_cast<unsigned>(bits[static_cast<std::size_t>(s * bps + b)] & 1);
        symbols[static_cast<std::size_t>(s)] = points[index];
    }

    if (mod == ModulationType::OQPSK) {
        // shape as QPSK, then stagger the Q rail by half a symbol
        const auto full = detail::shape_symbols_full(symbols, p);
        const int start = p.rrc_span * p.oversampling;
        const int delay = p.oversampling / 2;
        ComplexSeries out(static_cast<std::size_t>(p.signal_length));
        for (int n = 0; n < p.signal_length; ++n)
            out[static_cast<std::size_t>(n)] =
                cplx(full[static_cast<std::size_t>(start + n)].real(),
                     full[static_cast<std::size_t>(start + n - delay)].imag());
        detail::normalize_power(out);
        return out;
    }

    auto out = detail::shape_symbols(symbols, p);
    detail::normalize_power(out);
    return out;
}

/// Convenience overload drawing random bits from `rng`.
inline ComplexSeries modulate_linear(ModulationType mod, const ModemParams& p, Rng& rng) {
    const int n_bits = bits_per_symbol(mod) * (p.symbols() + p.rrc_span);
    std::vector<int> bits(static_cast<std::size_t>(n_bits));
    for (int& b : bits) b = rng.bit() ? 1 : 0;
    return modulate_linear(bits, mod, p);
}

/// Continuous-phase FSK: symbol m rides at (2m - M + 1) * h / (2 * Tsym),
/// phase accumulates across symbol boundaries, |x(n)| = 1 for every n.
inline ComplexSeries modulate_fsk(const std::vector<int>& symbols, int order,
                                  const ModemParams& p) {
    if (order != 2 && order != 4 && order != 8)
        throw std::invalid_argument("FSK order must be 2, 4, or 8");
    p.validate();
    const double max_tone =
        (order - 1) * p.fsk_index / (2.0 * p.oversampling);  // cycles per sample
    if (max_tone >= 0.5)
        throw std::domain_error("FSK tones alias: peak tone " + std::to_string(max_tone) +
                                " cycles/sample >= 0.5");
    if (static_cast<int>(symbols.size()) < p.symbols())
        throw std::length_error("need " + std::to_string(p.symbols()) + " symbols");

    ComplexSeries out(static_cast<std::size_t>(p.signal_length));
    double phase = 0.0;
    for (int n = 0; n < p.signal_length; ++n) {
        const int m = symbols[static_cast<std::size_t>(n / p.oversampling)];
        if (m < 0 || m >= order) throw std::invalid_argument("FSK symbol out of range");
        out[static_cast<std::size_t>(n)] = cplx(std::cos(phase), std::sin(phase));
        const double freq = (2.0 * m - order + 1) * p.fsk_index / (2.0 * p.oversampling);
        phase += 2.0 * std::numbers::pi * freq;
    }
    return out;
}

/// Convenience overload drawing random tone indices from `rng`.
inline ComplexSeries modulate_fsk(ModulationType mod, const ModemParams& p, Rng& rng) {
    const int order = fsk_order(mod);
    std::vector<int> symbols(static_cast<std::size_t>(p.symbols()));
    for (int& s : symbols) s = static_cast<int>(rng.below(static_cast<std::uint64_t>(order)));
    return modulate_fsk(symbols, order, p);
}

/// Dispatch on modulation family; draws bits/symbols from `rng`.
inline ComplexSeries modulate(ModulationType mod, const ModemParams& p, Rng& rng) {
    return is_fsk(mod) ? modulate_fsk(mod, p, rng) : modulate_linear(mod, p, rng);
}

/// y(n) = x(n) * exp(j 2 pi f_off n); f_off in cycles per sample.
inline ComplexSeries apply_freq_offset(const ComplexSeries& x, double f_off) {
    ComplexSeries y(x.size());
    const double w = 2.0 * std::numbers::pi * f_off;
    for (std::size_t n = 0; n < x.size(); ++n)
        y[n] = x[n] * std::polar(1.0, w * static_cast<double>(n));
    return y;
}

}  // namespace mamr::modem
