#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "mamr/modem.hpp"
#include "mamr/rng.hpp"

namespace mamr::channel {

using modem::ComplexSeries;
using modem::cplx;

enum class AntennaSetting : std::uint8_t { Fixed = 0, Random = 1 };

/// Flat per-antenna channel: unit-magnitude phase gains plus AWGN calibrated
/// to snr_db against a unit-power input.
struct ChannelConfig {
    int antennas = 4;
    AntennaSetting setting = AntennaSetting::Fixed;
    std::vector<double> fixed_phases;  ///< radians; defaults to 2*pi*i/C when empty
    double snr_db = 10.0;              ///< +infinity disables noise

    void validate() const {
        if (antennas < 1) throw std::invalid_argument("antennas must be >= 1");
        if (setting == AntennaSetting::Fixed && !fixed_phases.empty() &&
            static_cast<int>(fixed_phases.size()) != antennas)
            throw std::invalid_argument("fixed_phases must have one entry per antenna");
    }

    double phase_of(int i) const {
        if (!fixed_phases.empty()) return fixed_phases[static_cast<std::size_t>(i)];
        return 2.0 * std::numbers::pi * i / antennas;
    }
};

/// Per-antenna gains g_i = exp(j phi_i). Fixed setting: phases from the
/// config, identical across samples. Random setting: phases drawn uniform on
/// [0, 2 pi) per call.
inline std::vector<cplx> make_gains(const ChannelConfig& cfg, Rng& rng) {
    cfg.validate();
    std::vector<cplx> gains(static_cast<std::size_t>(cfg.antennas));
    for (int i = 0; i < cfg.antennas; ++i) {
        const double phi = cfg.setting == AntennaSetting::Fixed
                               ? cfg.phase_of(i)
                               : rng.uniform(0.0, 2.0 * std::numbers::pi);
        gains[static_cast<std::size_t>(i)] = std::polar(1.0, phi);
    }
    return gains;
}

/// y_i(n) = g_i x(n) + w_i(n). Noise power per antenna is
/// 10^(-snr_db/10) * P_x with P_x assumed 1 (modem postcondition); real and
/// imaginary parts carry half the power each, independent across antennas
/// and samples.
inline std::vector<ComplexSeries> receive(const ComplexSeries& x, const ChannelConfig& cfg,
                                          Rng& rng) {
    cfg.validate();
    for (const cplx& v : x)
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
            throw std::invalid_argument("input series contains non-finite samples");

    const auto gains = make_gains(cfg, rng);
    const bool noisy = std::isfinite(cfg.snr_db);
    const double noise_power = noisy ? std::pow(10.0, -cfg.snr_db / 10.0) : 0.0;
    const double sigma = std::sqrt(noise_power / 2.0);

    std::vector<ComplexSeries> out(static_cast<std::size_t>(cfg.antennas));
    for (int i = 0; i < cfg.antennas; ++i) {
        ComplexSeries& y = out[static_cast<std::size_t>(i)];
        y.resize(x.size());
        const cplx g = gains[static_cast<std::size_t>(i)];
        for (std::size_t n = 0; n < x.size(); ++n) {
            cplx w(0.0, 0.0);
            if (noisy) w = cplx(sigma * rng.normal(), sigma * rng.normal());
            y[n] = g * x[n] + w;
        }
    }
    return out;
}

}  // namespace mamr::channel
