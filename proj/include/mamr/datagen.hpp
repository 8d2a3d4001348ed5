#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mamr/binio.hpp"
#include "mamr/channel.hpp"
#include "mamr/modem.hpp"
#include "mamr/parallel.hpp"
#include "mamr/rng.hpp"

namespace mamr::datagen {

using modem::ComplexSeries;
using modem::ModulationType;

inline constexpr const char* kGeneratorVersion = "1.0.0";

/// The spliced 2C x N sample matrix: rows I1, Q1, I2, Q2, ..., IC, QC.
struct IQMatrix {
    int antennas = 0;
    int length = 0;
    std::vector<float> values;  ///< row-major, 2*antennas rows

    IQMatrix() = default;
    IQMatrix(int antennas_, int length_)
        : antennas(antennas_),
          length(length_),
          values(static_cast<std::size_t>(2 * antennas_) * static_cast<std::size_t>(length_),
                 0.0f) {}

    int rows() const { return 2 * antennas; }
    float* row(int r) { return values.data() + static_cast<std::size_t>(r) * length; }
    const float* row(int r) const { return values.data() + static_cast<std::size_t>(r) * length; }
    float& at(int r, int n) { return values[static_cast<std::size_t>(r) * length + n]; }
    float at(int r, int n) const { return values[static_cast<std::size_t>(r) * length + n]; }

    bool operator==(const IQMatrix&) const = default;
};

/// Extract the I and Q rails of one series, order preserving.
template <typename Scalar = float>
std::pair<std::vector<Scalar>, std::vector<Scalar>> extract_iq(const ComplexSeries& y) {
    std::vector<Scalar> i(y.size()), q(y.size());
    for (std::size_t n = 0; n < y.size(); ++n) {
        i[n] = static_cast<Scalar>(y[n].real());
        q[n] = static_cast<Scalar>(y[n].imag());
    }
    return {std::move(i), std::move(q)};
}

/// Splice C equal-length received series into the 2C x N matrix.
inline IQMatrix assemble(const std::vector<ComplexSeries>& ys) {
    if (ys.empty()) throw std::invalid_argument("assemble: no series");
    const std::size_t n = ys.front().size();
    for (const auto& y : ys)
        if (y.size() != n) throw std::invalid_argument("assemble: ragged series lengths");

    IQMatrix m(static_cast<int>(ys.size()), static_cast<int>(n));
    for (int a = 0; a < m.antennas; ++a) {
        float* irow = m.row(2 * a);
        float* qrow = m.row(2 * a + 1);
        for (std::size_t k = 0; k < n; ++k) {
            irow[k] = static_cast<float>(ys[static_cast<std::size_t>(a)][k].real());
            qrow[k] = static_cast<float>(ys[static_cast<std::size_t>(a)][k].imag());
        }
    }
    return m;
}

/// Per-sample generation provenance; not persisted in the binary file.
struct SampleMeta {
    double rolloff = 0.0;
    double freq_offset = 0.0;
    std::vector<double> phases;
    std::uint64_t seed_index = 0;
    std::string provenance = "raw";
};

struct LabeledSample {
    IQMatrix matrix;
    std::uint8_t label = 0;     ///< canonical modulation index, 0..11
    std::int16_t snr_decidb = 0;  ///< SNR in dB * 10
    SampleMeta meta;

    double snr_db() const { return snr_decidb / 10.0; }
};

struct Dataset {
    std::uint16_t antennas = 0;
    std::uint32_t length = 0;
    std::uint32_t flags = 0;
    std::vector<LabeledSample> samples;
    nlohmann::json info;  ///< sidecar payload: spec echo, augmentation notes

    std::size_t size() const { return samples.size(); }

    /// Sorted distinct canonical labels present.
    std::vector<std::uint8_t> class_labels() const {
        std::vector<std::uint8_t> out;
        for (const auto& s : samples)
            if (std::find(out.begin(), out.end(), s.label) == out.end()) out.push_back(s.label);
        std::sort(out.begin(), out.end());
        return out;
    }

    /// Sorted distinct SNR grid points present (decidB).
    std::vector<std::int16_t> snr_points() const {
        std::vector<std::int16_t> out;
        for (const auto& s : samples)
            if (std::find(out.begin(), out.end(), s.snr_decidb) == out.end())
                out.push_back(s.snr_decidb);
        std::sort(out.begin(), out.end());
        return out;
    }
};

struct DatasetSpec {
    std::vector<ModulationType> mods = all_modulations();
    double snr_min_db = -20.0;
    double snr_max_db = 30.0;
    double snr_step_db = 2.0;
    int per_class_per_snr = 500;
    channel::ChannelConfig channel;
    modem::ModemParams modem;
    std::uint64_t master_seed = 1;

    static std::vector<ModulationType> all_modulations() {
        std::vector<ModulationType> mods(modem::kNumModulations);
        for (int i = 0; i < modem::kNumModulations; ++i) mods[i] = static_cast<ModulationType>(i);
        return mods;
    }

    std::vector<double> snr_grid() const {
        std::vector<double> grid;
        for (double s = snr_min_db; s <= snr_max_db + 1e-9; s += snr_step_db) grid.push_back(s);
        return grid;
    }

    void validate() const {
        if (mods.empty()) throw std::invalid_argument("no modulations selected");
        if (snr_step_db <= 0.0) throw std::invalid_argument("snr step must be > 0");
        if (snr_max_db < snr_min_db) throw std::invalid_argument("snr max < min");
        if (per_class_per_snr < 0) throw std::invalid_argument("per_class_per_snr must be >= 0");
        modem.validate();
        channel.validate();
    }

    nlohmann::json to_json() const;
};

inline std::int16_t to_decidb(double snr_db) {
    return static_cast<std::int16_t>(std::lround(snr_db * 10.0));
}

/// Generate one sample. All randomness is a pure function of
/// (master_seed, modulation, snr, k), which makes parallel generation
/// order-independent.
inline LabeledSample generate_sample(const DatasetSpec& spec, ModulationType mod, double snr_db,
                                     std::uint64_t k) {
    const std::int16_t snr_dec = to_decidb(snr_db);
    const std::uint64_t seed =
        derive_seed(spec.master_seed, static_cast<std::uint64_t>(mod),
                    static_cast<std::uint64_t>(static_cast<std::int64_t>(snr_dec)), k);
    Rng rng(seed);

    modem::ModemParams mp = spec.modem;
    mp.rolloff = rng.uniform(0.2, 0.7);
    mp.freq_offset = rng.uniform(-0.2, 0.2);

    ComplexSeries x = modem::modulate(mod, mp, rng);
    x = modem::apply_freq_offset(x, mp.offset_cycles_per_sample());

    channel::ChannelConfig cc = spec.channel;
    cc.snr_db = snr_db;
    const auto gains = channel::make_gains(cc, rng);
    const bool noisy = std::isfinite(snr_db);
    const double sigma = noisy ? std::sqrt(std::pow(10.0, -snr_db / 10.0) / 2.0) : 0.0;

    std::vector<ComplexSeries> ys(gains.size());
    for (std::size_t i = 0; i < gains.size(); ++i) {
        ys[i].resize(x.size());
        for (std::size_t n = 0; n < x.size(); ++n) {
            channel::cplx w(0.0, 0.0);
            if (noisy) w = channel::cplx(sigma * rng.normal(), sigma * rng.normal());
            ys[i][n] = gains[i] * x[n] + w;
        }
    }

    LabeledSample s;
    s.matrix = assemble(ys);
    s.label = static_cast<std::uint8_t>(mod);
    s.snr_decidb = snr_dec;
    s.meta.rolloff = mp.rolloff;
    s.meta.freq_offset = mp.freq_offset;
    s.meta.seed_index = k;
    s.meta.phases.reserve(gains.size());
    for (const auto& g : gains) s.meta.phases.push_back(std::arg(g));
    return s;
}

/// Generate the full (modulation x SNR x k) grid. Sample order is
/// modulation-major, then SNR, then k; content does not depend on `threads`.
inline Dataset generate(const DatasetSpec& spec, unsigned threads = 0) {
    spec.validate();
    const auto grid = spec.snr_grid();

    struct Slot {
        ModulationType mod;
        double snr_db;
        std::uint64_t k;
    };
    std::vector<Slot> slots;
    slots.reserve(spec.mods.size() * grid.size() *
                  static_cast<std::size_t>(spec.per_class_per_snr));
    for (ModulationType mod : spec.mods)
        for (double snr : grid)
            for (int k = 0; k < spec.per_class_per_snr; ++k)
                slots.push_back({mod, snr, static_cast<std::uint64_t>(k)});

    Dataset d;
    d.antennas = static_cast<std::uint16_t>(spec.channel.antennas);
    d.length = static_cast<std::uint32_t>(spec.modem.signal_length);
    d.flags = spec.modem.offset_ref == modem::OffsetReference::SymbolRate ? 1u : 0u;
    d.samples.resize(slots.size());
    parallel_for(
        slots.size(),
        [&](std::size_t i) {
            d.samples[i] = generate_sample(spec, slots[i].mod, slots[i].snr_db, slots[i].k);
        },
        threads);
    d.info = {{"spec", spec.to_json()}, {"generator_version", kGeneratorVersion}};
    return d;
}

inline nlohmann::json DatasetSpec::to_json() const {
    nlohmann::json mods_json = nlohmann::json::array();
    for (ModulationType m : mods) mods_json.push_back(modem::to_string(m));
    nlohmann::json phases = nlohmann::json::array();
    for (double p : channel.fixed_phases) phases.push_back(p);
    return {
        {"mods", mods_json},
        {"snr_min_db", snr_min_db},
        {"snr_max_db", snr_max_db},
        {"snr_step_db", snr_step_db},
        {"per_class_per_snr", per_class_per_snr},
        {"antennas", channel.antennas},
        {"antenna_setting",
         channel.setting == channel::AntennaSetting::Fixed ? "fixed" : "random"},
        {"fixed_phases", phases},
        {"oversampling", modem.oversampling},
        {"signal_length", modem.signal_length},
        {"rrc_span", modem.rrc_span},
        {"fsk_index", modem.fsk_index},
        {"offset_reference",
         modem.offset_ref == modem::OffsetReference::SampleRate ? "sample_rate" : "symbol_rate"},
        {"master_seed", master_seed},
    };
}

// ---------------------------------------------------------------------------
// Dataset file format (little-endian):
//   magic "MAMR", version u16 = 1, antennas u16, length u32,
//   sample_count u64, flags u32                                  (24 bytes)
// then per sample:
//   label u8, pad u8, snr_decidb i16, 2C*N float32 row-major.
// A JSON sidecar "<path>.meta.json" carries the label map and spec echo.
// ---------------------------------------------------------------------------

inline constexpr char kDatasetMagic[5] = "MAMR";
inline constexpr std::uint16_t kDatasetVersion = 1;

inline std::string sidecar_path(const std::string& path) { return path + ".meta.json"; }

inline void write_dataset(const Dataset& d, const std::string& path) {
    io::Writer w(path);
    w.magic(kDatasetMagic);
    w.value<std::uint16_t>(kDatasetVersion);
    w.value<std::uint16_t>(d.antennas);
    w.value<std::uint32_t>(d.length);
    w.value<std::uint64_t>(d.samples.size());
    w.value<std::uint32_t>(d.flags);
    for (const auto& s : d.samples) {
        if (s.matrix.antennas != d.antennas || s.matrix.length != static_cast<int>(d.length))
            throw std::invalid_argument("sample shape does not match dataset header");
        w.value<std::uint8_t>(s.label);
        w.value<std::uint8_t>(0);
        w.value<std::int16_t>(s.snr_decidb);
        w.bytes(s.matrix.values.data(), s.matrix.values.size() * sizeof(float));
    }
    w.close();

    nlohmann::json labels;
    for (int i = 0; i < modem::kNumModulations; ++i)
        labels[std::to_string(i)] = modem::to_string(static_cast<ModulationType>(i));
    nlohmann::json side = {{"labels", labels}, {"generator_version", kGeneratorVersion}};
    if (!d.info.is_null()) side.update(d.info);
    std::ofstream meta(sidecar_path(path));
    meta << side.dump(2) << "\n";
}

inline Dataset read_dataset(const std::string& path) {
    io::Reader r(path);
    r.expect_magic(kDatasetMagic, "dataset");
    const auto version = r.value<std::uint16_t>();
    if (version != kDatasetVersion)
        throw io::VersionError(path + ": unsupported dataset version " + std::to_string(version));

    Dataset d;
    d.antennas = r.value<std::uint16_t>();
    d.length = r.value<std::uint32_t>();
    const auto count = r.value<std::uint64_t>();
    d.flags = r.value<std::uint32_t>();
    d.samples.resize(count);
    for (auto& s : d.samples) {
        s.label = r.value<std::uint8_t>();
        r.value<std::uint8_t>();  // pad
        s.snr_decidb = r.value<std::int16_t>();
        s.matrix = IQMatrix(d.antennas, static_cast<int>(d.length));
        r.bytes(s.matrix.values.data(), s.matrix.values.size() * sizeof(float));
    }

    std::ifstream meta(sidecar_path(path));
    if (meta) {
        try {
            d.info = nlohmann::json::parse(meta);
        } catch (const nlohmann::json::parse_error&) {
            d.info = nlohmann::json();  // ignore a damaged sidecar; the binary rules
        }
    }
    return d;
}

/// Per-(class, snr) stratified subsample: keeps round(ratio * stratum size)
/// samples per stratum, chosen uniformly without replacement, original order.
inline Dataset split_few_shot(const Dataset& d, double sample_ratio, Rng& rng) {
    if (!(sample_ratio > 0.0) || sample_ratio > 1.0)
        throw std::domain_error("sample_ratio must lie in (0, 1]");

    std::map<std::pair<std::uint8_t, std::int16_t>, std::vector<std::size_t>> strata;
    for (std::size_t i = 0; i < d.samples.size(); ++i)
        strata[{d.samples[i].label, d.samples[i].snr_decidb}].push_back(i);

    std::vector<std::size_t> chosen;
    for (auto& [key, indices] : strata) {
        const auto want = static_cast<std::size_t>(
            std::lround(sample_ratio * static_cast<double>(indices.size())));
        // partial Fisher-Yates: the first `want` entries are a uniform draw
        for (std::size_t j = 0; j < want && j < indices.size(); ++j) {
            const std::size_t swap_with =
                j + static_cast<std::size_t>(rng.below(indices.size() - j));
            std::swap(indices[j], indices[swap_with]);
        }
        chosen.insert(chosen.end(), indices.begin(),
                      indices.begin() + static_cast<std::ptrdiff_t>(
                                            std::min(want, indices.size())));
    }
    std::sort(chosen.begin(), chosen.end());

    Dataset out;
    out.antennas = d.antennas;
    out.length = d.length;
    out.flags = d.flags;
    out.info = d.info;
    out.info["few_shot_ratio"] = sample_ratio;
    out.samples.reserve(chosen.size());
    for (std::size_t i : chosen) out.samples.push_back(d.samples[i]);
    return out;
}

}  // namespace mamr::datagen
