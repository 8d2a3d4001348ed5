#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mamr/datagen.hpp"
#include "mamr/rng.hpp"

namespace mamr::augment {

using datagen::Dataset;
using datagen::IQMatrix;
using datagen::LabeledSample;

/// Largest number of distinct antenna-pair exchanges: C(C-1)/2.
inline int max_exchanges(int antennas) {
    if (antennas < 1) throw std::invalid_argument("antennas must be >= 1");
    return antennas * (antennas - 1) / 2;
}

/// All antenna pairs (i, j), 1 <= i < j <= C, in lexicographic order.
inline std::vector<std::pair<int, int>> all_pairs(int antennas) {
    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(static_cast<std::size_t>(max_exchanges(antennas)));
    for (int i = 1; i <= antennas; ++i)
        for (int j = i + 1; j <= antennas; ++j) pairs.emplace_back(i, j);
    return pairs;
}

/// Swap the IQ row blocks of antennas i and j (1-based). Rows of all other
/// antennas are untouched; the label contract is the caller's.
inline IQMatrix exchange(const IQMatrix& m, int i, int j) {
    if (i < 1 || j < 1 || i > m.antennas || j > m.antennas || i == j)
        throw std::out_of_range("exchange: antenna indices must be distinct and in [1, C]");
    IQMatrix out = m;
    for (int r = 0; r < 2; ++r) {
        float* a = out.row(2 * (i - 1) + r);
        float* b = out.row(2 * (j - 1) + r);
        for (int n = 0; n < m.length; ++n) std::swap(a[n], b[n]);
    }
    return out;
}

enum class FlipMode : std::uint8_t { I, Q, IQ };

/// Negate the I rails (mode I), Q rails (mode Q), or all rows (mode IQ)
/// across every antenna.
inline IQMatrix flip(const IQMatrix& m, FlipMode mode) {
    IQMatrix out = m;
    for (int a = 0; a < m.antennas; ++a) {
        const bool neg_i = mode != FlipMode::Q;
        const bool neg_q = mode != FlipMode::I;
        if (neg_i) {
            float* row = out.row(2 * a);
            for (int n = 0; n < m.length; ++n) row[n] = -row[n];
        }
        if (neg_q) {
            float* row = out.row(2 * a + 1);
            for (int n = 0; n < m.length; ++n) row[n] = -row[n];
        }
    }
    return out;
}

inline const char* to_string(FlipMode mode) {
    switch (mode) {
        case FlipMode::I: return "flipI";
        case FlipMode::Q: return "flipQ";
        case FlipMode::IQ: return "flipIQ";
    }
    return "?";
}

/// Raw sample plus D exchanged variants, all carrying the source label and
/// SNR. Pairs are drawn uniformly without replacement when D < D_max.
inline std::vector<LabeledSample> build_exchange_set(const LabeledSample& s, int exchanges,
                                                     Rng& rng) {
    const int d_max = max_exchanges(s.matrix.antennas);
    if (exchanges < 0 || exchanges > d_max)
        throw std::domain_error("exchanges must lie in [0, " + std::to_string(d_max) + "]");

    auto pairs = all_pairs(s.matrix.antennas);
    if (exchanges < d_max) {
        for (int k = 0; k < exchanges; ++k) {
            const std::size_t swap_with =
                static_cast<std::size_t>(k) + rng.below(pairs.size() - static_cast<std::size_t>(k));
            std::swap(pairs[static_cast<std::size_t>(k)], pairs[swap_with]);
        }
    }

    std::vector<LabeledSample> out;
    out.reserve(static_cast<std::size_t>(1 + exchanges));
    out.push_back(s);
    for (int k = 0; k < exchanges; ++k) {
        const auto [i, j] = pairs[static_cast<std::size_t>(k)];
        LabeledSample v = s;
        v.matrix = exchange(s.matrix, i, j);
        v.meta.provenance =
            s.meta.provenance + "+exchange(" + std::to_string(i) + "," + std::to_string(j) + ")";
        out.push_back(std::move(v));
    }
    return out;
}

/// The four-element flip orbit {raw, flipI, flipQ, flipIQ}.
inline std::vector<LabeledSample> flip_all(const LabeledSample& s) {
    std::vector<LabeledSample> out;
    out.reserve(4);
    out.push_back(s);
    for (FlipMode mode : {FlipMode::I, FlipMode::Q, FlipMode::IQ}) {
        LabeledSample v = s;
        v.matrix = flip(s.matrix, mode);
        v.meta.provenance = s.meta.provenance + "+" + to_string(mode);
        out.push_back(std::move(v));
    }
    return out;
}

/// Dataset-level flip policy: none (factor 1), a single flip variant per
/// sample (I or IQ, factor 2), or the full orbit (ALL, factor 4).
enum class FlipPolicy : std::uint8_t { None, I, Q, IQ, All };

inline int flip_factor(FlipPolicy p) { return p == FlipPolicy::None ? 1 : p == FlipPolicy::All ? 4 : 2; }

inline const char* to_string(FlipPolicy p) {
    switch (p) {
        case FlipPolicy::None: return "none";
        case FlipPolicy::I: return "i";
        case FlipPolicy::Q: return "q";
        case FlipPolicy::IQ: return "iq";
        case FlipPolicy::All: return "all";
    }
    return "?";
}

inline FlipPolicy flip_policy_from_string(const std::string& name) {
    if (name == "none") return FlipPolicy::None;
    if (name == "i") return FlipPolicy::I;
    if (name == "q") return FlipPolicy::Q;
    if (name == "iq") return FlipPolicy::IQ;
    if (name == "all") return FlipPolicy::All;
    throw std::invalid_argument("unknown flip mode: " + name);
}

/// Exchange-then-flip expansion of a whole dataset:
/// |out| = |d| * (1 + exchanges) * flip_factor. Exchange pairs are re-drawn
/// per sample from a stream seeded by (seed, sample index).
inline Dataset compose(const Dataset& d, int exchanges, FlipPolicy flips, std::uint64_t seed) {
    const int d_max = max_exchanges(d.antennas);
    if (exchanges < 0 || exchanges > d_max)
        throw std::domain_error("exchanges must lie in [0, " + std::to_string(d_max) + "]");

    Dataset out;
    out.antennas = d.antennas;
    out.length = d.length;
    out.flags = d.flags;
    out.info = d.info;
    out.samples.reserve(d.samples.size() * static_cast<std::size_t>(1 + exchanges) *
                        static_cast<std::size_t>(flip_factor(flips)));

    for (std::size_t idx = 0; idx < d.samples.size(); ++idx) {
        Rng rng(derive_seed(seed, idx));
        auto exchanged = build_exchange_set(d.samples[idx], exchanges, rng);
        for (auto& e : exchanged) {
            switch (flips) {
                case FlipPolicy::None:
                    out.samples.push_back(std::move(e));
                    break;
                case FlipPolicy::I:
                case FlipPolicy::Q:
                case FlipPolicy::IQ: {
                    const FlipMode mode = flips == FlipPolicy::I   ? FlipMode::I
                                          : flips == FlipPolicy::Q ? FlipMode::Q
                                                                   : FlipMode::IQ;
                    LabeledSample v = e;
                    v.matrix = flip(e.matrix, mode);
                    v.meta.provenance = e.meta.provenance + "+" + to_string(mode);
                    out.samples.push_back(std::move(e));
                    out.samples.push_back(std::move(v));
                    break;
                }
                case FlipPolicy::All: {
                    for (auto& v : flip_all(e)) out.samples.push_back(std::move(v));
                    break;
                }
            }
        }
    }

    std::map<std::string, std::size_t> tag_counts;
    for (const auto& s : out.samples) ++tag_counts[s.meta.provenance];
    nlohmann::json counts;
    for (const auto& [tag, n] : tag_counts) counts[tag] = n;
    out.info["augmentation"] = {{"exchanges", exchanges},
                                {"flip", to_string(flips)},
                                {"seed", seed},
                                {"provenance_counts", counts}};
    return out;
}

}  // namespace mamr::augment
