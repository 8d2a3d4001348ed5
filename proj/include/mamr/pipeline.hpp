#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mamr/augment.hpp"
#include "mamr/datagen.hpp"
#include "mamr/nn/checkpoint.hpp"
#include "mamr/nn/network.hpp"
#include "mamr/nn/train.hpp"

namespace mamr::pipeline {

using datagen::Dataset;
using datagen::IQMatrix;
using datagen::LabeledSample;
using nn::LabelMap;

/// Posterior over the model's class positions.
using ClassPosterior = std::vector<double>;

enum class FusionMode : std::uint8_t { Single = 0, DV = 1, WA = 2, IQ = 3 };

inline const char* to_string(FusionMode m) {
    switch (m) {
        case FusionMode::Single: return "single";
        case FusionMode::DV: return "dv";
        case FusionMode::WA: return "wa";
        case FusionMode::IQ: return "iq";
    }
    return "?";
}

inline FusionMode fusion_from_string(const std::string& name) {
    if (name == "single") return FusionMode::Single;
    if (name == "dv") return FusionMode::DV;
    if (name == "wa") return FusionMode::WA;
    if (name == "iq") return FusionMode::IQ;
    throw std::invalid_argument("unknown fusion mode: " + name);
}

/// Whether the mode consumes the spliced 2C-row matrix (true) or per-antenna
/// 2-row slices (false).
inline bool uses_spliced_input(FusionMode m) { return m == FusionMode::IQ; }

namespace detail {

template <typename T>
nn::Tensor<T> matrix_tensor(const IQMatrix& m) {
    nn::Tensor<T> x(1, 1, m.rows(), m.length);
    for (int r = 0; r < m.rows(); ++r) {
        const float* src = m.row(r);
        T* dst = x.row(0, 0, r);
        for (int k = 0; k < m.length; ++k) dst[k] = static_cast<T>(src[k]);
    }
    return x;
}

inline ClassPosterior posterior_row(const nn::Tensor<float>& probs, int ni) {
    const float* p = probs.plane(ni, 0);
    return ClassPosterior(p, p + probs.c);
}

}  // namespace detail

/// One forward pass over the full spliced matrix.
inline ClassPosterior classify_iq(nn::Network<float>& net, const IQMatrix& m) {
    if (net.spec().input_rows != m.rows() || net.spec().input_cols != m.length)
        throw std::invalid_argument("model expects a different matrix shape");
    const auto probs = net.posterior(detail::matrix_tensor<float>(m));
    return detail::posterior_row(probs, 0);
}

/// The 2-row slice of antenna i (1-based) of a spliced matrix.
inline IQMatrix antenna_slice(const IQMatrix& m, int antenna) {
    if (antenna < 1 || antenna > m.antennas) throw std::out_of_range("antenna index");
    IQMatrix out(1, m.length);
    std::copy_n(m.row(2 * (antenna - 1)), m.length, out.row(0));
    std::copy_n(m.row(2 * (antenna - 1) + 1), m.length, out.row(1));
    return out;
}

/// Forward pass on one antenna's rails through a per-antenna (2-row) model.
inline ClassPosterior classify_single(nn::Network<float>& net, const IQMatrix& m, int antenna) {
    if (net.spec().input_rows != 2)
        throw std::invalid_argument("per-antenna classification needs a 2-row model");
    return classify_iq(net, antenna_slice(m, antenna));
}

/// Direct voting: plurality of per-antenna argmax votes; ties go to the
/// class with the larger summed posterior mass, then the lowest index.
inline int fuse_dv(const std::vector<ClassPosterior>& posteriors) {
    if (posteriors.empty()) throw std::invalid_argument("no posteriors to fuse");
    const std::size_t classes = posteriors.front().size();
    std::vector<int> votes(classes, 0);
    for (const auto& p : posteriors) {
        if (p.size() != classes) throw std::invalid_argument("posterior size mismatch");
        const int a = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
        ++votes[static_cast<std::size_t>(a)];
    }
    const int top = *std::max_element(votes.begin(), votes.end());
    int best = -1;
    double best_mass = -1.0;
    for (std::size_t k = 0; k < classes; ++k) {
        if (votes[k] != top) continue;
        double mass = 0.0;
        for (const auto& p : posteriors) mass += p[k];
        if (mass > best_mass) {
            best_mass = mass;
            best = static_cast<int>(k);
        }
    }
    return best;
}

/// Weight average: each antenna weighted by its own confidence
/// max_m p_i(m); argmax of the weighted posterior sum (lowest index on tie).
inline int fuse_wa(const std::vector<ClassPosterior>& posteriors) {
    if (posteriors.empty()) throw std::invalid_argument("no posteriors to fuse");
    const std::size_t classes = posteriors.front().size();
    std::vector<double> score(classes, 0.0);
    for (const auto& p : posteriors) {
        if (p.size() != classes) throw std::invalid_argument("posterior size mismatch");
        const double w = *std::max_element(p.begin(), p.end());
        for (std::size_t k = 0; k < classes; ++k) score[k] += w * p[k];
    }
    return static_cast<int>(std::max_element(score.begin(), score.end()) - score.begin());
}

struct EvalReport {
    double overall = 0.0;
    std::map<std::int16_t, double> per_snr;  ///< snr_decidb -> accuracy
    std::vector<std::vector<long long>> confusion;  ///< [true][predicted]
    std::size_t total = 0;
    std::vector<std::uint8_t> class_labels;

    long long trace() const {
        long long t = 0;
        for (std::size_t k = 0; k < confusion.size(); ++k) t += confusion[k][k];
        return t;
    }
};

/// Tally predicted class positions against the truth.
inline EvalReport evaluate_from_predictions(const std::vector<int>& predicted,
                                            const Dataset& test, const LabelMap& lm) {
    if (predicted.size() != test.samples.size())
        throw std::invalid_argument("one prediction per test sample required");
    EvalReport rep;
    rep.class_labels = lm.classes;
    const std::size_t m = lm.classes.size();
    rep.confusion.assign(m, std::vector<long long>(m, 0));
    rep.total = test.samples.size();

    std::map<std::int16_t, std::pair<std::size_t, std::size_t>> snr_tally;  // correct, count
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.samples.size(); ++i) {
        const int truth = lm.position(test.samples[i].label);
        const int pred = predicted[i];
        if (pred < 0 || pred >= static_cast<int>(m))
            throw std::invalid_argument("prediction out of range");
        ++rep.confusion[static_cast<std::size_t>(truth)][static_cast<std::size_t>(pred)];
        auto& [ok, cnt] = snr_tally[test.samples[i].snr_decidb];
        ++cnt;
        if (pred == truth) {
            ++ok;
            ++correct;
        }
    }
    rep.overall = rep.total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(rep.total);
    for (const auto& [snr, tally] : snr_tally)
        rep.per_snr[snr] = static_cast<double>(tally.first) / static_cast<double>(tally.second);
    return rep;
}

/// Evaluate via an arbitrary per-sample posterior source (prediction =
/// argmax). Used for stub classifiers in tests and the Single path.
inline EvalReport evaluate_fn(const std::function<ClassPosterior(const LabeledSample&)>& posterior,
                              const Dataset& test, const LabelMap& lm) {
    std::vector<int> preds;
    preds.reserve(test.samples.size());
    for (const auto& s : test.samples) {
        const auto p = posterior(s);
        preds.push_back(static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()));
    }
    return evaluate_from_predictions(preds, test, lm);
}

/// Full evaluation of one recognition strategy over a test set.
/// single/dv/wa run the per-antenna model (single uses antenna 1 only);
/// iq runs the spliced model. Forward passes are batched.
inline EvalReport evaluate(FusionMode mode, nn::Network<float>& net, const Dataset& test,
                           const LabelMap& lm, int batch = 256) {
    if (uses_spliced_input(mode)) {
        if (net.spec().input_rows != 2 * test.antennas)
            throw std::invalid_argument("iq evaluation: model rows != 2 * dataset antennas");
    } else {
        if (net.spec().input_rows != 2)
            throw std::invalid_argument("per-antenna evaluation needs a 2-row model");
    }
    if (net.spec().input_cols != static_cast<int>(test.length))
        throw std::invalid_argument("model length != dataset length");

    const int C = test.antennas;
    std::vector<int> preds(test.samples.size(), 0);

    if (mode == FusionMode::IQ) {
        for (std::size_t lo = 0; lo < test.samples.size(); lo += static_cast<std::size_t>(batch)) {
            const std::size_t hi =
                std::min(test.samples.size(), lo + static_cast<std::size_t>(batch));
            nn::Tensor<float> x(static_cast<int>(hi - lo), 1, 2 * C,
                                static_cast<int>(test.length));
            for (std::size_t i = lo; i < hi; ++i) {
                const auto& m = test.samples[i].matrix;
                std::copy(m.values.begin(), m.values.end(),
                          x.plane(static_cast<int>(i - lo), 0));
            }
            const auto logits = net.forward(x, nn::Mode::Infer);
            for (int b = 0; b < logits.n; ++b) {
                const float* z = logits.plane(b, 0);
                preds[lo + static_cast<std::size_t>(b)] =
                    static_cast<int>(std::max_element(z, z + logits.c) - z);
            }
        }
        return evaluate_from_predictions(preds, test, lm);
    }

    // per-antenna model paths; batch over (sample, antenna) pairs
    const int antennas_used = mode == FusionMode::Single ? 1 : C;
    const std::size_t per_sample = static_cast<std::size_t>(antennas_used);
    std::vector<ClassPosterior> buffer(test.samples.size() * per_sample);
    const std::size_t batch_samples = std::max<std::size_t>(1, static_cast<std::size_t>(batch) / per_sample);
    for (std::size_t lo = 0; lo < test.samples.size(); lo += batch_samples) {
        const std::size_t hi = std::min(test.samples.size(), lo + batch_samples);
        const int rows_n = static_cast<int>((hi - lo) * per_sample);
        nn::Tensor<float> x(rows_n, 1, 2, static_cast<int>(test.length));
        int slot = 0;
        for (std::size_t i = lo; i < hi; ++i) {
            const auto& m = test.samples[i].matrix;
            for (int a = 1; a <= antennas_used; ++a, ++slot) {
                std::copy_n(m.row(2 * (a - 1)), m.length, x.row(slot, 0, 0));
                std::copy_n(m.row(2 * (a - 1) + 1), m.length, x.row(slot, 0, 1));
            }
        }
        nn::SoftmaxXent<float> sm;
        const auto& probs = sm.forward(net.forward(x, nn::Mode::Infer));
        slot = 0;
        for (std::size_t i = lo; i < hi; ++i)
            for (int a = 0; a < antennas_used; ++a, ++slot)
                buffer[i * per_sample + static_cast<std::size_t>(a)] =
                    detail::posterior_row(probs, slot);
    }

    for (std::size_t i = 0; i < test.samples.size(); ++i) {
        const auto first = buffer.begin() + static_cast<std::ptrdiff_t>(i * per_sample);
        const std::vector<ClassPosterior> ps(first, first + static_cast<std::ptrdiff_t>(per_sample));
        switch (mode) {
            case FusionMode::Single:
                preds[i] = static_cast<int>(
                    std::max_element(ps[0].begin(), ps[0].end()) - ps[0].begin());
                break;
            case FusionMode::DV:
                preds[i] = fuse_dv(ps);
                break;
            case FusionMode::WA:
                preds[i] = fuse_wa(ps);
                break;
            case FusionMode::IQ:
                break;  // handled above
        }
    }
    return evaluate_from_predictions(preds, test, lm);
}

/// Re-slice a C-antenna dataset into C-times-as-many single-antenna samples
/// (the training diet of the per-antenna model).
inline Dataset antenna_slices(const Dataset& d) {
    Dataset out;
    out.antennas = 1;
    out.length = d.length;
    out.flags = d.flags;
    out.info = d.info;
    out.samples.reserve(d.samples.size() * d.antennas);
    for (const auto& s : d.samples) {
        for (int a = 1; a <= d.antennas; ++a) {
            LabeledSample slice;
            slice.matrix = antenna_slice(s.matrix, a);
            slice.label = s.label;
            slice.snr_decidb = s.snr_decidb;
            slice.meta = s.meta;
            slice.meta.provenance = s.meta.provenance + "+antenna" + std::to_string(a);
            out.samples.push_back(std::move(slice));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// report files
// ---------------------------------------------------------------------------

inline void write_confusion_csv(const EvalReport& rep, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "true\\predicted";
    for (std::uint8_t l : rep.class_labels)
        out << "," << modem::to_string(static_cast<modem::ModulationType>(l));
    out << "\n";
    for (std::size_t r = 0; r < rep.confusion.size(); ++r) {
        out << modem::to_string(static_cast<modem::ModulationType>(rep.class_labels[r]));
        for (long long v : rep.confusion[r]) out << "," << v;
        out << "\n";
    }
}

inline void write_accuracy_by_snr_csv(const std::map<std::string, EvalReport>& reports,
                                      const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "snr_db,mode,accuracy\n";
    for (const auto& [mode, rep] : reports)
        for (const auto& [snr, acc] : rep.per_snr)
            out << (snr / 10.0) << "," << mode << "," << acc << "\n";
}

// ---------------------------------------------------------------------------
// experiment driver
// ---------------------------------------------------------------------------

struct ExperimentConfig {
    nn::Arch arch = nn::Arch::CnnSmall;
    std::vector<FusionMode> modes = {FusionMode::Single, FusionMode::DV, FusionMode::WA,
                                     FusionMode::IQ};
    nn::TrainConfig train;
    std::string report_dir;  ///< empty: keep results in memory only
};

struct ExperimentResult {
    std::map<std::string, EvalReport> reports;  ///< keyed by mode name
    nn::TrainHistory history_iq;
    nn::TrainHistory history_single;
    LabelMap labels;
};

/// Train the models a mode set needs (one 2-row model for single/dv/wa, one
/// 2C-row model for iq), evaluate every requested mode, and optionally
/// write the report files.
inline ExperimentResult run_experiment(const Dataset& train_set, const Dataset& test_set,
                                       const ExperimentConfig& cfg) {
    if (train_set.samples.empty() || test_set.samples.empty())
        throw std::invalid_argument("experiment needs nonempty train and test sets");
    if (train_set.antennas != test_set.antennas || train_set.length != test_set.length)
        throw std::invalid_argument("train/test shape mismatch");

    ExperimentResult result;
    result.labels = LabelMap::from_dataset(train_set);

    const bool want_iq = std::find(cfg.modes.begin(), cfg.modes.end(), FusionMode::IQ) !=
                         cfg.modes.end();
    const bool want_per_antenna = std::any_of(cfg.modes.begin(), cfg.modes.end(),
                                              [](FusionMode m) { return !uses_spliced_input(m); });

    std::unique_ptr<nn::Network<float>> iq_net, single_net;
    if (want_iq) {
        const auto spec = nn::build_network(cfg.arch, train_set.antennas,
                                            static_cast<int>(train_set.length),
                                            result.labels.size());
        iq_net = std::make_unique<nn::Network<float>>(spec, cfg.train.seed);
        result.history_iq = nn::train(*iq_net, train_set, test_set, cfg.train, result.labels);
    }
    if (want_per_antenna) {
        const Dataset train_slices = antenna_slices(train_set);
        const auto spec = nn::build_network(cfg.arch, 1, static_cast<int>(train_set.length),
                                            result.labels.size());
        single_net = std::make_unique<nn::Network<float>>(spec, cfg.train.seed);
        result.history_single =
            nn::train(*single_net, train_slices, Dataset{}, cfg.train, result.labels);
    }

    for (FusionMode mode : cfg.modes) {
        nn::Network<float>& net = uses_spliced_input(mode) ? *iq_net : *single_net;
        result.reports[to_string(mode)] = evaluate(mode, net, test_set, result.labels);
    }

    if (!cfg.report_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(cfg.report_dir);
        write_accuracy_by_snr_csv(result.reports,
                                  (fs::path(cfg.report_dir) / "accuracy_by_snr.csv").string());
        nlohmann::json summary;
        for (const auto& [mode, rep] : result.reports) {
            summary["overall_accuracy"][mode] = rep.overall;
            write_confusion_csv(rep, (fs::path(cfg.report_dir) /
                                      ("confusion_" + mode + ".csv")).string());
        }
        summary["seed"] = cfg.train.seed;
        summary["arch"] = nn::to_string(cfg.arch);
        summary["epochs"] = cfg.train.epochs;
        summary["batch"] = cfg.train.batch;
        summary["lr"] = cfg.train.lr;
        summary["test_samples"] = test_set.samples.size();
        summary["train_samples"] = train_set.samples.size();
        std::ofstream out(fs::path(cfg.report_dir) / "summary.json");
        out << summary.dump(2) << "\n";
    }
    return result;
}

}  // namespace mamr::pipeline
