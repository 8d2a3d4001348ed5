#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "mamr/datagen.hpp"
#include "mamr/nn/network.hpp"
#include "mamr/rng.hpp"

namespace mamr::nn {

struct TrainConfig {
    int epochs = 20;
    int batch = 128;
    double lr = 0.01;
    std::vector<int> decay_epochs = {10, 15};  ///< 1-based; lr *= decay at epoch start
    double decay_factor = 0.1;
    std::uint64_t seed = 1;

    void validate() const {
        if (epochs < 0 || batch < 1 || lr <= 0.0) throw std::invalid_argument("bad train config");
        for (std::size_t i = 1; i < decay_epochs.size(); ++i)
            if (decay_epochs[i] <= decay_epochs[i - 1])
                throw std::invalid_argument("decay epochs must be strictly increasing");
    }

    double lr_at(int epoch) const {  // 1-based
        double v = lr;
        for (int d : decay_epochs)
            if (epoch >= d) v *= decay_factor;
        return v;
    }
};

struct EpochStats {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_acc = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;

    void write_csv(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write history: " + path);
        out << "epoch,lr,train_loss,train_acc,val_acc\n";
        for (const auto& e : epochs)
            out << e.epoch << "," << e.lr << "," << e.train_loss << "," << e.train_acc << ","
                << e.val_acc << "\n";
    }
};

/// Maps canonical dataset labels (0..11) onto contiguous class positions
/// for a net with M outputs.
struct LabelMap {
    std::vector<std::uint8_t> classes;  ///< position -> canonical label

    static LabelMap from_dataset(const datagen::Dataset& d) { return {d.class_labels()}; }

    int size() const { return static_cast<int>(classes.size()); }
    int position(std::uint8_t label) const {
        const auto it = std::find(classes.begin(), classes.end(), label);
        if (it == classes.end())
            throw std::invalid_argument("label " + std::to_string(label) + " not in class set");
        return static_cast<int>(it - classes.begin());
    }
};

/// Copy dataset samples (by index) into a (n, 1, 2C, N) input tensor.
template <typename T>
Tensor<T> batch_tensor(const datagen::Dataset& d, const std::vector<std::size_t>& indices) {
    if (indices.empty()) throw std::invalid_argument("empty batch");
    const int rows = 2 * d.antennas;
    const int cols = static_cast<int>(d.length);
    Tensor<T> x(static_cast<int>(indices.size()), 1, rows, cols);
    for (std::size_t b = 0; b < indices.size(); ++b) {
        const auto& m = d.samples[indices[b]].matrix;
        for (int r = 0; r < rows; ++r) {
            const float* src = m.row(r);
            T* dst = x.row(static_cast<int>(b), 0, r);
            for (int k = 0; k < cols; ++k) dst[k] = static_cast<T>(src[k]);
        }
    }
    return x;
}

/// Accuracy of a frozen net over a dataset (infer mode, batched).
template <typename T>
double evaluate_accuracy(Network<T>& net, const datagen::Dataset& d, const LabelMap& lm,
                         int batch = 256) {
    if (d.samples.empty()) return 0.0;
    std::size_t correct = 0;
    for (std::size_t lo = 0; lo < d.samples.size(); lo += static_cast<std::size_t>(batch)) {
        const std::size_t hi = std::min(d.samples.size(), lo + static_cast<std::size_t>(batch));
        std::vector<std::size_t> idx(hi - lo);
        for (std::size_t i = lo; i < hi; ++i) idx[i - lo] = i;
        const Tensor<T> x = batch_tensor<T>(d, idx);
        const Tensor<T> logits = net.forward(x, Mode::Infer);
        for (int b = 0; b < logits.n; ++b) {
            const T* z = logits.plane(b, 0);
            const int pred = static_cast<int>(std::max_element(z, z + logits.c) - z);
            if (pred == lm.position(d.samples[lo + static_cast<std::size_t>(b)].label)) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(d.samples.size());
}

/// Adam training with the step learning-rate schedule; per-epoch shuffling
/// is seeded, so a (config, data) pair always yields the same model.
template <typename T>
TrainHistory train(Network<T>& net, const datagen::Dataset& train_set,
                   const datagen::Dataset& val_set, const TrainConfig& cfg, const LabelMap& lm) {
    cfg.validate();
    if (train_set.samples.empty()) throw std::invalid_argument("empty training set");
    if (net.spec().classes != lm.size())
        throw std::invalid_argument("net classes do not match label map");

    Adam<T> adam;
    auto params = net.params();
    TrainHistory history;
    long long step = 0;

    std::vector<std::size_t> order(train_set.samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(cfg.seed, 0x5EED, static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle_rng.below(i))]);

        const double lr = cfg.lr_at(epoch);
        double loss_sum = 0.0;
        std::size_t seen = 0, correct = 0;
        for (std::size_t lo = 0; lo < order.size(); lo += static_cast<std::size_t>(cfg.batch)) {
            const std::size_t hi = std::min(order.size(), lo + static_cast<std::size_t>(cfg.batch));
            const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                               order.begin() + static_cast<std::ptrdiff_t>(hi));
            const Tensor<T> x = batch_tensor<T>(train_set, idx);
            std::vector<int> labels(idx.size());
            for (std::size_t b = 0; b < idx.size(); ++b)
                labels[b] = lm.position(train_set.samples[idx[b]].label);

            net.zero_grad();
            const Tensor<T> logits = net.forward(x, Mode::Train);
            SoftmaxXent<T> sm;
            sm.forward(logits);
            loss_sum += sm.loss(labels) * static_cast<double>(idx.size());
            for (int b = 0; b < logits.n; ++b) {
                const T* z = logits.plane(b, 0);
                if (static_cast<int>(std::max_element(z, z + logits.c) - z) == labels[static_cast<std::size_t>(b)])
                    ++correct;
            }
            seen += idx.size();
            net.backward(sm.backward(labels));
            adam.step(params, lr, ++step);
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.lr = lr;
        stats.train_loss = loss_sum / static_cast<double>(seen);
        stats.train_acc = static_cast<double>(correct) / static_cast<double>(seen);
        stats.val_acc = val_set.samples.empty() ? 0.0 : evaluate_accuracy(net, val_set, lm);
        history.epochs.push_back(stats);
    }
    return history;
}

}  // namespace mamr::nn
