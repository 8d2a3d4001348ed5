#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "mamr/nn/layers.hpp"
#include "mamr/nn/spec.hpp"

namespace mamr::nn {

/// Runtime network built from a NetworkSpec: stem conv + BN + ReLU, the
/// trunk (residual blocks or plain conv/BN/ReLU units), global average
/// pooling, and a dense head emitting logits.
template <typename T>
class Network {
public:
    explicit Network(const NetworkSpec& spec, std::uint64_t init_seed = 1)
        : spec_(spec),
          stem_(spec.stem, "stem"),
          stem_bn_(spec.stem.cout, "stem_bn"),
          dense_(spec.dense_in, spec.dense_out, "dense") {
        for (std::size_t i = 0; i < spec.blocks.size(); ++i)
            blocks_.push_back(std::make_unique<ResidualBlock<T>>(
                spec.blocks[i], "block" + std::to_string(i)));
        for (std::size_t i = 0; i < spec.convs.size(); ++i) {
            trunk_convs_.push_back(
                std::make_unique<Conv2d<T>>(spec.convs[i], "conv" + std::to_string(i)));
            trunk_bns_.push_back(std::make_unique<BatchNorm<T>>(
                spec.convs[i].cout, "conv" + std::to_string(i) + "_bn"));
            trunk_relus_.push_back(std::make_unique<ReLU<T>>());
        }
        if (spec.pool == PoolKind::Max)
            pool_ = std::make_unique<GlobalMaxPool<T>>();
        else
            pool_ = std::make_unique<GlobalAvgPool<T>>();
        init(init_seed);
    }

    const NetworkSpec& spec() const { return spec_; }

    void init(std::uint64_t seed) {
        Rng rng(derive_seed(seed, 0xC0DE));
        stem_.init(rng);
        for (auto& b : blocks_) b->init(rng);
        for (auto& c : trunk_convs_) c->init(rng);
        dense_.init(rng);
    }

    /// Logits of shape (n, classes, 1, 1). Input is (n, 1, 2C, N).
    Tensor<T> forward(const Tensor<T>& x, Mode mode) {
        if (x.c != 1 || x.h != spec_.input_rows || x.w != spec_.input_cols)
            throw std::invalid_argument("network input shape mismatch: want (n,1," +
                                        std::to_string(spec_.input_rows) + "," +
                                        std::to_string(spec_.input_cols) + ")");
        Tensor<T> t = stem_relu_.forward(stem_bn_.forward(stem_.forward(x, mode), mode), mode);
        for (auto& b : blocks_) t = b->forward(t, mode);
        for (std::size_t i = 0; i < trunk_convs_.size(); ++i) {
            t = trunk_convs_[i]->forward(t, mode);
            t = trunk_bns_[i]->forward(t, mode);
            t = trunk_relus_[i]->forward(t, mode);
        }
        t = pool_->forward(t, mode);
        return dense_.forward(t, mode);
    }

    /// Gradient wrt the input, with parameter gradients accumulated.
    Tensor<T> backward(const Tensor<T>& dlogits) {
        Tensor<T> d = dense_.backward(dlogits);
        d = pool_->backward(d);
        for (std::size_t i = trunk_convs_.size(); i-- > 0;) {
            d = trunk_relus_[i]->backward(d);
            d = trunk_bns_[i]->backward(d);
            d = trunk_convs_[i]->backward(d);
        }
        for (std::size_t i = blocks_.size(); i-- > 0;) d = blocks_[i]->backward(d);
        return stem_.backward(stem_bn_.backward(stem_relu_.backward(d)));
    }

    /// Softmax posteriors of shape (n, classes, 1, 1).
    Tensor<T> posterior(const Tensor<T>& x, Mode mode = Mode::Infer) {
        SoftmaxXent<T> sm;
        return sm.forward(forward(x, mode));
    }

    /// All persistent tensors in declaration order (running stats included).
    std::vector<Param<T>*> params() {
        std::vector<Param<T>*> out;
        stem_.collect(out);
        stem_bn_.collect(out);
        for (auto& b : blocks_) b->collect(out);
        for (std::size_t i = 0; i < trunk_convs_.size(); ++i) {
            trunk_convs_[i]->collect(out);
            trunk_bns_[i]->collect(out);
        }
        dense_.collect(out);
        return out;
    }

    void zero_grad() {
        for (Param<T>* p : params()) p->zero_grad();
    }

    std::size_t param_value_count() {
        std::size_t n = 0;
        for (Param<T>* p : params()) n += p->size();
        return n;
    }

    ResidualBlock<T>& block(std::size_t i) { return *blocks_.at(i); }
    std::size_t block_count() const { return blocks_.size(); }
    BatchNorm<T>& stem_bn() { return stem_bn_; }
    Conv2d<T>& stem() { return stem_; }

private:
    NetworkSpec spec_;
    Conv2d<T> stem_;
    BatchNorm<T> stem_bn_;
    ReLU<T> stem_relu_;
    std::vector<std::unique_ptr<ResidualBlock<T>>> blocks_;
    std::vector<std::unique_ptr<Conv2d<T>>> trunk_convs_;
    std::vector<std::unique_ptr<BatchNorm<T>>> trunk_bns_;
    std::vector<std::unique_ptr<ReLU<T>>> trunk_relus_;
    std::unique_ptr<Layer<T>> pool_;
    Dense<T> dense_;
};

/// Adam with bias correction; state is indexed by the parameter list order.
template <typename T>
class Adam {
public:
    explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    /// One update at global step t (1-based) over the trainable parameters.
    void step(const std::vector<Param<T>*>& params, double lr, long long t) {
        if (t <= 0) throw std::invalid_argument("Adam step index must be >= 1");
        if (m_.empty()) {
            for (Param<T>* p : params) {
                m_.emplace_back(p->size(), T(0));
                v_.emplace_back(p->size(), T(0));
            }
        }
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t));
        for (std::size_t pi = 0; pi < params.size(); ++pi) {
            Param<T>& p = *params[pi];
            if (!p.trainable) continue;
            auto& m = m_[pi];
            auto& v = v_[pi];
            for (std::size_t i = 0; i < p.size(); ++i) {
                const double g = p.grad[i];
                m[i] = static_cast<T>(beta1_ * m[i] + (1.0 - beta1_) * g);
                v[i] = static_cast<T>(beta2_ * v[i] + (1.0 - beta2_) * g * g);
                const double mhat = m[i] / bc1;
                const double vhat = v[i] / bc2;
                p.value[i] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }

private:
    double beta1_, beta2_, eps_;
    std::vector<std::vector<T>> m_, v_;
};

}  // namespace mamr::nn
