#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mamr/nn/spec.hpp"
#include "mamr/nn/tensor.hpp"
#include "mamr/parallel.hpp"
#include "mamr/rng.hpp"

namespace mamr::nn {

enum class Mode : std::uint8_t { Train, Infer };

/// A named persistent tensor of the model. Running statistics are kept here
/// too (trainable=false) so checkpoints and parameter counters see one flat
/// declaration-ordered list.
template <typename T>
struct Param {
    std::string name;
    std::array<int, 4> shape{};
    std::vector<T> value;
    std::vector<T> grad;
    bool trainable = true;

    Param() = default;
    Param(std::string name_, std::array<int, 4> shape_, bool trainable_ = true)
        : name(std::move(name_)), shape(shape_), trainable(trainable_) {
        std::size_t n = 1;
        for (int d : shape) n *= static_cast<std::size_t>(d);
        value.assign(n, T(0));
        grad.assign(n, T(0));
    }
    std::size_t size() const { return value.size(); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

template <typename T>
class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor<T> forward(const Tensor<T>& x, Mode mode) = 0;
    virtual Tensor<T> backward(const Tensor<T>& dy) = 0;
    virtual void collect(std::vector<Param<T>*>& out) {}
};

namespace detail {

/// Samples per weight-gradient partial buffer. Fixed (not thread-count
/// dependent) so gradient accumulation order, and therefore training output,
/// is identical for any parallelism level.
inline constexpr int kGradChunk = 16;

}  // namespace detail

// ---------------------------------------------------------------------------

template <typename T>
class Conv2d : public Layer<T> {
public:
    Conv2d(const ConvSpec& spec, const std::string& name)
        : spec_(spec), weight_(name + ".weight", {spec.cout, spec.cin, spec.kh, spec.kw}) {}

    const ConvSpec& spec() const { return spec_; }
    Param<T>& weight() { return weight_; }

    void init(Rng& rng) {
        const double fan_in = static_cast<double>(spec_.kh) * spec_.kw * spec_.cin;
        const double stddev = std::sqrt(2.0 / fan_in);
        for (T& v : weight_.value) v = static_cast<T>(stddev * rng.normal());
    }

    Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
        x.require_shape(x.n, spec_.cin, spec_.in_h, spec_.in_w, "conv");
        if (mode == Mode::Train) x_ = x;

        Tensor<T> y(x.n, spec_.cout, spec_.out_h, spec_.out_w);
        parallel_for(static_cast<std::size_t>(x.n),
                     [&](std::size_t ni) { forward_one(x, y, static_cast<int>(ni)); });
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        dy.require_shape(x_.n, spec_.cout, spec_.out_h, spec_.out_w, "conv backward");

        Tensor<T> dx(x_.n, spec_.cin, spec_.in_h, spec_.in_w);
        parallel_for(static_cast<std::size_t>(x_.n),
                     [&](std::size_t ni) { backward_data_one(dy, dx, static_cast<int>(ni)); });

        // weight gradient: per-chunk partials summed in fixed chunk order
        const int chunks = (x_.n + detail::kGradChunk - 1) / detail::kGradChunk;
        std::vector<std::vector<T>> partial(static_cast<std::size_t>(chunks));
        parallel_for(static_cast<std::size_t>(chunks), [&](std::size_t q) {
            auto& gw = partial[q];
            gw.assign(weight_.size(), T(0));
            const int lo = static_cast<int>(q) * detail::kGradChunk;
            const int hi = std::min(x_.n, lo + detail::kGradChunk);
            for (int ni = lo; ni < hi; ++ni) backward_weight_one(dy, gw.data(), ni);
        });
        for (const auto& gw : partial)
            for (std::size_t i = 0; i < gw.size(); ++i) weight_.grad[i] += gw[i];
        return dx;
    }

    void collect(std::vector<Param<T>*>& out) override { out.push_back(&weight_); }

private:
    std::size_t pad_row_len() const { return static_cast<std::size_t>(spec_.in_w + 2 * spec_.pw); }
    std::size_t pad_size() const {
        return static_cast<std::size_t>(spec_.cin) * (spec_.in_h + 2 * spec_.ph) * pad_row_len();
    }
    const T* pad_row(const std::vector<T>& pad, int ci, int py) const {
        return pad.data() + (static_cast<std::size_t>(ci) * (spec_.in_h + 2 * spec_.ph) + py) *
                                pad_row_len();
    }
    T* pad_row(std::vector<T>& pad, int ci, int py) const {
        return pad.data() + (static_cast<std::size_t>(ci) * (spec_.in_h + 2 * spec_.ph) + py) *
                                pad_row_len();
    }

    void fill_padded(const Tensor<T>& x, int ni, std::vector<T>& pad) const {
        pad.assign(pad_size(), T(0));
        for (int ci = 0; ci < spec_.cin; ++ci)
            for (int hy = 0; hy < spec_.in_h; ++hy)
                std::copy_n(x.row(ni, ci, hy), spec_.in_w,
                            pad_row(pad, ci, hy + spec_.ph) + spec_.pw);
    }

    void forward_one(const Tensor<T>& x, Tensor<T>& y, int ni) const {
        std::vector<T> pad;
        fill_padded(x, ni, pad);
        const int ow = spec_.out_w, oh = spec_.out_h, sw = spec_.sw;
        for (int co = 0; co < spec_.cout; ++co) {
            T* __restrict__ out_plane = y.plane(ni, co);
            const T* wbase = weight_.value.data() +
                             static_cast<std::size_t>(co) * spec_.cin * spec_.kh * spec_.kw;
            for (int ci = 0; ci < spec_.cin; ++ci) {
                for (int ky = 0; ky < spec_.kh; ++ky) {
                    const T* wrow = wbase + (static_cast<std::size_t>(ci) * spec_.kh + ky) * spec_.kw;
                    for (int kx = 0; kx < spec_.kw; ++kx) {
                        const T wv = wrow[kx];
                        if (wv == T(0)) continue;
                        for (int oy = 0; oy < oh; ++oy) {
                            const T* __restrict__ in =
                                pad_row(pad, ci, oy * spec_.sh + ky) + kx;
                            T* __restrict__ out = out_plane + static_cast<std::size_t>(oy) * ow;
                            if (sw == 1) {
                                for (int ox = 0; ox < ow; ++ox) out[ox] += wv * in[ox];
                            } else {
                                for (int ox = 0; ox < ow; ++ox) out[ox] += wv * in[ox * sw];
                            }
                        }
                    }
                }
            }
        }
    }

    void backward_data_one(const Tensor<T>& dy, Tensor<T>& dx, int ni) const {
        std::vector<T> dpad(pad_size(), T(0));
        const int ow = spec_.out_w, oh = spec_.out_h, sw = spec_.sw;
        for (int co = 0; co < spec_.cout; ++co) {
            const T* dy_plane = dy.plane(ni, co);
            const T* wbase = weight_.value.data() +
                             static_cast<std::size_t>(co) * spec_.cin * spec_.kh * spec_.kw;
            for (int ci = 0; ci < spec_.cin; ++ci) {
                for (int ky = 0; ky < spec_.kh; ++ky) {
                    const T* wrow = wbase + (static_cast<std::size_t>(ci) * spec_.kh + ky) * spec_.kw;
                    for (int kx = 0; kx < spec_.kw; ++kx) {
                        const T wv = wrow[kx];
                        if (wv == T(0)) continue;
                        for (int oy = 0; oy < oh; ++oy) {
                            T* __restrict__ dp = pad_row(dpad, ci, oy * spec_.sh + ky) + kx;
                            const T* __restrict__ dyr =
                                dy_plane + static_cast<std::size_t>(oy) * ow;
                            if (sw == 1) {
                                for (int ox = 0; ox < ow; ++ox) dp[ox] += wv * dyr[ox];
                            } else {
                                for (int ox = 0; ox < ow; ++ox) dp[ox * sw] += wv * dyr[ox];
                            }
                        }
                    }
                }
            }
        }
        for (int ci = 0; ci < spec_.cin; ++ci)
            for (int hy = 0; hy < spec_.in_h; ++hy)
                std::copy_n(pad_row(dpad, ci, hy + spec_.ph) + spec_.pw, spec_.in_w,
                            dx.row(ni, ci, hy));
    }

    void backward_weight_one(const Tensor<T>& dy, T* gw, int ni) const {
        std::vector<T> pad;
        fill_padded(x_, ni, pad);
        const int ow = spec_.out_w, oh = spec_.out_h, sw = spec_.sw;
        for (int co = 0; co < spec_.cout; ++co) {
            const T* dy_plane = dy.plane(ni, co);
            T* gbase = gw + static_cast<std::size_t>(co) * spec_.cin * spec_.kh * spec_.kw;
            for (int ci = 0; ci < spec_.cin; ++ci) {
                for (int ky = 0; ky < spec_.kh; ++ky) {
                    T* grow = gbase + (static_cast<std::size_t>(ci) * spec_.kh + ky) * spec_.kw;
                    for (int kx = 0; kx < spec_.kw; ++kx) {
                        T acc = T(0);
                        for (int oy = 0; oy < oh; ++oy) {
                            const T* __restrict__ in = pad_row(pad, ci, oy * spec_.sh + ky) + kx;
                            const T* __restrict__ dyr =
                                dy_plane + static_cast<std::size_t>(oy) * ow;
                            if (sw == 1) {
                                for (int ox = 0; ox < ow; ++ox) acc += in[ox] * dyr[ox];
                            } else {
                                for (int ox = 0; ox < ow; ++ox) acc += in[ox * sw] * dyr[ox];
                            }
                        }
                        grow[kx] += acc;
                    }
                }
            }
        }
    }

    ConvSpec spec_;
    Param<T> weight_;
    Tensor<T> x_;
};

// ---------------------------------------------------------------------------

template <typename T>
class BatchNorm : public Layer<T> {
public:
    BatchNorm(int channels, const std::string& name, double eps = 1e-5, double momentum = 0.9)
        : channels_(channels),
          eps_(eps),
          momentum_(momentum),
          gamma_(name + ".gamma", {channels, 1, 1, 1}),
          beta_(name + ".beta", {channels, 1, 1, 1}),
          running_mean_(name + ".running_mean", {channels, 1, 1, 1}, false),
          running_var_(name + ".running_var", {channels, 1, 1, 1}, false) {
        std::fill(gamma_.value.begin(), gamma_.value.end(), T(1));
        std::fill(running_var_.value.begin(), running_var_.value.end(), T(1));
    }

    Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
        if (x.c != channels_) throw std::invalid_argument("batchnorm channel mismatch");
        Tensor<T> y(x.n, x.c, x.h, x.w);
        const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
        const double m = static_cast<double>(x.n) * plane;

        if (mode == Mode::Train) {
            x_hat_ = Tensor<T>(x.n, x.c, x.h, x.w);
            inv_std_.assign(static_cast<std::size_t>(channels_), 0.0);
            parallel_for(static_cast<std::size_t>(channels_), [&](std::size_t c) {
                const int ci = static_cast<int>(c);
                double sum = 0.0, sq = 0.0;
                for (int ni = 0; ni < x.n; ++ni) {
                    const T* p = x.plane(ni, ci);
                    for (std::size_t i = 0; i < plane; ++i) {
                        sum += p[i];
                        sq += static_cast<double>(p[i]) * p[i];
                    }
                }
                const double mean = sum / m;
                const double var = std::max(0.0, sq / m - mean * mean);
                const double inv = 1.0 / std::sqrt(var + eps_);
                inv_std_[c] = inv;
                const double g = gamma_.value[c], b = beta_.value[c];
                for (int ni = 0; ni < x.n; ++ni) {
                    const T* p = x.plane(ni, ci);
                    T* xh = x_hat_.plane(ni, ci);
                    T* out = y.plane(ni, ci);
                    for (std::size_t i = 0; i < plane; ++i) {
                        const T v = static_cast<T>((p[i] - mean) * inv);
                        xh[i] = v;
                        out[i] = static_cast<T>(g * v + b);
                    }
                }
                running_mean_.value[c] =
                    static_cast<T>(momentum_ * running_mean_.value[c] + (1.0 - momentum_) * mean);
                running_var_.value[c] =
                    static_cast<T>(momentum_ * running_var_.value[c] + (1.0 - momentum_) * var);
            });
        } else {
            parallel_for(static_cast<std::size_t>(channels_), [&](std::size_t c) {
                const int ci = static_cast<int>(c);
                const double inv = 1.0 / std::sqrt(static_cast<double>(running_var_.value[c]) + eps_);
                const double mean = running_mean_.value[c];
                const double g = gamma_.value[c], b = beta_.value[c];
                for (int ni = 0; ni < x.n; ++ni) {
                    const T* p = x.plane(ni, ci);
                    T* out = y.plane(ni, ci);
                    for (std::size_t i = 0; i < plane; ++i)
                        out[i] = static_cast<T>(g * ((p[i] - mean) * inv) + b);
                }
            });
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> dx(dy.n, dy.c, dy.h, dy.w);
        const std::size_t plane = static_cast<std::size_t>(dy.h) * dy.w;
        const double m = static_cast<double>(dy.n) * plane;
        parallel_for(static_cast<std::size_t>(channels_), [&](std::size_t c) {
            const int ci = static_cast<int>(c);
            double dbeta = 0.0, dgamma = 0.0;
            for (int ni = 0; ni < dy.n; ++ni) {
                const T* d = dy.plane(ni, ci);
                const T* xh = x_hat_.plane(ni, ci);
                for (std::size_t i = 0; i < plane; ++i) {
                    dbeta += d[i];
                    dgamma += static_cast<double>(d[i]) * xh[i];
                }
            }
            gamma_.grad[c] += static_cast<T>(dgamma);
            beta_.grad[c] += static_cast<T>(dbeta);
            const double scale = gamma_.value[c] * inv_std_[c];
            for (int ni = 0; ni < dy.n; ++ni) {
                const T* d = dy.plane(ni, ci);
                const T* xh = x_hat_.plane(ni, ci);
                T* out = dx.plane(ni, ci);
                for (std::size_t i = 0; i < plane; ++i)
                    out[i] = static_cast<T>(scale * (d[i] - (dbeta + xh[i] * dgamma) / m));
            }
        });
        return dx;
    }

    void collect(std::vector<Param<T>*>& out) override {
        out.push_back(&gamma_);
        out.push_back(&beta_);
        out.push_back(&running_mean_);
        out.push_back(&running_var_);
    }

    /// Identity transform: gamma=1, beta=0, running stats (0, 1).
    void set_identity() {
        std::fill(gamma_.value.begin(), gamma_.value.end(), T(1));
        std::fill(beta_.value.begin(), beta_.value.end(), T(0));
        std::fill(running_mean_.value.begin(), running_mean_.value.end(), T(0));
        std::fill(running_var_.value.begin(), running_var_.value.end(), T(1));
    }

private:
    int channels_;
    double eps_, momentum_;
    Param<T> gamma_, beta_, running_mean_, running_var_;
    Tensor<T> x_hat_;
    std::vector<double> inv_std_;
};

// ---------------------------------------------------------------------------

template <typename T>
class ReLU : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
        Tensor<T> y(x.n, x.c, x.h, x.w);
        for (std::size_t i = 0; i < x.size(); ++i) y.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
        if (mode == Mode::Train) {
            mask_.assign(x.size(), 0);
            for (std::size_t i = 0; i < x.size(); ++i) mask_[i] = x.data[i] > T(0);
        }
        return y;
    }
    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> dx(dy.n, dy.c, dy.h, dy.w);
        for (std::size_t i = 0; i < dy.size(); ++i) dx.data[i] = mask_[i] ? dy.data[i] : T(0);
        return dx;
    }

private:
    std::vector<std::uint8_t> mask_;
};

// ---------------------------------------------------------------------------

template <typename T>
class GlobalAvgPool : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& x, Mode) override {
        in_h_ = x.h;
        in_w_ = x.w;
        Tensor<T> y(x.n, x.c, 1, 1);
        const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
        for (int ni = 0; ni < x.n; ++ni)
            for (int ci = 0; ci < x.c; ++ci) {
                const T* p = x.plane(ni, ci);
                double acc = 0.0;
                for (std::size_t i = 0; i < plane; ++i) acc += p[i];
                y.at(ni, ci, 0, 0) = static_cast<T>(acc / static_cast<double>(plane));
            }
        return y;
    }
    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> dx(dy.n, dy.c, in_h_, in_w_);
        const std::size_t plane = static_cast<std::size_t>(in_h_) * in_w_;
        for (int ni = 0; ni < dy.n; ++ni)
            for (int ci = 0; ci < dy.c; ++ci) {
                const T g = static_cast<T>(dy.at(ni, ci, 0, 0) / static_cast<double>(plane));
                T* p = dx.plane(ni, ci);
                for (std::size_t i = 0; i < plane; ++i) p[i] = g;
            }
        return dx;
    }

private:
    int in_h_ = 1, in_w_ = 1;
};

// ---------------------------------------------------------------------------

template <typename T>
class GlobalMaxPool : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
        in_h_ = x.h;
        in_w_ = x.w;
        Tensor<T> y(x.n, x.c, 1, 1);
        if (mode == Mode::Train) argmax_.assign(static_cast<std::size_t>(x.n) * x.c, 0);
        const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
        for (int ni = 0; ni < x.n; ++ni)
            for (int ci = 0; ci < x.c; ++ci) {
                const T* p = x.plane(ni, ci);
                std::size_t best = 0;
                for (std::size_t i = 1; i < plane; ++i)
                    if (p[i] > p[best]) best = i;
                y.at(ni, ci, 0, 0) = p[best];
                if (mode == Mode::Train)
                    argmax_[static_cast<std::size_t>(ni) * x.c + ci] = best;
            }
        return y;
    }
    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> dx(dy.n, dy.c, in_h_, in_w_);
        for (int ni = 0; ni < dy.n; ++ni)
            for (int ci = 0; ci < dy.c; ++ci)
                dx.plane(ni, ci)[argmax_[static_cast<std::size_t>(ni) * dy.c + ci]] =
                    dy.at(ni, ci, 0, 0);
        return dx;
    }

private:
    int in_h_ = 1, in_w_ = 1;
    std::vector<std::size_t> argmax_;
};

// ---------------------------------------------------------------------------

template <typename T>
class Dense : public Layer<T> {
public:
    Dense(int in, int out, const std::string& name)
        : in_(in), out_(out),
          weight_(name + ".weight", {out, in, 1, 1}),
          bias_(name + ".bias", {out, 1, 1, 1}) {}

    void init(Rng& rng) {
        const double stddev = std::sqrt(2.0 / in_);
        for (T& v : weight_.value) v = static_cast<T>(stddev * rng.normal());
    }

    Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
        x.require_shape(x.n, in_, 1, 1, "dense");
        if (mode == Mode::Train) x_ = x;
        Tensor<T> y(x.n, out_, 1, 1);
        for (int ni = 0; ni < x.n; ++ni) {
            const T* xi = x.plane(ni, 0);
            for (int o = 0; o < out_; ++o) {
                const T* wr = weight_.value.data() + static_cast<std::size_t>(o) * in_;
                double acc = bias_.value[static_cast<std::size_t>(o)];
                for (int i = 0; i < in_; ++i) acc += static_cast<double>(wr[i]) * xi[i];
                y.at(ni, o, 0, 0) = static_cast<T>(acc);
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> dx(x_.n, in_, 1, 1);
        for (int ni = 0; ni < x_.n; ++ni) {
            const T* xi = x_.plane(ni, 0);
            T* dxi = dx.plane(ni, 0);
            for (int o = 0; o < out_; ++o) {
                const T g = dy.at(ni, o, 0, 0);
                bias_.grad[static_cast<std::size_t>(o)] += g;
                T* wg = weight_.grad.data() + static_cast<std::size_t>(o) * in_;
                const T* wr = weight_.value.data() + static_cast<std::size_t>(o) * in_;
                for (int i = 0; i < in_; ++i) {
                    wg[i] += g * xi[i];
                    dxi[i] += g * wr[i];
                }
            }
        }
        return dx;
    }

    void collect(std::vector<Param<T>*>& out) override {
        out.push_back(&weight_);
        out.push_back(&bias_);
    }

private:
    int in_, out_;
    Param<T> weight_, bias_;
    Tensor<T> x_;
};

// ---------------------------------------------------------------------------

template <typename T>
class ResidualBlock : public Layer<T> {
public:
    ResidualBlock(const BlockSpec& spec, const std::string& name)
        : conv1_(spec.conv1, name + ".conv1"),
          bn1_(spec.conv1.cout, name + ".bn1"),
          conv2_(spec.conv2, name + ".conv2"),
          bn2_(spec.conv2.cout, name + ".bn2") {
        if (spec.projection) projection_.emplace(*spec.projection, name + ".proj");
    }

    void init(Rng& rng) {
        conv1_.init(rng);
        conv2_.init(rng);
        if (projection_) projection_->init(rng);
    }

    Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
        Tensor<T> t = relu1_.forward(bn1_.forward(conv1_.forward(x, mode), mode), mode);
        Tensor<T> u = bn2_.forward(conv2_.forward(t, mode), mode);
        const Tensor<T>& s = projection_ ? (proj_out_ = projection_->forward(x, mode)) : x;
        if (!u.same_shape(s)) throw std::invalid_argument("residual add shape mismatch");
        for (std::size_t i = 0; i < u.size(); ++i) u.data[i] += s.data[i];
        return relu2_.forward(u, mode);
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> d_add = relu2_.backward(dy);
        Tensor<T> dx = conv1_.backward(bn1_.backward(relu1_.backward(
            conv2_.backward(bn2_.backward(d_add)))));
        if (projection_) {
            Tensor<T> ds = projection_->backward(d_add);
            for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += ds.data[i];
        } else {
            for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += d_add.data[i];
        }
        return dx;
    }

    void collect(std::vector<Param<T>*>& out) override {
        conv1_.collect(out);
        bn1_.collect(out);
        conv2_.collect(out);
        bn2_.collect(out);
        if (projection_) projection_->collect(out);
    }

    BatchNorm<T>& bn1() { return bn1_; }
    BatchNorm<T>& bn2() { return bn2_; }
    Conv2d<T>& conv1() { return conv1_; }
    Conv2d<T>& conv2() { return conv2_; }

private:
    Conv2d<T> conv1_;
    BatchNorm<T> bn1_;
    Conv2d<T> conv2_;
    BatchNorm<T> bn2_;
    std::optional<Conv2d<T>> projection_;
    ReLU<T> relu1_, relu2_;
    Tensor<T> proj_out_;
};

// ---------------------------------------------------------------------------

/// Softmax with mean cross-entropy. Kept outside the layer stack: the
/// network emits logits, this turns them into posteriors and loss.
template <typename T>
struct SoftmaxXent {
    Tensor<T> probs;

    /// Row-wise softmax of (n, M, 1, 1) logits.
    Tensor<T>& forward(const Tensor<T>& logits) {
        probs = Tensor<T>(logits.n, logits.c, 1, 1);
        for (int ni = 0; ni < logits.n; ++ni) {
            const T* z = logits.plane(ni, 0);
            T* p = probs.plane(ni, 0);
            T zmax = z[0];
            for (int k = 1; k < logits.c; ++k) zmax = std::max(zmax, z[k]);
            double sum = 0.0;
            for (int k = 0; k < logits.c; ++k) {
                const double e = std::exp(static_cast<double>(z[k] - zmax));
                p[k] = static_cast<T>(e);
                sum += e;
            }
            for (int k = 0; k < logits.c; ++k) p[k] = static_cast<T>(p[k] / sum);
        }
        return probs;
    }

    /// Mean cross-entropy of the stored posteriors against class positions.
    double loss(const std::vector<int>& labels) const {
        double total = 0.0;
        for (int ni = 0; ni < probs.n; ++ni) {
            const double p = std::max(static_cast<double>(probs.at(ni, labels[static_cast<std::size_t>(ni)], 0, 0)),
                                      1e-30);
            total -= std::log(p);
        }
        return total / probs.n;
    }

    /// d(mean xent)/d(logits) = (posterior - onehot) / batch.
    Tensor<T> backward(const std::vector<int>& labels) const {
        Tensor<T> dz(probs.n, probs.c, 1, 1);
        for (int ni = 0; ni < probs.n; ++ni) {
            const T* p = probs.plane(ni, 0);
            T* d = dz.plane(ni, 0);
            for (int k = 0; k < probs.c; ++k) d[k] = p[k] / static_cast<T>(probs.n);
            d[labels[static_cast<std::size_t>(ni)]] -= T(1) / static_cast<T>(probs.n);
        }
        return dz;
    }
};

}  // namespace mamr::nn
