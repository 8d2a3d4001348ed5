#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mamr::nn {

/// One convolution layer, with its resolved input/output feature sizes.
/// The feature fields feed the complexity counters.
struct ConvSpec {
    int kh = 1, kw = 1;    ///< kernel size
    int cin = 1, cout = 1; ///< channels
    int sh = 1, sw = 1;    ///< stride
    int ph = 0, pw = 0;    ///< zero padding
    int in_h = 0, in_w = 0;
    int out_h = 0, out_w = 0;

    void resolve(int h, int w) {
        in_h = h;
        in_w = w;
        out_h = (h + 2 * ph - kh) / sh + 1;
        out_w = (w + 2 * pw - kw) / sw + 1;
        if (out_h < 1 || out_w < 1) throw std::invalid_argument("conv output collapses to zero");
    }
    long long weight_count() const {
        return static_cast<long long>(kh) * kw * cin * cout;
    }
    long long mult_count() const {
        return static_cast<long long>(out_h) * out_w * weight_count();
    }
};

/// Two-conv residual block; `projection` is present when the shortcut needs
/// a 1x1 conv (channel growth and/or stride).
struct BlockSpec {
    ConvSpec conv1, conv2;
    std::optional<ConvSpec> projection;
};

enum class Arch : std::uint8_t { ResNet56 = 0, CnnSmall = 1 };

enum class PoolKind : std::uint8_t { Avg = 0, Max = 1 };

inline const char* to_string(Arch a) { return a == Arch::ResNet56 ? "resnet56" : "cnn-small"; }

inline Arch arch_from_string(const std::string& name) {
    if (name == "resnet56") return Arch::ResNet56;
    if (name == "cnn-small") return Arch::CnnSmall;
    throw std::invalid_argument("unknown architecture: " + name);
}

/// Declarative network description. Every conv feeds a batchnorm + ReLU
/// (blocks follow the usual pre-add placement); a global average pool and a
/// dense layer close the graph.
struct NetworkSpec {
    Arch arch = Arch::ResNet56;
    int input_rows = 0;  ///< 2C
    int input_cols = 0;  ///< N
    int classes = 0;     ///< M
    ConvSpec stem;
    std::vector<BlockSpec> blocks;  ///< resnet trunk (empty for cnn-small)
    std::vector<ConvSpec> convs;    ///< cnn-small trunk (empty for resnet)
    PoolKind pool = PoolKind::Avg;
    int dense_in = 0, dense_out = 0;

    /// Convs in declaration order, projections included.
    std::vector<ConvSpec> all_convs() const {
        std::vector<ConvSpec> out{stem};
        for (const auto& b : blocks) {
            out.push_back(b.conv1);
            out.push_back(b.conv2);
            if (b.projection) out.push_back(*b.projection);
        }
        for (const auto& c : convs) out.push_back(c);
        return out;
    }

    /// Weighted-layer count in the ResNet paper's convention: convolutions
    /// (shortcut projections excluded) plus the dense layer.
    int weighted_layers() const {
        return 1 + 2 * static_cast<int>(blocks.size()) + static_cast<int>(convs.size()) + 1;
    }
};

/// ResNet56 sized for a 2C x N input: full-height (2C, 15) stem producing
/// height-1 maps, then 3 stages of 9 two-conv (1,3) residual blocks with
/// widths 16/32/64 and stage strides (1,1), (1,2), (1,1), then global
/// average pooling and a dense layer with `classes` outputs.
inline NetworkSpec build_resnet56(int antennas, int length, int classes) {
    if (antennas < 1 || classes < 1) throw std::invalid_argument("bad network dimensions");
    if (length < 2 || length % 2 != 0)
        throw std::invalid_argument("signal length must be even (one stride-2 stage)");

    NetworkSpec net;
    net.arch = Arch::ResNet56;
    net.input_rows = 2 * antennas;
    net.input_cols = length;
    net.classes = classes;

    net.stem = ConvSpec{.kh = 2 * antennas, .kw = 15, .cin = 1, .cout = 16, .ph = 0, .pw = 7};
    net.stem.resolve(net.input_rows, net.input_cols);

    int h = net.stem.out_h, w = net.stem.out_w, ch = 16;
    const int stage_channels[3] = {16, 32, 64};
    const int stage_stride[3] = {1, 2, 1};
    for (int stage = 0; stage < 3; ++stage) {
        for (int rep = 0; rep < 9; ++rep) {
            const int cout = stage_channels[stage];
            const int sw = rep == 0 ? stage_stride[stage] : 1;
            BlockSpec b;
            b.conv1 = ConvSpec{.kh = 1, .kw = 3, .cin = ch, .cout = cout, .sw = sw, .pw = 1};
            b.conv1.resolve(h, w);
            b.conv2 = ConvSpec{.kh = 1, .kw = 3, .cin = cout, .cout = cout, .pw = 1};
            b.conv2.resolve(b.conv1.out_h, b.conv1.out_w);
            if (cout != ch || sw != 1) {
                b.projection = ConvSpec{.kh = 1, .kw = 1, .cin = ch, .cout = cout, .sw = sw};
                b.projection->resolve(h, w);
            }
            h = b.conv2.out_h;
            w = b.conv2.out_w;
            ch = cout;
            net.blocks.push_back(b);
        }
    }
    net.dense_in = ch;
    net.dense_out = classes;
    return net;
}

/// Small plain CNN for desk-scale experiments: the same full-height stem,
/// then four (1,3) convs with widths 16/32/32/64 and stride 2 on every
/// second one, then global average pooling and a dense layer.
inline NetworkSpec build_cnn_small(int antennas, int length, int classes) {
    if (antennas < 1 || classes < 1) throw std::invalid_argument("bad network dimensions");
    if (length < 4 || length % 4 != 0)
        throw std::invalid_argument("signal length must be divisible by 4 (two stride-2 convs)");

    NetworkSpec net;
    net.arch = Arch::CnnSmall;
    net.input_rows = 2 * antennas;
    net.input_cols = length;
    net.classes = classes;

    net.stem = ConvSpec{.kh = 2 * antennas, .kw = 15, .cin = 1, .cout = 16, .ph = 0, .pw = 7};
    net.stem.resolve(net.input_rows, net.input_cols);

    int h = net.stem.out_h, w = net.stem.out_w, ch = 16;
    const int widths[4] = {16, 32, 32, 64};
    for (int i = 0; i < 4; ++i) {
        ConvSpec c{.kh = 1, .kw = 3, .cin = ch, .cout = widths[i], .sw = i % 2 == 1 ? 2 : 1,
                   .pw = 1};
        c.resolve(h, w);
        h = c.out_h;
        w = c.out_w;
        ch = widths[i];
        net.convs.push_back(c);
    }
    net.dense_in = ch;
    net.dense_out = classes;
    return net;
}

inline NetworkSpec build_network(Arch arch, int antennas, int length, int classes) {
    return arch == Arch::ResNet56 ? build_resnet56(antennas, length, classes)
                                  : build_cnn_small(antennas, length, classes);
}

}  // namespace mamr::nn
