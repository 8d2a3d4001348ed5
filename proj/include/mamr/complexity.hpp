#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mamr/nn/spec.hpp"

namespace mamr::complexity {

enum class Method : std::uint8_t { Single = 0, DV = 1, WA = 2, IQ = 3 };

inline const char* to_string(Method m) {
    switch (m) {
        case Method::Single: return "single";
        case Method::DV: return "dv";
        case Method::WA: return "wa";
        case Method::IQ: return "iq";
    }
    return "?";
}

inline Method method_from_string(const std::string& name) {
    if (name == "single") return Method::Single;
    if (name == "dv") return Method::DV;
    if (name == "wa") return Method::WA;
    if (name == "iq") return Method::IQ;
    throw std::invalid_argument("unknown method: " + name);
}

/// Inference cost accounting. Counts are exact integers stored as doubles;
/// `flops` is the convolution multiplication count and `conv_weights` the
/// convolution weight count (the paper's conventions). `param_values` is
/// the full persistent-tensor count matching the checkpoint payload, filled
/// by the layer-wise counter only.
struct ComplexityReport {
    std::string method;
    double flops = 0.0;
    double conv_weights = 0.0;
    double param_values = 0.0;
    double feature_mem = 0.0;  ///< stored feature values: 2 * max feature map
    // per-section breakdown (ResNet56 layout; shortcut projections separate)
    double t_con1 = 0.0, t_block1 = 0.0, t_block2 = 0.0, t_block3 = 0.0, t_proj = 0.0;
    double w_con1 = 0.0, w_block1 = 0.0, w_block2 = 0.0, w_block3 = 0.0, w_proj = 0.0;

    double space_total() const { return conv_weights + feature_mem; }
};

/// ResNet56 closed forms, evaluated verbatim with F = F_l * F_w as a single
/// scalar: per-net multiplications (480C + 94464) F, per-net weights
/// 480C + 282624, stage weights 13824 / 53760 / 215040, stage
/// multiplication coefficients 13824 / 26880 / 53760, feature memory 32F.
/// DV and WA run C single-antenna nets; IQ runs one 2C-row net.
inline ComplexityReport closed_form(Method method, int antennas, double feature_size) {
    if (antennas < 1) throw std::invalid_argument("antennas must be >= 1");
    if (!(feature_size > 0.0)) throw std::invalid_argument("feature size must be > 0");
    const double F = feature_size;
    const double C = antennas;

    ComplexityReport r;
    r.method = to_string(method);
    const bool per_antenna_nets = method == Method::DV || method == Method::WA;
    const double net_c = method == Method::IQ ? C : 1.0;  // antennas seen by one net
    const double copies = per_antenna_nets ? C : 1.0;     // how many nets run

    r.t_con1 = copies * 480.0 * net_c * F;
    r.t_block1 = copies * 13824.0 * F;
    r.t_block2 = copies * 26880.0 * F;
    r.t_block3 = copies * 53760.0 * F;
    r.flops = r.t_con1 + r.t_block1 + r.t_block2 + r.t_block3;

    r.w_con1 = copies * 480.0 * net_c;
    r.w_block1 = copies * 13824.0;
    r.w_block2 = copies * 53760.0;
    r.w_block3 = copies * 215040.0;
    r.conv_weights = r.w_con1 + r.w_block1 + r.w_block2 + r.w_block3;

    r.feature_mem = 32.0 * F;
    return r;
}

/// Exact counter over a resolved NetworkSpec: every convolution contributes
/// out_h*out_w*kh*kw*cin*cout multiplications and kh*kw*cin*cout weights
/// (normalization, activations, and the dense head are excluded from flops,
/// as in the closed forms). `param_values` additionally counts batchnorm
/// gamma/beta/running stats and the dense layer, i.e. every value a
/// checkpoint serializes.
inline ComplexityReport layerwise_count(const nn::NetworkSpec& net) {
    ComplexityReport r;
    r.method = "net";

    auto add_conv = [](ComplexityReport& rep, const nn::ConvSpec& c, double& t_slot,
                       double& w_slot) {
        t_slot += static_cast<double>(c.mult_count());
        w_slot += static_cast<double>(c.weight_count());
        rep.flops += static_cast<double>(c.mult_count());
        rep.conv_weights += static_cast<double>(c.weight_count());
    };

    add_conv(r, net.stem, r.t_con1, r.w_con1);
    for (std::size_t i = 0; i < net.blocks.size(); ++i) {
        const auto& b = net.blocks[i];
        const int stage = static_cast<int>(i) / 9;
        double& t = stage == 0 ? r.t_block1 : stage == 1 ? r.t_block2 : r.t_block3;
        double& w = stage == 0 ? r.w_block1 : stage == 1 ? r.w_block2 : r.w_block3;
        add_conv(r, b.conv1, t, w);
        add_conv(r, b.conv2, t, w);
        if (b.projection) add_conv(r, *b.projection, r.t_proj, r.w_proj);
    }
    for (const auto& c : net.convs) add_conv(r, c, r.t_block1, r.w_block1);

    // persistent tensors: conv weights + 4 batchnorm values per normalized
    // channel + dense weight/bias (matches checkpoint payload exactly)
    double values = r.conv_weights;
    values += 4.0 * net.stem.cout;
    for (const auto& b : net.blocks) {
        values += 4.0 * b.conv1.cout;
        values += 4.0 * b.conv2.cout;
    }
    for (const auto& c : net.convs) values += 4.0 * c.cout;
    values += static_cast<double>(net.dense_in) * net.dense_out + net.dense_out;
    r.param_values = values;

    // twice the largest layer output
    long long max_map = 0;
    for (const auto& c : net.all_convs())
        max_map = std::max(max_map,
                           static_cast<long long>(c.cout) * c.out_h * c.out_w);
    r.feature_mem = 2.0 * static_cast<double>(max_map);
    return r;
}

/// Published headline numbers (millions) and the relations they must obey.
struct TableVIEntry {
    std::string method;
    double flops_m;   ///< reported FLOPs, millions
    double params_m;  ///< reported parameters, millions
};

struct TableVIComparison {
    std::vector<TableVIEntry> published;
    int antennas = 4;
    double dv_over_single_published = 0.0;
    double dv_over_single_predicted = 0.0;
    double iq_over_single_published = 0.0;
    double iq_over_single_predicted = 0.0;
    double single_params_published = 0.0;  ///< absolute counts
    double single_params_predicted = 0.0;
    std::vector<std::string> notes;
};

/// Compare the closed forms against the published 4-antenna numbers.
/// Ratios cancel the unknown effective feature size; the absolute weight
/// count is checked loosely. Known internal tensions are spelled out in
/// `notes` instead of being absorbed into the predictions.
inline TableVIComparison table_vi_check() {
    TableVIComparison cmp;
    cmp.published = {{"single", 24.73, 0.288},
                     {"dv", 98.92, 1.144},
                     {"wa", 98.92, 1.144},
                     {"iq", 25.09, 0.289}};
    cmp.antennas = 4;

    const auto single = closed_form(Method::Single, 4, 1.0);
    const auto dv = closed_form(Method::DV, 4, 1.0);
    const auto iq = closed_form(Method::IQ, 4, 1.0);

    cmp.dv_over_single_published = 98.92 / 24.73;
    cmp.dv_over_single_predicted = dv.flops / single.flops;
    cmp.iq_over_single_published = 25.09 / 24.73;
    cmp.iq_over_single_predicted = iq.flops / single.flops;
    cmp.single_params_published = 0.288e6;
    cmp.single_params_predicted = single.conv_weights;  // 480 + 282624

    cmp.notes = {
        "the closed forms treat F_l*F_w as one scalar; no single integer F reproduces the "
        "published absolute FLOPs, so ratios (which cancel F) are compared instead",
        "the stem constant 480C is used verbatim although a (C,15)x16 kernel on one input "
        "channel works out to 240C; the layer-wise counter resolves this by using the "
        "full-height (2C,15) stem actually built",
        "the stage-3 multiplication coefficient 53760 presumes a second width halving that "
        "the stated stage strides (1,1),(1,2),(1,1) do not perform; the layer-wise counter "
        "reports 107520 for the network as built",
        "published parameter totals exceed the conv-weight closed form by ~2%, consistent "
        "with feature-map memory and rounding",
    };
    return cmp;
}

}  // namespace mamr::complexity
