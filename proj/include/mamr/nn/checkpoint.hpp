#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mamr/binio.hpp"
#include "mamr/nn/network.hpp"
#include "mamr/nn/spec.hpp"

namespace mamr::nn {

// ---------------------------------------------------------------------------
// Checkpoint format (little-endian):
//   magic "MNET", version u16 = 1,
//   arch u8, antennas u16, length u32, classes u32,
//   classes x u8 canonical labels,
//   tensor_count u64, then per tensor: value_count u64 + float32 values.
// Tensors appear in parameter declaration order; batchnorm running
// statistics are part of the list so a loaded model is inference-ready.
// ---------------------------------------------------------------------------

inline constexpr char kCheckpointMagic[5] = "MNET";
inline constexpr std::uint16_t kCheckpointVersion = 1;

/// A trained model bundled with the label mapping it was trained under.
struct Checkpoint {
    NetworkSpec spec;
    std::vector<std::uint8_t> class_labels;
    std::unique_ptr<Network<float>> net;
};

inline void save_checkpoint(Network<float>& net, const std::vector<std::uint8_t>& class_labels,
                            const std::string& path) {
    const NetworkSpec& spec = net.spec();
    if (static_cast<int>(class_labels.size()) != spec.classes)
        throw std::invalid_argument("label list size must equal class count");

    io::Writer w(path);
    w.magic(kCheckpointMagic);
    w.value<std::uint16_t>(kCheckpointVersion);
    w.value<std::uint8_t>(static_cast<std::uint8_t>(spec.arch));
    w.value<std::uint16_t>(static_cast<std::uint16_t>(spec.input_rows / 2));
    w.value<std::uint32_t>(static_cast<std::uint32_t>(spec.input_cols));
    w.value<std::uint32_t>(static_cast<std::uint32_t>(spec.classes));
    for (std::uint8_t l : class_labels) w.value<std::uint8_t>(l);

    const auto params = net.params();
    w.value<std::uint64_t>(params.size());
    for (const Param<float>* p : params) {
        w.value<std::uint64_t>(p->size());
        w.bytes(p->value.data(), p->size() * sizeof(float));
    }
    w.close();
}

inline Checkpoint load_checkpoint(const std::string& path) {
    io::Reader r(path);
    r.expect_magic(kCheckpointMagic, "model");
    const auto version = r.value<std::uint16_t>();
    if (version != kCheckpointVersion)
        throw io::VersionError(path + ": unsupported model version " + std::to_string(version));

    const auto arch = static_cast<Arch>(r.value<std::uint8_t>());
    const int antennas = r.value<std::uint16_t>();
    const int length = static_cast<int>(r.value<std::uint32_t>());
    const int classes = static_cast<int>(r.value<std::uint32_t>());

    Checkpoint ck;
    ck.class_labels.resize(static_cast<std::size_t>(classes));
    for (auto& l : ck.class_labels) l = r.value<std::uint8_t>();
    ck.spec = build_network(arch, antennas, length, classes);
    ck.net = std::make_unique<Network<float>>(ck.spec);

    const auto params = ck.net->params();
    const auto tensor_count = r.value<std::uint64_t>();
    if (tensor_count != params.size())
        throw io::TruncatedError(path + ": tensor count mismatch (file " +
                                 std::to_string(tensor_count) + ", model " +
                                 std::to_string(params.size()) + ")");
    for (Param<float>* p : params) {
        const auto n = r.value<std::uint64_t>();
        if (n != p->size())
            throw io::TruncatedError(path + ": tensor size mismatch for " + p->name);
        r.bytes(p->value.data(), p->size() * sizeof(float));
    }
    return ck;
}

/// Number of float values the checkpoint stores for this net (tensor
/// payload only, headers excluded).
inline std::size_t checkpoint_value_count(Network<float>& net) {
    return net.param_value_count();
}

}  // namespace mamr::nn
