#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hsprobe/autograd.hpp"
#include "hsprobe/rng.hpp"
#include "hsprobe/tensor.hpp"

#include <nlohmann/json.hpp>

namespace hsprobe {

/// The five probe architectures, ordered by how much structure they can see:
///   M0 pooled MLP, M1 layer-wise logits, M2 flat cross-layer transformer,
///   M3 hierarchical (local-then-global) transformer, M4 per-token
///   layer-attention fusion ahead of a token transformer.
enum class ProbeFamily { M0, M1, M2, M3, M4 };

std::string to_string(ProbeFamily f);
ProbeFamily probe_family_from_string(const std::string& s);

struct ProbeSpec {
    ProbeFamily family = ProbeFamily::M0;
    ShapeConfig shape = desk_shape();
    int d = 16;                     // model width after the D -> d projection
    std::vector<int> mlp_hidden = {16};
    int heads = 2;
    int encoder_depth = 1;
    int query_count = 2;            // learned queries (M4 only)
    double dropout = 0.1;           // training mode only
    bool mask_padding = true;
    bool m1_per_layer = false;      // full per-layer MLPs instead of a shared trunk
    bool m4_gate = true;            // elementwise sigmoid gate after fusion

    /// d divisible by heads, query_count >= 1, dropout in [0,1).
    void validate() const;

    nlohmann::json to_json() const;
    static ProbeSpec from_json(const nlohmann::json& j);
};

/// Small dims for unit tests and laptop runs: d=16, 2 heads, depth 1, Q=2.
ProbeSpec desk_probe_spec(ProbeFamily family, ShapeConfig shape = desk_shape());
/// Full-scale dims: d=256, 4 heads, depth 2, Q=4.
ProbeSpec paper_probe_spec(ProbeFamily family, ShapeConfig shape = ShapeConfig{});

/// Named dense parameters. The map is ordered by name, which fixes the
/// serialization order and keeps optimizer state alignment trivial.
struct ProbeModel {
    ProbeSpec spec;
    std::uint64_t seed = 0;
    std::map<std::string, MatX<double>> params;

    std::size_t parameter_count() const;
};

/// Parameter census for a spec: (name, rows, cols) in name order, without
/// materializing a model.
std::vector<std::pair<std::string, std::pair<int, int>>> parameter_layout(const ProbeSpec& spec);

/// Deterministic initialization: every parameter draws from its own stream
/// keyed by derive_seed(seed, "init-" + name), so the census order cannot
/// disturb the values. Weights are Xavier-uniform, biases zero, norm gains
/// one, embeddings standard normal.
ProbeModel probe_factory(const ProbeSpec& spec, std::uint64_t seed);

/// Tape leaves for one model's parameters, shared across every sample whose
/// graph is built on the same tape; gradients accumulate into these leaves.
struct ParamBinding {
    std::vector<std::string> names;
    std::vector<Tape<double>::Var> vars;

    Tape<double>::Var at(const std::string& name) const;
};

ParamBinding bind_params(Tape<double>& tape, const ProbeModel& model);

struct ProbeGraph {
    Tape<double>::Var logit;                         // 1x1
    std::vector<Tape<double>::Var> layer_logits;     // M1: one 1x1 node per layer
};

/// Builds the forward graph for one sample. Training mode (dropout active)
/// iff dropout_rng != nullptr; eval mode is deterministic.
/// Throws DataError when h's shape disagrees with the spec.
ProbeGraph probe_logit(Tape<double>& tape, const ParamBinding& binding, const ProbeSpec& spec,
                       const HiddenStateTensor& h, Rng* dropout_rng = nullptr);

struct ForwardResult {
    double probability = 0.0;            // clamped into (0,1) at 1e-12
    std::vector<double> layer_logits;    // M1 per-layer logits, for importance analysis
};

/// Eval-mode forward of one sample.
ForwardResult probe_forward(const ProbeModel& model, const HiddenStateTensor& h);
/// Eval-mode forward of a batch; equals per-sample forwards exactly.
std::vector<double> probe_forward_batch(const ProbeModel& model,
                                        const std::vector<HiddenStateTensor>& batch);

/// Sinusoidal token position encoding (rows = positions), as added to the
/// fused token sequence ahead of the outer encoder.
MatX<double> sinusoidal_encoding(int positions, int dim);

// Checkpoints: "HSCK" | u16 version | u32 header length | header JSON |
// raw float64 coefficients row-major in header order. Round-trips bit-exactly.
inline constexpr std::uint32_t kCheckpointMagic = 0x4b435348u;  // "HSCK" little-endian
inline constexpr std::uint16_t kCheckpointVersion = 1;

/// extra is stashed verbatim in the header (e.g. a training-config hash).
void save_checkpoint(const std::filesystem::path& path, const ProbeModel& model,
                     const nlohmann::json& extra = nlohmann::json::object());
ProbeModel load_checkpoint(const std::filesystem::path& path, nlohmann::json* extra = nullptr);

}  // namespace hsprobe
