#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hsprobe/embedding.hpp"
#include "hsprobe/judge.hpp"
#include "hsprobe/shard.hpp"

namespace hsprobe {

/// One source item: what the model is asked, plus the gold answers used by
/// the weak labeler (may be empty for unanswerable items).
struct SourceItem {
    std::string id;
    std::string context;
    std::string question;
    std::vector<std::string> gold_answers;
};

/// Line-delimited JSON source: {"id", "context", "question", "answers": []}.
std::vector<SourceItem> load_source_jsonl(const std::string& path);

/// Response text plus raw activations for one generation.
struct Generation {
    std::string response;
    RawActivations hidden;  // (L, T, D) with T = generated token count
};

/// Decoding plus hidden-state capture. Implementations must be deterministic
/// for a fixed seed (greedy decoding contract).
class GenerationBackend {
public:
    virtual ~GenerationBackend() = default;
    virtual Generation generate(const std::string& context, const std::string& question) = 0;
};

/// Deterministic stand-in for a real LM: the response and pseudo hidden
/// states derive from a seeded hash of (context, question). The response mix
/// covers grounded extractions, fabrications and abstentions so the full
/// labeling cascade gets exercised.
class MockGenerationBackend final : public GenerationBackend {
public:
    MockGenerationBackend(ShapeConfig shape, std::uint64_t seed, int t_max = 0);
    Generation generate(const std::string& context, const std::string& question) override;

private:
    ShapeConfig shape_;
    std::uint64_t seed_;
    int t_max_;  // generation cap; defaults to shape.tokens_fixed
};

/// In-memory dataset view used by training and analysis.
struct Dataset {
    ShapeConfig shape;
    std::vector<SampleRecord> records;
    std::map<std::string, std::string> splits;  // sample_id -> train_dev | test

    std::vector<int> hybrid_labels() const;
    std::vector<int> judge_labels() const;
};

/// Loads manifest + shards from a dataset directory.
Dataset load_dataset(const std::string& directory);

struct BuildOptions {
    double tau = kDefaultTau;
    double test_fraction = 0.2;  // stratified by hybrid label
    std::uint64_t split_seed = 0;
    bool abort_on_judge_error = false;  // otherwise skip and record
};

/// Dataset construction loop: for each source item — generate, fit to the
/// fixed frame, run the labeling cascade and the cached judge, append.
/// Items already materialized by a previous interrupted run are skipped, so
/// a resumed build yields the same manifest as an uninterrupted one.
/// Generation failures skip the item and record the reason; judge transport
/// failures follow opts.abort_on_judge_error.
ShardManifest build_dataset(const std::vector<SourceItem>& source, GenerationBackend& backend,
                            const EmbeddingBackend& embedder, JudgeLabeler& judge,
                            DatasetWriter& writer, const BuildOptions& opts = {});

/// Which class-conditional structure the synthetic generator plants.
enum class SignalStyle { pooled_offset, single_layer, cross_layer_interaction };

SignalStyle signal_style_from_string(std::string_view s);
std::string to_string(SignalStyle s);

/// Synthetic generator controls. Hidden states are N(0, noise^2); the
/// planted signal (magnitude m along fixed random unit directions, valid
/// token slots only) depends on the style:
///  - pooled_offset: every layer shifted by +-m*u; visible to a pooled probe.
///  - single_layer: only target_layer shifted; visible to per-layer probes.
///  - cross_layer_interaction: two layer pairs carry +-m*u and +-m*v with
///    independent signs s_a, s_b; the class is y = I(s_a == s_b) and each
///    pair's companion layer carries the opposite shift, so the global mean
///    pool is signal-free by construction and only cross-layer probes can
///    read the class.
struct PlantSpec {
    SignalStyle style = SignalStyle::pooled_offset;
    double rate = 0.5;       // hallucination prevalence rho, in (0,1)
    double magnitude = 1.0;  // m >= 0; 0 plants nothing (null dataset)
    double noise = 1.0;      // sigma > 0
    int target_layer = 3;    // single_layer only
    int min_tokens = 0;      // 0 -> tokens_fixed / 2
    int max_tokens = 0;      // 0 -> tokens_fixed
};

/// Deterministic synthetic dataset; bit-reproducible in (shape, spec, seed).
Dataset synth_generate(int n, const ShapeConfig& shape, const PlantSpec& spec,
                       std::uint64_t seed);

/// The unit directions (u, v) the generator plants along, re-derivable so
/// tests can build closed-form separation oracles against the generator's
/// own parameters.
std::pair<VecX<float>, VecX<float>> synth_plant_directions(const ShapeConfig& shape,
                                                           std::uint64_t seed);

/// Stratified k-fold assignment over positions 0..n-1. Per class, members
/// are shuffled and dealt base + remainder; remainder goes to the folds with
/// the smallest running totals (ties toward the lower fold index). Per-fold
/// class counts stay within +-1 of proportional allocation.
std::vector<std::vector<std::size_t>> stratified_kfold(const std::vector<int>& labels, int k,
                                                       std::uint64_t seed);

/// Id-level convenience wrapper around the positional folds.
std::vector<std::vector<std::string>> stratified_kfold_ids(const std::vector<std::string>& ids,
                                                           const std::vector<int>& labels,
                                                           int k, std::uint64_t seed);

/// (w0, w1) = (1, N0/N1). Hard error when N1 == 0.
std::pair<double, double> class_weights(const std::vector<int>& labels);

/// Deterministic stratified holdout: ceil(fraction * N_c) of each class is
/// tagged "test", the rest "train_dev".
std::map<std::string, std::string> assign_splits(const std::vector<std::string>& ids,
                                                 const std::vector<int>& labels,
                                                 double test_fraction, std::uint64_t seed);

}  // namespace hsprobe
