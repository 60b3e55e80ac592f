#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hsprobe/labeling.hpp"
#include "hsprobe/probes.hpp"
#include "hsprobe/training.hpp"

#include <nlohmann/json.hpp>

namespace hsprobe {

struct LabelingConfig {
    double tau = kDefaultTau;
    std::string phrases_path;    // empty: built-in abstention list
    std::string judge_endpoint;  // live HTTP judge; empty: offline
    std::string judge_replay;    // replay transcript; empty: bundled mock
    std::string judge_cache;     // verdict cache file; empty: in-memory
    double alpha = 1.0;          // target blend, judge vs hybrid

    nlohmann::json to_json() const;
};

struct DatasetConfig {
    std::string source_path;  // JSONL of source items
    std::string dataset_dir;  // shard directory
    int shard_size = 500;
    double test_fraction = 0.2;

    nlohmann::json to_json() const;
};

struct EvalConfig {
    int folds = 5;
    int bins = 10;
    std::string split = "cv";  // cv | single | test

    nlohmann::json to_json() const;
};

struct BenchConfig {
    std::vector<int> batch_sizes{1, 8, 32};
    int warmup = 3;
    int reps = 30;
    double mock_delay_ms = 50.0;  // synthetic generation latency
    int queries = 16;             // end-to-end query count
    std::string lock_path;        // empty: <system temp>/hsprobe_bench.lock

    nlohmann::json to_json() const;
};

/// Whole-run configuration. Section defaults follow the reference setup
/// (tau 0.72, 500-record shards, 5 folds, 10 bins, the published training
/// hyperparameters, full-scale tensor shape); the probe section defaults to
/// the full-scale m2 spec. Unknown keys anywhere are rejected, section by
/// section, so typos cannot silently fall back to defaults.
struct RunConfig {
    std::uint64_t seed = 0;
    ShapeConfig shape;  // {32, 96, 4096}
    LabelingConfig labeling;
    DatasetConfig dataset;
    ProbeSpec probe;
    TrainConfig train;
    EvalConfig eval;
    BenchConfig bench;

    RunConfig();

    nlohmann::json to_json() const;
    /// Partial documents merge onto the defaults. probe.shape, when given,
    /// must agree with the top-level shape; when absent it inherits it.
    /// train.seed, when absent, inherits the top-level seed.
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load(const std::string& path);

    /// FNV-1a over the canonical JSON dump; stamped into every output.
    std::uint64_t config_hash() const;
};

}  // namespace hsprobe
