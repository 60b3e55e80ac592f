#include "hsprobe/config.hpp"

#include <fstream>
#include <initializer_list>
#include <string_view>

#include "hsprobe/rng.hpp"

namespace hsprobe {

namespace {

void check_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                const char* section) {
    if (!j.is_object())
        throw ConfigError(std::string("config: section '") + section + "' must be an object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        bool known = false;
        for (const auto a : allowed)
            if (key == a) {
                known = true;
                break;
            }
        if (!known)
            throw ConfigError(std::string("config: unknown key '") + key + "' in section '" +
                              section + "'");
    }
}

// Section values overlay the defaults; absent keys keep them.
nlohmann::json merged(nlohmann::json defaults, const nlohmann::json& overlay) {
    for (const auto& [key, value] : overlay.items()) defaults[key] = value;
    return defaults;
}

template <typename T>
void read_into(const nlohmann::json& j, const char* key, T& out) {
    if (const auto it = j.find(key); it != j.end()) out = it->get<T>();
}

}  // namespace

nlohmann::json LabelingConfig::to_json() const {
    return {{"tau", tau},
            {"phrases_path", phrases_path},
            {"judge_endpoint", judge_endpoint},
            {"judge_replay", judge_replay},
            {"judge_cache", judge_cache},
            {"alpha", alpha}};
}

nlohmann::json DatasetConfig::to_json() const {
    return {{"source_path", source_path},
            {"dataset_dir", dataset_dir},
            {"shard_size", shard_size},
            {"test_fraction", test_fraction}};
}

nlohmann::json EvalConfig::to_json() const {
    return {{"folds", folds}, {"bins", bins}, {"split", split}};
}

nlohmann::json BenchConfig::to_json() const {
    return {{"batch_sizes", batch_sizes}, {"warmup", warmup},
            {"reps", reps},               {"mock_delay_ms", mock_delay_ms},
            {"queries", queries},         {"lock_path", lock_path}};
}

RunConfig::RunConfig() : probe(paper_probe_spec(ProbeFamily::M2, ShapeConfig{})) {}

nlohmann::json RunConfig::to_json() const {
    return {{"seed", seed},
            {"shape",
             {{"layers", shape.layers},
              {"tokens_fixed", shape.tokens_fixed},
              {"hidden", shape.hidden}}},
            {"labeling", labeling.to_json()},
            {"dataset", dataset.to_json()},
            {"probe", probe.to_json()},
            {"train", train.to_json()},
            {"eval", eval.to_json()},
            {"bench", bench.to_json()}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    check_keys(j, {"seed", "shape", "labeling", "dataset", "probe", "train", "eval", "bench"},
               "root");
    RunConfig c;
    try {
        read_into(j, "seed", c.seed);

        if (const auto it = j.find("shape"); it != j.end()) {
            check_keys(*it, {"layers", "tokens_fixed", "hidden"}, "shape");
            read_into(*it, "layers", c.shape.layers);
            read_into(*it, "tokens_fixed", c.shape.tokens_fixed);
            read_into(*it, "hidden", c.shape.hidden);
        }
        c.shape.validate();

        if (const auto it = j.find("labeling"); it != j.end()) {
            check_keys(*it,
                       {"tau", "phrases_path", "judge_endpoint", "judge_replay", "judge_cache",
                        "alpha"},
                       "labeling");
            read_into(*it, "tau", c.labeling.tau);
            read_into(*it, "phrases_path", c.labeling.phrases_path);
            read_into(*it, "judge_endpoint", c.labeling.judge_endpoint);
            read_into(*it, "judge_replay", c.labeling.judge_replay);
            read_into(*it, "judge_cache", c.labeling.judge_cache);
            read_into(*it, "alpha", c.labeling.alpha);
        }
        if (!(c.labeling.tau > 0.0 && c.labeling.tau < 1.0))
            throw ConfigError("config: labeling.tau must lie in (0,1)");
        if (!(c.labeling.alpha >= 0.0 && c.labeling.alpha <= 1.0))
            throw ConfigError("config: labeling.alpha must lie in [0,1]");

        if (const auto it = j.find("dataset"); it != j.end()) {
            check_keys(*it, {"source_path", "dataset_dir", "shard_size", "test_fraction"},
                       "dataset");
            read_into(*it, "source_path", c.dataset.source_path);
            read_into(*it, "dataset_dir", c.dataset.dataset_dir);
            read_into(*it, "shard_size", c.dataset.shard_size);
            read_into(*it, "test_fraction", c.dataset.test_fraction);
        }
        if (c.dataset.shard_size < 1)
            throw ConfigError("config: dataset.shard_size must be >= 1");
        if (!(c.dataset.test_fraction >= 0.0 && c.dataset.test_fraction < 1.0))
            throw ConfigError("config: dataset.test_fraction must lie in [0,1)");

        if (const auto it = j.find("probe"); it != j.end()) {
            check_keys(*it,
                       {"family", "shape", "d", "mlp_hidden", "heads", "encoder_depth",
                        "query_count", "dropout", "mask_padding", "m1_per_layer", "m4_gate"},
                       "probe");
            if (it->contains("shape"))
                check_keys(it->at("shape"), {"layers", "tokens_fixed", "hidden"}, "probe.shape");
            ProbeSpec defaults = paper_probe_spec(ProbeFamily::M2, c.shape);
            c.probe = ProbeSpec::from_json(merged(defaults.to_json(), *it));
            if (!(c.probe.shape == c.shape))
                throw ConfigError("config: probe.shape disagrees with the top-level shape");
        } else {
            c.probe = paper_probe_spec(c.probe.family, c.shape);
        }
        c.probe.validate();

        TrainConfig train_defaults;
        train_defaults.seed = c.seed;
        if (const auto it = j.find("train"); it != j.end()) {
            check_keys(*it,
                       {"batch_size", "learning_rate", "weight_decay", "epochs", "patience",
                        "grad_clip_norm", "label_smoothing", "warmup_fraction", "alpha", "seed",
                        "early_stop_metric"},
                       "train");
            c.train = TrainConfig::from_json(merged(train_defaults.to_json(), *it));
        } else {
            c.train = train_defaults;
        }

        if (const auto it = j.find("eval"); it != j.end()) {
            check_keys(*it, {"folds", "bins", "split"}, "eval");
            read_into(*it, "folds", c.eval.folds);
            read_into(*it, "bins", c.eval.bins);
            read_into(*it, "split", c.eval.split);
        }
        if (c.eval.folds < 2) throw ConfigError("config: eval.folds must be >= 2");
        if (c.eval.bins < 1) throw ConfigError("config: eval.bins must be >= 1");
        if (c.eval.split != "cv" && c.eval.split != "single" && c.eval.split != "test")
            throw ConfigError("config: eval.split must be cv, single or test");

        if (const auto it = j.find("bench"); it != j.end()) {
            check_keys(*it,
                       {"batch_sizes", "warmup", "reps", "mock_delay_ms", "queries", "lock_path"},
                       "bench");
            read_into(*it, "batch_sizes", c.bench.batch_sizes);
            read_into(*it, "warmup", c.bench.warmup);
            read_into(*it, "reps", c.bench.reps);
            read_into(*it, "mock_delay_ms", c.bench.mock_delay_ms);
            read_into(*it, "queries", c.bench.queries);
            read_into(*it, "lock_path", c.bench.lock_path);
        }
        if (c.bench.batch_sizes.empty())
            throw ConfigError("config: bench.batch_sizes must be non-empty");
        if (c.bench.warmup < 1 || c.bench.reps < 1 || c.bench.queries < 1)
            throw ConfigError("config: bench.warmup, reps and queries must be >= 1");
        if (c.bench.mock_delay_ms < 0.0)
            throw ConfigError("config: bench.mock_delay_ms must be >= 0");
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config: " + path + " is not valid JSON: " + e.what());
    }
    return from_json(j);
}

std::uint64_t RunConfig::config_hash() const { return fnv1a64(to_json().dump()); }

}  // namespace hsprobe
