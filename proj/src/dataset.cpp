#include "hsprobe/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "hsprobe/rng.hpp"
#include "hsprobe/text.hpp"

#include <nlohmann/json.hpp>

namespace hsprobe {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<SourceItem> load_source_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open source file: " + path);
    std::vector<SourceItem> items;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw DataError("source line " + std::to_string(lineno) + " is not valid JSON");
        try {
            SourceItem item;
            item.id = j.at("id").get<std::string>();
            item.context = j.at("context").get<std::string>();
            item.question = j.at("question").get<std::string>();
            item.gold_answers = j.at("answers").get<std::vector<std::string>>();
            items.push_back(std::move(item));
        } catch (const json::exception& e) {
            throw DataError("source line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return items;
}

// ---------------------------------------------------------------------------
// MockGenerationBackend

MockGenerationBackend::MockGenerationBackend(ShapeConfig shape, std::uint64_t seed, int t_max)
    : shape_(shape), seed_(seed), t_max_(t_max > 0 ? t_max : shape.tokens_fixed) {
    shape_.validate();
}

Generation MockGenerationBackend::generate(const std::string& context,
                                           const std::string& question) {
    const auto key = context + "\x1f" + question;
    Rng rng(derive_seed(seed_ ^ fnv1a64(key), "mock-generate"));

    const auto ctx_tokens = normalized_tokens(context);
    auto context_span = [&](std::size_t want) {
        std::string span;
        if (ctx_tokens.empty()) return span;
        const std::size_t len = std::min(want, ctx_tokens.size());
        const std::size_t start = rng.uniform_index(ctx_tokens.size() - len + 1);
        for (std::size_t i = 0; i < len; ++i) {
            if (i) span += ' ';
            span += ctx_tokens[start + i];
        }
        return span;
    };

    Generation g;
    switch (rng.uniform_index(4)) {
        case 0:
            g.response = "The answer is " + context_span(3) + ".";
            break;
        case 1:
            g.response = "It is entity-" + std::to_string(rng.uniform_index(997)) + ".";
            break;
        case 2:
            g.response = "There is not enough information to answer.";
            break;
        default:
            g.response = "The text mentions " + context_span(2) + " and entity-" +
                         std::to_string(rng.uniform_index(997)) + ".";
            break;
    }

    const int tc = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(t_max_)));
    g.hidden.layers = shape_.layers;
    g.hidden.token_count = tc;
    g.hidden.hidden = shape_.hidden;
    g.hidden.values.resize(static_cast<Eigen::Index>(shape_.layers) * tc, shape_.hidden);
    for (Eigen::Index i = 0; i < g.hidden.values.rows(); ++i)
        for (Eigen::Index j = 0; j < g.hidden.values.cols(); ++j)
            g.hidden.values(i, j) = static_cast<float>(rng.normal());
    return g;
}

// ---------------------------------------------------------------------------
// Dataset

std::vector<int> Dataset::hybrid_labels() const {
    std::vector<int> y;
    y.reserve(records.size());
    for (const auto& r : records) y.push_back(r.labels.hybrid_label);
    return y;
}

std::vector<int> Dataset::judge_labels() const {
    std::vector<int> y;
    y.reserve(records.size());
    for (const auto& r : records) y.push_back(r.labels.judge_label);
    return y;
}

Dataset load_dataset(const std::string& directory) {
    const auto manifest_path = (fs::path(directory) / "manifest.json").string();
    auto manifest = ShardManifest::load(manifest_path);
    Dataset ds;
    ds.shape = manifest.shape;
    ds.records = load_dataset_records(directory, manifest);
    ds.splits = manifest.splits;
    return ds;
}

// ---------------------------------------------------------------------------
// build_dataset

ShardManifest build_dataset(const std::vector<SourceItem>& source, GenerationBackend& backend,
                            const EmbeddingBackend& embedder, JudgeLabeler& judge,
                            DatasetWriter& writer, const BuildOptions& opts) {
    if (writer.complete()) return writer.finalize();

    for (const auto& item : source) {
        if (writer.seen_ids().count(item.id)) continue;

        Generation g;
        try {
            g = backend.generate(item.context, item.question);
        } catch (const std::exception& e) {
            writer.record_skip(item.id, std::string("generation: ") + e.what());
            continue;
        }

        SampleRecord rec;
        rec.sample_id = item.id;
        rec.context = item.context;
        rec.question = item.question;
        rec.gold_answers = item.gold_answers;
        rec.response = g.response;
        rec.token_count = g.hidden.token_count;
        rec.hidden = pad_or_truncate(g.hidden, writer.shape());

        const auto hy = hybrid_label(g.response, item.gold_answers, embedder, opts.tau);
        rec.labels.similarity_score = hy.similarity;
        rec.labels.hybrid_label = hy.label;
        rec.labels.hybrid_method = hy.method;

        JudgeVerdict v;
        bool judge_failed = false;
        auto on_judge_failure = [&](const std::exception& e) {
            if (opts.abort_on_judge_error) throw;  // rethrows the in-flight exception
            writer.record_skip(item.id, std::string("judge: ") + e.what());
            judge_failed = true;
        };
        try {
            v = judge.label(item.context, item.question, g.response, item.id);
        } catch (const TransportError& e) {
            on_judge_failure(e);
        } catch (const MalformedVerdict& e) {
            on_judge_failure(e);
        } catch (const JudgeError& e) {
            on_judge_failure(e);
        }
        if (judge_failed) continue;
        rec.labels.judge_label = v.verdict;
        rec.labels.judge_supported = v.supported;
        rec.labels.judge_abstained = v.abstained;
        rec.labels.judge_reason = v.reason;
        rec.labels.agreement = agreement(hy.label, v.verdict);

        writer.append(std::move(rec));
    }

    std::map<std::string, std::string> splits;
    if (opts.test_fraction > 0.0) {
        std::vector<std::string> ids;
        std::vector<int> labels;
        for (const auto& [id, y] : writer.hybrid_labels_by_id()) {
            ids.push_back(id);
            labels.push_back(y);
        }
        if (!ids.empty())
            splits = assign_splits(ids, labels, opts.test_fraction, opts.split_seed);
    }
    return writer.finalize(std::move(splits));
}

// ---------------------------------------------------------------------------
// Synthetic generation

SignalStyle signal_style_from_string(std::string_view s) {
    if (s == "pooled_offset") return SignalStyle::pooled_offset;
    if (s == "single_layer") return SignalStyle::single_layer;
    if (s == "cross_layer_interaction") return SignalStyle::cross_layer_interaction;
    throw ConfigError("unknown signal style '" + std::string(s) + "'");
}

std::string to_string(SignalStyle s) {
    switch (s) {
        case SignalStyle::pooled_offset: return "pooled_offset";
        case SignalStyle::single_layer: return "single_layer";
        case SignalStyle::cross_layer_interaction: return "cross_layer_interaction";
    }
    throw ConfigError("invalid SignalStyle");
}

std::pair<VecX<float>, VecX<float>> synth_plant_directions(const ShapeConfig& shape,
                                                           std::uint64_t seed) {
    auto unit = [&](std::string_view label) {
        Rng rng(derive_seed(seed, label));
        VecX<float> v(shape.hidden);
        for (int d = 0; d < shape.hidden; ++d) v[d] = static_cast<float>(rng.normal());
        const float norm = v.norm();
        return VecX<float>(v / norm);
    };
    return {unit("plant-u"), unit("plant-v")};
}

Dataset synth_generate(int n, const ShapeConfig& shape, const PlantSpec& spec,
                       std::uint64_t seed) {
    shape.validate();
    if (n < 1) throw ConfigError("synth_generate: n must be >= 1");
    if (!(spec.rate > 0.0 && spec.rate < 1.0))
        throw ConfigError("synth_generate: rate must lie in (0,1)");
    if (spec.magnitude < 0.0) throw ConfigError("synth_generate: magnitude must be >= 0");
    if (!(spec.noise > 0.0)) throw ConfigError("synth_generate: noise must be > 0");
    if (spec.style == SignalStyle::single_layer &&
        (spec.target_layer < 0 || spec.target_layer >= shape.layers))
        throw ConfigError("synth_generate: target_layer out of range");
    if (spec.style == SignalStyle::cross_layer_interaction && shape.layers < 4)
        throw ConfigError("synth_generate: cross_layer_interaction needs at least 4 layers");

    int min_t = spec.min_tokens > 0 ? spec.min_tokens : std::max(1, shape.tokens_fixed / 2);
    int max_t = spec.max_tokens > 0 ? spec.max_tokens : shape.tokens_fixed;
    if (min_t < 1 || max_t < min_t)
        throw ConfigError("synth_generate: bad token range");

    const auto [u, v] = synth_plant_directions(shape, seed);
    // Interaction pairs: (0,1) carries +-m*s_a*u, (L-2,L-1) carries
    // +-m*s_b*v; the second member of each pair cancels the first in any
    // pooled mean over layers.
    const int la = 0, la_c = 1, lb = shape.layers - 2, lb_c = shape.layers - 1;

    Dataset ds;
    ds.shape = shape;
    ds.records.reserve(n);
    const float m = static_cast<float>(spec.magnitude);

    for (int i = 0; i < n; ++i) {
        Rng rng(derive_seed(seed, "synth-" + std::to_string(i)));
        int y = rng.bernoulli(spec.rate) ? 1 : 0;
        const int tc = min_t + static_cast<int>(rng.uniform_index(
                                   static_cast<std::uint64_t>(max_t - min_t + 1)));

        RawActivations raw;
        raw.layers = shape.layers;
        raw.token_count = tc;
        raw.hidden = shape.hidden;
        raw.values.resize(static_cast<Eigen::Index>(shape.layers) * tc, shape.hidden);
        for (Eigen::Index r = 0; r < raw.values.rows(); ++r)
            for (Eigen::Index c = 0; c < raw.values.cols(); ++c)
                raw.values(r, c) = static_cast<float>(spec.noise * rng.normal());

        const int planted_t = std::min(tc, shape.tokens_fixed);
        auto add_to_layer = [&](int layer, const VecX<float>& dir, float scale) {
            for (int t = 0; t < planted_t; ++t)
                raw.values.row(static_cast<Eigen::Index>(layer) * tc + t) +=
                    scale * dir.transpose();
        };

        switch (spec.style) {
            case SignalStyle::pooled_offset: {
                const float sign = y == 1 ? 1.0f : -1.0f;
                for (int l = 0; l < shape.layers; ++l) add_to_layer(l, u, sign * m);
                break;
            }
            case SignalStyle::single_layer: {
                const float sign = y == 1 ? 1.0f : -1.0f;
                add_to_layer(spec.target_layer, u, sign * m);
                break;
            }
            case SignalStyle::cross_layer_interaction: {
                // y == I(s_a == s_b): draw s_a freely, then pick s_b so the
                // prevalence matches `rate` while the class stays a pure
                // two-layer interaction.
                const float s_a = rng.bernoulli(0.5) ? 1.0f : -1.0f;
                const float s_b = y == 1 ? s_a : -s_a;
                add_to_layer(la, u, s_a * m);
                add_to_layer(la_c, u, -s_a * m);
                add_to_layer(lb, v, s_b * m);
                add_to_layer(lb_c, v, -s_b * m);
                break;
            }
        }

        SampleRecord rec;
        const int topic = i % 50;
        const int gold = i % 97;
        const int wrong = (i + 37) % 97;
        rec.sample_id = "synth-" + std::to_string(i);
        rec.context = "Reference text: topic-" + std::to_string(topic) + " has value answer-" +
                      std::to_string(gold) + ".";
        rec.question = "What value does topic-" + std::to_string(topic) + " have?";
        rec.gold_answers = {"answer-" + std::to_string(gold)};
        rec.response = "The value of topic-" + std::to_string(topic) + " is answer-" +
                       std::to_string(y == 0 ? gold : wrong) + ".";
        rec.token_count = tc;
        rec.hidden = pad_or_truncate(raw, shape);
        rec.labels.hybrid_label = y;
        rec.labels.hybrid_method = y == 0 ? HybridMethod::substring : HybridMethod::specific_claim;
        rec.labels.judge_label = y;
        rec.labels.judge_supported = (y == 0);
        rec.labels.judge_abstained = false;
        rec.labels.judge_reason = "synthetic";
        rec.labels.agreement = true;
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Splits

std::vector<std::vector<std::size_t>> stratified_kfold(const std::vector<int>& labels, int k,
                                                       std::uint64_t seed) {
    const std::size_t n = labels.size();
    if (k < 2) throw ConfigError("stratified_kfold: k must be >= 2");
    if (static_cast<std::size_t>(k) > n)
        throw ConfigError("stratified_kfold: k exceeds the sample count");
    for (int y : labels)
        if (y != 0 && y != 1) throw DataError("stratified_kfold: labels must be 0 or 1");

    std::vector<std::vector<std::size_t>> folds(k);
    std::vector<std::size_t> fold_totals(k, 0);
    for (int cls : {0, 1}) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < n; ++i)
            if (labels[i] == cls) members.push_back(i);
        if (members.empty())
            throw DataError("stratified_kfold: class " + std::to_string(cls) + " is empty");

        Rng rng(derive_seed(seed, "kfold-class-" + std::to_string(cls)));
        rng.shuffle(members);

        // base per fold, remainder to the folds with the smallest running
        // totals (ties toward the lower index).
        std::vector<std::size_t> take(k, members.size() / k);
        std::size_t rem = members.size() % k;
        while (rem--) {
            std::size_t best = 0;
            for (std::size_t f = 1; f < static_cast<std::size_t>(k); ++f)
                if (fold_totals[f] + take[f] < fold_totals[best] + take[best]) best = f;
            ++take[best];
        }
        std::size_t cursor = 0;
        for (int f = 0; f < k; ++f) {
            for (std::size_t j = 0; j < take[f]; ++j) folds[f].push_back(members[cursor++]);
            fold_totals[f] += take[f];
        }
    }
    for (auto& fold : folds) std::sort(fold.begin(), fold.end());
    return folds;
}

std::vector<std::vector<std::string>> stratified_kfold_ids(const std::vector<std::string>& ids,
                                                           const std::vector<int>& labels,
                                                           int k, std::uint64_t seed) {
    if (ids.size() != labels.size())
        throw DataError("stratified_kfold_ids: ids and labels differ in length");
    auto folds = stratified_kfold(labels, k, seed);
    std::vector<std::vector<std::string>> out(folds.size());
    for (std::size_t f = 0; f < folds.size(); ++f)
        for (auto i : folds[f]) out[f].push_back(ids[i]);
    return out;
}

std::pair<double, double> class_weights(const std::vector<int>& labels) {
    std::size_t n0 = 0, n1 = 0;
    for (int y : labels) {
        if (y == 1) ++n1;
        else if (y == 0) ++n0;
        else throw DataError("class_weights: labels must be 0 or 1");
    }
    if (n1 == 0) throw DataError("class_weights: no positive labels (N1 = 0)");
    return {1.0, static_cast<double>(n0) / static_cast<double>(n1)};
}

std::map<std::string, std::string> assign_splits(const std::vector<std::string>& ids,
                                                 const std::vector<int>& labels,
                                                 double test_fraction, std::uint64_t seed) {
    if (ids.size() != labels.size())
        throw DataError("assign_splits: ids and labels differ in length");
    if (!(test_fraction >= 0.0 && test_fraction < 1.0))
        throw ConfigError("assign_splits: test_fraction must lie in [0,1)");

    std::map<std::string, std::string> out;
    for (int cls : {0, 1}) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < ids.size(); ++i)
            if (labels[i] == cls) members.push_back(i);
        Rng rng(derive_seed(seed, "split-class-" + std::to_string(cls)));
        rng.shuffle(members);
        const std::size_t n_test = static_cast<std::size_t>(
            std::ceil(test_fraction * static_cast<double>(members.size())));
        for (std::size_t j = 0; j < members.size(); ++j)
            out[ids[members[j]]] = j < n_test ? "test" : "train_dev";
    }
    return out;
}

}  // namespace hsprobe
