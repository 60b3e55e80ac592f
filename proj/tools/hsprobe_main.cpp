// Command-line surface over the hidden-state probe toolkit: weak-supervision
// labeling, dataset construction, probe training, evaluation, benchmarking,
// analysis and plot emission. Every command is deterministic given
// (config, seed), writes into one run directory guarded by a lock file, and
// stamps the resolved config hash into its outputs.
//
// Exit codes: 0 success, 2 configuration error (including flag parse
// failures), 3 data/metric/training error, 4 judge failure.

#include <cstdint>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hsprobe/analysis.hpp"
#include "hsprobe/bench.hpp"
#include "hsprobe/config.hpp"
#include "hsprobe/dataset.hpp"
#include "hsprobe/errors.hpp"
#include "hsprobe/plot.hpp"
#include "hsprobe/rng.hpp"
#include "hsprobe/training.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hsprobe;

namespace {

// Flags shared across subcommands; unset optionals keep the config value.
struct Overrides {
    std::string config_path;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> family;
    std::optional<int> folds;
    std::optional<std::string> split;
    std::optional<double> tau;
    std::optional<int> bins;
    std::vector<int> batch_sizes;
};

void add_common_flags(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config_path, "run configuration JSON file");
    cmd->add_option("--seed", o.seed, "override the run seed (and the training seed)");
    cmd->add_option("--family", o.family, "probe family")
        ->check(CLI::IsMember({"m0", "m1", "m2", "m3", "m4"}));
    cmd->add_option("--folds", o.folds, "cross-validation fold count");
    cmd->add_option("--split", o.split, "split protocol: cv, single or test")
        ->check(CLI::IsMember({"cv", "single", "test"}));
    cmd->add_option("--tau", o.tau, "similarity threshold for the hybrid labeler");
    cmd->add_option("--bins", o.bins, "calibration bin count");
    cmd->add_option("--batch-sizes", o.batch_sizes, "benchmark batch sizes")->delimiter(',');
    cmd->add_option("--out", o.out, "output directory");
}

// Config plus flag overrides, re-validated as a whole so a bad flag value
// fails exactly like the same value in the file would.
RunConfig resolve_config(const Overrides& o) {
    RunConfig cfg = o.config_path.empty() ? RunConfig{} : RunConfig::load(o.config_path);
    if (o.seed) {
        cfg.seed = *o.seed;
        cfg.train.seed = *o.seed;
    }
    if (o.family) cfg.probe.family = probe_family_from_string(*o.family);
    if (o.folds) cfg.eval.folds = *o.folds;
    if (o.split) cfg.eval.split = *o.split;
    if (o.tau) cfg.labeling.tau = *o.tau;
    if (o.bins) cfg.eval.bins = *o.bins;
    if (!o.batch_sizes.empty()) cfg.bench.batch_sizes = o.batch_sizes;
    return RunConfig::from_json(cfg.to_json());
}

std::string out_dir_or(const Overrides& o, const std::string& fallback) {
    if (!o.out.empty()) return o.out;
    if (!fallback.empty()) return fallback;
    return "run";
}

// Exclusive run directory: lock file plus the resolved config snapshot.
struct RunDir {
    fs::path dir;
    std::unique_ptr<BenchLock> lock;
};

RunDir open_run_dir(const std::string& path, const RunConfig& cfg) {
    fs::path dir(path);
    fs::create_directories(dir);
    RunDir rd{dir, std::make_unique<BenchLock>(dir / ".lock")};
    json j = cfg.to_json();
    j["config_hash"] = cfg.config_hash();
    std::ofstream f(rd.dir / "run_config.json");
    if (!f) throw DataError("cannot write " + (rd.dir / "run_config.json").string());
    f << j.dump(2) << "\n";
    return rd;
}

void write_json_file(const fs::path& path, const json& j) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write " + path.string());
    f << j.dump(2) << "\n";
}

std::vector<std::string> resolve_phrases(const LabelingConfig& lc) {
    return lc.phrases_path.empty() ? default_abstention_phrases()
                                   : load_phrase_list(lc.phrases_path);
}

// Judge client chain: live endpoint > offline replay > bundled mock, with
// the verdict cache in front. VerdictCache holds a mutex, hence the pointer.
struct JudgeStack {
    std::unique_ptr<JudgeClient> client;
    std::unique_ptr<VerdictCache> cache;
    std::unique_ptr<JudgeLabeler> labeler;
};

JudgeStack make_judge(const LabelingConfig& lc) {
    JudgeStack s;
    if (!lc.judge_endpoint.empty())
        s.client = std::make_unique<HttpJudgeClient>(lc.judge_endpoint);
    else if (!lc.judge_replay.empty())
        s.client = std::make_unique<ReplayJudgeClient>(lc.judge_replay);
    else
        s.client = std::make_unique<MockJudgeClient>();
    s.cache = lc.judge_cache.empty() ? std::make_unique<VerdictCache>()
                                     : std::make_unique<VerdictCache>(lc.judge_cache);
    s.labeler = std::make_unique<JudgeLabeler>(*s.client, *s.cache);
    return s;
}

// ---------------------------------------------------------------------------
// label: hybrid cascade + cached judge over a response corpus

struct LabelRow {
    std::string id;
    std::string context;
    std::string question;
    std::string response;
    std::vector<std::string> answers;
};

// Line-delimited JSON {"id", "context", "question", "answers", "response"}.
// Extra keys are tolerated so fixture files can carry expectations inline.
std::vector<LabelRow> load_label_rows(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open label input: " + path);
    std::vector<LabelRow> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            json j = json::parse(line);
            LabelRow r;
            r.id = j.at("id").get<std::string>();
            r.context = j.value("context", std::string{});
            r.question = j.value("question", std::string{});
            r.response = j.at("response").get<std::string>();
            if (j.contains("answers")) r.answers = j["answers"].get<std::vector<std::string>>();
            rows.push_back(std::move(r));
        } catch (const json::exception& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return rows;
}

int cmd_label(const Overrides& o, const std::string& input) {
    RunConfig cfg = resolve_config(o);
    RunDir rd = open_run_dir(out_dir_or(o, ""), cfg);

    std::vector<LabelRow> rows = load_label_rows(input);
    if (rows.empty()) std::cerr << "warning: " << input << " has no rows; emitting empty output\n";

    HashEmbeddingBackend embedder;
    const std::vector<std::string> phrases = resolve_phrases(cfg.labeling);
    JudgeStack judge = make_judge(cfg.labeling);

    std::ofstream bundles(rd.dir / "bundles.jsonl");
    if (!bundles) throw DataError("cannot write " + (rd.dir / "bundles.jsonl").string());

    long long agree = 0;
    std::map<std::string, long long> by_method;
    for (const LabelRow& r : rows) {
        HybridResult hyb = hybrid_label(r.response, r.answers, embedder, cfg.labeling.tau, phrases);
        JudgeVerdict v = judge.labeler->label(r.context, r.question, r.response, r.id);
        LabelBundle b;
        b.similarity_score = hyb.similarity;
        b.hybrid_label = hyb.label;
        b.hybrid_method = hyb.method;
        b.judge_label = v.verdict;
        b.judge_supported = v.supported;
        b.judge_abstained = v.abstained;
        b.judge_reason = v.reason;
        b.agreement = agreement(hyb.label, v.verdict);
        agree += b.agreement ? 1 : 0;
        ++by_method[to_string(hyb.method)];

        json bj = json::parse(label_bundle_to_json(b));
        bj["id"] = r.id;
        bundles << bj.dump() << "\n";
    }

    json summary{{"config_hash", cfg.config_hash()},
                 {"n", rows.size()},
                 {"agreement_fraction", rows.empty() ? 0.0
                                                     : static_cast<double>(agree) /
                                                           static_cast<double>(rows.size())},
                 {"judge_outbound_requests", judge.labeler->outbound_requests()},
                 {"hybrid_method_counts", by_method}};
    write_json_file(rd.dir / "summary.json", summary);
    std::cout << "labeled " << rows.size() << " rows, agreement "
              << summary["agreement_fraction"].get<double>() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// synth: planted synthetic dataset, sharded to disk

int cmd_synth(const Overrides& o, int n, const std::string& style, double rate, double magnitude,
              double noise, int target_layer) {
    RunConfig cfg = resolve_config(o);
    PlantSpec plant;
    plant.style = signal_style_from_string(style);
    plant.rate = rate;
    plant.magnitude = magnitude;
    plant.noise = noise;
    plant.target_layer = target_layer;

    Dataset ds = synth_generate(n, cfg.shape, plant, cfg.seed);

    RunDir rd = open_run_dir(out_dir_or(o, cfg.dataset.dataset_dir), cfg);
    DatasetWriter writer(rd.dir.string(), cfg.shape, cfg.dataset.shard_size);
    std::vector<std::string> ids;
    std::vector<int> labels;
    for (const SampleRecord& rec : ds.records) {
        ids.push_back(rec.sample_id);
        labels.push_back(rec.labels.hybrid_label);
    }
    for (SampleRecord& rec : ds.records) writer.append(std::move(rec));
    ShardManifest manifest =
        writer.finalize(assign_splits(ids, labels, cfg.dataset.test_fraction, cfg.seed));

    std::cout << "wrote " << manifest.total_samples() << " samples in " << manifest.entries.size()
              << " shards to " << rd.dir.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// build: source corpus -> generate -> label -> sharded dataset

int cmd_build(const Overrides& o, const std::string& input) {
    RunConfig cfg = resolve_config(o);
    const std::string source_path = input.empty() ? cfg.dataset.source_path : input;
    if (source_path.empty())
        throw ConfigError("build needs --input or a dataset.source_path in the config");

    std::vector<SourceItem> source = load_source_jsonl(source_path);

    RunDir rd = open_run_dir(out_dir_or(o, cfg.dataset.dataset_dir), cfg);
    MockGenerationBackend backend(cfg.shape, cfg.seed);
    HashEmbeddingBackend embedder;
    JudgeStack judge = make_judge(cfg.labeling);
    DatasetWriter writer(rd.dir.string(), cfg.shape, cfg.dataset.shard_size);

    BuildOptions opts;
    opts.tau = cfg.labeling.tau;
    opts.test_fraction = cfg.dataset.test_fraction;
    opts.split_seed = cfg.seed;
    // A replay transcript never fabricates verdicts, so a miss must abort
    // rather than degrade into a skipped sample.
    opts.abort_on_judge_error = !cfg.labeling.judge_replay.empty();

    ShardManifest manifest = build_dataset(source, backend, embedder, *judge.labeler, writer, opts);
    std::cout << "built " << manifest.total_samples() << " samples in " << manifest.entries.size()
              << " shards (" << manifest.skipped.size() << " skipped)\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train / eval

std::string split_tag(const Dataset& ds, const std::string& sample_id) {
    auto it = ds.splits.find(sample_id);
    return it == ds.splits.end() ? std::string{"train_dev"} : it->second;
}

std::vector<SampleRecord> select_split(const Dataset& ds, const std::string& split) {
    std::vector<SampleRecord> out;
    const bool want_test = split == "test";
    for (const SampleRecord& r : ds.records)
        if ((split_tag(ds, r.sample_id) == "test") == want_test) out.push_back(r);
    return out;
}

Dataset load_dataset_checked(const std::string& dir, const RunConfig& cfg) {
    if (dir.empty()) throw ConfigError("no dataset directory: pass --data or set dataset.dataset_dir");
    Dataset ds = load_dataset(dir);
    if (!(ds.shape == cfg.shape))
        throw ConfigError("dataset shape (" + std::to_string(ds.shape.layers) + "," +
                          std::to_string(ds.shape.tokens_fixed) + "," +
                          std::to_string(ds.shape.hidden) +
                          ") disagrees with the configured shape");
    return ds;
}

int cmd_train(const Overrides& o, const std::string& data) {
    RunConfig cfg = resolve_config(o);
    Dataset ds = load_dataset_checked(data.empty() ? cfg.dataset.dataset_dir : data, cfg);

    // Training always stays inside the train_dev pool; the test tag is a
    // quarantine that only `eval --split test` may read.
    std::vector<SampleRecord> records = select_split(ds, "train_dev");
    if (records.empty()) throw DataError("train: no train_dev records in the dataset");
    std::vector<TrainExample> examples = make_examples(records, cfg.train.alpha);

    RunDir rd = open_run_dir(out_dir_or(o, ""), cfg);

    if (cfg.eval.split == "cv") {
        CvResult cv = run_cv(cfg.probe, examples, cfg.eval.folds, cfg.train, rd.dir);
        const Aggregate& auc = cv.aggregate.at("auc");
        std::cout << "cv " << to_string(cfg.probe.family) << " auc " << auc.mean << " +- "
                  << auc.stddev << " over " << cv.folds.size() << " folds\n";
        return 0;
    }

    // single and test protocols train one model; fold 0 of the stratified
    // k-fold is the early-stopping validation split.
    std::vector<int> hard;
    hard.reserve(examples.size());
    for (const TrainExample& e : examples) hard.push_back(e.hard_label());
    auto folds = stratified_kfold(hard, cfg.eval.folds, derive_seed(cfg.seed, "cv"));
    std::vector<char> in_val(examples.size(), 0);
    for (std::size_t idx : folds[0]) in_val[idx] = 1;
    std::vector<TrainExample> train_ex, val_ex;
    for (std::size_t i = 0; i < examples.size(); ++i)
        (in_val[i] ? val_ex : train_ex).push_back(examples[i]);

    FoldResult fr = train_fold(cfg.probe, train_ex, val_ex, cfg.train);
    save_checkpoint(rd.dir / "single.ckpt", fr.best_model,
                    json{{"best_epoch", fr.best_epoch},
                         {"best_score", fr.best_score},
                         {"train_config_hash", cfg.train.config_hash()},
                         {"config_hash", cfg.config_hash()}});
    {
        std::ofstream hist(rd.dir / "history.jsonl");
        for (const EpochStats& s : fr.history) hist << s.to_json().dump() << "\n";
    }
    write_json_file(rd.dir / "summary.json",
                    json{{"config_hash", cfg.config_hash()},
                         {"family", to_string(cfg.probe.family)},
                         {"protocol", cfg.eval.split},
                         {"best_epoch", fr.best_epoch},
                         {"epochs_run", fr.epochs_run},
                         {"best_score", fr.best_score},
                         {"class_weights", {fr.class_weights_used.first,
                                            fr.class_weights_used.second}},
                         {"val_report", json::parse(fr.val_report.to_json())}});
    std::cout << "trained " << to_string(cfg.probe.family) << ": best " << cfg.train.early_stop_metric
              << " " << fr.best_score << " at epoch " << fr.best_epoch << "\n";
    return 0;
}

int cmd_eval(const Overrides& o, const std::string& data, const std::string& ckpt) {
    RunConfig cfg = resolve_config(o);
    Dataset ds = load_dataset_checked(data.empty() ? cfg.dataset.dataset_dir : data, cfg);

    json ckpt_extra;
    ProbeModel model = load_checkpoint(ckpt, &ckpt_extra);
    if (!(model.spec.shape == cfg.shape))
        throw ConfigError("checkpoint shape disagrees with the configured shape");

    const std::string split = cfg.eval.split == "test" ? "test" : "train_dev";
    std::vector<SampleRecord> records = select_split(ds, split);
    if (records.empty()) throw DataError("eval: no records tagged " + split);

    std::vector<HiddenStateTensor> inputs;
    std::vector<int> labels;
    inputs.reserve(records.size());
    for (const SampleRecord& r : records) {
        inputs.push_back(r.hidden);
        labels.push_back(
            soft_label(r.labels.judge_label, r.labels.hybrid_label, cfg.train.alpha) >= 0.5 ? 1
                                                                                            : 0);
    }
    std::vector<double> scores = probe_forward_batch(model, inputs);
    MetricsReport report = compute_report(scores, labels, cfg.eval.bins);

    RunDir rd = open_run_dir(out_dir_or(o, ""), cfg);
    // Non-test evaluations are diagnostics, not held-out generalization.
    write_json_file(rd.dir / "eval.json",
                    json{{"config_hash", cfg.config_hash()},
                         {"checkpoint", ckpt},
                         {"family", to_string(model.spec.family)},
                         {"split", split},
                         {"diagnostic", split != "test"},
                         {"n", records.size()},
                         {"report", json::parse(report.to_json())}});
    {
        std::ofstream csv(rd.dir / "scores.csv");
        if (!csv) throw DataError("cannot write scores.csv");
        csv << "score,label\n";
        csv.precision(17);
        for (std::size_t i = 0; i < scores.size(); ++i)
            csv << scores[i] << "," << labels[i] << "\n";
    }
    std::cout << "eval " << to_string(model.spec.family) << " on " << split << ": auc "
              << report.auc << ", best f1 " << report.best_f1 << " (n=" << records.size() << ")\n";
    return 0;
}

// ---------------------------------------------------------------------------
// bench

int cmd_bench(const Overrides& o) {
    RunConfig cfg = resolve_config(o);
    RunDir rd = open_run_dir(out_dir_or(o, ""), cfg);

    const fs::path global_lock = cfg.bench.lock_path.empty()
                                     ? fs::temp_directory_path() / "hsprobe_bench.lock"
                                     : fs::path(cfg.bench.lock_path);
    BenchLock bench_lock(global_lock);

    // Null synthetic tensors at the configured shape; content is irrelevant
    // to timing, determinism of the inputs is not.
    PlantSpec null_plant;
    null_plant.magnitude = 0.0;
    Dataset synth = synth_generate(16, cfg.shape, null_plant, derive_seed(cfg.seed, "bench-inputs"));
    std::vector<HiddenStateTensor> inputs;
    inputs.reserve(synth.records.size());
    for (const SampleRecord& r : synth.records) inputs.push_back(r.hidden);

    std::vector<SourceItem> queries;
    for (int i = 0; i < cfg.bench.queries; ++i)
        queries.push_back(SourceItem{"bench-q" + std::to_string(i),
                                     "benchmark context " + std::to_string(i),
                                     "benchmark question " + std::to_string(i),
                                     {}});
    MockGenerationBackend gen(cfg.shape, cfg.seed);
    DelayedGenerationBackend delayed(
        gen, std::chrono::milliseconds(std::llround(cfg.bench.mock_delay_ms)));

    std::vector<BenchReport> probe_reports, e2e_reports;
    for (ProbeFamily family : {ProbeFamily::M0, ProbeFamily::M1, ProbeFamily::M2, ProbeFamily::M3,
                               ProbeFamily::M4}) {
        ProbeSpec spec = cfg.probe;
        spec.family = family;
        ProbeScorer scorer(probe_factory(spec, derive_seed(cfg.seed, "init")));
        probe_reports.push_back(bench_probe_only(scorer, inputs, cfg.bench.batch_sizes,
                                                 cfg.bench.warmup, cfg.bench.reps));
        e2e_reports.push_back(bench_end_to_end(delayed, scorer, cfg.shape, queries));
        std::cout << "benchmarked " << to_string(family) << "\n";
    }

    json probe_json = json::array(), e2e_json = json::array();
    for (const BenchReport& r : probe_reports) probe_json.push_back(r.to_json());
    for (const BenchReport& r : e2e_reports) e2e_json.push_back(r.to_json());
    write_json_file(rd.dir / "bench.json", json{{"config_hash", cfg.config_hash()},
                                                {"probe_only", probe_json},
                                                {"end_to_end", e2e_json}});

    std::vector<BenchReport> all = probe_reports;
    all.insert(all.end(), e2e_reports.begin(), e2e_reports.end());
    const std::string table = format_bench_table(all);
    std::ofstream txt(rd.dir / "bench.txt");
    txt << table;
    std::cout << table;
    return 0;
}

// ---------------------------------------------------------------------------
// analyze

int cmd_analyze(const Overrides& o, const std::string& data, const std::string& ckpt) {
    RunConfig cfg = resolve_config(o);
    Dataset ds = load_dataset_checked(data.empty() ? cfg.dataset.dataset_dir : data, cfg);

    const std::string split = cfg.eval.split == "test" ? "test" : "train_dev";
    std::vector<SampleRecord> records = select_split(ds, split);
    if (records.empty()) throw DataError("analyze: no records tagged " + split);

    std::vector<HiddenStateTensor> inputs;
    std::vector<int> labels;
    for (const SampleRecord& r : records) {
        inputs.push_back(r.hidden);
        labels.push_back(
            soft_label(r.labels.judge_label, r.labels.hybrid_label, cfg.train.alpha) >= 0.5 ? 1
                                                                                            : 0);
    }

    RunDir rd = open_run_dir(out_dir_or(o, ""), cfg);
    json out{{"config_hash", cfg.config_hash()}, {"split", split}, {"n", records.size()}};

    // Per-layer importance is defined for the per-layer family only; other
    // checkpoints (or none) report an explicit null.
    out["layer_importance"] = nullptr;
    if (!ckpt.empty()) {
        ProbeModel model = load_checkpoint(ckpt);
        if (model.spec.family == ProbeFamily::M1) {
            LayerImportance li = layer_importance(model, inputs);
            write_layer_importance_csv((rd.dir / "layer_importance.csv").string(), li);
            out["layer_importance"] = li.to_json();
        }
    }

    // Undefined diagnostics (a single agreement group, one class only) are
    // explicit nulls, never fabricated numbers.
    try {
        out["disagreement"] = disagreement_variance(records).to_json();
    } catch (const UndefinedMetricError&) {
        out["disagreement"] = nullptr;
    }

    PcaResult pca = pca_project(inputs, 2);
    write_pca_csv((rd.dir / "pca.csv").string(), pca, labels);
    out["pca"] = json{{"explained_variance_ratio", pca.explained_variance_ratio}};

    out["baselines"] = nullptr;
    const bool answerable = !records.empty() &&
                            std::all_of(records.begin(), records.end(), [](const SampleRecord& r) {
                                return !r.gold_answers.empty();
                            });
    if (answerable) {
        try {
            HashEmbeddingBackend embedder;
            json arr = json::array();
            for (const BaselineEvaluation& be :
                 evaluate_baselines(records, embedder, cfg.train.alpha, cfg.eval.bins))
                arr.push_back(json{{"method", to_string(be.method)},
                                   {"report", json::parse(be.report.to_json())}});
            out["baselines"] = arr;
        } catch (const UndefinedMetricError&) {
        }
    }

    write_json_file(rd.dir / "analysis.json", out);
    std::cout << "analyzed " << records.size() << " records (" << split << ")\n";
    return 0;
}

// ---------------------------------------------------------------------------
// plot

int cmd_plot(const Overrides& o, const std::string& scores_path) {
    RunConfig cfg = resolve_config(o);

    std::ifstream csv(scores_path);
    if (!csv) throw DataError("cannot open scores CSV: " + scores_path);
    std::string line;
    if (!std::getline(csv, line) || line != "score,label")
        throw DataError(scores_path + ": expected header 'score,label'");
    std::vector<double> scores;
    std::vector<int> labels;
    int lineno = 1;
    while (std::getline(csv, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw DataError(scores_path + ":" + std::to_string(lineno) + ": missing comma");
        try {
            scores.push_back(std::stod(line.substr(0, comma)));
            labels.push_back(std::stoi(line.substr(comma + 1)));
        } catch (const std::exception&) {
            throw DataError(scores_path + ":" + std::to_string(lineno) + ": bad row");
        }
    }
    if (scores.empty()) throw DataError(scores_path + ": no score rows");

    RunDir rd = open_run_dir(out_dir_or(o, ""), cfg);
    const auto roc = roc_curve(scores, labels);
    const auto pr = pr_curve(scores, labels);
    write_curve_csv((rd.dir / "roc.csv").string(), roc);
    write_curve_csv((rd.dir / "pr.csv").string(), pr);
    write_roc_svg((rd.dir / "roc.svg").string(), roc);
    write_pr_svg((rd.dir / "pr.svg").string(), pr);
    write_logit_histogram_svg((rd.dir / "hist.svg").string(), scores, labels, cfg.eval.bins);
    write_json_file(rd.dir / "plot.json",
                    json{{"config_hash", cfg.config_hash()},
                         {"n", scores.size()},
                         {"files", {"roc.csv", "pr.csv", "roc.svg", "pr.svg", "hist.svg"}}});
    std::cout << "plotted " << scores.size() << " scores to " << rd.dir.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hidden-state hallucination probes: labeling, datasets, training, evaluation"};
    app.require_subcommand(1);

    Overrides o;
    std::string input, data, ckpt, scores_path, style = "pooled_offset";
    int n = 100, target_layer = 3;
    double rate = 0.5, magnitude = 1.0, noise = 1.0;
    int rc = 0;

    CLI::App* label = app.add_subcommand("label", "run the labeling cascade over a response corpus");
    label->add_option("--input", input, "JSONL rows {id, context, question, answers, response}")
        ->required();
    add_common_flags(label, o);
    label->callback([&] { rc = cmd_label(o, input); });

    CLI::App* synth = app.add_subcommand("synth", "generate a planted synthetic dataset");
    synth->add_option("--n", n, "sample count");
    synth->add_option("--style", style, "planted structure")
        ->check(CLI::IsMember({"pooled_offset", "single_layer", "cross_layer_interaction"}));
    synth->add_option("--rate", rate, "positive-class prevalence");
    synth->add_option("--magnitude", magnitude, "signal magnitude (0 plants nothing)");
    synth->add_option("--noise", noise, "noise standard deviation");
    synth->add_option("--target-layer", target_layer, "layer carrying the single_layer signal");
    add_common_flags(synth, o);
    synth->callback([&] { rc = cmd_synth(o, n, style, rate, magnitude, noise, target_layer); });

    CLI::App* build = app.add_subcommand("build", "build a labeled dataset from a source corpus");
    build->add_option("--input", input, "source JSONL {id, context, question, answers}");
    add_common_flags(build, o);
    build->callback([&] { rc = cmd_build(o, input); });

    CLI::App* train = app.add_subcommand("train", "train a probe on the train_dev pool");
    train->add_option("--data", data, "dataset directory");
    add_common_flags(train, o);
    train->callback([&] { rc = cmd_train(o, data); });

    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a tagged split");
    eval->add_option("--data", data, "dataset directory");
    eval->add_option("--ckpt", ckpt, "probe checkpoint")->required();
    add_common_flags(eval, o);
    eval->callback([&] { rc = cmd_eval(o, data, ckpt); });

    CLI::App* bench = app.add_subcommand("bench", "latency and throughput benchmarks");
    add_common_flags(bench, o);
    bench->callback([&] { rc = cmd_bench(o); });

    CLI::App* analyze =
        app.add_subcommand("analyze", "layer importance, disagreement, PCA and baselines");
    analyze->add_option("--data", data, "dataset directory");
    analyze->add_option("--ckpt", ckpt, "probe checkpoint (layer importance needs family m1)");
    add_common_flags(analyze, o);
    analyze->callback([&] { rc = cmd_analyze(o, data, ckpt); });

    CLI::App* plot = app.add_subcommand("plot", "ROC/PR curves and logit histogram from scores");
    plot->add_option("--scores", scores_path, "scores.csv produced by eval")->required();
    add_common_flags(plot, o);
    plot->callback([&] { rc = cmd_plot(o, scores_path); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const UndefinedMetricError& e) {
        std::cerr << "metric error: " << e.what() << "\n";
        return 3;
    } catch (const TrainingError& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return 3;
    } catch (const MalformedVerdict& e) {
        std::cerr << "judge error: " << e.what() << "\n";
        return 4;
    } catch (const TransportError& e) {
        std::cerr << "judge transport error: " << e.what() << "\n";
        return 4;
    } catch (const JudgeError& e) {
        std::cerr << "judge error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return rc;
}
