#include "hsprobe/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "hsprobe/autograd.hpp"
#include "hsprobe/dataset.hpp"
#include "hsprobe/labeling.hpp"
#include "hsprobe/rng.hpp"

namespace hsprobe {

namespace {

using Mat = MatX<double>;

constexpr double kProbClamp = 1e-7;

}  // namespace

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
    if (learning_rate <= 0.0) throw ConfigError("TrainConfig: learning_rate must be positive");
    if (weight_decay < 0.0) throw ConfigError("TrainConfig: weight_decay must be >= 0");
    if (epochs < 1) throw ConfigError("TrainConfig: epochs must be >= 1");
    if (patience < 1) throw ConfigError("TrainConfig: patience must be >= 1");
    if (grad_clip_norm <= 0.0) throw ConfigError("TrainConfig: grad_clip_norm must be positive");
    if (!(label_smoothing >= 0.0 && label_smoothing < 1.0))
        throw ConfigError("TrainConfig: label_smoothing must lie in [0,1)");
    if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0))
        throw ConfigError("TrainConfig: warmup_fraction must lie in [0,1)");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("TrainConfig: alpha must lie in [0,1]");
    if (early_stop_metric != "auc" && early_stop_metric != "f1")
        throw ConfigError("TrainConfig: early_stop_metric must be 'auc' or 'f1'");
}

nlohmann::json TrainConfig::to_json() const {
    return {{"batch_size", batch_size},
            {"learning_rate", learning_rate},
            {"weight_decay", weight_decay},
            {"epochs", epochs},
            {"patience", patience},
            {"grad_clip_norm", grad_clip_norm},
            {"label_smoothing", label_smoothing},
            {"warmup_fraction", warmup_fraction},
            {"alpha", alpha},
            {"seed", seed},
            {"early_stop_metric", early_stop_metric}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    try {
        TrainConfig c;
        c.batch_size = j.at("batch_size").get<int>();
        c.learning_rate = j.at("learning_rate").get<double>();
        c.weight_decay = j.at("weight_decay").get<double>();
        c.epochs = j.at("epochs").get<int>();
        c.patience = j.at("patience").get<int>();
        c.grad_clip_norm = j.at("grad_clip_norm").get<double>();
        c.label_smoothing = j.at("label_smoothing").get<double>();
        c.warmup_fraction = j.at("warmup_fraction").get<double>();
        c.alpha = j.at("alpha").get<double>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.early_stop_metric = j.at("early_stop_metric").get<std::string>();
        c.validate();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("TrainConfig JSON: ") + e.what());
    }
}

std::uint64_t TrainConfig::config_hash() const { return fnv1a64(to_json().dump()); }

double smooth(double y, double eps) {
    if (!(y >= 0.0 && y <= 1.0)) throw DataError("smooth: target must lie in [0,1]");
    if (!(eps >= 0.0 && eps < 1.0)) throw ConfigError("smooth: eps must lie in [0,1)");
    return y * (1.0 - eps) + 0.5 * eps;
}

double weighted_bce(double p, double y_s, double w0, double w1) {
    const double q = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
    return -(w1 * y_s * std::log(q) + w0 * (1.0 - y_s) * std::log(1.0 - q));
}

double lr_schedule(int step, int total_steps, int warmup_steps, double eta) {
    if (total_steps < 1) throw ConfigError("lr_schedule: total_steps must be >= 1");
    if (warmup_steps < 0 || warmup_steps >= total_steps)
        throw ConfigError("lr_schedule: warmup_steps must lie in [0, total_steps)");
    if (step < 0) throw ConfigError("lr_schedule: step must be >= 0");
    if (step < warmup_steps) return eta * step / warmup_steps;
    if (step >= total_steps) return 0.0;
    const double progress =
        static_cast<double>(step - warmup_steps) / static_cast<double>(total_steps - warmup_steps);
    return eta * 0.5 * (1.0 + std::cos(progress * std::numbers::pi));
}

std::vector<TrainExample> make_examples(const std::vector<SampleRecord>& records, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("make_examples: alpha must lie in [0,1]");
    std::vector<TrainExample> out;
    out.reserve(records.size());
    for (const auto& r : records)
        out.push_back({r.hidden, soft_label(r.labels.judge_label, r.labels.hybrid_label, alpha)});
    return out;
}

AdamW::AdamW(double weight_decay, double beta1, double beta2, double eps)
    : weight_decay_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamW::step(std::map<std::string, Mat>& params, const std::map<std::string, Mat>& grads,
                 double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (auto& [name, theta] : params) {
        const auto git = grads.find(name);
        if (git == grads.end()) throw ConfigError("AdamW: missing gradient for " + name);
        const Mat& g = git->second;
        Mat& m = m_.try_emplace(name, Mat::Zero(theta.rows(), theta.cols())).first->second;
        Mat& v = v_.try_emplace(name, Mat::Zero(theta.rows(), theta.cols())).first->second;
        m = beta1_ * m + (1.0 - beta1_) * g;
        v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
        const Mat mhat = m / bc1;
        const Mat vhat = v / bc2;
        // Decoupled decay: the regularizer never touches the moments.
        theta -= lr * weight_decay_ * theta;
        theta -= lr * mhat.cwiseQuotient((vhat.cwiseSqrt().array() + eps_).matrix());
    }
}

double global_grad_norm(const std::map<std::string, Mat>& grads) {
    double sq = 0.0;
    for (const auto& [name, g] : grads) sq += g.squaredNorm();
    return std::sqrt(sq);
}

void clip_global_norm(std::map<std::string, Mat>& grads, double max_norm) {
    if (max_norm <= 0.0) throw ConfigError("clip_global_norm: max_norm must be positive");
    const double norm = global_grad_norm(grads);
    if (norm > max_norm) {
        const double scale = max_norm / norm;
        for (auto& [name, g] : grads) g *= scale;
    }
}

nlohmann::json EpochStats::to_json() const {
    return {{"epoch", epoch},
            {"train_loss", train_loss},
            {"val_score", val_score},
            {"lr_last", lr_last},
            {"improved", improved}};
}

namespace {

double validation_score(const ProbeModel& model, const std::vector<TrainExample>& val,
                        const std::string& metric, std::vector<double>* probs_out = nullptr) {
    std::vector<double> probs;
    std::vector<int> labels;
    probs.reserve(val.size());
    labels.reserve(val.size());
    for (const auto& ex : val) {
        probs.push_back(probe_forward(model, ex.hidden).probability);
        labels.push_back(ex.hard_label());
    }
    if (probs_out != nullptr) *probs_out = probs;
    if (metric == "f1") return f1_sweep(probs, labels).best_f1;
    return roc_auc(probs, labels);
}

}  // namespace

FoldResult train_fold(const ProbeSpec& spec, const std::vector<TrainExample>& train,
                      const std::vector<TrainExample>& val, const TrainConfig& cfg) {
    cfg.validate();
    spec.validate();
    if (train.empty()) throw ConfigError("train_fold: empty training split");
    if (val.empty()) throw ConfigError("train_fold: empty validation split");

    std::vector<int> train_labels;
    train_labels.reserve(train.size());
    for (const auto& ex : train) train_labels.push_back(ex.hard_label());
    const auto [w0, w1] = class_weights(train_labels);

    ProbeModel model = probe_factory(spec, derive_seed(cfg.seed, "init"));
    AdamW opt(cfg.weight_decay);
    Rng dropout_rng(derive_seed(cfg.seed, "dropout"));

    const int n = static_cast<int>(train.size());
    const int steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
    const int total_steps = cfg.epochs * steps_per_epoch;
    const int warmup_steps = static_cast<int>(cfg.warmup_fraction * total_steps);

    FoldResult result;
    result.class_weights_used = {w0, w1};
    ProbeModel best = model;
    double best_score = -1.0;
    int best_epoch = 0;
    int stale = 0;
    int step = 0;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<std::size_t> order(train.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle_rng(derive_seed(cfg.seed, "shuffle-epoch-" + std::to_string(epoch)));
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        double lr_last = 0.0;
        for (int start = 0; start < n; start += cfg.batch_size) {
            const int batch_n = std::min(cfg.batch_size, n - start);

            Tape<double> tape;
            const ParamBinding binding = bind_params(tape, model);
            Tape<double>::Var batch_loss{};
            for (int i = 0; i < batch_n; ++i) {
                const TrainExample& ex = train[order[static_cast<std::size_t>(start + i)]];
                const ProbeGraph g = probe_logit(tape, binding, spec, ex.hidden, &dropout_rng);
                const double y_s = smooth(ex.soft_label, cfg.label_smoothing);
                const auto li = tape.weighted_bce_logit(g.logit, y_s, w0, w1);
                batch_loss = i == 0 ? li : tape.add(batch_loss, li);
            }
            batch_loss = tape.scale(batch_loss, 1.0 / batch_n);
            const double loss = tape.value(batch_loss)(0, 0);
            if (!std::isfinite(loss))
                throw TrainingError("train_fold: non-finite loss at epoch " +
                                    std::to_string(epoch) + ", step " + std::to_string(step));
            loss_sum += loss * batch_n;

            tape.backward(batch_loss);
            std::map<std::string, Mat> grads;
            for (std::size_t i = 0; i < binding.names.size(); ++i)
                grads.emplace(binding.names[i], tape.grad(binding.vars[i]));
            clip_global_norm(grads, cfg.grad_clip_norm);

            lr_last = lr_schedule(step, total_steps, warmup_steps, cfg.learning_rate);
            opt.step(model.params, grads, lr_last);
            ++step;
        }

        const double score = validation_score(model, val, cfg.early_stop_metric);
        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = loss_sum / n;
        stats.val_score = score;
        stats.lr_last = lr_last;
        stats.improved = score > best_score;
        result.history.push_back(stats);
        result.epochs_run = epoch;

        if (stats.improved) {
            best_score = score;
            best = model;
            best_epoch = epoch;
            stale = 0;
        } else if (++stale >= cfg.patience) {
            break;
        }
    }

    result.best_model = std::move(best);
    result.best_score = best_score;
    result.best_epoch = best_epoch;

    std::vector<double> probs;
    std::vector<int> labels;
    for (const auto& ex : val) labels.push_back(ex.hard_label());
    validation_score(result.best_model, val, cfg.early_stop_metric, &probs);
    result.val_report = compute_report(probs, labels);
    return result;
}

std::map<std::string, Aggregate> aggregate_reports(const std::vector<MetricsReport>& reports) {
    if (reports.empty()) throw ConfigError("aggregate_reports: no reports");
    const auto fields = [](const MetricsReport& r) -> std::map<std::string, double> {
        return {{"auc", r.auc},         {"pr_auc", r.pr_auc},
                {"acc", r.acc},         {"acc_at_tau_star", r.acc_at_tau_star},
                {"f1_at_half", r.f1_at_half}, {"best_f1", r.best_f1},
                {"tau_star", r.tau_star},     {"ece", r.ece}};
    };
    std::map<std::string, Aggregate> out;
    for (const auto& [key, value] : fields(reports.front())) {
        (void)value;
        std::vector<double> xs;
        for (const auto& r : reports) xs.push_back(fields(r).at(key));
        const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
        double var = 0.0;
        for (const double x : xs) var += (x - mean) * (x - mean);
        const double stddev = xs.size() > 1 ? std::sqrt(var / (xs.size() - 1)) : 0.0;
        out[key] = {mean, stddev};
    }
    return out;
}

nlohmann::json CvResult::summary_json() const {
    nlohmann::json j;
    j["folds"] = nlohmann::json::array();
    for (const auto& f : folds) {
        nlohmann::json fj;
        fj["best_epoch"] = f.best_epoch;
        fj["epochs_run"] = f.epochs_run;
        fj["best_score"] = f.best_score;
        fj["class_weights"] = {f.class_weights_used.first, f.class_weights_used.second};
        fj["report"] = nlohmann::json::parse(f.val_report.to_json());
        j["folds"].push_back(std::move(fj));
    }
    nlohmann::json agg;
    for (const auto& [key, a] : aggregate) agg[key] = {{"mean", a.mean}, {"std", a.stddev}};
    j["aggregate"] = std::move(agg);
    return j;
}

CvResult run_cv(const ProbeSpec& spec, const std::vector<TrainExample>& examples, int k,
                const TrainConfig& cfg, const std::optional<std::filesystem::path>& out_dir) {
    cfg.validate();
    std::vector<int> labels;
    labels.reserve(examples.size());
    for (const auto& ex : examples) labels.push_back(ex.hard_label());
    const auto folds = stratified_kfold(labels, k, derive_seed(cfg.seed, "cv"));

    if (out_dir) std::filesystem::create_directories(*out_dir);

    CvResult result;
    std::vector<MetricsReport> reports;
    for (int i = 0; i < k; ++i) {
        std::vector<bool> in_val(examples.size(), false);
        for (const std::size_t idx : folds[static_cast<std::size_t>(i)]) in_val[idx] = true;
        std::vector<TrainExample> train, val;
        for (std::size_t idx = 0; idx < examples.size(); ++idx)
            (in_val[idx] ? val : train).push_back(examples[idx]);

        TrainConfig fold_cfg = cfg;
        fold_cfg.seed = derive_seed(cfg.seed, "fold-" + std::to_string(i));
        FoldResult fr = train_fold(spec, train, val, fold_cfg);
        reports.push_back(fr.val_report);

        if (out_dir) {
            std::ofstream hist(*out_dir / ("history_fold" + std::to_string(i) + ".jsonl"));
            for (const auto& e : fr.history) hist << e.to_json().dump() << "\n";
            nlohmann::json extra = {{"fold", i},
                                    {"best_epoch", fr.best_epoch},
                                    {"best_score", fr.best_score},
                                    {"train_config_hash", cfg.config_hash()}};
            save_checkpoint(*out_dir / ("fold" + std::to_string(i) + ".ckpt"), fr.best_model,
                            extra);
        }
        result.folds.push_back(std::move(fr));
    }
    result.aggregate = aggregate_reports(reports);

    if (out_dir) {
        nlohmann::json config_snapshot = {{"train", cfg.to_json()},
                                          {"probe", spec.to_json()},
                                          {"folds", k},
                                          {"config_hash", cfg.config_hash()}};
        std::ofstream(*out_dir / "config.json") << config_snapshot.dump(2) << "\n";
        std::ofstream(*out_dir / "cv_summary.json") << result.summary_json().dump(2) << "\n";
    }
    return result;
}

}  // namespace hsprobe
