#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hsprobe/metrics.hpp"
#include "hsprobe/probes.hpp"
#include "hsprobe/record.hpp"
#include "hsprobe/tensor.hpp"

#include <nlohmann/json.hpp>

namespace hsprobe {

struct TrainConfig {
    int batch_size = 8;
    double learning_rate = 2e-4;
    double weight_decay = 0.01;
    int epochs = 30;
    int patience = 3;
    double grad_clip_norm = 1.0;
    double label_smoothing = 0.05;
    double warmup_fraction = 0.1;     // of total optimizer steps
    double alpha = 1.0;               // soft-label blend: alpha*judge + (1-alpha)*hybrid
    std::uint64_t seed = 0;
    std::string early_stop_metric = "auc";  // "auc" or "f1"

    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
    /// FNV-1a over the canonical JSON dump; stamped into checkpoints.
    std::uint64_t config_hash() const;
};

/// y(1-eps) + 0.5*eps; accepts soft targets in [0,1].
double smooth(double y, double eps);

/// -[w1*y_s*log(p) + w0*(1-y_s)*log(1-p)], p clamped to [1e-7, 1-1e-7].
double weighted_bce(double p, double y_s, double w0, double w1);

/// Linear ramp 0 -> eta over warmup_steps, then cosine decay eta -> 0.
double lr_schedule(int step, int total_steps, int warmup_steps, double eta);

/// One labeled sample as the trainer consumes it. soft_label is the
/// alpha-blended target before smoothing; the hard class is soft >= 0.5.
struct TrainExample {
    HiddenStateTensor hidden;
    double soft_label = 0.0;

    int hard_label() const { return soft_label >= 0.5 ? 1 : 0; }
};

/// Examples from bundled labels: soft = alpha*judge + (1-alpha)*hybrid.
std::vector<TrainExample> make_examples(const std::vector<SampleRecord>& records, double alpha);

/// AdamW with decoupled weight decay. Moments are keyed by parameter name
/// and follow the standard bias-corrected update; decay applies to every
/// parameter.
class AdamW {
public:
    AdamW(double weight_decay, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void step(std::map<std::string, MatX<double>>& params,
              const std::map<std::string, MatX<double>>& grads, double lr);
    int steps_taken() const { return t_; }

private:
    double weight_decay_, beta1_, beta2_, eps_;
    int t_ = 0;
    std::map<std::string, MatX<double>> m_, v_;
};

double global_grad_norm(const std::map<std::string, MatX<double>>& grads);
/// Scales grads in place so the global norm is at most max_norm.
void clip_global_norm(std::map<std::string, MatX<double>>& grads, double max_norm);

struct EpochStats {
    int epoch = 0;            // 1-based
    double train_loss = 0.0;  // mean over the epoch's samples
    double val_score = 0.0;   // early-stop metric on the validation split
    double lr_last = 0.0;     // learning rate of the epoch's final step
    bool improved = false;

    nlohmann::json to_json() const;
};

struct FoldResult {
    ProbeModel best_model;
    double best_score = 0.0;
    int best_epoch = 0;   // 1-based epoch that produced best_model
    int epochs_run = 0;
    std::vector<EpochStats> history;
    MetricsReport val_report;                      // best model on the validation split
    std::pair<double, double> class_weights_used;  // (w0, w1) from the training split
};

/// Trains one probe: class weights from the training split only, smoothed
/// soft targets, AdamW + warmup/cosine schedule + global-norm clipping,
/// early stopping on the validation score with the configured patience.
/// Deterministic given cfg.seed. Throws ConfigError on an empty split and
/// TrainingError when the loss turns non-finite.
FoldResult train_fold(const ProbeSpec& spec, const std::vector<TrainExample>& train,
                      const std::vector<TrainExample>& val, const TrainConfig& cfg);

struct Aggregate {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation (n-1); 0 for a single fold
};

/// Field-wise mean and sample std across fold reports.
std::map<std::string, Aggregate> aggregate_reports(const std::vector<MetricsReport>& reports);

struct CvResult {
    std::vector<FoldResult> folds;
    std::map<std::string, Aggregate> aggregate;

    nlohmann::json summary_json() const;
};

/// Stratified k-fold cross-validation over the examples' hard labels. Each
/// fold trains a fresh model seeded from cfg.seed and the fold index. When
/// out_dir is given, writes config.json, history_fold<i>.jsonl,
/// fold<i>.ckpt, and cv_summary.json.
CvResult run_cv(const ProbeSpec& spec, const std::vector<TrainExample>& examples, int k,
                const TrainConfig& cfg,
                const std::optional<std::filesystem::path>& out_dir = std::nullopt);

}  // namespace hsprobe
