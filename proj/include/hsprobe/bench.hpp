#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hsprobe/dataset.hpp"
#include "hsprobe/probes.hpp"

#include <nlohmann/json.hpp>

namespace hsprobe {

/// Anything that maps a batch of tensors to hallucination probabilities.
/// Implementations must be eval-mode deterministic.
class Scorer {
public:
    virtual ~Scorer() = default;
    virtual std::string name() const = 0;
    virtual std::vector<double> score_batch(const std::vector<HiddenStateTensor>& batch) = 0;
    /// Resident parameter bytes; 0 when the scorer owns no model.
    virtual std::size_t model_bytes() const { return 0; }
};

class ProbeScorer final : public Scorer {
public:
    explicit ProbeScorer(ProbeModel model) : model_(std::move(model)) {}
    std::string name() const override { return to_string(model_.spec.family); }
    std::vector<double> score_batch(const std::vector<HiddenStateTensor>& batch) override;
    std::size_t model_bytes() const override;
    const ProbeModel& model() const { return model_; }

private:
    ProbeModel model_;
};

/// Fixed-cost stand-in: sleeps once per call, scores everything 0.5. Gives
/// benchmark plumbing a known latency floor.
class SleepScorer final : public Scorer {
public:
    SleepScorer(std::string name, std::chrono::microseconds per_call)
        : name_(std::move(name)), per_call_(per_call) {}
    std::string name() const override { return name_; }
    std::vector<double> score_batch(const std::vector<HiddenStateTensor>& batch) override;

private:
    std::string name_;
    std::chrono::microseconds per_call_;
};

/// Adds a fixed synthetic latency in front of another backend, emulating a
/// slow generator without hosting one.
class DelayedGenerationBackend final : public GenerationBackend {
public:
    DelayedGenerationBackend(GenerationBackend& inner, std::chrono::milliseconds delay)
        : inner_(inner), delay_(delay) {}
    Generation generate(const std::string& context, const std::string& question) override;

private:
    GenerationBackend& inner_;
    std::chrono::milliseconds delay_;
};

struct BatchTiming {
    int batch_size = 0;
    bool supported = true;          // false: allocation failed at this size
    double median_ms = 0.0;         // per batched call, post-warmup median
    double batch_latency_ms = 0.0;  // median_ms / batch_size (amortized)
    double mean_ms = 0.0;
    double std_ms = 0.0;   // sample std over reps
    double cov = 0.0;      // std/mean dispersion of the timings
    double samples_per_s = 0.0;

    nlohmann::json to_json() const;  // unsupported -> null measurements
};

/// One benchmark result. Fields outside the measured regime stay unset and
/// serialize as JSON nulls, never zeros.
struct BenchReport {
    std::string name;
    int reps = 0;

    // Probe-only regime.
    std::vector<BatchTiming> batches;
    std::optional<double> single_latency_ms;
    std::optional<double> samples_per_s;  // best supported batch size
    std::optional<double> model_memory_mb;
    std::optional<double> peak_memory_mb;  // process high-water mark
    std::optional<bool> outputs_deterministic;

    // End-to-end regime.
    std::optional<double> generation_s_mean;
    std::optional<double> generation_s_std;
    std::optional<double> transfer_ms;  // tensor fit/copy per query
    std::optional<double> probe_ms;     // scoring per query
    std::optional<double> total_s;
    std::optional<double> queries_per_s;
    std::optional<double> mean_predicted_probability;

    nlohmann::json to_json() const;
};

/// Times eval-mode scoring on a monotonic clock: single-sample latency plus
/// one amortized measurement per requested batch size (inputs cycle to fill
/// a batch). Warmup calls precede every measurement and are excluded from
/// statistics; medians summarize the reps. A failed allocation marks the
/// batch size unsupported instead of aborting. Requires warmup >= 1.
BenchReport bench_probe_only(Scorer& scorer, const std::vector<HiddenStateTensor>& inputs,
                             const std::vector<int>& batch_sizes, int warmup, int reps);

/// Generation -> fixed-frame fit -> probe scoring per query, with component
/// and wall-clock totals.
BenchReport bench_end_to_end(GenerationBackend& backend, Scorer& scorer,
                             const ShapeConfig& shape, const std::vector<SourceItem>& queries);

/// Exclusive-run guard: creates the lock file with O_CREAT|O_EXCL and
/// removes it on destruction. Construction throws ConfigError while another
/// process holds the file, keeping concurrent load away from the timings.
class BenchLock {
public:
    explicit BenchLock(const std::filesystem::path& path);
    ~BenchLock();
    BenchLock(const BenchLock&) = delete;
    BenchLock& operator=(const BenchLock&) = delete;

private:
    std::filesystem::path path_;
};

/// VmHWM of this process in MB; nullopt where /proc is unavailable.
std::optional<double> peak_rss_mb();

/// Fixed-width text rendering: a latency/throughput/memory section for
/// probe-only reports and a component-time section for end-to-end reports.
std::string format_bench_table(const std::vector<BenchReport>& reports);

}  // namespace hsprobe
