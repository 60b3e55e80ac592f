#include "hsprobe/bench.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <new>
#include <numeric>
#include <sstream>
#include <thread>

namespace hsprobe {

namespace {

using Clock = std::chrono::steady_clock;

double ms_between(Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double, std::milli>(b - a).count();
}

double median(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

std::pair<double, double> mean_std(const std::vector<double>& xs) {
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    if (xs.size() < 2) return {mean, 0.0};
    double var = 0.0;
    for (const double x : xs) var += (x - mean) * (x - mean);
    return {mean, std::sqrt(var / static_cast<double>(xs.size() - 1))};
}

nlohmann::json opt_json(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

std::vector<double> ProbeScorer::score_batch(const std::vector<HiddenStateTensor>& batch) {
    return probe_forward_batch(model_, batch);
}

std::size_t ProbeScorer::model_bytes() const {
    return model_.parameter_count() * sizeof(double);
}

std::vector<double> SleepScorer::score_batch(const std::vector<HiddenStateTensor>& batch) {
    std::this_thread::sleep_for(per_call_);
    return std::vector<double>(batch.size(), 0.5);
}

Generation DelayedGenerationBackend::generate(const std::string& context,
                                              const std::string& question) {
    std::this_thread::sleep_for(delay_);
    return inner_.generate(context, question);
}

nlohmann::json BatchTiming::to_json() const {
    if (!supported) return {{"batch_size", batch_size}, {"supported", false},
                            {"median_ms", nullptr},     {"batch_latency_ms", nullptr},
                            {"mean_ms", nullptr},       {"std_ms", nullptr},
                            {"cov", nullptr},           {"samples_per_s", nullptr}};
    return {{"batch_size", batch_size}, {"supported", true},
            {"median_ms", median_ms},   {"batch_latency_ms", batch_latency_ms},
            {"mean_ms", mean_ms},       {"std_ms", std_ms},
            {"cov", cov},               {"samples_per_s", samples_per_s}};
}

nlohmann::json BenchReport::to_json() const {
    nlohmann::json b = nlohmann::json::array();
    for (const auto& t : batches) b.push_back(t.to_json());
    return {{"name", name},
            {"reps", reps},
            {"batches", std::move(b)},
            {"single_latency_ms", opt_json(single_latency_ms)},
            {"samples_per_s", opt_json(samples_per_s)},
            {"model_memory_mb", opt_json(model_memory_mb)},
            {"peak_memory_mb", opt_json(peak_memory_mb)},
            {"outputs_deterministic",
             outputs_deterministic ? nlohmann::json(*outputs_deterministic)
                                   : nlohmann::json(nullptr)},
            {"generation_s_mean", opt_json(generation_s_mean)},
            {"generation_s_std", opt_json(generation_s_std)},
            {"transfer_ms", opt_json(transfer_ms)},
            {"probe_ms", opt_json(probe_ms)},
            {"total_s", opt_json(total_s)},
            {"queries_per_s", opt_json(queries_per_s)},
            {"mean_predicted_probability", opt_json(mean_predicted_probability)}};
}

BenchReport bench_probe_only(Scorer& scorer, const std::vector<HiddenStateTensor>& inputs,
                             const std::vector<int>& batch_sizes, int warmup, int reps) {
    if (warmup < 1) throw ConfigError("bench_probe_only: warmup must be >= 1");
    if (reps < 1) throw ConfigError("bench_probe_only: reps must be >= 1");
    if (inputs.empty()) throw ConfigError("bench_probe_only: no inputs");
    if (batch_sizes.empty()) throw ConfigError("bench_probe_only: no batch sizes");
    for (const int b : batch_sizes)
        if (b < 1) throw ConfigError("bench_probe_only: batch sizes must be >= 1");

    const auto time_batch = [&](int b) {
        std::vector<HiddenStateTensor> batch;
        batch.reserve(static_cast<std::size_t>(b));
        for (int i = 0; i < b; ++i) batch.push_back(inputs[i % inputs.size()]);
        for (int i = 0; i < warmup; ++i) scorer.score_batch(batch);
        std::vector<double> ms;
        ms.reserve(static_cast<std::size_t>(reps));
        for (int i = 0; i < reps; ++i) {
            const auto t0 = Clock::now();
            scorer.score_batch(batch);
            ms.push_back(ms_between(t0, Clock::now()));
        }
        return ms;
    };

    BenchReport report;
    report.name = scorer.name();
    report.reps = reps;

    report.single_latency_ms = median(time_batch(1));

    const std::vector<HiddenStateTensor> probe_input{inputs.front()};
    report.outputs_deterministic =
        scorer.score_batch(probe_input) == scorer.score_batch(probe_input);

    double best_throughput = 0.0;
    for (const int b : batch_sizes) {
        BatchTiming t;
        t.batch_size = b;
        try {
            const std::vector<double> ms = time_batch(b);
            t.median_ms = median(ms);
            t.batch_latency_ms = t.median_ms / b;
            std::tie(t.mean_ms, t.std_ms) = mean_std(ms);
            t.cov = t.mean_ms > 0.0 ? t.std_ms / t.mean_ms : 0.0;
            t.samples_per_s = t.median_ms > 0.0 ? b * 1000.0 / t.median_ms : 0.0;
            best_throughput = std::max(best_throughput, t.samples_per_s);
        } catch (const std::bad_alloc&) {
            t.supported = false;
        }
        report.batches.push_back(t);
    }
    if (best_throughput > 0.0) report.samples_per_s = best_throughput;

    report.model_memory_mb = static_cast<double>(scorer.model_bytes()) / (1024.0 * 1024.0);
    report.peak_memory_mb = peak_rss_mb();
    return report;
}

BenchReport bench_end_to_end(GenerationBackend& backend, Scorer& scorer,
                             const ShapeConfig& shape, const std::vector<SourceItem>& queries) {
    if (queries.empty()) throw ConfigError("bench_end_to_end: no queries");

    std::vector<double> gen_s, transfer_ms_each, probe_ms_each, probs;
    const auto start = Clock::now();
    for (const auto& q : queries) {
        const auto t0 = Clock::now();
        const Generation gen = backend.generate(q.context, q.question);
        const auto t1 = Clock::now();
        const HiddenStateTensor tensor = pad_or_truncate(gen.hidden, shape);
        const auto t2 = Clock::now();
        const double p = scorer.score_batch({tensor}).front();
        const auto t3 = Clock::now();
        gen_s.push_back(ms_between(t0, t1) / 1000.0);
        transfer_ms_each.push_back(ms_between(t1, t2));
        probe_ms_each.push_back(ms_between(t2, t3));
        probs.push_back(p);
    }
    const double total_s = ms_between(start, Clock::now()) / 1000.0;

    BenchReport report;
    report.name = scorer.name();
    report.reps = static_cast<int>(queries.size());
    const auto [gen_mean, gen_std] = mean_std(gen_s);
    report.generation_s_mean = gen_mean;
    report.generation_s_std = gen_std;
    report.transfer_ms = mean_std(transfer_ms_each).first;
    report.probe_ms = mean_std(probe_ms_each).first;
    report.total_s = total_s;
    report.queries_per_s = static_cast<double>(queries.size()) / total_s;
    report.mean_predicted_probability = mean_std(probs).first;
    return report;
}

BenchLock::BenchLock(const std::filesystem::path& path) : path_(path) {
    const int fd = ::open(path.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        if (errno == EEXIST)
            throw ConfigError("bench lock: another instance holds " + path.string());
        throw ConfigError("bench lock: cannot create " + path.string() + ": " +
                          std::strerror(errno));
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
}

BenchLock::~BenchLock() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
}

std::optional<double> peak_rss_mb() {
    std::ifstream in("/proc/self/status");
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("VmHWM:", 0) != 0) continue;
        std::istringstream fields(line.substr(6));
        double kb = 0.0;
        fields >> kb;
        return kb / 1024.0;
    }
    return std::nullopt;
}

std::string format_bench_table(const std::vector<BenchReport>& reports) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(3);
    const auto cell = [&](const std::optional<double>& v) -> std::string {
        if (!v) return "n/a";
        std::ostringstream c;
        c << std::fixed << std::setprecision(3) << *v;
        return c.str();
    };

    bool probe_section = false;
    for (const auto& r : reports) {
        if (!r.single_latency_ms) continue;
        if (!probe_section) {
            out << std::left << std::setw(10) << "family" << std::right << std::setw(12)
                << "single_ms" << std::setw(12) << "batch_ms" << std::setw(14) << "samples_per_s"
                << std::setw(12) << "model_mb" << std::setw(12) << "peak_mb" << "\n";
            probe_section = true;
        }
        std::optional<double> best;
        for (const auto& t : r.batches)
            if (t.supported && (!best || t.batch_latency_ms < *best)) best = t.batch_latency_ms;
        out << std::left << std::setw(10) << r.name << std::right << std::setw(12)
            << cell(r.single_latency_ms) << std::setw(12) << cell(best) << std::setw(14)
            << cell(r.samples_per_s) << std::setw(12) << cell(r.model_memory_mb) << std::setw(12)
            << cell(r.peak_memory_mb) << "\n";
    }

    bool e2e_section = false;
    for (const auto& r : reports) {
        if (!r.total_s) continue;
        if (!e2e_section) {
            if (probe_section) out << "\n";
            out << std::left << std::setw(10) << "family" << std::right << std::setw(14)
                << "generation_s" << std::setw(12) << "probe_ms" << std::setw(12) << "total_s"
                << std::setw(14) << "queries_per_s" << std::setw(12) << "avg_prob" << "\n";
            e2e_section = true;
        }
        out << std::left << std::setw(10) << r.name << std::right << std::setw(14)
            << cell(r.generation_s_mean) << std::setw(12) << cell(r.probe_ms) << std::setw(12)
            << cell(r.total_s) << std::setw(14) << cell(r.queries_per_s) << std::setw(12)
            << cell(r.mean_predicted_probability) << "\n";
    }
    return out.str();
}

}  // namespace hsprobe
