#pragma once

#include "chordchurn/analytics.hpp"
#include "chordchurn/execution.hpp"
#include "chordchurn/simulator.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace chordchurn {

struct SweepSpec {
    std::vector<double> r{500};
    std::vector<double> alpha{0.5};
    std::uint64_t n0 = 1000;
    int bits = 20;
    int successors = 6;
    int replicates = 10;
    std::uint64_t base_seed = 1;
    std::optional<std::uint64_t> burnin_events;
    std::optional<std::uint64_t> measure_events;
    int probe_lookups_per_sample = 100;

    void validate() const;
    SimConfig sim_config(double r, double alpha, int replicate) const;
    ChurnParams churn_params(double r, double alpha) const;
};

// Post-burn-in time averages of one run.
struct ReplicateSummary {
    std::uint64_t seed = 0;
    bool aborted = false;
    std::string abort_reason;
    std::size_t samples = 0;
    double w1 = 0;
    double d1 = 0;
    double inconsistency = 0;
    double cost = 0;
    std::vector<double> f;
    std::uint64_t probes = 0;
    std::uint64_t failed_probes = 0;
    std::vector<std::uint64_t> final_gaps;
    std::size_t final_n = 0;
};

ReplicateSummary summarize_run(const RunResult& run, int fingers);

struct PointResult {
    double r = 0;
    double alpha = 0;
    TheoryPoint theory;
    std::vector<ReplicateSummary> replicates;

    bool degraded() const;
};

struct ComparisonRow {
    double r = 0;
    double alpha = 0;
    std::uint64_t n0 = 0;
    int bits = 0;
    std::string metric; // w1 | d1 | I | f | L
    std::optional<int> k;
    double theory = 0;
    double sim_mean = 0;
    double sim_stderr = 0;
    double rel_error = 0;
};

double relative_error(double sim, double theory);

// Mean and standard error over the non-aborted replicates.
struct Pooled {
    double mean = 0;
    double stderr_ = 0;
    std::size_t n = 0;
};
Pooled pool(const std::vector<double>& values);

std::vector<ComparisonRow> compare_point(const SweepSpec& spec, const PointResult& point);

struct SweepResult {
    SweepSpec spec;
    std::vector<PointResult> points; // grid order: r outer, alpha inner
    std::vector<ComparisonRow> rows;
};

// Called once per finished replicate; calls are serialized.
using Progress = std::function<void(std::size_t done, std::size_t total, const PointResult&, int replicate)>;

SweepResult run_sweep(const SweepSpec& spec, Exec exec = Exec::Parallel, const Progress& progress = {});

struct Tolerance {
    double rel = 0;
    double min_theory = 0; // rows whose theory value is below this are not flagged
};

std::map<std::string, Tolerance> default_tolerances();

struct MetricSummary {
    std::string metric;
    std::size_t rows = 0;
    double worst = 0;
    double median = 0;
};

struct Report {
    std::vector<MetricSummary> metrics;
    std::vector<std::size_t> flagged; // indices into the rows
};

Report summarize(const std::vector<ComparisonRow>& rows,
                 const std::map<std::string, Tolerance>& tolerances = default_tolerances());

// Kolmogorov-Smirnov comparison of pooled inter-node distances against the
// geometric law, each snapshot with rho = (K - n) / K for its own node count.
struct GapSnapshot {
    std::vector<std::uint64_t> gaps;
    std::size_t n = 0;
};

struct KsResult {
    double statistic = 0;
    double p_value = 0;
    std::size_t samples = 0;
};

KsResult ks_geometric(const std::vector<GapSnapshot>& snapshots, std::uint64_t key_space);

} // namespace chordchurn
