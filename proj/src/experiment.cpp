#include "chordchurn/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace chordchurn {

void set_parallelism(int jobs)
{
#ifdef _OPENMP
    if (jobs > 0) omp_set_num_threads(jobs);
#else
    (void)jobs;
#endif
}

int parallelism()
{
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void SweepSpec::validate() const
{
    if (r.empty() || alpha.empty()) throw std::invalid_argument("sweep grid must not be empty");
    if (replicates < 1) throw std::invalid_argument("replicates must be >= 1");
    for (double rv : r)
        for (double av : alpha) sim_config(rv, av, 0).validate();
}

SimConfig SweepSpec::sim_config(double rv, double av, int replicate) const
{
    SimConfig c;
    c.n0 = n0;
    c.bits = bits;
    c.successors = successors;
    c.r = rv;
    c.alpha = av;
    c.seed = base_seed + static_cast<std::uint64_t>(replicate);
    c.burnin_events = burnin_events;
    c.measure_events = measure_events;
    c.probe_lookups_per_sample = probe_lookups_per_sample;
    return c;
}

ChurnParams SweepSpec::churn_params(double rv, double av) const
{
    ChurnParams p;
    p.n = static_cast<double>(n0);
    p.bits = bits;
    p.alpha = av;
    p.r = rv;
    p.successors = successors;
    return p;
}

ReplicateSummary summarize_run(const RunResult& run, int fingers)
{
    ReplicateSummary s;
    s.samples = run.samples.size();
    s.f.assign(fingers, 0.0);
    s.final_gaps = run.final_gaps;
    s.final_n = run.final_n;
    if (run.samples.empty()) return s;
    for (const auto& m : run.samples) {
        s.w1 += m.w1;
        s.d1 += m.d1;
        s.inconsistency += m.probe_inconsistency;
        s.cost += m.probe_cost_mean;
        s.probes += m.probes;
        s.failed_probes += m.failed_probes;
        for (int k = 0; k < fingers; ++k) s.f[k] += m.f[k];
    }
    const double n = static_cast<double>(run.samples.size());
    s.w1 /= n;
    s.d1 /= n;
    s.inconsistency /= n;
    s.cost /= n;
    for (auto& v : s.f) v /= n;
    return s;
}

bool PointResult::degraded() const
{
    return std::any_of(replicates.begin(), replicates.end(), [](const auto& r) { return r.aborted; });
}

double relative_error(double sim, double theory) { return std::abs(sim - theory) / std::max(theory, 1e-12); }

Pooled pool(const std::vector<double>& values)
{
    Pooled p;
    p.n = values.size();
    if (values.empty()) {
        p.mean = std::nan("");
        p.stderr_ = std::nan("");
        return p;
    }
    p.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(p.n);
    if (p.n > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - p.mean) * (v - p.mean);
        p.stderr_ = std::sqrt(ss / static_cast<double>(p.n - 1) / static_cast<double>(p.n));
    }
    return p;
}

std::vector<ComparisonRow> compare_point(const SweepSpec& spec, const PointResult& point)
{
    std::vector<ComparisonRow> rows;
    auto collect = [&](auto&& get) {
        std::vector<double> v;
        for (const auto& rep : point.replicates)
            if (!rep.aborted) v.push_back(get(rep));
        return pool(v);
    };
    auto add = [&](const std::string& metric, std::optional<int> k, double theory, const Pooled& sim) {
        ComparisonRow row;
        row.r = point.r;
        row.alpha = point.alpha;
        row.n0 = spec.n0;
        row.bits = spec.bits;
        row.metric = metric;
        row.k = k;
        row.theory = theory;
        row.sim_mean = sim.mean;
        row.sim_stderr = sim.stderr_;
        row.rel_error = relative_error(sim.mean, theory);
        rows.push_back(row);
    };
    const TheoryPoint& tp = point.theory;
    add("w1", std::nullopt, tp.w1, collect([](const auto& r) { return r.w1; }));
    add("d1", std::nullopt, tp.d1, collect([](const auto& r) { return r.d1; }));
    add("I", std::nullopt, tp.inconsistency, collect([](const auto& r) { return r.inconsistency; }));
    for (int k = 1; k <= spec.bits; ++k)
        add("f", k, tp.f[k - 1], collect([k](const auto& r) { return r.f[k - 1]; }));
    add("L", std::nullopt, tp.L, collect([](const auto& r) { return r.cost; }));
    return rows;
}

SweepResult run_sweep(const SweepSpec& spec, Exec exec, const Progress& progress)
{
    spec.validate();
    SweepResult out;
    out.spec = spec;
    for (double rv : spec.r) {
        for (double av : spec.alpha) {
            PointResult pt;
            pt.r = rv;
            pt.alpha = av;
            pt.theory = compute_theory(spec.churn_params(rv, av));
            pt.replicates.resize(spec.replicates);
            out.points.push_back(std::move(pt));
        }
    }

    const std::size_t reps = static_cast<std::size_t>(spec.replicates);
    const std::size_t total = out.points.size() * reps;
    std::size_t done = 0;

    auto task = [&](std::size_t idx) {
        PointResult& pt = out.points[idx / reps];
        const int rep = static_cast<int>(idx % reps);
        const SimConfig cfg = spec.sim_config(pt.r, pt.alpha, rep);
        ReplicateSummary s;
        try {
            s = summarize_run(Simulation(cfg).run(), spec.bits);
        } catch (const SimulationAborted& e) {
            s = ReplicateSummary{};
            s.aborted = true;
            s.abort_reason = e.what();
        }
        s.seed = cfg.seed;
        pt.replicates[rep] = std::move(s);
        if (progress) {
#pragma omp critical(chordchurn_progress)
            progress(++done, total, pt, rep);
        }
    };

    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 1)
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(total); ++i) task(static_cast<std::size_t>(i));
    } else {
        for (std::size_t i = 0; i < total; ++i) task(i);
    }

    for (const auto& pt : out.points) {
        auto rows = compare_point(spec, pt);
        out.rows.insert(out.rows.end(), rows.begin(), rows.end());
    }
    return out;
}

std::map<std::string, Tolerance> default_tolerances()
{
    return {
        {"w1", {0.15, 0.0}},
        {"d1", {0.20, 0.0}},
        {"I", {0.20, 0.0}},
        {"f", {0.20, 0.002}},
        {"L", {0.10, 0.0}},
    };
}

Report summarize(const std::vector<ComparisonRow>& rows, const std::map<std::string, Tolerance>& tolerances)
{
    Report rep;
    std::map<std::string, std::vector<double>> errors;
    std::vector<std::string> order;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (!errors.contains(row.metric)) order.push_back(row.metric);
        errors[row.metric].push_back(row.rel_error);
        auto tol = tolerances.find(row.metric);
        if (tol == tolerances.end()) continue;
        if (row.theory < tol->second.min_theory) continue;
        if (!(row.rel_error <= tol->second.rel)) rep.flagged.push_back(i);
    }
    for (const auto& metric : order) {
        auto v = errors[metric];
        std::sort(v.begin(), v.end());
        MetricSummary m;
        m.metric = metric;
        m.rows = v.size();
        m.worst = v.back();
        m.median = v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
        rep.metrics.push_back(m);
    }
    return rep;
}

namespace {

// Survival function of the Kolmogorov distribution.
double kolmogorov_q(double lambda)
{
    if (lambda < 1e-3) return 1.0;
    double sum = 0.0, sign = 1.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = sign * std::exp(-2.0 * j * j * lambda * lambda);
        sum += term;
        if (std::abs(term) < 1e-12) break;
        sign = -sign;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

} // namespace

KsResult ks_geometric(const std::vector<GapSnapshot>& snapshots, std::uint64_t key_space)
{
    std::vector<std::uint64_t> all;
    for (const auto& s : snapshots) all.insert(all.end(), s.gaps.begin(), s.gaps.end());
    if (all.empty()) throw std::invalid_argument("no gaps to test");
    std::sort(all.begin(), all.end());
    const double n = static_cast<double>(all.size());
    const double K = static_cast<double>(key_space);

    auto model_cdf = [&](double x) { // P(gap <= x), mixed over snapshots
        double F = 0.0;
        for (const auto& s : snapshots) {
            const double rho = (K - static_cast<double>(s.n)) / K;
            F += static_cast<double>(s.gaps.size()) * -std::expm1(x * std::log(rho));
        }
        return F / n;
    };

    double d = 0.0;
    for (std::size_t i = 0; i < all.size();) {
        std::size_t j = i;
        while (j < all.size() && all[j] == all[i]) ++j;
        const double x = static_cast<double>(all[i]);
        const double below = static_cast<double>(i) / n; // empirical P(gap <= x - 1)
        const double at = static_cast<double>(j) / n;    // empirical P(gap <= x)
        d = std::max({d, std::abs(at - model_cdf(x)), std::abs(below - model_cdf(x - 1))});
        i = j;
    }
    KsResult res;
    res.statistic = d;
    res.samples = all.size();
    const double sn = std::sqrt(n);
    res.p_value = kolmogorov_q((sn + 0.12 + 0.11 / sn) * d);
    return res;
}

} // namespace chordchurn
