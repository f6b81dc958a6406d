#include "chordchurn/report.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <system_error>

namespace chordchurn {

namespace fs = std::filesystem;

void write_file_atomic(const fs::path& path, const std::string& content)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string());
        out << content;
        out.flush();
        if (!out) {
            out.close();
            std::error_code ignored;
            fs::remove(tmp, ignored);
            throw std::runtime_error("write failed: " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

namespace {

std::string num(double v)
{
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

std::string short_num(double v)
{
    std::ostringstream s;
    s << v;
    return s.str();
}

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

} // namespace

std::string rows_csv(const std::vector<ComparisonRow>& rows)
{
    std::ostringstream out;
    out << kRowsHeader << '\n';
    for (const auto& r : rows) {
        out << num(r.r) << ',' << num(r.alpha) << ',' << r.n0 << ',' << r.bits << ',' << r.metric << ',';
        if (r.k) out << *r.k;
        out << ',' << num(r.theory) << ',' << num(r.sim_mean) << ',' << num(r.sim_stderr) << ','
            << num(r.rel_error) << '\n';
    }
    return out.str();
}

nlohmann::json rows_json(const std::vector<ComparisonRow>& rows)
{
    auto arr = nlohmann::json::array();
    for (const auto& r : rows) {
        arr.push_back({{"r", r.r},
                       {"alpha", r.alpha},
                       {"n0", r.n0},
                       {"bits", r.bits},
                       {"metric", r.metric},
                       {"k", r.k ? nlohmann::json(*r.k) : nlohmann::json(nullptr)},
                       {"theory", finite_or_null(r.theory)},
                       {"sim_mean", finite_or_null(r.sim_mean)},
                       {"sim_stderr", finite_or_null(r.sim_stderr)},
                       {"rel_error", finite_or_null(r.rel_error)}});
    }
    return arr;
}

nlohmann::json report_json(const SweepResult& sweep, const Report& report)
{
    nlohmann::json metrics = nlohmann::json::array();
    for (const auto& m : report.metrics)
        metrics.push_back({{"metric", m.metric},
                           {"rows", m.rows},
                           {"worst_rel_error", finite_or_null(m.worst)},
                           {"median_rel_error", finite_or_null(m.median)}});

    nlohmann::json degraded = nlohmann::json::array();
    for (const auto& pt : sweep.points) {
        if (!pt.degraded()) continue;
        nlohmann::json reasons = nlohmann::json::array();
        for (const auto& rep : pt.replicates)
            if (rep.aborted) reasons.push_back({{"seed", rep.seed}, {"reason", rep.abort_reason}});
        degraded.push_back({{"r", pt.r}, {"alpha", pt.alpha}, {"aborted", reasons}});
    }

    const auto& s = sweep.spec;
    return {{"spec",
             {{"r", s.r},
              {"alpha", s.alpha},
              {"n0", s.n0},
              {"bits", s.bits},
              {"successors", s.successors},
              {"replicates", s.replicates},
              {"base_seed", s.base_seed}}},
            {"rows", rows_json(sweep.rows)},
            {"summary", {{"metrics", metrics}, {"flagged", report.flagged}, {"degraded", degraded}}}};
}

nlohmann::json theory_json(const TheoryPoint& tp)
{
    nlohmann::json share = nlohmann::json::array();
    for (const auto& row : tp.p_share) share.push_back(row);
    return {{"n", tp.params.n},
            {"bits", tp.params.bits},
            {"alpha", tp.params.alpha},
            {"r", tp.params.r},
            {"successors", tp.params.successors},
            {"rho", tp.rho},
            {"w1", tp.w1},
            {"d1", tp.d1},
            {"I", tp.inconsistency},
            {"f", tp.f},
            {"p_join", tp.p_join},
            {"p_share", share},
            {"C1", tp.c1},
            {"L", tp.L}};
}

std::string theory_csv(const TheoryPoint& tp)
{
    std::ostringstream out;
    out << "metric,k,value\n";
    out << "rho,," << num(tp.rho) << '\n';
    out << "w1,," << num(tp.w1) << '\n';
    out << "d1,," << num(tp.d1) << '\n';
    out << "I,," << num(tp.inconsistency) << '\n';
    for (std::size_t k = 0; k < tp.f.size(); ++k) out << "f," << k + 1 << ',' << num(tp.f[k]) << '\n';
    for (std::size_t k = 0; k < tp.p_join.size(); ++k) out << "p_join," << k + 1 << ',' << num(tp.p_join[k]) << '\n';
    for (std::size_t k = 0; k < tp.p_share.size(); ++k)
        for (int j = 0; j < kShareOrders; ++j)
            out << 'p' << j + 1 << ',' << k + 1 << ',' << num(tp.p_share[k][j]) << '\n';
    out << "C1,," << num(tp.c1) << '\n';
    out << "L,," << num(tp.L) << '\n';
    return out.str();
}

std::string samples_csv(const std::vector<MetricsSample>& samples)
{
    std::ostringstream out;
    out << "time,events,n,w1,d1,inconsistency,cost,probes,failed_probes";
    const std::size_t m = samples.empty() ? 0 : samples.front().f.size();
    for (std::size_t k = 1; k <= m; ++k) out << ",f" << k;
    out << '\n';
    for (const auto& s : samples) {
        out << num(s.time) << ',' << s.events << ',' << s.n_now << ',' << num(s.w1) << ',' << num(s.d1) << ','
            << num(s.probe_inconsistency) << ',' << num(s.probe_cost_mean) << ',' << s.probes << ','
            << s.failed_probes;
        for (double f : s.f) out << ',' << num(f);
        out << '\n';
    }
    return out.str();
}

nlohmann::json run_summary_json(const SimConfig& cfg, const RunResult& run)
{
    const ReplicateSummary s = summarize_run(run, cfg.bits);
    return {{"config",
             {{"n0", cfg.n0},
              {"bits", cfg.bits},
              {"successors", cfg.successors},
              {"r", cfg.r},
              {"alpha", cfg.alpha},
              {"seed", cfg.seed},
              {"burnin_events", cfg.burnin()},
              {"measure_events", cfg.measure()},
              {"probe_lookups_per_sample", cfg.probe_lookups_per_sample}}},
            {"samples", s.samples},
            {"final_n", run.final_n},
            {"events",
             {{"joins", run.counts.joins},
              {"failed_joins", run.counts.failed_joins},
              {"fails", run.counts.fails},
              {"successor_stabilizations", run.counts.successor_stabilizations},
              {"finger_stabilizations", run.counts.finger_stabilizations}}},
            {"mean",
             {{"w1", s.w1},
              {"d1", s.d1},
              {"I", s.inconsistency},
              {"cost", s.cost},
              {"f", s.f},
              {"probes", s.probes},
              {"failed_probes", s.failed_probes}}}};
}

std::vector<fs::path> write_plot_data(const fs::path& dir, const std::vector<ComparisonRow>& rows)
{
    // file name -> lines, in row order
    std::map<std::string, std::ostringstream> files;
    for (const auto& r : rows) {
        std::string name;
        double x = 0;
        if (r.k) {
            name = r.metric + "_r" + short_num(r.r) + "_a" + short_num(r.alpha) + ".dat";
            x = *r.k;
        } else {
            name = r.metric + "_a" + short_num(r.alpha) + ".dat";
            x = r.r;
        }
        auto& out = files[name];
        if (out.tellp() == 0) out << "# " << (r.k ? "k" : "r") << " theory sim_mean sim_stderr\n";
        out << num(x) << ' ' << num(r.theory) << ' ' << num(r.sim_mean) << ' ' << num(r.sim_stderr) << '\n';
    }
    std::vector<fs::path> written;
    for (auto& [name, body] : files) {
        write_file_atomic(dir / name, body.str());
        written.push_back(dir / name);
    }
    return written;
}

} // namespace chordchurn
