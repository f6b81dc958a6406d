// chordchurn: churn model evaluation, simulation, sweeps and self-checks.
//
//   chordchurn theory   --r 200 --alpha 0.5 --n 1000 --bits 20
//   chordchurn simulate --r 500 --seed 3 > samples.csv
//   chordchurn compare  --r 200,500,1000 --alpha 0.5 --replicates 10 --out results
//   chordchurn validate --quick
//
// Exit codes: 0 ok, 1 failed validation or aborted runs, 2 bad flags.

#include "chordchurn/analytics.hpp"
#include "chordchurn/execution.hpp"
#include "chordchurn/experiment.hpp"
#include "chordchurn/report.hpp"
#include "chordchurn/simulator.hpp"
#include "chordchurn/validation.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace chordchurn;

namespace {

constexpr const char* kOutEnv = "CHORDCHURN_OUT";

struct Flags {
    std::uint64_t n = 1000;
    int bits = 20;
    int successors = 6;
    std::vector<double> r{500};
    std::vector<double> alpha{0.5};
    std::uint64_t seed = 1;
    std::optional<std::uint64_t> burnin;
    std::optional<std::uint64_t> measure;
    int probes = 100;
    int replicates = 10;
    bool paper_scale = false;
    int jobs = 0;
    bool quick = false;
    std::uint64_t samples = 100000;
    std::string out;
    std::string format;
};

class BadFlags : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

void add_model_flags(CLI::App* cmd, Flags& f, bool grid)
{
    cmd->add_option("--n", f.n, "Node count (initial count for simulations)")->check(CLI::PositiveNumber);
    cmd->add_option("--bits", f.bits, "Key bits; the key space has 2^bits keys")->check(CLI::Range(2, 40));
    cmd->add_option("--successors", f.successors, "Successor list length")->check(CLI::Range(1, 1000));
    auto* r = cmd->add_option("--r", f.r, "Stabilization to failure rate ratio")->check(CLI::NonNegativeNumber);
    auto* a = cmd->add_option("--alpha", f.alpha, "Share of stabilizations spent on successors")
                  ->check(CLI::Range(0.0, 1.0));
    if (grid) {
        r->delimiter(',');
        a->delimiter(',');
    } else {
        r->expected(1);
        a->expected(1);
    }
}

void add_sim_flags(CLI::App* cmd, Flags& f)
{
    cmd->add_option("--seed", f.seed, "Random seed (base seed for sweeps)");
    cmd->add_option("--burnin", f.burnin, "Events discarded before measuring");
    cmd->add_option("--measure", f.measure, "Events measured after burn-in")->check(CLI::PositiveNumber);
    cmd->add_option("--probes", f.probes, "Probe lookups per sample")->check(CLI::Range(1, 1000000));
}

void add_output_flags(CLI::App* cmd, Flags& f, const std::string& default_format)
{
    cmd->add_option("--out", f.out, std::string("Output directory (default $") + kOutEnv + ")");
    cmd->add_option("--format", f.format, "Standard output format (default " + default_format + ")")
        ->check(CLI::IsMember({"csv", "json"}));
}

std::optional<fs::path> out_dir(const Flags& f, const char* fallback = nullptr)
{
    if (!f.out.empty()) return fs::path(f.out);
    if (const char* env = std::getenv(kOutEnv); env && *env) return fs::path(env);
    if (fallback) return fs::path(fallback);
    return std::nullopt;
}

ChurnParams churn_params(const Flags& f)
{
    ChurnParams p;
    p.n = static_cast<double>(f.n);
    p.bits = f.bits;
    p.successors = f.successors;
    p.r = f.r.front();
    p.alpha = f.alpha.front();
    return p;
}

SimConfig sim_config(const Flags& f)
{
    SimConfig c;
    c.n0 = f.n;
    c.bits = f.bits;
    c.successors = f.successors;
    c.r = f.r.front();
    c.alpha = f.alpha.front();
    c.seed = f.seed;
    c.burnin_events = f.burnin;
    c.measure_events = f.measure;
    c.probe_lookups_per_sample = f.probes;
    return c;
}

SweepSpec sweep_spec(const Flags& f)
{
    SweepSpec s;
    s.r = f.r;
    s.alpha = f.alpha;
    s.n0 = f.n;
    s.bits = f.bits;
    s.successors = f.successors;
    s.replicates = f.paper_scale ? 100 : f.replicates;
    s.base_seed = f.seed;
    s.burnin_events = f.burnin;
    s.measure_events = f.measure;
    s.probe_lookups_per_sample = f.probes;
    return s;
}

// Re-raises configuration errors as flag errors so they exit with 2 before any work.
template <class F>
auto checked(F&& validate)
{
    try {
        return validate();
    } catch (const std::invalid_argument& e) {
        throw BadFlags(e.what());
    } catch (const std::out_of_range& e) {
        throw BadFlags(e.what());
    } catch (const std::domain_error& e) {
        throw BadFlags(e.what());
    }
}

int cmd_theory(const Flags& f)
{
    const ChurnParams p = churn_params(f);
    checked([&] {
        p.validate();
        return 0;
    });
    if (p.bits > 26) throw BadFlags("the cost recursion supports at most 26 key bits");
    const auto dir = out_dir(f);
    TheoryPoint tp;
    try {
        tp = compute_theory(p);
    } catch (const NoSteadyState& e) {
        std::cerr << "no steady state: " << e.what() << '\n';
        return 1;
    }
    const std::string json = theory_json(tp).dump(2) + "\n";
    const std::string csv = theory_csv(tp);
    std::cout << (f.format == "csv" ? csv : json);
    if (dir) {
        write_file_atomic(*dir / "theory.json", json);
        write_file_atomic(*dir / "theory.csv", csv);
    }
    return 0;
}

int cmd_simulate(const Flags& f)
{
    const SimConfig cfg = sim_config(f);
    checked([&] {
        cfg.validate();
        return 0;
    });
    const auto dir = out_dir(f);
    const bool stream = f.format == "csv";

    bool header = false;
    auto on_sample = [&](const MetricsSample& m) {
        if (!stream) return;
        // samples_csv of one row, header on the first
        std::string text = samples_csv({m});
        if (header) text.erase(0, text.find('\n') + 1);
        header = true;
        std::cout << text << std::flush;
    };
    std::cerr << "simulate: n0=" << cfg.n0 << " bits=" << cfg.bits << " r=" << cfg.r << " alpha=" << cfg.alpha
              << " seed=" << cfg.seed << " burnin=" << cfg.burnin() << " measure=" << cfg.measure() << '\n';
    RunResult res;
    try {
        res = Simulation(cfg).run(on_sample);
    } catch (const SimulationAborted& e) {
        std::cerr << "run aborted: " << e.what() << '\n';
        return 1;
    }
    const auto summary = run_summary_json(cfg, res);
    if (!stream) std::cout << summary.dump(2) << '\n';
    if (dir) {
        write_file_atomic(*dir / "samples.csv", samples_csv(res.samples));
        write_file_atomic(*dir / "summary.json", summary.dump(2) + "\n");
    }
    return 0;
}

int cmd_compare(const Flags& f)
{
    const SweepSpec spec = sweep_spec(f);
    checked([&] {
        spec.validate();
        return 0;
    });
    if (spec.bits > 26) throw BadFlags("the cost recursion supports at most 26 key bits");
    const fs::path dir = *out_dir(f, "chordchurn-out");
    set_parallelism(f.jobs);

    std::cerr << "compare: " << spec.r.size() * spec.alpha.size() << " grid point(s) x " << spec.replicates
              << " replicate(s), " << parallelism() << " thread(s)\n";
    SweepResult sweep;
    try {
        sweep = run_sweep(spec, Exec::Parallel, [](std::size_t done, std::size_t total, const PointResult& pt, int rep) {
            const auto& s = pt.replicates[rep];
            std::cerr << '[' << done << '/' << total << "] r=" << pt.r << " alpha=" << pt.alpha << " replicate "
                      << rep << (s.aborted ? " aborted: " + s.abort_reason : std::string(" done")) << '\n';
        });
    } catch (const NoSteadyState& e) {
        std::cerr << "no steady state: " << e.what() << '\n';
        return 1;
    }
    const Report report = summarize(sweep.rows);
    const auto json = report_json(sweep, report);

    write_file_atomic(dir / "rows.csv", rows_csv(sweep.rows));
    write_file_atomic(dir / "report.json", json.dump(2) + "\n");
    write_plot_data(dir / "plot", sweep.rows);

    if (f.format == "json")
        std::cout << json.dump(2) << '\n';
    else
        std::cout << rows_csv(sweep.rows);

    for (const auto& m : report.metrics)
        std::cerr << m.metric << ": median rel error " << m.median << ", worst " << m.worst << '\n';
    std::cerr << report.flagged.size() << " row(s) outside tolerance; files in " << dir.string() << '\n';

    bool degraded = false;
    for (const auto& pt : sweep.points) degraded = degraded || pt.degraded();
    if (degraded) std::cerr << "some runs aborted; see report.json\n";
    return degraded ? 1 : 0;
}

int cmd_validate(const Flags& f)
{
    set_parallelism(f.jobs);
    ValidationOptions opt;
    opt.quick = f.quick;
    opt.samples = f.quick ? std::min<std::uint64_t>(f.samples, 20000) : f.samples;
    opt.seed = f.seed;

    std::vector<Check> checks = oracle_checks(opt);
    const auto props = property_checks(opt);
    checks.insert(checks.end(), props.begin(), props.end());

    int gating = 0, failed = 0;
    for (const auto& c : checks) {
        const char* tag = c.passed ? "PASS " : "FAIL ";
        if (c.gating) {
            ++gating;
            failed += c.passed ? 0 : 1;
        } else {
            tag = c.passed ? "note " : "DIFF ";
        }
        std::cout << tag << c.group << ": " << c.name;
        if (!c.detail.empty()) std::cout << " (" << c.detail << ')';
        std::cout << '\n';
    }
    std::cout << gating - failed << '/' << gating << " checks passed\n";
    return failed == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Chord under churn: analytical model, simulator and comparison harness"};
    app.require_subcommand(1);
    Flags f;

    auto* theory = app.add_subcommand("theory", "Evaluate the analytical model at one parameter point");
    add_model_flags(theory, f, false);
    add_output_flags(theory, f, "json");

    auto* simulate = app.add_subcommand("simulate", "Run one simulation and stream its samples");
    add_model_flags(simulate, f, false);
    add_sim_flags(simulate, f);
    add_output_flags(simulate, f, "csv");

    auto* compare = app.add_subcommand("compare", "Sweep r and alpha, comparing simulation against the model");
    add_model_flags(compare, f, true);
    add_sim_flags(compare, f);
    add_output_flags(compare, f, "csv");
    compare->add_option("--replicates", f.replicates, "Seeded runs per grid point")->check(CLI::Range(1, 100000));
    compare->add_flag("--paper-scale", f.paper_scale, "Use 100 replicates per grid point");
    compare->add_option("--jobs", f.jobs, "Worker threads (0: runtime default)")->check(CLI::NonNegativeNumber);

    auto* validate = app.add_subcommand("validate", "Check closed forms against Monte Carlo and simulator invariants");
    validate->add_flag("--quick", f.quick, "Fewer samples and shorter instrumented runs");
    validate->add_option("--seed", f.seed, "Random seed");
    validate->add_option("--samples", f.samples, "Monte Carlo samples per comparison")->check(CLI::PositiveNumber);
    validate->add_option("--jobs", f.jobs, "Worker threads (0: runtime default)")->check(CLI::NonNegativeNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (f.format.empty()) f.format = theory->parsed() ? "json" : "csv";
        if (theory->parsed()) return cmd_theory(f);
        if (simulate->parsed()) return cmd_simulate(f);
        if (compare->parsed()) return cmd_compare(f);
        return cmd_validate(f);
    } catch (const BadFlags& e) {
        std::cerr << "invalid arguments: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
