#include "chordchurn/validation.hpp"

#include "chordchurn/analytics.hpp"
#include "chordchurn/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace chordchurn {

namespace {

std::string fmt(const oracle::Estimate& e, double expected)
{
    std::ostringstream s;
    s.precision(6);
    s << "mc " << e.mean << " +- " << e.stderr_ << ", closed form " << expected;
    return s.str();
}

Check compare(const std::string& group, const std::string& name, const oracle::Estimate& e, double expected,
              double sigmas)
{
    return {group, name, oracle::agrees(e, expected, sigmas), fmt(e, expected)};
}

ChurnParams ring_params(double n, int bits, double r = 500, double alpha = 0.5)
{
    ChurnParams p;
    p.n = n;
    p.bits = bits;
    p.r = r;
    p.alpha = alpha;
    return p;
}

} // namespace

std::vector<Check> oracle_checks(const ValidationOptions& opt)
{
    std::vector<Check> out;
    const std::uint64_t n = opt.samples;
    std::uint64_t seed = opt.seed;

    const ChurnParams big = ring_params(1000, 20);
    const oracle::RingModel big_ring{big.n, big.bits};
    for (int k : {10, 14, 18}) {
        const auto est = oracle::share(big_ring, k, n, seed++, opt.exec);
        for (int j = 1; j <= kShareOrders; ++j)
            out.push_back(compare("oracle", "share p" + std::to_string(j) + " k=" + std::to_string(k), est[j - 1],
                                  share_prob(k, j, big), opt.sigmas));
    }
    for (int k : {10, 14, 18}) {
        const auto est = oracle::join_replication(big_ring, k, n, seed++, opt.exec);
        out.push_back(
            compare("oracle", "join replication k=" + std::to_string(k), est, join_replication_prob(k, big), opt.sigmas));
    }

    const auto f = fk_vector(big);
    for (int k : {10, 16}) {
        const auto est = oracle::fallback(big_ring, k, f, n, seed++, opt.exec);
        for (int i = 1; i <= k; ++i)
            out.push_back(compare("oracle", "fallback h" + std::to_string(k) + "(" + std::to_string(i) + ")",
                                  est[i - 1], fallback_prob(k, i, big, f), opt.sigmas));
    }

    // perfect routing state: the recursion reduces to plain hop counts
    for (auto [nodes, bits] : {std::pair{64.0, 10}, std::pair{256.0, 12}}) {
        const ChurnParams p = ring_params(nodes, bits);
        CostInputs zero{std::vector<double>(bits, 0.0), std::vector<double>(p.successors, 0.0)};
        const auto table = lookup_cost_table(p, zero);
        const double K = static_cast<double>(p.key_space());
        const double expected = mean_lookup_cost(table) * K / (K - 1); // targets drawn from 1..K-1
        const auto est = oracle::static_lookup_hops({nodes, bits}, std::max<std::uint64_t>(n / 10, 1000), seed++,
                                                    opt.exec);
        std::ostringstream name;
        name << "static cost n=" << nodes << " bits=" << bits;
        out.push_back(compare("oracle", name.str(), est, expected, opt.sigmas));
    }
    return out;
}

TransitionCensus transition_census(const SimConfig& cfg, int segments, std::uint64_t events)
{
    enum { JoinCorrect, JoinWrong, FailBoth, FailNeither, FailMixed, StabWrong, StabCorrect };
    TransitionCensus c;
    for (auto [name, tabulated] : {std::pair{"c1 join, predecessor correct", 1L}, {"join, predecessor wrong", 0L},
                                   {"c2 fail, both correct", 1L}, {"c3 fail, both wrong", -1L},
                                   {"fail, one wrong", 0L}, {"c4 stabilize wrong node", -1L},
                                   {"stabilize correct node", 0L}}) {
        TransitionCase k;
        k.name = name;
        k.tabulated = tabulated;
        c.cases.push_back(k);
    }
    // one event of a kind: the case it fell into, and each case's prediction
    auto tally = [&](std::initializer_list<std::pair<int, double>> predicted, int hit, long delta) {
        for (auto [idx, p] : predicted) {
            auto& k = c.cases[idx];
            ++k.events;
            k.expect += p;
            k.var += p * (1 - p);
        }
        ++c.cases[hit].hits;
        ++c.cases[hit].deltas[delta];
    };

    for (int seg = 0; seg < segments; ++seg) {
        SimConfig sc = cfg;
        sc.seed = cfg.seed + static_cast<std::uint64_t>(seg);
        Simulation sim(sc);
        try {
            for (std::uint64_t i = 0; i < sc.burnin(); ++i) sim.step();
        } catch (const SimulationAborted&) {
            ++c.aborted_segments;
            continue;
        }

        const Network& net = sim.network();
        auto correct = [&](RingKey n) { return net.node(n).successors.front() == net.true_successor(n); };
        long before = static_cast<long>(net.wrong_successors());
        for (std::uint64_t i = 0; i < events; ++i) {
            const double w = static_cast<double>(before) / static_cast<double>(net.size());
            const Action a = sim.plan();
            int hit = -1;
            switch (a.event.kind) {
            case EventKind::Join:
                hit = correct(net.true_predecessor(a.node)) ? JoinCorrect : JoinWrong;
                break;
            case EventKind::Fail: {
                const bool x = correct(net.true_predecessor(a.node)), y = correct(a.node);
                hit = x && y ? FailBoth : (!x && !y ? FailNeither : FailMixed);
                break;
            }
            case EventKind::StabilizeSuccessor:
                hit = correct(a.node) ? StabCorrect : StabWrong;
                break;
            default:
                break;
            }
            const auto joins = sim.counts().joins;
            try {
                sim.perform(a);
            } catch (const SimulationAborted&) {
                // cases tallied so far stand; the segment just ends early
                ++c.aborted_segments;
                break;
            }
            const long after = static_cast<long>(net.wrong_successors());
            const long delta = after - before;
            before = after;
            switch (a.event.kind) {
            case EventKind::Join:
                if (sim.counts().joins != joins) tally({{JoinCorrect, 1 - w}, {JoinWrong, w}}, hit, delta);
                break;
            case EventKind::Fail:
                tally({{FailBoth, (1 - w) * (1 - w)}, {FailNeither, w * w}, {FailMixed, 2 * w * (1 - w)}}, hit, delta);
                break;
            case EventKind::StabilizeSuccessor:
                tally({{StabWrong, w}, {StabCorrect, 1 - w}}, hit, delta);
                break;
            default:
                break;
            }
        }
    }
    return c;
}

std::vector<Check> property_checks(const ValidationOptions& opt)
{
    std::vector<Check> out;
    auto add = [&](const std::string& name, bool ok, const std::string& detail = {}) {
        out.push_back({"property", name, ok, detail});
    };
    auto note = [&](const std::string& name, bool ok, const std::string& detail) {
        out.push_back({"transition", name, ok, detail, false});
    };

    // analytic identities
    {
        double worst_residual = 0, worst_sum = 0;
        bool cost_ok = true, c1_ok = true;
        for (double r : {200.0, 500.0, 2000.0}) {
            for (double alpha : {0.25, 0.5, 0.75}) {
                const ChurnParams p = ring_params(1000, 16, r, alpha);
                const auto f = fk_vector(p);
                for (int k = 1; k <= p.fingers(); ++k) {
                    worst_residual = std::max(worst_residual, std::abs(fk_balance_residual(f[k - 1], finger_balance(k, p))));
                    double sum = 0;
                    for (int i = 1; i <= k; ++i) sum += fallback_prob(k, i, p, f);
                    worst_sum = std::max(worst_sum, std::abs(sum - 1));
                }
                const CostInputs in = cost_inputs(p);
                const auto table = lookup_cost_table(p, in);
                for (std::size_t t = 1; t < table.size(); ++t) cost_ok = cost_ok && table[t] >= 1.0;
                const double d1 = in.successor_dead[0];
                // the series is 1 + d1 + d1^2 + ... up to the list length
                c1_ok = c1_ok && std::abs(table[1] - (1 + d1)) <= d1 * d1 / (1 - d1) + 1e-12;
            }
        }
        std::ostringstream a, b;
        a << "max |residual| " << worst_residual;
        b << "max |sum - 1| " << worst_sum;
        add("f_k root residual < 1e-9", worst_residual < 1e-9, a.str());
        add("sum_i h_k(i) = 1", worst_sum < 1e-12, b.str());
        add("C_t >= 1", cost_ok);
        add("C_1 = 1 + d_1 within truncation", c1_ok);
    }

    SimConfig small;
    small.n0 = opt.quick ? 100 : 300;
    small.bits = 16;
    small.r = 50;
    small.alpha = 0.5;
    small.seed = opt.seed;
    small.burnin_events = small.n0 * 20;
    small.measure_events = small.n0 * 20;
    small.probe_lookups_per_sample = 20;

    {
        const RunResult a = run(small), b = run(small);
        bool same = a.samples.size() == b.samples.size() && a.final_gaps == b.final_gaps;
        for (std::size_t i = 0; same && i < a.samples.size(); ++i) {
            const auto &x = a.samples[i], &y = b.samples[i];
            same = x.time == y.time && x.events == y.events && x.n_now == y.n_now && x.w1 == y.w1 && x.d1 == y.d1
                   && x.f == y.f && x.probe_inconsistency == y.probe_inconsistency
                   && x.probe_cost_mean == y.probe_cost_mean && x.failed_probes == y.failed_probes;
        }
        add("determinism", same, std::to_string(a.samples.size()) + " samples compared");
    }

    {
        // churn for a while, then stop it and let stabilization run alone
        Simulation sim(small);
        for (std::uint64_t i = 0; i < small.n0 * 40; ++i) sim.step();
        Network& net = sim.network();
        const std::vector<RingKey> keys(net.keys().begin(), net.keys().end());
        for (int round = 0; round < 2 * small.successors + 4; ++round)
            for (RingKey k : keys) net.stabilize_successor(k);
        for (RingKey k : keys)
            for (int i = 1; i <= net.space().bits(); ++i) net.stabilize_finger(k, i);
        Rng rng(opt.seed);
        const MetricsSample m = sample_metrics(net, 500, rng);
        const auto dead = net.dead_fingers();
        const bool zero = net.wrong_successors() == 0 && net.dead_successors() == 0
                          && std::all_of(dead.begin(), dead.end(), [](auto v) { return v == 0; })
                          && m.probe_inconsistency == 0 && m.failed_probes == 0 && net.ring_consistent();
        std::ostringstream d;
        d << "W1 " << net.wrong_successors() << ", dead successors " << net.dead_successors() << ", dead fingers "
          << std::accumulate(dead.begin(), dead.end(), std::size_t{0}) << ", inconsistent probes "
          << m.probe_inconsistency;
        add("churn-free fixed point", zero, d.str());
    }

    {
        // A small ring at moderate r so the rarer transitions still occur.
        // The node count is a random walk, so the events are split over
        // independent segments short enough that it stays near n0.
        SimConfig cfg = small;
        cfg.n0 = 200;
        cfg.r = 100;
        const std::uint64_t per_unit = cfg.n0 * static_cast<std::uint64_t>(2 + cfg.r);
        cfg.burnin_events = 3 * per_unit;
        const auto census = transition_census(cfg, opt.quick ? 3 : 25, 10 * per_unit);
        for (const auto& k : census.cases) {
            const double z = (static_cast<double>(k.hits) - k.expect) / std::sqrt(std::max(k.var, 1.0));
            std::ostringstream d;
            d.precision(5);
            d << k.hits << " of " << k.events << " events, predicted " << k.expect << " (z " << z << ")";
            note("frequency: " + k.name, std::abs(z) <= opt.sigmas, d.str());
        }
        for (const auto& k : census.cases) {
            std::uint64_t off = 0;
            std::ostringstream d;
            d << "dW1 counts:";
            for (auto [delta, n] : k.deltas) {
                d << ' ' << (delta > 0 ? "+" : "") << delta << ':' << n;
                if (delta != k.tabulated) off += n;
            }
            note("amount: " + k.name + " (" + (k.tabulated > 0 ? "+" : "") + std::to_string(k.tabulated) + ")",
                off == 0, d.str());
        }
        if (census.aborted_segments > 0)
            note("segments", true,
                std::to_string(census.aborted_segments) + " segment(s) ended early by an aborted run");
    }
    return out;
}

} // namespace chordchurn
