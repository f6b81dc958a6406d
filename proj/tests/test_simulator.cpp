#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "chordchurn/simulator.hpp"

#include <algorithm>
#include <map>
#include <numeric>

using namespace chordchurn;

namespace {

Network small_net(std::vector<std::uint64_t> keys, int bits = 4, int succ = 2)
{
    return Network::with_keys(KeySpace(bits), succ, keys);
}

SimConfig quick_config(std::uint64_t seed = 5)
{
    SimConfig c;
    c.n0 = 200;
    c.bits = 16;
    c.r = 200;
    c.alpha = 0.5;
    c.seed = seed;
    c.burnin_events = 20000;
    c.measure_events = 20000;
    c.probe_lookups_per_sample = 30;
    return c;
}

// Greedy lookup with exact state over a sorted key list, written independently
// of Network::lookup.
int ideal_hops(const std::vector<std::uint64_t>& ring, std::uint64_t K, std::uint64_t from, std::uint64_t target)
{
    auto succ = [&](std::uint64_t key) {
        auto it = std::lower_bound(ring.begin(), ring.end(), key % K);
        return it == ring.end() ? ring.front() : *it;
    };
    auto dist = [&](std::uint64_t a, std::uint64_t b) { return (b + K - a) % K; };
    std::uint64_t cur = from;
    int hops = 0;
    for (;;) {
        const std::uint64_t s1 = succ(cur + 1);
        const std::uint64_t to = dist(cur, target);
        if (to != 0 && to <= dist(cur, s1)) return hops + 1;
        std::uint64_t next = s1;
        for (std::uint64_t step = K / 2; step >= 1; step /= 2) {
            const std::uint64_t f = succ(cur + step);
            if (dist(cur, f) > 0 && dist(cur, f) < to) {
                next = f;
                break;
            }
        }
        cur = next;
        ++hops;
    }
}

} // namespace

TEST_CASE("config validation and defaults")
{
    SimConfig c;
    CHECK_NOTHROW(c.validate());
    CHECK(c.burnin() >= 20 * c.n0);
    CHECK(c.measure() == c.n0 * 502);
    c.alpha = 1.5;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = SimConfig{};
    c.n0 = 7; // S + 1
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = SimConfig{};
    c.bits = 8;
    c.n0 = 256;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = SimConfig{};
    c.burnin_events = 5;
    CHECK(c.burnin() == 5);
}

TEST_CASE("bootstrap builds globally correct state")
{
    SimConfig c = quick_config();
    Rng rng(1);
    const Network net = Network::bootstrap(c, rng);
    CHECK(net.size() == c.n0);
    CHECK(net.ring_consistent());
    CHECK(net.wrong_successors() == 0);
    CHECK(net.dead_successors() == 0);
    const auto dead = net.dead_fingers();
    CHECK(std::accumulate(dead.begin(), dead.end(), std::size_t{0}) == 0);
    for (RingKey k : net.keys()) {
        const NodeState& st = net.node(k);
        REQUIRE(st.successors.size() == static_cast<std::size_t>(c.successors));
        RingKey expect = k;
        for (RingKey s : st.successors) {
            expect = net.true_successor(expect);
            CHECK(s == expect);
        }
        for (const auto& f : st.fingers) CHECK(f.node == net.owner(f.start));
        REQUIRE(st.predecessor);
        CHECK(net.true_successor(*st.predecessor) == k);
    }
    const auto gaps = net.gaps();
    CHECK(std::accumulate(gaps.begin(), gaps.end(), std::uint64_t{0}) == net.space().size());
}

TEST_CASE("duplicate keys are rejected")
{
    CHECK_THROWS_AS(small_net({1, 5, 1}), std::invalid_argument);
    Network net = small_net({2, 7, 12});
    CHECK_THROWS_AS(net.join(RingKey{7}, RingKey{2}), std::invalid_argument);
}

TEST_CASE("failure in a perfect three-node ring leaves one wrong pointer")
{
    Network net = small_net({2, 7, 12});
    CHECK(net.wrong_successors() == 0);
    net.fail(RingKey{7});
    CHECK_FALSE(net.alive(RingKey{7}));
    CHECK(net.wrong_successors() == 1);
    CHECK(net.dead_successors() == 1);
    CHECK(net.ring_consistent());
    CHECK_THROWS_AS(net.fail(RingKey{7}), std::out_of_range);

    // stabilization skips the dead entry and repairs the pointer
    net.stabilize_successor(RingKey{2});
    CHECK(net.node(RingKey{2}).successors.front() == RingKey{12});
    CHECK(net.wrong_successors() == 0);
    CHECK(net.node(RingKey{12}).predecessor == RingKey{2});
}

TEST_CASE("join leaves the predecessor pointing past the newcomer")
{
    Network net = small_net({2, 12});
    REQUIRE(net.join(RingKey{7}, RingKey{2}));
    const NodeState& u = net.node(RingKey{7});
    CHECK(u.successors.front() == RingKey{12});
    CHECK(u.predecessor == RingKey{2});
    CHECK(net.node(RingKey{12}).predecessor == RingKey{7});
    // node 2 still points at 12
    CHECK(net.wrong_successors() == 1);

    net.stabilize_successor(RingKey{2});
    CHECK(net.node(RingKey{2}).successors.front() == RingKey{7});
    CHECK(net.node(RingKey{2}).successors.size() == 2);
    CHECK(net.node(RingKey{2}).successors[1] == RingKey{12});
    CHECK(net.wrong_successors() == 0);
}

TEST_CASE("stabilizing a correct node changes nothing")
{
    Network net = small_net({1, 5, 9, 13}, 4, 3);
    const auto before = net.node(RingKey{5}).successors;
    net.stabilize_successor(RingKey{5});
    CHECK(net.node(RingKey{5}).successors == before);
    CHECK(net.wrong_successors() == 0);
}

TEST_CASE("joiner fingers: exact up to the successor, estimated beyond")
{
    // 6 bits; nodes at 0, 20, 40 and the joiner at 10
    Network net = small_net({0, 20, 40}, 6, 2);
    REQUIRE(net.join(RingKey{10}, RingKey{40}));
    const NodeState& u = net.node(RingKey{10});
    const NodeState& v = net.node(RingKey{20});
    // starts 11, 12, 14, 18 lie in (10, 20]
    for (int i = 1; i <= 4; ++i) CHECK(u.fingers[i - 1].node == RingKey{20});
    // start 26: v's fingers are 40 (starts 21..36) and 0 (start 52), so 40
    CHECK(u.fingers[4].node == RingKey{40});
    // start 42: first of v's fingers at or after 42 is 0
    CHECK(u.fingers[5].node == RingKey{0});
    CHECK(v.fingers[5].node == RingKey{0});
}

TEST_CASE("lookups on a perfect ring are consistent and match greedy routing")
{
    SimConfig c = quick_config();
    c.bits = 12;
    c.n0 = 100;
    Rng rng(3);
    const Network net = Network::bootstrap(c, rng);
    std::vector<std::uint64_t> ring;
    for (RingKey k : net.keys()) ring.push_back(k.value);
    std::sort(ring.begin(), ring.end());
    const std::uint64_t K = net.space().size();
    std::uniform_int_distribution<std::uint64_t> key(0, K - 1);
    for (int i = 0; i < 2000; ++i) {
        const RingKey from = net.random_node(rng);
        const RingKey target{key(rng)};
        if (target == from) continue;
        const LookupResult res = net.lookup(from, target);
        REQUIRE(res.ok);
        CHECK(res.result == net.owner(target));
        CHECK(res.timeouts == 0);
        CHECK(res.hops == ideal_hops(ring, K, from.value, target.value));
    }
}

TEST_CASE("dead entries cost timeouts")
{
    Network net = small_net({0, 4, 8, 12}, 4, 3);
    net.fail(RingKey{4});
    // target 3 falls to s_1 = 4, which is dead; the next entry answers
    LookupResult res = net.lookup(RingKey{0}, RingKey{3});
    CHECK(res.ok);
    CHECK(res.result == RingKey{8});
    CHECK(res.timeouts == 1);
    CHECK(res.hops == 1);
    CHECK(res.cost() == 2);

    // target 6: finger 3 (start 4) is the dead node; finger 4 (start 8) overshoots
    res = net.lookup(RingKey{0}, RingKey{6});
    CHECK(res.ok);
    CHECK(res.result == RingKey{8});
    CHECK(res.timeouts >= 1);
}

TEST_CASE("a stale successor pointer gives an inconsistent answer")
{
    Network net = small_net({0, 8}, 4, 1);
    REQUIRE(net.join(RingKey{3}, RingKey{8}));
    const LookupResult res = net.lookup(RingKey{0}, RingKey{2});
    CHECK(res.ok);
    CHECK(res.result == RingKey{8});
    CHECK(net.owner(RingKey{2}) == RingKey{3});
}

TEST_CASE("finger stabilization re-resolves the start")
{
    Network net = small_net({0, 4, 8, 12}, 4, 2);
    net.fail(RingKey{8});
    CHECK(net.node(RingKey{0}).fingers[3].node == RingKey{8});
    net.stabilize_successor(RingKey{4});
    net.stabilize_finger(RingKey{0}, 4);
    CHECK(net.node(RingKey{0}).fingers[3].node == RingKey{12});
    CHECK_THROWS(net.stabilize_finger(RingKey{0}, 5));
}

TEST_CASE("event clock")
{
    SimConfig c;
    c.r = 8;
    c.alpha = 0.25;
    Rng rng(11);
    std::map<EventKind, int> counts;
    double t = 0;
    const int draws = 200000;
    for (int i = 0; i < draws; ++i) {
        const Event e = next_event(t, c, 50, rng);
        CHECK(e.time > t);
        t = e.time;
        ++counts[e.kind];
    }
    // per node: join 1, fail 1, successor 2, finger 6; total 10 per node, 500 for 50 nodes
    CHECK(t == doctest::Approx(draws / 500.0).epsilon(0.01));
    CHECK(counts[EventKind::Join] / double(draws) == doctest::Approx(0.1).epsilon(0.03));
    CHECK(counts[EventKind::Fail] / double(draws) == doctest::Approx(0.1).epsilon(0.03));
    CHECK(counts[EventKind::StabilizeSuccessor] / double(draws) == doctest::Approx(0.2).epsilon(0.03));
    CHECK(counts[EventKind::StabilizeFinger] / double(draws) == doctest::Approx(0.6).epsilon(0.03));
    CHECK(std::string(to_string(EventKind::Fail)) == "fail");
}

TEST_CASE("identical seeds give identical runs")
{
    const SimConfig c = quick_config(9);
    const RunResult a = run(c), b = run(c);
    REQUIRE(a.samples.size() == b.samples.size());
    REQUIRE_FALSE(a.samples.empty());
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        CHECK(a.samples[i].time == b.samples[i].time);
        CHECK(a.samples[i].w1 == b.samples[i].w1);
        CHECK(a.samples[i].f == b.samples[i].f);
        CHECK(a.samples[i].probe_cost_mean == b.samples[i].probe_cost_mean);
    }
    CHECK(a.final_gaps == b.final_gaps);
    const RunResult other = run(quick_config(10));
    CHECK(other.final_gaps != a.final_gaps);
}

TEST_CASE("run bookkeeping")
{
    const SimConfig c = quick_config(4);
    Simulation sim(c);
    std::size_t seen = 0;
    const RunResult res = sim.run([&](const MetricsSample&) { ++seen; });
    CHECK(seen == res.samples.size());
    // one sample per N_now events over the measured window
    CHECK(res.samples.size() >= 80);
    CHECK(res.samples.size() <= 120);
    CHECK(std::accumulate(res.final_gaps.begin(), res.final_gaps.end(), std::uint64_t{0}) == (1u << 16));
    CHECK(res.final_n == res.final_gaps.size());
    CHECK(sim.events() == 40000);
    const auto& k = res.counts;
    CHECK(k.joins + k.failed_joins + k.fails + k.successor_stabilizations + k.finger_stabilizations == 40000);
    CHECK(sim.network().ring_consistent());
    for (const auto& s : res.samples) {
        CHECK(s.probes == 30);
        CHECK(s.d1 <= s.w1);
        CHECK(s.f.size() == 16);
    }
}

TEST_CASE("plan and perform reproduce step")
{
    const SimConfig c = quick_config(21);
    Simulation a(c), b(c);
    for (int i = 0; i < 5000; ++i) {
        const Action x = a.step();
        const Action y = b.plan();
        CHECK(x.event.kind == y.event.kind);
        CHECK(x.node == y.node);
        b.perform(y);
    }
    CHECK(a.network().wrong_successors() == b.network().wrong_successors());
    CHECK(a.now() == b.now());
}

TEST_CASE("without churn, stabilization drives every error to zero")
{
    SimConfig c = quick_config(2);
    c.r = 50;
    Simulation sim(c);
    for (int i = 0; i < 20000; ++i) sim.step();
    Network& net = sim.network();
    REQUIRE(net.wrong_successors() + net.dead_successors() > 0);
    const std::vector<RingKey> keys(net.keys().begin(), net.keys().end());
    for (int round = 0; round < 16; ++round)
        for (RingKey k : keys) net.stabilize_successor(k);
    for (RingKey k : keys)
        for (int i = 1; i <= net.space().bits(); ++i) net.stabilize_finger(k, i);
    CHECK(net.wrong_successors() == 0);
    CHECK(net.dead_successors() == 0);
    const auto dead = net.dead_fingers();
    CHECK(std::accumulate(dead.begin(), dead.end(), std::size_t{0}) == 0);
    Rng rng(1);
    const MetricsSample m = sample_metrics(net, 300, rng);
    CHECK(m.probe_inconsistency == 0.0);
    CHECK(m.failed_probes == 0);
    CHECK(m.w1 == 0.0);
}

TEST_CASE("the probe stream does not perturb churn")
{
    SimConfig a = quick_config(8), b = quick_config(8);
    b.probe_lookups_per_sample = 5;
    const RunResult x = run(a), y = run(b);
    CHECK(x.final_gaps == y.final_gaps);
    REQUIRE(x.samples.size() == y.samples.size());
    for (std::size_t i = 0; i < x.samples.size(); ++i) CHECK(x.samples[i].w1 == y.samples[i].w1);
}

TEST_CASE("population guards abort the run")
{
    SimConfig c;
    c.n0 = 8;
    c.successors = 6;
    c.bits = 10;
    c.r = 500;
    c.seed = 3;
    c.burnin_events = 10000000;
    CHECK_THROWS_AS(run(c), SimulationAborted);
}
