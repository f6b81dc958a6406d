#pragma once

#include "chordchurn/ring.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace chordchurn {

using Rng = std::mt19937_64;

struct Finger {
    RingKey start;
    RingKey node;
};

// Routing state of one participant. successors[0] is s_1; fingers[i-1] is finger i.
struct NodeState {
    RingKey key;
    std::vector<RingKey> successors;
    std::vector<Finger> fingers;
    std::optional<RingKey> predecessor;
};

struct SimConfig {
    std::uint64_t n0 = 1000;
    int bits = 20;
    int successors = 6;
    double r = 500;
    double alpha = 0.5;
    double lambda_f = 1.0;
    std::uint64_t seed = 1;
    // Unset counts fall back to defaults scaled by the event rate; see
    // burnin() and measure().
    std::optional<std::uint64_t> burnin_events;
    std::optional<std::uint64_t> measure_events;
    int probe_lookups_per_sample = 100;
    // Events between samples; unset means "current node count".
    std::optional<std::uint64_t> sample_every;

    void validate() const;
    // Five relaxation times of the slowest pointer population, with finger
    // entries refreshed at r(1-alpha)/M plus churn turnover.
    std::uint64_t burnin() const;
    // One unit of per-node time.
    std::uint64_t measure() const;
};

enum class EventKind { Join, Fail, StabilizeSuccessor, StabilizeFinger, Sample };

const char* to_string(EventKind k);

struct Event {
    double time = 0;
    EventKind kind = EventKind::Join;
};

// Per-node join and failure rate lambda_f, stabilization rate r * lambda_f,
// all scaled by the current node count.
Event next_event(double now, const SimConfig& cfg, std::size_t n_now, Rng& rng);

// An event bound to its node: the joining key, the victim, or the node that
// stabilizes (with the finger index for finger stabilization).
struct Action {
    Event event;
    RingKey node;
    int finger = 0;
};

struct LookupResult {
    RingKey result;
    int hops = 0;
    int timeouts = 0;
    bool ok = false;

    int cost() const { return hops + timeouts; }
};

class SimulationAborted : public std::runtime_error {
public:
    enum class Reason { Extinction, Overflow, Isolation };
    SimulationAborted(Reason why, const std::string& msg) : std::runtime_error(msg), reason(why) {}
    Reason reason;
};

class Network {
public:
    Network(KeySpace space, int successor_len);

    // N0 uniformly random distinct keys with globally correct routing state.
    static Network bootstrap(const SimConfig& cfg, Rng& rng);
    // Same, with the given keys.
    static Network with_keys(KeySpace space, int successor_len, std::span<const std::uint64_t> keys);

    const KeySpace& space() const { return space_; }
    int successor_len() const { return successor_len_; }
    std::size_t size() const { return slots_.size(); }
    bool alive(RingKey k) const { return nodes_.contains(k.value); }

    const NodeState& node(RingKey k) const;
    NodeState& node(RingKey k);
    std::span<const RingKey> keys() const { return slots_; }
    RingKey random_node(Rng& rng) const;

    // Next alive node clockwise after n (ground truth).
    RingKey true_successor(RingKey n) const;
    // Last alive node strictly before key (ground truth).
    RingKey true_predecessor(RingKey key) const;
    // First alive node at or after key (ground truth).
    RingKey owner(RingKey key) const;

    // Joins `key` using `contact` to find its successor. Returns false when
    // the contact's lookup fails, leaving the network unchanged.
    bool join(RingKey key, RingKey contact);
    // Ungraceful: nobody is told.
    void fail(RingKey victim);
    void stabilize_successor(RingKey n);
    // Re-resolves finger i (1-based) of n by a lookup of its start.
    void stabilize_finger(RingKey n, int i);
    LookupResult lookup(RingKey origin, RingKey target) const;

    std::size_t wrong_successors() const;
    std::size_t dead_successors() const;
    std::vector<std::size_t> dead_fingers() const; // index k-1
    std::vector<std::uint64_t> gaps() const;       // clockwise distance to the next node, ring order
    bool ring_consistent() const;

private:
    struct Entry {
        NodeState state;
        std::size_t slot;
    };

    NodeState make_node(RingKey key) const;
    void insert(NodeState st);
    void adopt_successor_list(NodeState& n, RingKey s) const;

    KeySpace space_;
    int successor_len_;
    std::unordered_map<std::uint64_t, Entry> nodes_;
    std::set<std::uint64_t> ring_;
    std::vector<RingKey> slots_;
};

struct MetricsSample {
    double time = 0;
    std::uint64_t events = 0;
    std::size_t n_now = 0;
    double w1 = 0;
    double d1 = 0;
    std::vector<double> f; // f_1..f_M
    double probe_inconsistency = 0;
    double probe_cost_mean = 0;
    std::uint64_t probes = 0;
    std::uint64_t failed_probes = 0;
};

struct EventCounts {
    std::uint64_t joins = 0;
    std::uint64_t failed_joins = 0;
    std::uint64_t fails = 0;
    std::uint64_t successor_stabilizations = 0;
    std::uint64_t finger_stabilizations = 0;
};

struct RunResult {
    std::vector<MetricsSample> samples;
    std::vector<std::uint64_t> final_gaps;
    std::size_t final_n = 0;
    EventCounts counts;
};

// One run: a single event queue mutating one network.
class Simulation {
public:
    explicit Simulation(const SimConfig& cfg);

    const SimConfig& config() const { return cfg_; }
    const Network& network() const { return net_; }
    Network& network() { return net_; }
    double now() const { return now_; }
    std::uint64_t events() const { return events_; }
    const EventCounts& counts() const { return counts_; }

    // Draws the next event and the node it acts on without applying it, so
    // callers can inspect the network before perform().
    Action plan();
    void perform(const Action& a);
    // plan() then perform().
    Action step();
    MetricsSample sample();

    // on_sample sees each post-burn-in sample as it is taken.
    RunResult run(const std::function<void(const MetricsSample&)>& on_sample = {});

private:
    SimConfig cfg_;
    Rng churn_;
    Rng probes_;
    Network net_;
    double now_ = 0;
    std::uint64_t events_ = 0;
    EventCounts counts_;
};

MetricsSample sample_metrics(const Network& net, int probe_lookups, Rng& rng);

inline RunResult run(const SimConfig& cfg) { return Simulation(cfg).run(); }

} // namespace chordchurn
