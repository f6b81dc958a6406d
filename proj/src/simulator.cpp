#include "chordchurn/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace chordchurn {

void SimConfig::validate() const
{
    if (bits < 2 || bits > KeySpace::kMaxBits) throw std::invalid_argument("bits must be in [2, 62]");
    if (successors < 1) throw std::invalid_argument("successor list length must be >= 1");
    if (n0 < static_cast<std::uint64_t>(successors) + 2) throw std::invalid_argument("n0 must be at least S + 2");
    if (n0 >= (std::uint64_t{1} << bits)) throw std::invalid_argument("n0 must be below the key space size");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must be in [0, 1]");
    if (!(r >= 0.0) || !std::isfinite(r)) throw std::invalid_argument("r must be finite and >= 0");
    if (!(lambda_f > 0.0)) throw std::invalid_argument("lambda_f must be > 0");
    if (probe_lookups_per_sample < 0) throw std::invalid_argument("probe count must be >= 0");
    if (sample_every && *sample_every == 0) throw std::invalid_argument("sample interval must be >= 1");
}

std::uint64_t SimConfig::burnin() const
{
    if (burnin_events) return *burnin_events;
    const double per_time = static_cast<double>(n0) * (2.0 + r);
    const double relax = 1.0 / (r * (1.0 - alpha) / bits + 1.0);
    return std::max<std::uint64_t>(20 * n0, static_cast<std::uint64_t>(std::ceil(5.0 * relax * per_time)));
}

std::uint64_t SimConfig::measure() const
{
    if (measure_events) return *measure_events;
    return static_cast<std::uint64_t>(std::ceil(static_cast<double>(n0) * (2.0 + r)));
}

const char* to_string(EventKind k)
{
    switch (k) {
    case EventKind::Join: return "join";
    case EventKind::Fail: return "fail";
    case EventKind::StabilizeSuccessor: return "stabilize_successor";
    case EventKind::StabilizeFinger: return "stabilize_finger";
    case EventKind::Sample: return "sample";
    }
    return "?";
}

Event next_event(double now, const SimConfig& cfg, std::size_t n_now, Rng& rng)
{
    const double per_node = 2.0 + cfg.r;
    const double total = cfg.lambda_f * per_node * static_cast<double>(n_now);
    Event e;
    e.time = now + std::exponential_distribution<double>(total)(rng);
    const double u = std::uniform_real_distribution<double>(0.0, per_node)(rng);
    if (u < 1.0)
        e.kind = EventKind::Join;
    else if (u < 2.0)
        e.kind = EventKind::Fail;
    else if (u < 2.0 + cfg.alpha * cfg.r)
        e.kind = EventKind::StabilizeSuccessor;
    else
        e.kind = EventKind::StabilizeFinger;
    return e;
}

// --- Network ---------------------------------------------------------------------

Network::Network(KeySpace space, int successor_len) : space_(space), successor_len_(successor_len) {}

Network Network::with_keys(KeySpace space, int successor_len, std::span<const std::uint64_t> keys)
{
    Network net(space, successor_len);
    for (auto k : keys) {
        if (net.nodes_.contains(k)) throw std::invalid_argument("duplicate key " + std::to_string(k));
        net.insert(NodeState{space.key(k), {}, {}, std::nullopt});
    }
    for (auto k : keys) {
        NodeState& st = net.node(RingKey{k});
        st = net.make_node(st.key);
        RingKey s = st.key;
        for (int i = 0; i < successor_len && i + 1 < static_cast<int>(keys.size()); ++i) {
            s = net.true_successor(s);
            st.successors.push_back(s);
        }
        if (st.successors.empty()) st.successors.push_back(st.key);
        for (auto& f : st.fingers) f.node = net.owner(f.start);
        auto it = net.ring_.find(k);
        st.predecessor = RingKey{it == net.ring_.begin() ? *net.ring_.rbegin() : *std::prev(it)};
    }
    return net;
}

Network Network::bootstrap(const SimConfig& cfg, Rng& rng)
{
    cfg.validate();
    KeySpace space(cfg.bits);
    std::uniform_int_distribution<std::uint64_t> pick(0, space.size() - 1);
    std::set<std::uint64_t> chosen;
    std::vector<std::uint64_t> keys;
    keys.reserve(cfg.n0);
    while (keys.size() < cfg.n0) {
        const auto k = pick(rng);
        if (chosen.insert(k).second) keys.push_back(k);
    }
    return with_keys(space, cfg.successors, keys);
}

const NodeState& Network::node(RingKey k) const
{
    auto it = nodes_.find(k.value);
    if (it == nodes_.end()) throw std::out_of_range("node " + std::to_string(k.value) + " is not alive");
    return it->second.state;
}

NodeState& Network::node(RingKey k)
{
    auto it = nodes_.find(k.value);
    if (it == nodes_.end()) throw std::out_of_range("node " + std::to_string(k.value) + " is not alive");
    return it->second.state;
}

RingKey Network::random_node(Rng& rng) const
{
    std::uniform_int_distribution<std::size_t> pick(0, slots_.size() - 1);
    return slots_[pick(rng)];
}

RingKey Network::true_successor(RingKey n) const
{
    auto it = ring_.upper_bound(n.value);
    return RingKey{it == ring_.end() ? *ring_.begin() : *it};
}

RingKey Network::true_predecessor(RingKey key) const
{
    auto it = ring_.lower_bound(key.value);
    return RingKey{it == ring_.begin() ? *ring_.rbegin() : *std::prev(it)};
}

RingKey Network::owner(RingKey key) const
{
    auto it = ring_.lower_bound(key.value);
    return RingKey{it == ring_.end() ? *ring_.begin() : *it};
}

NodeState Network::make_node(RingKey key) const
{
    NodeState st;
    st.key = key;
    st.fingers.resize(space_.bits());
    for (int i = 1; i <= space_.bits(); ++i) st.fingers[i - 1] = Finger{space_.finger_start(key, i), key};
    return st;
}

void Network::insert(NodeState st)
{
    const auto k = st.key.value;
    slots_.push_back(st.key);
    nodes_.emplace(k, Entry{std::move(st), slots_.size() - 1});
    ring_.insert(k);
}

void Network::fail(RingKey victim)
{
    auto it = nodes_.find(victim.value);
    if (it == nodes_.end()) throw std::out_of_range("cannot fail a node that is not alive");
    const std::size_t slot = it->second.slot;
    const RingKey moved = slots_.back();
    slots_[slot] = moved;
    slots_.pop_back();
    if (moved != victim) nodes_.at(moved.value).slot = slot;
    nodes_.erase(it);
    ring_.erase(victim.value);
}

void Network::adopt_successor_list(NodeState& n, RingKey s) const
{
    std::vector<RingKey> list{s};
    for (RingKey x : node(s).successors) {
        if (static_cast<int>(list.size()) >= successor_len_) break;
        if (x == n.key || std::find(list.begin(), list.end(), x) != list.end()) continue;
        list.push_back(x);
    }
    n.successors = std::move(list);
}

void Network::stabilize_successor(RingKey key)
{
    NodeState& n = node(key);
    auto first_alive = std::find_if(n.successors.begin(), n.successors.end(), [&](RingKey s) { return alive(s); });
    if (first_alive == n.successors.end())
        throw SimulationAborted(SimulationAborted::Reason::Isolation,
                                "node " + std::to_string(key.value) + " lost its whole successor list");
    RingKey s = *first_alive;
    if (s != key) {
        const auto& pred = node(s).predecessor;
        if (pred && alive(*pred) && space_.in_open(*pred, key, s)) s = *pred;
    }
    adopt_successor_list(n, s);

    // notify: s accepts n if its predecessor is unknown, dead, or farther away
    NodeState& succ = node(s);
    if (s != key && (!succ.predecessor || !alive(*succ.predecessor) || space_.in_open(key, *succ.predecessor, s)))
        succ.predecessor = key;
}

bool Network::join(RingKey key, RingKey contact)
{
    if (alive(key)) throw std::invalid_argument("key " + std::to_string(key.value) + " already in use");
    const LookupResult found = lookup(contact, key);
    if (!found.ok) return false;
    const RingKey v = found.result;
    const std::optional<RingKey> v_pred = node(v).predecessor;

    NodeState st = make_node(key);
    st.successors = {v};
    insert(std::move(st));
    stabilize_successor(key);

    NodeState& u = node(key);
    if (v_pred && alive(*v_pred) && *v_pred != key && !space_.in_open(*v_pred, key, v)) u.predecessor = *v_pred;

    // Fingers up to the successor are exact; the rest copy the successor's
    // first finger at or after each start.
    const RingKey s = u.successors.front();
    const NodeState& sv = node(s);
    for (auto& f : u.fingers) {
        if (space_.in_open_closed(f.start, key, s)) {
            f.node = s;
            continue;
        }
        RingKey best = sv.fingers.back().node;
        std::uint64_t best_d = space_.distance(f.start, best);
        for (const auto& g : sv.fingers) {
            const auto d = space_.distance(f.start, g.node);
            if (d < best_d) {
                best = g.node;
                best_d = d;
            }
        }
        f.node = best;
    }
    return true;
}

void Network::stabilize_finger(RingKey key, int i)
{
    NodeState& n = node(key);
    Finger& f = n.fingers.at(i - 1);
    const LookupResult res = lookup(key, f.start);
    if (res.ok) f.node = res.result;
}

LookupResult Network::lookup(RingKey origin, RingKey target) const
{
    LookupResult out;
    const int budget = 4 * space_.bits();
    std::vector<RingKey> known_dead;
    auto reachable = [&](RingKey k) {
        if (std::find(known_dead.begin(), known_dead.end(), k) != known_dead.end()) return false;
        if (alive(k)) return true;
        ++out.timeouts;
        known_dead.push_back(k);
        return false;
    };

    RingKey cur = origin;
    for (int step = 0; step < budget; ++step) {
        const NodeState& n = node(cur);

        if (!n.successors.empty() && space_.in_open_closed(target, cur, n.successors.front())) {
            for (RingKey s : n.successors) {
                if (reachable(s)) {
                    ++out.hops;
                    out.result = s;
                    out.ok = true;
                    return out;
                }
            }
            return out;
        }

        std::optional<RingKey> next;
        for (auto it = n.fingers.rbegin(); it != n.fingers.rend(); ++it) {
            const RingKey f = it->node;
            if (f == cur || !space_.in_open(f, cur, target)) continue;
            if (reachable(f)) {
                next = f;
                break;
            }
        }
        if (!next) {
            // last resort: the successor list
            for (RingKey s : n.successors) {
                if (s == cur || !reachable(s)) continue;
                if (space_.in_open(s, cur, target)) {
                    next = s;
                    break;
                }
                ++out.hops;
                out.result = s;
                out.ok = true;
                return out;
            }
        }
        if (!next) return out;
        ++out.hops;
        cur = *next;
    }
    return out;
}

std::size_t Network::wrong_successors() const
{
    // walk the ring in order so each true successor is the next element
    std::size_t w = 0;
    for (auto it = ring_.begin(); it != ring_.end(); ++it) {
        auto next = std::next(it);
        const std::uint64_t succ = next == ring_.end() ? *ring_.begin() : *next;
        if (nodes_.at(*it).state.successors.front().value != succ) ++w;
    }
    return w;
}

std::size_t Network::dead_successors() const
{
    std::size_t d = 0;
    for (const auto& [k, e] : nodes_)
        if (!alive(e.state.successors.front())) ++d;
    return d;
}

std::vector<std::size_t> Network::dead_fingers() const
{
    std::vector<std::size_t> dead(space_.bits(), 0);
    for (const auto& [k, e] : nodes_)
        for (std::size_t i = 0; i < e.state.fingers.size(); ++i)
            if (!alive(e.state.fingers[i].node)) ++dead[i];
    return dead;
}

std::vector<std::uint64_t> Network::gaps() const
{
    std::vector<std::uint64_t> g;
    g.reserve(ring_.size());
    for (auto k : ring_) {
        const RingKey n{k};
        const RingKey s = true_successor(n);
        g.push_back(s == n ? space_.size() : space_.distance(n, s));
    }
    return g;
}

bool Network::ring_consistent() const
{
    if (ring_.size() != nodes_.size() || slots_.size() != nodes_.size()) return false;
    for (std::size_t i = 0; i < slots_.size(); ++i) {
        auto it = nodes_.find(slots_[i].value);
        if (it == nodes_.end() || it->second.slot != i || !ring_.contains(slots_[i].value)) return false;
    }
    return true;
}

// --- metrics -------------------------------------------------------------------

MetricsSample sample_metrics(const Network& net, int probe_lookups, Rng& rng)
{
    MetricsSample m;
    const double n = static_cast<double>(net.size());
    m.n_now = net.size();
    m.w1 = static_cast<double>(net.wrong_successors()) / n;
    m.d1 = static_cast<double>(net.dead_successors()) / n;
    const auto dead = net.dead_fingers();
    m.f.resize(dead.size());
    for (std::size_t i = 0; i < dead.size(); ++i) m.f[i] = static_cast<double>(dead[i]) / n;

    std::uint64_t inconsistent = 0, answered = 0, cost = 0;
    std::uniform_int_distribution<std::uint64_t> offset(1, net.space().size() - 1);
    for (int i = 0; i < probe_lookups; ++i) {
        const RingKey origin = net.random_node(rng);
        const RingKey target = net.space().add(origin, static_cast<std::int64_t>(offset(rng)));
        const LookupResult res = net.lookup(origin, target);
        ++m.probes;
        if (!res.ok) {
            ++m.failed_probes;
            continue;
        }
        ++answered;
        cost += static_cast<std::uint64_t>(res.cost());
        if (res.result != net.owner(target)) ++inconsistent;
    }
    if (answered > 0) {
        m.probe_inconsistency = static_cast<double>(inconsistent) / static_cast<double>(answered);
        m.probe_cost_mean = static_cast<double>(cost) / static_cast<double>(answered);
    }
    return m;
}

// --- Simulation ------------------------------------------------------------------

namespace {

std::uint64_t probe_seed(std::uint64_t seed)
{
    // splitmix64 step, so the probe stream is unrelated to the churn stream
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace

Simulation::Simulation(const SimConfig& cfg)
    : cfg_(cfg), churn_(cfg.seed), probes_(probe_seed(cfg.seed)), net_(Network::bootstrap(cfg, churn_))
{
}

Action Simulation::plan()
{
    Action a;
    a.event = next_event(now_, cfg_, net_.size(), churn_);
    switch (a.event.kind) {
    case EventKind::Join: {
        std::uniform_int_distribution<std::uint64_t> pick(0, net_.space().size() - 1);
        a.node = RingKey{pick(churn_)};
        while (net_.alive(a.node)) a.node = RingKey{pick(churn_)};
        break;
    }
    case EventKind::Fail:
    case EventKind::StabilizeSuccessor:
        a.node = net_.random_node(churn_);
        break;
    case EventKind::StabilizeFinger: {
        a.node = net_.random_node(churn_);
        std::uniform_int_distribution<int> finger(1, net_.space().bits());
        a.finger = finger(churn_);
        break;
    }
    case EventKind::Sample:
        break;
    }
    return a;
}

void Simulation::perform(const Action& a)
{
    now_ = a.event.time;
    ++events_;
    switch (a.event.kind) {
    case EventKind::Join: {
        bool joined = false;
        for (int attempt = 0; attempt < 8 && !joined; ++attempt) joined = net_.join(a.node, net_.random_node(churn_));
        if (joined)
            ++counts_.joins;
        else
            ++counts_.failed_joins;
        if (net_.size() > 2 * cfg_.n0)
            throw SimulationAborted(SimulationAborted::Reason::Overflow, "node count exceeded 2 * n0");
        break;
    }
    case EventKind::Fail:
        net_.fail(a.node);
        ++counts_.fails;
        if (net_.size() < static_cast<std::size_t>(cfg_.successors) + 2)
            throw SimulationAborted(SimulationAborted::Reason::Extinction, "node count fell below S + 2");
        break;
    case EventKind::StabilizeSuccessor:
        net_.stabilize_successor(a.node);
        ++counts_.successor_stabilizations;
        break;
    case EventKind::StabilizeFinger:
        net_.stabilize_finger(a.node, a.finger);
        ++counts_.finger_stabilizations;
        break;
    case EventKind::Sample:
        break;
    }
}

Action Simulation::step()
{
    const Action a = plan();
    perform(a);
    return a;
}

MetricsSample Simulation::sample()
{
    MetricsSample m = sample_metrics(net_, cfg_.probe_lookups_per_sample, probes_);
    m.time = now_;
    m.events = events_;
    return m;
}

RunResult Simulation::run(const std::function<void(const MetricsSample&)>& on_sample)
{
    cfg_.validate();
    RunResult out;
    const std::uint64_t burnin = cfg_.burnin();
    const std::uint64_t measure = cfg_.measure();
    for (std::uint64_t i = 0; i < burnin; ++i) step();

    const std::uint64_t end = events_ + measure;
    auto interval = [&] { return cfg_.sample_every ? *cfg_.sample_every : static_cast<std::uint64_t>(net_.size()); };
    std::uint64_t next_sample = events_ + interval();
    while (events_ < end) {
        step();
        if (events_ >= next_sample) {
            out.samples.push_back(sample());
            if (on_sample) on_sample(out.samples.back());
            next_sample = events_ + interval();
        }
    }
    out.final_gaps = net_.gaps();
    out.final_n = net_.size();
    out.counts = counts_;
    return out;
}

} // namespace chordchurn
