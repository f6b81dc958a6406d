#pragma once

#include "chordchurn/execution.hpp"
#include "chordchurn/simulator.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace chordchurn {

struct Check {
    std::string group;
    std::string name;
    bool passed = false;
    std::string detail;
    // Non-gating checks compare the simulator with mean-field bookkeeping
    // that a correct build need not satisfy; they are reported, not enforced.
    bool gating = true;
};

struct ValidationOptions {
    std::uint64_t samples = 100000; // per Monte Carlo comparison
    std::uint64_t seed = 7;
    double sigmas = 3.0;
    bool quick = false;
    Exec exec = Exec::Parallel;
};

// Closed forms against their Monte Carlo estimators.
std::vector<Check> oracle_checks(const ValidationOptions& opt);
// Analytic identities and simulator invariants, followed by the non-gating
// wrong-successor transition census.
std::vector<Check> property_checks(const ValidationOptions& opt);

// Instrumented runs sorted into the cases of the wrong-successor balance.
// Each case has a tabulated change of W1 (the number of nodes whose s_1 is
// not their true successor) and a per-event probability predicted from the
// instantaneous fraction w1 = W1 / N.
struct TransitionCase {
    std::string name;
    long tabulated = 0;
    std::uint64_t events = 0; // events of the kind this case belongs to
    std::uint64_t hits = 0;   // events that fell into this case
    double expect = 0;        // sum of predicted probabilities
    double var = 0;           // sum of p (1 - p)
    std::map<long, std::uint64_t> deltas; // observed dW1 -> count
};

struct TransitionCensus {
    // c1 join after a correct predecessor, then the join remainder, c2 fail
    // with both correct, c3 fail with both wrong, the mixed fail remainder,
    // c4 stabilization of a wrong node, then of a correct one.
    std::vector<TransitionCase> cases;
    int aborted_segments = 0;
};

// Runs `segments` independent simulations (seeds cfg.seed + i), each burned in
// and then instrumented for `events` events.
TransitionCensus transition_census(const SimConfig& cfg, int segments, std::uint64_t events);

} // namespace chordchurn
