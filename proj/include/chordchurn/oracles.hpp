#pragma once

// Monte Carlo estimators used to check the closed forms. Nothing here calls
// into analytics.cpp: rings are sampled from geometric gaps and the quantity
// of interest is counted directly.

#include "chordchurn/execution.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace chordchurn::oracle {

using chordchurn::Exec;

struct Estimate {
    double mean = 0;
    double stderr_ = 0;
    std::uint64_t samples = 0;
};

struct RingModel {
    double n = 1000;
    int bits = 20;
    double occupancy() const; // 1 - rho = N / K
};

// P(node and >= j immediate predecessors share finger k), j = 1..3.
std::vector<Estimate> share(const RingModel& ring, int k, std::uint64_t samples, std::uint64_t seed,
                            Exec exec = Exec::Parallel);

// P(joiner's finger k equals its successor's finger k) under the estimate-from-successor join rule.
Estimate join_replication(const RingModel& ring, int k, std::uint64_t samples, std::uint64_t seed,
                          Exec exec = Exec::Parallel);

// Histogram of the fallback distance i = 1..k after finger k is found dead;
// distinct finger targets die independently with probability finger_dead[j-1].
std::vector<Estimate> fallback(const RingModel& ring, int k, std::span<const double> finger_dead,
                               std::uint64_t samples, std::uint64_t seed, Exec exec = Exec::Parallel);

// Expected hops of a lookup on a static ring with perfect routing state, for
// a target at clockwise distance t drawn uniformly from 1..K-1.
Estimate static_lookup_hops(const RingModel& ring, std::uint64_t samples, std::uint64_t seed,
                            Exec exec = Exec::Parallel);

// Same, at a fixed target distance.
Estimate static_lookup_hops_at(const RingModel& ring, std::uint64_t distance, std::uint64_t samples,
                               std::uint64_t seed, Exec exec = Exec::Parallel);

// |mean - expected| <= sigmas * stderr (stderr floored so exact zeros compare).
bool agrees(const Estimate& e, double expected, double sigmas = 3.0);

} // namespace chordchurn::oracle
