#include "chordchurn/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace chordchurn::oracle {

namespace {

using Rng = std::mt19937_64;

// Samples are split into fixed chunks with their own streams so serial and
// parallel runs see exactly the same draws.
constexpr std::uint64_t kChunks = 64;

Rng chunk_rng(std::uint64_t seed, std::uint64_t chunk)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(chunk), 0x5eedu};
    return Rng(seq);
}

// sums[c][j] = sum of observation j over chunk c's samples
using ChunkKernel = std::function<void(Rng&, std::uint64_t count, std::vector<double>& sums)>;

std::vector<Estimate> run_chunks(std::size_t width, std::uint64_t samples, std::uint64_t seed, Exec exec,
                                 const ChunkKernel& kernel)
{
    if (samples == 0) throw std::invalid_argument("need at least one sample");
    std::vector<std::vector<double>> sums(kChunks, std::vector<double>(width, 0.0));
    std::vector<std::vector<double>> sq(kChunks, std::vector<double>(width, 0.0));
    auto count_of = [&](std::uint64_t c) { return samples / kChunks + (c < samples % kChunks ? 1 : 0); };

    // the kernel fills [0, width) with sums of x and [width, 2 width) with sums of x^2
    auto body = [&](std::uint64_t c) {
        Rng rng = chunk_rng(seed, c);
        std::vector<double> both(2 * width, 0.0);
        kernel(rng, count_of(c), both);
        std::copy(both.begin(), both.begin() + width, sums[c].begin());
        std::copy(both.begin() + width, both.end(), sq[c].begin());
    };

    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic)
        for (std::int64_t c = 0; c < static_cast<std::int64_t>(kChunks); ++c) body(static_cast<std::uint64_t>(c));
    } else {
        for (std::uint64_t c = 0; c < kChunks; ++c) body(c);
    }

    std::vector<Estimate> out(width);
    const double n = static_cast<double>(samples);
    for (std::size_t j = 0; j < width; ++j) {
        double s = 0.0, s2 = 0.0;
        for (std::uint64_t c = 0; c < kChunks; ++c) {
            s += sums[c][j];
            s2 += sq[c][j];
        }
        const double mean = s / n;
        const double var = std::max(0.0, s2 / n - mean * mean) * n / std::max(1.0, n - 1.0);
        out[j] = Estimate{mean, std::sqrt(var / n), samples};
    }
    return out;
}

void observe(std::vector<double>& acc, std::size_t width, std::size_t j, double x)
{
    acc[j] += x;
    acc[width + j] += x * x;
}

std::uint64_t draw_gap(Rng& rng, double occupancy)
{
    // keys between consecutive nodes, >= 1
    return 1 + std::geometric_distribution<std::uint64_t>(occupancy)(rng);
}

// Node positions in (0, limit], plus the first one past it.
void nodes_ahead(Rng& rng, double occupancy, std::uint64_t limit, std::vector<std::uint64_t>& out)
{
    out.clear();
    std::uint64_t pos = 0;
    do {
        pos += draw_gap(rng, occupancy);
        out.push_back(pos);
    } while (pos <= limit);
}

std::uint64_t first_at_or_after(const std::vector<std::uint64_t>& sorted, std::uint64_t x)
{
    return *std::lower_bound(sorted.begin(), sorted.end(), x);
}

void check_finger(const RingModel& ring, int k)
{
    if (k < 1 || k > ring.bits) throw std::out_of_range("finger index out of range");
}

} // namespace

double RingModel::occupancy() const { return n / std::ldexp(1.0, bits); }

std::vector<Estimate> share(const RingModel& ring, int k, std::uint64_t samples, std::uint64_t seed, Exec exec)
{
    check_finger(ring, k);
    const double occ = ring.occupancy();
    const std::uint64_t s = std::uint64_t{1} << (k - 1);
    return run_chunks(3, samples, seed, exec, [&](Rng& rng, std::uint64_t count, std::vector<double>& acc) {
        std::vector<std::uint64_t> ahead;
        for (std::uint64_t i = 0; i < count; ++i) {
            // the node sits at 0, its predecessors at -back[0], -back[1], ...
            std::int64_t back = 0;
            nodes_ahead(rng, occ, s, ahead);
            const std::uint64_t target = first_at_or_after(ahead, s);
            int sharing = 0;
            for (int j = 0; j < 3; ++j) {
                back += static_cast<std::int64_t>(draw_gap(rng, occ));
                const std::int64_t start = static_cast<std::int64_t>(s) - back;
                // a start at or before 0 resolves to this node or a predecessor
                if (start <= 0) break;
                if (first_at_or_after(ahead, static_cast<std::uint64_t>(start)) != target) break;
                ++sharing;
            }
            for (int j = 0; j < 3; ++j) observe(acc, 3, j, sharing >= j + 1 ? 1.0 : 0.0);
        }
    });
}

Estimate join_replication(const RingModel& ring, int k, std::uint64_t samples, std::uint64_t seed, Exec exec)
{
    check_finger(ring, k);
    const double occ = ring.occupancy();
    const std::uint64_t s = std::uint64_t{1} << (k - 1);
    return run_chunks(1, samples, seed, exec, [&](Rng& rng, std::uint64_t count, std::vector<double>& acc) {
        std::vector<std::uint64_t> ahead;
        std::vector<std::uint64_t> fingers(k);
        for (std::uint64_t i = 0; i < count; ++i) {
            // successor v at 0, joiner g keys before it
            const std::uint64_t g = draw_gap(rng, occ);
            if (g >= s) { // start falls on or before v: finger set to v
                observe(acc, 1, 0, 0.0);
                continue;
            }
            nodes_ahead(rng, occ, s, ahead);
            for (int j = 1; j <= k; ++j) fingers[j - 1] = first_at_or_after(ahead, std::uint64_t{1} << (j - 1));
            const std::uint64_t start = s - g;
            std::uint64_t best = fingers[k - 1];
            for (auto f : fingers)
                if (f >= start && f < best) best = f;
            observe(acc, 1, 0, best == fingers[k - 1] ? 1.0 : 0.0);
        }
    })[0];
}

std::vector<Estimate> fallback(const RingModel& ring, int k, std::span<const double> finger_dead,
                               std::uint64_t samples, std::uint64_t seed, Exec exec)
{
    check_finger(ring, k);
    if (finger_dead.size() < static_cast<std::size_t>(k)) throw std::invalid_argument("need f_1..f_k");
    const double occ = ring.occupancy();
    const std::uint64_t s = std::uint64_t{1} << (k - 1);
    const std::size_t width = static_cast<std::size_t>(k);
    return run_chunks(width, samples, seed, exec, [&](Rng& rng, std::uint64_t count, std::vector<double>& acc) {
        std::vector<std::uint64_t> ahead;
        std::vector<std::uint64_t> node(k);
        std::vector<char> dead(k);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (std::uint64_t n = 0; n < count; ++n) {
            nodes_ahead(rng, occ, s, ahead);
            for (int j = 1; j <= k; ++j) node[j - 1] = first_at_or_after(ahead, std::uint64_t{1} << (j - 1));
            dead[k - 1] = 1;
            for (int j = k - 1; j >= 1; --j) {
                // a finger aimed at the same node as the one above shares its fate
                if (node[j - 1] == node[j])
                    dead[j - 1] = dead[j];
                else
                    dead[j - 1] = u(rng) < finger_dead[j - 1] ? 1 : 0;
            }
            int fell = k;
            for (int j = k - 1; j >= 1; --j) {
                if (!dead[j - 1]) {
                    fell = k - j;
                    break;
                }
            }
            for (int i = 1; i <= k; ++i) observe(acc, width, i - 1, fell == i ? 1.0 : 0.0);
        }
    });
}

namespace {

// Hops of a lookup from the node at 0 to key `target` with exact fingers and
// successors: forward to the closest preceding finger until the target falls
// between the current node and its successor.
int perfect_lookup_hops(const std::vector<std::uint64_t>& ring, std::uint64_t K, std::uint64_t target)
{
    auto succ_of = [&](std::uint64_t key) { // first node >= key, wrapping
        auto it = std::lower_bound(ring.begin(), ring.end(), key % K);
        return it == ring.end() ? ring.front() : *it;
    };
    auto dist = [&](std::uint64_t a, std::uint64_t b) { return (b + K - a) % K; };
    if (ring.size() == 1) return 1;
    std::uint64_t cur = 0;
    int hops = 0;
    for (;;) {
        const std::uint64_t s1 = succ_of(cur + 1);
        const std::uint64_t to_target = dist(cur, target);
        if (to_target != 0 && to_target <= dist(cur, s1)) return hops + 1;
        std::uint64_t next = s1;
        for (std::uint64_t step = K >> 1; step >= 1; step >>= 1) {
            const std::uint64_t f = succ_of(cur + step);
            const std::uint64_t df = dist(cur, f);
            if (df > 0 && df < to_target) {
                next = f;
                break;
            }
        }
        cur = next;
        ++hops;
    }
}

std::vector<std::uint64_t> sample_ring(Rng& rng, double occ, std::uint64_t K)
{
    // node at 0; geometric skips reproduce independent per-key occupancy
    std::vector<std::uint64_t> ring{0};
    std::uint64_t pos = 0;
    for (;;) {
        pos += draw_gap(rng, occ);
        if (pos >= K) break;
        ring.push_back(pos);
    }
    return ring;
}

} // namespace

Estimate static_lookup_hops(const RingModel& ring, std::uint64_t samples, std::uint64_t seed, Exec exec)
{
    const std::uint64_t K = std::uint64_t{1} << ring.bits;
    const double occ = ring.occupancy();
    return run_chunks(1, samples, seed, exec, [&](Rng& rng, std::uint64_t count, std::vector<double>& acc) {
        std::uniform_int_distribution<std::uint64_t> pick(1, K - 1);
        for (std::uint64_t i = 0; i < count; ++i) {
            const auto r = sample_ring(rng, occ, K);
            observe(acc, 1, 0, perfect_lookup_hops(r, K, pick(rng)));
        }
    })[0];
}

Estimate static_lookup_hops_at(const RingModel& ring, std::uint64_t distance, std::uint64_t samples,
                               std::uint64_t seed, Exec exec)
{
    const std::uint64_t K = std::uint64_t{1} << ring.bits;
    if (distance < 1 || distance >= K) throw std::out_of_range("distance must be in 1..K-1");
    const double occ = ring.occupancy();
    return run_chunks(1, samples, seed, exec, [&](Rng& rng, std::uint64_t count, std::vector<double>& acc) {
        for (std::uint64_t i = 0; i < count; ++i) {
            const auto r = sample_ring(rng, occ, K);
            observe(acc, 1, 0, perfect_lookup_hops(r, K, distance));
        }
    })[0];
}

bool agrees(const Estimate& e, double expected, double sigmas)
{
    const double floor = 1.0 / static_cast<double>(std::max<std::uint64_t>(e.samples, 1));
    return std::abs(e.mean - expected) <= sigmas * std::max(e.stderr_, floor);
}

} // namespace chordchurn::oracle
