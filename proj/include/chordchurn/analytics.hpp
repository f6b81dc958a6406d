#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace chordchurn {

// Parameters of the steady-state churn model. Joins and failures occur at the
// same per-node rate; r is the stabilization/failure rate ratio and alpha the
// share of stabilizations spent on successors.
struct ChurnParams {
    double n = 1000;       // expected node count
    int bits = 20;         // K = 2^bits, also the number of fingers M
    double alpha = 0.5;
    double r = 500;
    int successors = 6;    // S

    double key_space() const { return static_cast<double>(std::uint64_t{1} << bits); }
    int fingers() const { return bits; }
    // Geometric parameter of the inter-node distance distribution, (K - N) / K.
    double rho() const { return (key_space() - n) / key_space(); }

    void validate() const;
};

// Thrown when the finger-failure balance has no real root: finger
// stabilization is too slow to offset replication on joins.
class NoSteadyState : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

constexpr int kShareOrders = 3;

// p_1(k), p_2(k), p_3(k) for k = 1..M (row k-1).
using ShareTable = std::vector<std::array<double, kShareOrders>>;

// --- inter-node distance distribution ---------------------------------------

double interval_pdf(std::uint64_t x, const ChurnParams& p);
double at_least_one(std::uint64_t x, const ChurnParams& p);        // a(x)
double first_node_at(std::uint64_t i, const ChurnParams& p);       // b_i
double first_node_conditional(std::uint64_t i, std::uint64_t x, const ChurnParams& p); // bc(i, x)

// --- pointer sharing and replication ------------------------------------------

// Probability that a node and at least `order` of its immediate predecessors
// resolve finger k to the same node.
double share_prob(int k, int order, const ChurnParams& p);
ShareTable share_table(const ChurnParams& p);

// Probability that a joining node ends up with exactly its successor's k-th
// finger entry under the simulator's join rule (fingers whose start is past
// the successor are estimated as the successor's first finger at or after
// that start).
double join_replication_prob(int k, const ChurnParams& p);

// Coarser closed form for the same quantity: the probability of at least two
// nodes within 2^(k-2) - 1 keys. Tends to 0 for small k and to 1 for large k.
double join_replication_prob_approx(int k, const ChurnParams& p);

// --- successor pointers ----------------------------------------------------------

double w1_theory(const ChurnParams& p);
double d1_theory(const ChurnParams& p);
double inconsistency_theory(const ChurnParams& p);

// --- finger pointers -------------------------------------------------------------

// Inputs of the per-finger balance equation for one k.
struct FingerBalance {
    double share_sum = 0;     // p_1 + p_2 + p_3
    double replication = 0;   // p_join(k)
    double stabilization = 0; // r (1 - alpha) / M
};

FingerBalance finger_balance(int k, const ChurnParams& p);

// Smaller root of (1+P) f^2 - B f + (1+P) = 0, B = 2P + 2 - p_join + r(1-alpha)/M.
double fk_from_balance(const FingerBalance& b);

// Net gain rate (per unit failure rate) of failed k-th fingers at fraction f:
// joins copy a failed finger, failures of shared targets add 1 + P per alive
// pointer pair, finger stabilization removes them.
double fk_balance_residual(double f, const FingerBalance& b);

double fk_theory(int k, const ChurnParams& p);
std::vector<double> fk_vector(const ChurnParams& p);

// --- lookup cost -------------------------------------------------------------------

// C_1 from the truncated series sum_j j * d_1...d_{j-1} * (1 - d_j).
double c1_theory(std::span<const double> successor_dead);

// h_k(i): probability that a lookup whose finger k is dead falls back exactly
// i fingers; i == k is the fall-through to the successor list.
// `finger_dead[j-1]` is f_j.
double fallback_prob(int k, int i, const ChurnParams& p, std::span<const double> finger_dead);
double fallback_prob(int k, int i, const ChurnParams& p);

struct CostInputs {
    std::vector<double> finger_dead;    // f_1..f_M
    std::vector<double> successor_dead; // d_1..d_S
};

CostInputs cost_inputs(const ChurnParams& p);

// C_t for t = 0..K-1; entry 0 is unused and set to 0.
std::vector<double> lookup_cost_table(const ChurnParams& p, const CostInputs& in);
std::vector<double> lookup_cost_table(const ChurnParams& p);

// L = sum_{t=1}^{K-1} C_t / K.
double mean_lookup_cost(std::span<const double> cost_table);

// --- everything at one parameter point ------------------------------------------

struct TheoryPoint {
    ChurnParams params;
    double rho = 0;
    double w1 = 0;
    double d1 = 0;
    double inconsistency = 0;
    std::vector<double> f;          // f_1..f_M
    std::vector<double> p_join;     // p_join(1..M)
    ShareTable p_share;
    std::vector<double> cost;       // C_t, t = 0..K-1 (empty unless requested)
    double c1 = 0;
    double L = 0;
};

struct TheoryOptions {
    bool keep_cost_table = false;
    // Replace the closed-form sharing probabilities, e.g. with tabulated
    // Monte Carlo estimates.
    std::optional<ShareTable> share_override;
};

TheoryPoint compute_theory(const ChurnParams& p, const TheoryOptions& opts = {});

} // namespace chordchurn
