#include "chordchurn/analytics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

namespace chordchurn {

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

void check_finger(int k, const ChurnParams& p)
{
    if (k < 1 || k > p.fingers())
        throw std::out_of_range("finger index " + std::to_string(k) + " outside 1.." + std::to_string(p.fingers()));
}

// P(Binomial(trials, q) >= at_least) with failure probability u = 1 - q.
double binomial_upper_tail(std::uint64_t trials, double q, double u, int at_least)
{
    if (trials < static_cast<std::uint64_t>(at_least)) return 0.0;
    auto term = [&](std::uint64_t i) {
        const double n = static_cast<double>(trials);
        const double log_choose = std::lgamma(n + 1) - std::lgamma(static_cast<double>(i) + 1)
                                  - std::lgamma(n - static_cast<double>(i) + 1);
        return std::exp(log_choose) * std::pow(q, static_cast<double>(i)) * std::pow(u, n - static_cast<double>(i));
    };
    double tail = 0.0;
    if (trials <= 64) {
        for (std::uint64_t i = at_least; i <= trials; ++i) tail += term(i);
    } else {
        double lower = 0.0;
        for (int i = 0; i < at_least; ++i) lower += term(static_cast<std::uint64_t>(i));
        tail = 1.0 - lower;
    }
    return clamp01(tail);
}

// (sum_{j<len} rho^(y0+j), sum_{j<len} j rho^(y0+j))
std::pair<double, double> geometric_moments(double rho, std::uint64_t y0, std::uint64_t len)
{
    if (len == 0) return {0.0, 0.0};
    const double base = std::pow(rho, static_cast<double>(y0));
    if (len <= 4096) {
        double s0 = 0.0, s1 = 0.0, w = base;
        for (std::uint64_t j = 0; j < len; ++j) {
            s0 += w;
            s1 += static_cast<double>(j) * w;
            w *= rho;
        }
        return {s0, s1};
    }
    const double q = 1.0 - rho;
    const double L = static_cast<double>(len);
    const double lr = std::log1p(-q);
    auto g0 = [&](double n) { return -std::expm1(n * lr) / q; };
    const double s0 = g0(L);
    const double s1 = (rho * g0(L - 1) - (L - 1) * std::exp(L * lr)) / q;
    return {base * s0, base * s1};
}

ShareTable closed_form_share_table(const ChurnParams& p)
{
    ShareTable t(p.fingers());
    for (int k = 1; k <= p.fingers(); ++k)
        for (int o = 1; o <= kShareOrders; ++o) t[k - 1][o - 1] = share_prob(k, o, p);
    return t;
}

FingerBalance balance_from(int k, const ChurnParams& p, const ShareTable& share)
{
    const auto& row = share.at(k - 1);
    FingerBalance b;
    b.share_sum = row[0] + row[1] + row[2];
    b.replication = join_replication_prob(k, p);
    b.stabilization = p.r * (1.0 - p.alpha) / p.fingers();
    return b;
}

std::vector<double> fallback_row(int k, const ChurnParams& p, std::span<const double> f)
{
    std::vector<double> h(k + 1, 0.0);
    const double rho = p.rho();
    double carry = 1.0; // probability that fingers k-1..k-i+1 were all unusable
    for (int i = 1; i < k; ++i) {
        const double shares_above = std::pow(rho, std::ldexp(1.0, k - i - 1));
        const double dead = f[k - i - 1];
        h[i] = carry * (1.0 - shares_above) * (1.0 - dead);
        carry *= shares_above + (1.0 - shares_above) * dead;
    }
    h[k] = carry;
    return h;
}

} // namespace

void ChurnParams::validate() const
{
    if (bits < 2 || bits > 40) throw std::invalid_argument("bits must be in [2, 40]");
    if (!(n > 0) || n > key_space()) throw std::invalid_argument("node count must be in (0, K]");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must be in [0, 1]");
    if (!(r >= 0.0) || !std::isfinite(r)) throw std::invalid_argument("r must be finite and >= 0");
    if (successors < 1) throw std::invalid_argument("successor list length must be >= 1");
}

double interval_pdf(std::uint64_t x, const ChurnParams& p)
{
    if (x < 1) throw std::invalid_argument("interval length must be >= 1");
    const double rho = p.rho();
    return std::pow(rho, static_cast<double>(x - 1)) * (1.0 - rho);
}

double at_least_one(std::uint64_t x, const ChurnParams& p)
{
    return 1.0 - std::pow(p.rho(), static_cast<double>(x));
}

double first_node_at(std::uint64_t i, const ChurnParams& p)
{
    const double rho = p.rho();
    return std::pow(rho, static_cast<double>(i)) * (1.0 - rho);
}

double first_node_conditional(std::uint64_t i, std::uint64_t x, const ChurnParams& p)
{
    if (x == 0) throw std::invalid_argument("conditioning on an empty range");
    if (i >= x) throw std::out_of_range("offset must be below the range length");
    return first_node_at(i, p) / at_least_one(x, p);
}

double share_prob(int k, int order, const ChurnParams& p)
{
    check_finger(k, p);
    if (order < 1 || order > kShareOrders) throw std::out_of_range("share order must be 1, 2 or 3");
    // The node and its `order` predecessors share finger k iff their summed
    // gaps G stay below 2^(k-1) and the G keys ending at the finger start are
    // empty. G is negative binomial, which folds into a binomial tail.
    const double rho = p.rho();
    const std::uint64_t trials = (std::uint64_t{1} << (k - 1)) - 1;
    const double u = rho * rho;
    const double tail = binomial_upper_tail(trials, 1.0 - u, u, order);
    return clamp01(std::pow(rho / (1.0 + rho), order) * tail);
}

ShareTable share_table(const ChurnParams& p) { return closed_form_share_table(p); }

double join_replication_prob(int k, const ChurnParams& p)
{
    check_finger(k, p);
    if (k == 1) return 0.0;
    // Joiner u sits D = s - g keys before the finger start u + s relative to
    // its successor v. v answers with its lowest finger at or after the start;
    // that finger is fin_k exactly when the keys from its start up to v + s
    // are empty. Summing the gap and "last node before the start" positions
    // band by band (fingers split the range at powers of two) gives:
    const double rho = p.rho();
    const double q = 1.0 - rho;
    const std::uint64_t s = std::uint64_t{1} << (k - 1);
    const double sd = static_cast<double>(s);

    // No node between v and the start.
    double total = (1.0 - std::pow(rho, sd - 1)) * std::pow(rho, sd - 1);

    for (int b = 0; (std::uint64_t{1} << b) <= s - 2; ++b) {
        const std::uint64_t lo = std::uint64_t{1} << b;
        const std::uint64_t hi = std::min((std::uint64_t{1} << (b + 1)) - 1, s - 2);
        const std::uint64_t band_top = std::uint64_t{1} << (b + 1);
        const double c = static_cast<double>(std::min(band_top, s - 1));
        const double before_top = std::pow(rho, static_cast<double>(s - band_top));
        double tail_sum = 0.0; // sum_{e=1}^{s-1-band_top} rho^e
        if (s - 1 > band_top) tail_sum = geometric_moments(rho, 1, s - 1 - band_top).first;

        const std::uint64_t y0 = s - 2 - hi;
        const auto [m0, m1] = geometric_moments(rho, y0, hi - lo + 1);
        // sum over x of rho^(s-2-x) (c - x), with y = s-2-x
        const double offset = c - static_cast<double>(s) + 2.0 + static_cast<double>(y0);
        const double weighted = offset * m0 + m1;
        total += q * q * (before_top * weighted + tail_sum * m0);
    }
    return clamp01(total);
}

double join_replication_prob_approx(int k, const ChurnParams& p)
{
    check_finger(k, p);
    if (k <= 2) return 0.0;
    const double rho = p.rho();
    const double x = std::ldexp(1.0, k - 2) - 2.0;
    const double rx = std::pow(rho, x);
    const double v = rho * (1.0 - rx) + (1.0 - rho) * (1.0 - rx) - (1.0 - rho) * rho * x * std::pow(rho, x - 1.0);
    return clamp01(v);
}

double w1_theory(const ChurnParams& p) { return 2.0 / (3.0 + p.r * p.alpha); }
double d1_theory(const ChurnParams& p) { return 0.5 * w1_theory(p); }
double inconsistency_theory(const ChurnParams& p) { return w1_theory(p) - d1_theory(p); }

FingerBalance finger_balance(int k, const ChurnParams& p)
{
    check_finger(k, p);
    ShareTable row(p.fingers());
    for (int o = 1; o <= kShareOrders; ++o) row[k - 1][o - 1] = share_prob(k, o, p);
    return balance_from(k, p, row);
}

double fk_from_balance(const FingerBalance& b)
{
    const double w = 1.0 + b.share_sum;
    const double lin = 2.0 * w - b.replication + b.stabilization;
    double disc = lin * lin - 4.0 * w * w;
    if (disc < 0.0) {
        if (disc > -1e-12 * lin * lin)
            disc = 0.0;
        else
            throw NoSteadyState("finger stabilization rate too low for a steady state");
    }
    // smaller root; the roots multiply to 1
    return clamp01(2.0 * w / (lin + std::sqrt(disc)));
}

double fk_balance_residual(double f, const FingerBalance& b)
{
    const double w = 1.0 + b.share_sum;
    return b.replication * f + w * (1.0 - f) * (1.0 - f) - b.stabilization * f;
}

double fk_theory(int k, const ChurnParams& p) { return fk_from_balance(finger_balance(k, p)); }

std::vector<double> fk_vector(const ChurnParams& p)
{
    const auto share = closed_form_share_table(p);
    std::vector<double> f(p.fingers());
    for (int k = 1; k <= p.fingers(); ++k) f[k - 1] = fk_from_balance(balance_from(k, p, share));
    return f;
}

double c1_theory(std::span<const double> successor_dead)
{
    if (successor_dead.empty()) throw std::invalid_argument("need at least one successor");
    double c = 0.0, reach = 1.0;
    for (std::size_t j = 0; j < successor_dead.size(); ++j) {
        c += static_cast<double>(j + 1) * reach * (1.0 - successor_dead[j]);
        reach *= successor_dead[j];
    }
    return c;
}

double fallback_prob(int k, int i, const ChurnParams& p, std::span<const double> finger_dead)
{
    check_finger(k, p);
    if (i < 1 || i > k) throw std::out_of_range("fallback distance must be in 1..k");
    if (finger_dead.size() < static_cast<std::size_t>(k)) throw std::invalid_argument("need f_1..f_k");
    return fallback_row(k, p, finger_dead)[i];
}

double fallback_prob(int k, int i, const ChurnParams& p)
{
    const auto f = fk_vector(p);
    return fallback_prob(k, i, p, f);
}

CostInputs cost_inputs(const ChurnParams& p)
{
    CostInputs in;
    in.finger_dead = fk_vector(p);
    in.successor_dead.assign(p.successors, d1_theory(p));
    return in;
}

std::vector<double> lookup_cost_table(const ChurnParams& p, const CostInputs& in)
{
    if (p.bits > 26) throw std::invalid_argument("cost table limited to bits <= 26");
    if (in.finger_dead.size() != static_cast<std::size_t>(p.fingers()))
        throw std::invalid_argument("need one failure fraction per finger");

    const std::uint64_t K = std::uint64_t{1} << p.bits;
    const double rho = p.rho();
    const double q = 1.0 - rho;

    std::vector<double> rho_pow(K + 1);
    rho_pow[0] = 1.0;
    for (std::uint64_t j = 1; j <= K; ++j) rho_pow[j] = rho_pow[j - 1] * rho;

    std::vector<std::vector<double>> fallback(p.fingers() + 1);
    for (int k = 1; k <= p.fingers(); ++k) fallback[k] = fallback_row(k, p, in.finger_dead);

    std::vector<double> cost(K, 0.0);
    // discounted prefix: acc[t] = sum_{j=1}^{t} rho^(t-j) C_j
    std::vector<double> acc(K, 0.0);
    auto window = [&](std::uint64_t end, std::uint64_t len) { // sum_{l<len} rho^l C_{end-l}
        return acc[end] - rho_pow[len] * acc[end - len];
    };

    if (K > 1) {
        cost[1] = c1_theory(in.successor_dead);
        acc[1] = cost[1];
    }
    for (std::uint64_t t = 2; t < K; ++t) {
        // closest preceding finger: largest k with start 2^(k-1) < t
        const int k = std::bit_width(t - 1);
        const std::uint64_t xi = std::uint64_t{1} << (k - 1);
        const std::uint64_t m = t - xi;
        const double a_m = 1.0 - rho_pow[m];
        const double fk = in.finger_dead[k - 1];
        const auto& h = fallback[k];

        double c = cost[xi] * (1.0 - a_m);
        c += (1.0 - fk) * (a_m + q * acc[m]);

        double after_timeout = 1.0 + 2.0 * h[k];
        for (int i = 1; i < k; ++i) {
            if (h[i] == 0.0) continue;
            const std::uint64_t x = xi >> i;
            const std::uint64_t end = xi - x + m;
            const double a_x = 1.0 - rho_pow[x];
            after_timeout += h[i] * (1.0 + q / a_x * window(end, x));
        }
        c += fk * a_m * after_timeout;

        cost[t] = c;
        acc[t] = rho * acc[t - 1] + c;
    }
    return cost;
}

std::vector<double> lookup_cost_table(const ChurnParams& p) { return lookup_cost_table(p, cost_inputs(p)); }

double mean_lookup_cost(std::span<const double> cost_table)
{
    if (cost_table.size() < 2) throw std::invalid_argument("cost table too small");
    double sum = 0.0;
    for (std::size_t t = 1; t < cost_table.size(); ++t) sum += cost_table[t];
    return sum / static_cast<double>(cost_table.size());
}

TheoryPoint compute_theory(const ChurnParams& p, const TheoryOptions& opts)
{
    p.validate();
    TheoryPoint tp;
    tp.params = p;
    tp.rho = p.rho();
    tp.w1 = w1_theory(p);
    tp.d1 = d1_theory(p);
    tp.inconsistency = inconsistency_theory(p);
    tp.p_share = opts.share_override ? *opts.share_override : closed_form_share_table(p);
    if (tp.p_share.size() != static_cast<std::size_t>(p.fingers()))
        throw std::invalid_argument("share table must have one row per finger");

    tp.p_join.resize(p.fingers());
    tp.f.resize(p.fingers());
    for (int k = 1; k <= p.fingers(); ++k) {
        tp.p_join[k - 1] = join_replication_prob(k, p);
        tp.f[k - 1] = fk_from_balance(balance_from(k, p, tp.p_share));
    }

    CostInputs in{tp.f, std::vector<double>(p.successors, tp.d1)};
    tp.c1 = c1_theory(in.successor_dead);
    auto table = lookup_cost_table(p, in);
    tp.L = mean_lookup_cost(table);
    if (opts.keep_cost_table) tp.cost = std::move(table);
    return tp;
}

} // namespace chordchurn
