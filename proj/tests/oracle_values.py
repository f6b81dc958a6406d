"""Independent reference values frozen into test_analytics.cpp.

Everything here is computed from first principles on the line model (a node at
0, every other key occupied independently with probability q = 1 - rho) by
exact enumeration or direct sums with rational arithmetic. None of it shares
code or formulas with the C++ closed forms.

    python3 tests/oracle_values.py
"""

from fractions import Fraction as F
from itertools import product
from math import comb

RHO = F(7, 10)
Q = 1 - RHO


def share(k, j, rho=RHO):
    """P(node and >= j immediate predecessors resolve finger k to one node).

    Predecessor j sits b keys back (b = sum of j gaps); it shares iff b < s and
    the b keys just before the start s are empty.
    """
    q = 1 - rho
    s = 2 ** (k - 1)
    return sum(comb(b - 1, j - 1) * q**j * rho ** (b - j) * rho**b for b in range(j, s))


def occupancy_patterns(length):
    for bits in product((0, 1), repeat=length):
        w = F(1)
        for b in bits:
            w *= Q if b else RHO
        yield bits, w


def join_replication(k):
    """Joiner g keys before its successor v (at 0). Its finger k start s - g is
    past v when g < s; it takes v's first finger at or after that start.
    Replication: that finger is v's finger k."""
    s = 2 ** (k - 1)
    total = F(0)
    for occ, w in occupancy_patterns(s - 1):  # keys 1..s-1
        nodes = [i + 1 for i, b in enumerate(occ) if b]

        def finger(j):  # first node >= 2^(j-1); None means "past s - 1", i.e. v's finger k
            lo = 2 ** (j - 1)
            return next((x for x in nodes if x >= lo), None)

        for g in range(1, s):
            pg = Q * RHO ** (g - 1)
            start = s - g
            chosen = None
            for j in range(1, k + 1):
                f = finger(j) if j < k else None
                val = f if f is not None else 10**9
                if val >= start:
                    chosen = f
                    break
            if chosen is None:
                total += w * pg
    return total


def fallback(k, dead):
    """Finger k is dead; return P(first alive finger is k - i) for i = 1..k-1
    and P(none alive) at i = k. Fingers on the same node share its fate."""
    s = 2 ** (k - 1)
    out = [F(0)] * (k + 1)
    for occ, w in occupancy_patterns(s - 1):
        nodes = [i + 1 for i, b in enumerate(occ) if b]
        target = []
        for j in range(1, k + 1):
            lo = 2 ** (j - 1)
            x = next((x for x in nodes if x >= lo), None)
            target.append(x if x is not None and j < k else "far")
        # distinct targets among fingers 1..k-1 that differ from finger k's
        distinct = sorted({t for t in target[:-1] if t != "far"})
        for states in product((0, 1), repeat=len(distinct)):
            ws = F(1)
            alive = {}
            for t, st in zip(distinct, states):
                # the probability belongs to the highest finger aimed at t
                jmax = max(j for j in range(1, k) if target[j - 1] == t)
                ws *= dead[jmax - 1] if st else 1 - dead[jmax - 1]
                alive[t] = not st
            fell = k
            for j in range(k - 1, 0, -1):
                t = target[j - 1]
                if t != "far" and alive[t]:
                    fell = k - j
                    break
            out[fell] += w * ws
    return out[1:]


def static_costs(bits):
    """Expected hops with perfect routing state, per target distance t, on a
    2^bits ring (node at 0, other keys occupied with probability q)."""
    K = 2**bits
    cost = [F(0)] * K
    for occ, w in occupancy_patterns(K - 1):
        ring = [0] + [i + 1 for i, b in enumerate(occ) if b]

        def succ(key):
            key %= K
            return next((x for x in ring if x >= key), ring[0])

        for t in range(1, K):
            cur, hops = 0, 0
            while True:
                s1 = succ(cur + 1)
                to_t = (t - cur) % K
                if 0 < to_t <= (s1 - cur) % K or len(ring) == 1:
                    hops += 1
                    break
                nxt = s1
                step = K // 2
                while step >= 1:
                    f = succ(cur + step)
                    df = (f - cur) % K
                    if 0 < df < to_t:
                        nxt = f
                        break
                    step //= 2
                cur = nxt
                hops += 1
            cost[t] += w * hops
    return cost


if __name__ == "__main__":
    print("rho =", RHO)
    for k in (2, 3, 4, 6, 9):
        print(f"share k={k}:", [float(share(k, j)) for j in (1, 2, 3)])
    for k in (2, 3, 4, 5):
        print(f"join k={k}:", float(join_replication(k)))
    dead = [F(1, 10), F(1, 8), F(1, 6), F(1, 5), F(1, 4)]
    for k in (3, 5):
        print(f"fallback k={k}:", [float(x) for x in fallback(k, dead)])
    c = static_costs(4)
    print("static C_t bits=4:", [float(x) for x in c[1:]])
    print("static L bits=4:", float(sum(c[1:]) / 16))
    # w1 = 2 / (3 + r alpha) at r = 200, alpha = 1/2
    print("w1(200, .5) =", F(2, 3 + 100), float(F(2, 103)))
