#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "chordchurn/ring.hpp"

using namespace chordchurn;

TEST_CASE("keys are validated against the space")
{
    KeySpace ks(4);
    CHECK(ks.size() == 16);
    CHECK(ks.key(15).value == 15);
    CHECK_THROWS_AS(ks.key(16), std::out_of_range);
    CHECK_THROWS_AS(KeySpace(0), std::invalid_argument);
    CHECK_THROWS_AS(KeySpace(63), std::invalid_argument);
}

TEST_CASE("arithmetic wraps modulo K")
{
    KeySpace ks(4);
    CHECK(ks.add(RingKey{14}, 3).value == 1);
    CHECK(ks.add(RingKey{1}, -3).value == 14);
    CHECK(ks.distance(RingKey{14}, RingKey{1}) == 3);
    CHECK(ks.distance(RingKey{1}, RingKey{14}) == 13);
    CHECK(ks.distance(RingKey{5}, RingKey{5}) == 0);
}

TEST_CASE("finger starts")
{
    KeySpace ks(4);
    CHECK(ks.finger_start(RingKey{3}, 1).value == 4);
    CHECK(ks.finger_start(RingKey{3}, 4).value == 11);
    CHECK(ks.finger_start(RingKey{12}, 3).value == 0);
    CHECK_THROWS_AS(ks.finger_start(RingKey{0}, 0), std::out_of_range);
    CHECK_THROWS_AS(ks.finger_start(RingKey{0}, 5), std::out_of_range);
}

TEST_CASE("interval membership, including wrap and degenerate arcs")
{
    KeySpace ks(4);
    // (14, 2] wraps through zero
    CHECK(ks.in_open_closed(RingKey{15}, RingKey{14}, RingKey{2}));
    CHECK(ks.in_open_closed(RingKey{0}, RingKey{14}, RingKey{2}));
    CHECK(ks.in_open_closed(RingKey{2}, RingKey{14}, RingKey{2}));
    CHECK_FALSE(ks.in_open_closed(RingKey{14}, RingKey{14}, RingKey{2}));
    CHECK_FALSE(ks.in_open_closed(RingKey{3}, RingKey{14}, RingKey{2}));

    CHECK(ks.in_open(RingKey{3}, RingKey{2}, RingKey{5}));
    CHECK_FALSE(ks.in_open(RingKey{5}, RingKey{2}, RingKey{5}));
    CHECK_FALSE(ks.in_open(RingKey{2}, RingKey{2}, RingKey{5}));

    CHECK(ks.contains({RingKey{2}, RingKey{5}, Openness::ClosedOpen}, RingKey{2}));
    CHECK_FALSE(ks.contains({RingKey{2}, RingKey{5}, Openness::ClosedOpen}, RingKey{5}));

    // (a, a) is everything but a; (a, a] and [a, a) are everything
    for (std::uint64_t x = 0; x < 16; ++x) {
        CHECK(ks.in_open(RingKey{x}, RingKey{7}, RingKey{7}) == (x != 7));
        CHECK(ks.in_open_closed(RingKey{x}, RingKey{7}, RingKey{7}));
        CHECK(ks.contains({RingKey{7}, RingKey{7}, Openness::ClosedOpen}, RingKey{x}));
    }
}

TEST_CASE("membership agrees with a brute-force walk")
{
    KeySpace ks(5);
    for (std::uint64_t a = 0; a < 32; a += 3) {
        for (std::uint64_t b = 0; b < 32; b += 5) {
            // keys strictly after a up to and including b, walking clockwise
            std::vector<bool> oc(32, false);
            std::uint64_t x = a;
            do {
                x = (x + 1) % 32;
                oc[x] = true;
            } while (x != b);
            for (std::uint64_t y = 0; y < 32; ++y) {
                CHECK(ks.in_open_closed(RingKey{y}, RingKey{a}, RingKey{b}) == oc[y]);
                CHECK(ks.in_open(RingKey{y}, RingKey{a}, RingKey{b}) == (oc[y] && y != b && !(a == b && y == a)));
            }
        }
    }
}
