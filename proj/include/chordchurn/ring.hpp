#pragma once

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace chordchurn {

// Identifier on the ring. Plain value; the owning KeySpace supplies the modulus.
struct RingKey {
    std::uint64_t value = 0;

    constexpr RingKey() = default;
    constexpr explicit RingKey(std::uint64_t v) : value(v) {}

    friend constexpr auto operator<=>(const RingKey&, const RingKey&) = default;
};

enum class Openness { OpenOpen, OpenClosed, ClosedOpen };

// Arc from `from` to `to`, walked clockwise. from > to wraps through zero.
// Degenerate arcs (from == to): (a,a) is everything except a, (a,a] and [a,a)
// are the whole ring.
struct KeyInterval {
    RingKey from;
    RingKey to;
    Openness openness = Openness::OpenClosed;
};

class KeySpace {
public:
    static constexpr int kMaxBits = 62;

    explicit KeySpace(int bits) : bits_(bits)
    {
        if (bits < 1 || bits > kMaxBits)
            throw std::invalid_argument("key space bits must be in [1, 62], got " + std::to_string(bits));
        size_ = std::uint64_t{1} << bits;
    }

    int bits() const { return bits_; }
    std::uint64_t size() const { return size_; }

    RingKey key(std::uint64_t v) const
    {
        if (v >= size_)
            throw std::out_of_range("key " + std::to_string(v) + " outside key space");
        return RingKey{v};
    }

    RingKey add(RingKey a, std::int64_t d) const
    {
        // two's complement wrap gives the right residue since size_ is a power of two
        return RingKey{(a.value + static_cast<std::uint64_t>(d)) & (size_ - 1)};
    }

    // Steps clockwise from a to b, in [0, K).
    std::uint64_t distance(RingKey a, RingKey b) const { return (b.value - a.value) & (size_ - 1); }

    // Start of finger i (1-based): n + 2^(i-1).
    RingKey finger_start(RingKey n, int i) const
    {
        if (i < 1 || i > bits_)
            throw std::out_of_range("finger index " + std::to_string(i) + " outside 1.." + std::to_string(bits_));
        return RingKey{(n.value + (std::uint64_t{1} << (i - 1))) & (size_ - 1)};
    }

    bool contains(const KeyInterval& iv, RingKey x) const
    {
        const std::uint64_t span = distance(iv.from, iv.to);
        const std::uint64_t dx = distance(iv.from, x);
        switch (iv.openness) {
        case Openness::OpenOpen:
            if (span == 0) return dx != 0;
            return dx > 0 && dx < span;
        case Openness::OpenClosed:
            if (span == 0) return true;
            return dx > 0 && dx <= span;
        case Openness::ClosedOpen:
            if (span == 0) return true;
            return dx < span;
        }
        return false;
    }

    bool in_open(RingKey x, RingKey a, RingKey b) const { return contains({a, b, Openness::OpenOpen}, x); }
    bool in_open_closed(RingKey x, RingKey a, RingKey b) const { return contains({a, b, Openness::OpenClosed}, x); }

private:
    int bits_;
    std::uint64_t size_;
};

} // namespace chordchurn
