#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace paneldml {

// All randomness in the library flows through this generator so that results
// are reproducible across platforms and standard-library versions. Streams are
// derived from a master seed plus named tags, never from a shared global.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& word : state_) word = splitmix64(x);
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). Rejection-free enough for our sizes.
    std::uint64_t below(std::uint64_t n) {
        // Debiased multiply-shift (Lemire).
        std::uint64_t x = next();
        unsigned __int128 m = static_cast<unsigned __int128>(x) * n;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (lo < threshold) {
                x = next();
                m = static_cast<unsigned __int128>(x) * n;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Standard normal via the Marsaglia polar method.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    template <typename T> void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    std::vector<std::uint32_t> permutation(std::uint32_t n) {
        std::vector<std::uint32_t> p(n);
        for (std::uint32_t i = 0; i < n; ++i) p[i] = i;
        shuffle(p);
        return p;
    }

    static std::uint64_t splitmix64(std::uint64_t& x) {
        std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::array<std::uint64_t, 4> state_{};
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Named stream derivation: hash the master seed with a sequence of tags so
/// each (component, purpose, index) owns an independent stream.
class SeedSequence {
  public:
    explicit SeedSequence(std::uint64_t master) : h_(0x811c9dc5cbf29ce4ULL ^ master) { mix(master); }

    SeedSequence& with(std::string_view tag) {
        for (char c : tag) mix(static_cast<std::uint64_t>(static_cast<unsigned char>(c)));
        return *this;
    }

    SeedSequence& with(std::uint64_t v) {
        mix(v);
        return *this;
    }

    std::uint64_t seed() const { return h_; }
    Rng rng() const { return Rng(h_); }

  private:
    void mix(std::uint64_t v) {
        h_ ^= v + 0x9e3779b97f4a7c15ULL + (h_ << 6) + (h_ >> 2);
        std::uint64_t x = h_;
        h_ = Rng::splitmix64(x);
    }

    std::uint64_t h_;
};

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view a) {
    return SeedSequence(master).with(a).seed();
}
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view a, std::uint64_t b) {
    return SeedSequence(master).with(a).with(b).seed();
}
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view a, std::uint64_t b,
                                 std::string_view c) {
    return SeedSequence(master).with(a).with(b).with(c).seed();
}

} // namespace paneldml
