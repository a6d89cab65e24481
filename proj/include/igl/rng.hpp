#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace igl {

/// splitmix64 finalizer; good avalanche, used for seed derivation.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t hash_name(std::string_view name) {
    // FNV-1a
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : name) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Seedable, splittable random stream. Child streams are derived from the
/// parent's stream id (not its current state), so the split tree is fixed by
/// the master seed alone. All draws go through explicit helpers instead of
/// std distributions to keep byte-identical output across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : stream_id_(seed), engine_(mix64(seed)) {}

    Rng split(std::uint64_t salt) const { return Rng(mix64(stream_id_ ^ mix64(salt))); }
    Rng split(std::string_view name) const { return split(hash_name(name)); }
    Rng split(std::string_view name, std::uint64_t salt) const {
        return split(hash_name(name) ^ mix64(salt + 0x6a09e667f3bcc908ULL));
    }

    std::uint64_t stream_id() const { return stream_id_; }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform draw in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    /// Uniform integer in {0, ..., n-1}, n >= 1.
    int uniform_int(int n) {
        int v = static_cast<int>(uniform() * n);
        return v >= n ? n - 1 : v;
    }

    /// Index drawn proportionally to the (nonnegative) weights.
    int categorical(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = uniform() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return static_cast<int>(i);
        }
        return static_cast<int>(weights.size()) - 1;
    }

private:
    std::uint64_t stream_id_;
    std::mt19937_64 engine_;
};

} // namespace igl
