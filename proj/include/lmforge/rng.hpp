#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace lmforge {

// Deterministic random stream. The engine (mt19937_64) is fully specified by
// the standard; the distribution transforms are hand-rolled because the std
// distribution objects are implementation-defined and would break the
// byte-identical-output contract across toolchains.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // [0, 1)
    double next_double() { return (next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // inclusive bounds
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        if (hi <= lo) return lo;
        std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(next_u64() % span);
    }

    bool bernoulli(double p) { return next_double() < p; }

    // inverse CDF; rate in events per millisecond
    double exponential(double rate) {
        double u = next_double();
        return -std::log1p(-u) / rate;
    }

    // Box-Muller, one variate per call
    double normal(double mu, double sigma) {
        double u1 = 1.0 - next_double();  // (0, 1]
        double u2 = next_double();
        double r = std::sqrt(-2.0 * std::log(u1));
        return mu + sigma * r * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    // Stable substream derivation: FNV-1a over seed and tags, so per-entity
    // streams are independent of iteration order.
    static std::uint64_t derive(std::uint64_t seed, std::string_view a, std::string_view b = {}) {
        std::uint64_t h = 14695981039346656037ull;
        auto mix = [&h](std::uint64_t v) {
            for (int i = 0; i < 8; ++i) {
                h ^= (v >> (i * 8)) & 0xff;
                h *= 1099511628211ull;
            }
        };
        auto mix_str = [&h](std::string_view s) {
            for (unsigned char c : s) {
                h ^= c;
                h *= 1099511628211ull;
            }
            h ^= 0x9e;  // separator
            h *= 1099511628211ull;
        };
        mix(seed);
        mix_str(a);
        mix_str(b);
        return h;
    }

  private:
    std::mt19937_64 engine_;
};

}  // namespace lmforge
