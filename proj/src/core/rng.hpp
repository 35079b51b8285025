#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace mmgan {

// Deterministic random stream. Distribution transforms are implemented by
// hand on top of mt19937_64 so draws are reproducible for a fixed build,
// independent of the standard library's distribution implementations.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal via Box-Muller (cached second draw)
    double normal() {
        if (has_spare_) { has_spare_ = false; return spare_; }
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // integer in [0, n)
    uint64_t below(uint64_t n) { return engine_() % n; }

    bool bernoulli(double p) { return uniform() < p; }

    std::string serialize() const;
    static Rng deserialize(const std::string& state);

    bool operator==(const Rng& other) const {
        return engine_ == other.engine_ && has_spare_ == other.has_spare_ &&
               (!has_spare_ || spare_ == other.spare_);
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace mmgan
