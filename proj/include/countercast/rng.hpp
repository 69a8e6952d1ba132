#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ccast {

/// Deterministic random stream for one unit of work (one firm, one test).
/// Each stream owns its engine; nothing is shared across threads.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return uniform_(engine_); }
    double normal() { return normal_(engine_); }
    double normal(double mu, double sd) { return mu + sd * normal(); }

    /// Gamma(shape, rate=1) draw.
    double gamma(double shape) {
        std::gamma_distribution<double> g(shape, 1.0);
        return g(engine_);
    }

    /// Draws sigma^2 with 1/sigma^2 ~ Gamma(shape, rate).
    double inverse_gamma(double shape, double rate) { return rate / gamma(shape); }

    std::uint64_t next_u64() { return engine_(); }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// Stable substream seed for a named unit of work. Adding or removing one
/// firm from a run must not perturb any other firm's stream, so substreams
/// are keyed by (global seed, label) rather than by enumeration order.
std::uint64_t substream_seed(std::uint64_t global_seed, std::string_view label);

/// Variant keyed by an integer (bootstrap replicate, simulation index).
std::uint64_t substream_seed(std::uint64_t global_seed, std::uint64_t index);

}  // namespace ccast
