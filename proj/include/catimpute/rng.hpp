#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

namespace catimpute {

using Rng = std::mt19937_64;

// Mixes a master seed with stream identifiers (splitmix64 finalizer) so that
// every replication / chain / engine gets an independent, order-free stream.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t substream = 0);

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

// Uniform on [0, 1) from the top 53 bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Index drawn with probability proportional to weights (need not be normalized).
std::size_t draw_categorical(std::span<const double> weights, Rng& rng);

// Same as draw_categorical when the cumulative sums are already available.
std::size_t draw_from_cumulative(std::span<const double> cumulative, Rng& rng);

double draw_standard_normal(Rng& rng);

// Gamma with the rate parameterization (mean shape / rate).
double draw_gamma(double shape, double rate, Rng& rng);

// Beta(a, b) returned as (V, log(1 - V)); the log term stays finite and
// accurate when V is numerically 1.
struct BetaDraw {
  double value;
  double log_complement;
};
BetaDraw draw_beta(double a, double b, Rng& rng);

// Dirichlet(alpha) into out (same length).
void draw_dirichlet(std::span<const double> alpha, std::span<double> out, Rng& rng);

}  // namespace catimpute
