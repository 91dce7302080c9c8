#include "catimpute/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace catimpute {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Smallest positive value a gamma draw is allowed to return.
constexpr double kTiny = std::numeric_limits<double>::min();

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t substream) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
  h = splitmix64(h ^ splitmix64(substream + 0x8cb92ba72f3d8dd7ULL));
  return h;
}

std::size_t draw_categorical(std::span<const double> weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = uniform01(rng) * total;
  std::size_t last_positive = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k] <= 0.0) continue;
    last_positive = k;
    if (u < weights[k]) return k;
    u -= weights[k];
  }
  return last_positive;
}

std::size_t draw_from_cumulative(std::span<const double> cumulative, Rng& rng) {
  const double u = uniform01(rng) * cumulative.back();
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  if (it == cumulative.end()) --it;
  return static_cast<std::size_t>(it - cumulative.begin());
}

double draw_standard_normal(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

double draw_gamma(double shape, double rate, Rng& rng) {
  std::gamma_distribution<double> dist(shape, 1.0);
  return std::max(dist(rng), kTiny) / rate;
}

BetaDraw draw_beta(double a, double b, Rng& rng) {
  std::gamma_distribution<double> ga(a, 1.0);
  std::gamma_distribution<double> gb(b, 1.0);
  const double x = ga(rng);
  const double y = std::max(gb(rng), std::numeric_limits<double>::denorm_min());
  const double sum = x + y;
  return {x / sum, std::log(y) - std::log(sum)};
}

void draw_dirichlet(std::span<const double> alpha, std::span<double> out, Rng& rng) {
  double total = 0.0;
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    std::gamma_distribution<double> dist(alpha[k], 1.0);
    out[k] = dist(rng);
    total += out[k];
  }
  if (total <= 0.0) {
    // Every component underflowed; fall back to the mean.
    double a_total = 0.0;
    for (double a : alpha) a_total += a;
    for (std::size_t k = 0; k < alpha.size(); ++k) out[k] = alpha[k] / a_total;
    return;
  }
  for (std::size_t k = 0; k < alpha.size(); ++k) out[k] /= total;
}

}  // namespace catimpute
