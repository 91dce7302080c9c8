#include "catimpute/pooling.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace catimpute {

namespace {

// Beyond this many degrees of freedom the t and normal quantiles agree to
// well under 1e-9.
constexpr double kNormalDf = 1e12;

void finish_interval(PooledEstimate& pe, double half_width, const PoolOptions& options) {
  pe.ci_low = pe.q_bar - half_width;
  pe.ci_high = pe.q_bar + half_width;
  pe.boundary = pe.ci_low < 0.0 || pe.ci_high > 1.0;
  if (options.clamp_to_unit) {
    pe.ci_low = std::max(pe.ci_low, 0.0);
    pe.ci_high = std::min(pe.ci_high, 1.0);
  }
}

void check_level(double level) {
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("confidence level must be in (0, 1)");
}

}  // namespace

double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(0.0, 1.0), p);
}

double student_t_quantile(double p, double df) {
  if (!(df < kNormalDf)) return normal_quantile(p);
  return boost::math::quantile(boost::math::students_t_distribution<double>(df), p);
}

PooledEstimate pool(std::span<const PointEstimate> estimates, const PoolOptions& options) {
  check_level(options.level);
  const std::size_t count = estimates.size();
  if (count < 2) throw ValidationError("pooling needs at least two completed-data estimates");
  const double L = static_cast<double>(count);

  PooledEstimate pe;
  // Centred on the first estimate so identical estimates pool exactly.
  const double q0 = estimates.front().q;
  double shift_sum = 0.0;
  double u_sum = 0.0;
  for (const auto& e : estimates) {
    shift_sum += e.q - q0;
    u_sum += e.u;
  }
  pe.q_bar = q0 + shift_sum / L;
  pe.u_bar = u_sum / L;
  double ss = 0.0;
  for (const auto& e : estimates) ss += (e.q - pe.q_bar) * (e.q - pe.q_bar);
  pe.b = ss / (L - 1.0);
  const double inflated_b = (1.0 + 1.0 / L) * pe.b;
  pe.total_variance = inflated_b + pe.u_bar;

  const double tail = 0.5 + 0.5 * options.level;
  if (pe.b > 0.0) {
    const double ratio = 1.0 + pe.u_bar / inflated_b;
    pe.df = (L - 1.0) * ratio * ratio;
    finish_interval(pe, student_t_quantile(tail, pe.df) * std::sqrt(pe.total_variance), options);
  } else {
    pe.degenerate_b = true;
    pe.df = std::numeric_limits<double>::infinity();
    finish_interval(pe, normal_quantile(tail) * std::sqrt(pe.u_bar), options);
  }
  return pe;
}

bool covers(const PooledEstimate& pe, double truth) {
  return pe.ci_low <= truth && truth <= pe.ci_high;
}

PooledEstimate single_estimate_interval(const PointEstimate& e, const PoolOptions& options) {
  check_level(options.level);
  PooledEstimate pe;
  pe.q_bar = e.q;
  pe.u_bar = e.u;
  pe.total_variance = e.u;
  finish_interval(pe, normal_quantile(0.5 + 0.5 * options.level) * std::sqrt(e.u), options);
  return pe;
}

}  // namespace catimpute
