#pragma once

#include <limits>
#include <span>

#include "catimpute/data.hpp"

namespace catimpute {

struct PoolOptions {
  double level = 0.95;
  bool clamp_to_unit = false;  // truncate the interval to [0, 1]
};

struct PooledEstimate {
  double q_bar = 0.0;
  double b = 0.0;               // between-imputation variance
  double u_bar = 0.0;           // mean within-imputation variance
  double total_variance = 0.0;  // (1 + 1/L) b + u_bar
  double df = std::numeric_limits<double>::infinity();
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool degenerate_b = false;    // b == 0: normal interval on u_bar, df infinite
  bool boundary = false;        // unclamped interval reaches below 0 or above 1
};

// Rubin's combining rules over L >= 2 completed-data estimates.
PooledEstimate pool(std::span<const PointEstimate> estimates, const PoolOptions& options = {});

// Closed interval test ci_low <= truth <= ci_high.
bool covers(const PooledEstimate& pe, double truth);

// Wald interval for a single complete-data estimate (normal quantile).
PooledEstimate single_estimate_interval(const PointEstimate& e, const PoolOptions& options = {});

// Quantiles used by the intervals.
double normal_quantile(double p);
double student_t_quantile(double p, double df);

}  // namespace catimpute
