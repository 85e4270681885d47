#pragma once

#include <vector>

namespace flucast::spline {

struct SplineSpec {
  int degree = 3;
  int df = 6;
  std::vector<double> interior_knots;  // strictly increasing, inside (lo, hi)
  double lo = 0.0;
  double hi = 1.0;

  // Padded knot vector: boundaries repeated degree+1 times.
  std::vector<double> padded_knots() const;
};

// Boundary at the data range, df - degree - 1 interior knots at equally
// spaced quantiles of the distinct x values. Throws DegenerateInput when
// fewer than df distinct values are available.
SplineSpec make_spec(const std::vector<double>& x_values, int df = 6, int degree = 3);

// B-spline basis values at x (clamped to [lo, hi]); length df, nonnegative,
// summing to one.
std::vector<double> evaluate_basis(const SplineSpec& spec, double x);

// Type-7 (linear interpolation) quantile of sorted values.
double quantile_sorted(const std::vector<double>& sorted, double p);

}  // namespace flucast::spline
