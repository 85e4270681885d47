#include "flucast/spline_basis.hpp"

#include <algorithm>
#include <cmath>

#include "flucast/error.hpp"

namespace flucast::spline {

std::vector<double> SplineSpec::padded_knots() const {
  std::vector<double> t;
  t.reserve(interior_knots.size() + 2 * (degree + 1));
  for (int i = 0; i <= degree; ++i) t.push_back(lo);
  t.insert(t.end(), interior_knots.begin(), interior_knots.end());
  for (int i = 0; i <= degree; ++i) t.push_back(hi);
  return t;
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw_error(ErrorCode::DegenerateInput, "quantile of empty vector");
  if (p <= 0.0) return sorted.front();
  if (p >= 1.0) return sorted.back();
  double h = p * static_cast<double>(sorted.size() - 1);
  std::size_t i = static_cast<std::size_t>(h);
  double frac = h - static_cast<double>(i);
  if (i + 1 >= sorted.size()) return sorted.back();
  return sorted[i] + frac * (sorted[i + 1] - sorted[i]);
}

SplineSpec make_spec(const std::vector<double>& x_values, int df, int degree) {
  if (degree < 0 || df <= degree)
    throw_error(ErrorCode::InvalidArgument, "make_spec requires df > degree >= 0");

  std::vector<double> distinct(x_values);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (static_cast<int>(distinct.size()) < std::max(df, 2))
    throw_error(ErrorCode::DegenerateInput,
                "need at least " + std::to_string(std::max(df, 2)) + " distinct values, got " +
                    std::to_string(distinct.size()));

  SplineSpec spec;
  spec.degree = degree;
  spec.df = df;
  spec.lo = distinct.front();
  spec.hi = distinct.back();
  int interior = df - degree - 1;
  for (int i = 1; i <= interior; ++i) {
    double p = static_cast<double>(i) / static_cast<double>(interior + 1);
    spec.interior_knots.push_back(quantile_sorted(distinct, p));
  }
  return spec;
}

namespace {

// Rightmost span i in [degree, n_basis-1] with t[i] <= x < t[i+1]
// (the last span is closed on the right).
int find_span(const std::vector<double>& t, int degree, int n_basis, double x) {
  if (x >= t[static_cast<std::size_t>(n_basis)]) return n_basis - 1;
  if (x <= t[static_cast<std::size_t>(degree)]) return degree;
  int lo = degree, hi = n_basis;
  int mid = (lo + hi) / 2;
  while (x < t[static_cast<std::size_t>(mid)] || x >= t[static_cast<std::size_t>(mid + 1)]) {
    if (x < t[static_cast<std::size_t>(mid)])
      hi = mid;
    else
      lo = mid;
    mid = (lo + hi) / 2;
  }
  return mid;
}

}  // namespace

std::vector<double> evaluate_basis(const SplineSpec& spec, double x) {
  if (!std::isfinite(x)) throw_error(ErrorCode::InvalidArgument, "evaluate_basis: x not finite");
  x = std::clamp(x, spec.lo, spec.hi);

  const std::vector<double> t = spec.padded_knots();
  const int degree = spec.degree;
  const int n_basis = spec.df;
  const int span = find_span(t, degree, n_basis, x);

  // de Boor triangular scheme for the degree+1 active functions
  std::vector<double> active(static_cast<std::size_t>(degree) + 1, 0.0);
  std::vector<double> left(static_cast<std::size_t>(degree) + 1, 0.0);
  std::vector<double> right(static_cast<std::size_t>(degree) + 1, 0.0);
  active[0] = 1.0;
  for (int j = 1; j <= degree; ++j) {
    left[j] = x - t[static_cast<std::size_t>(span + 1 - j)];
    right[j] = t[static_cast<std::size_t>(span + j)] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      double denom = right[r + 1] + left[j - r];
      double temp = denom != 0.0 ? active[r] / denom : 0.0;
      active[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    active[j] = saved;
  }

  std::vector<double> out(static_cast<std::size_t>(n_basis), 0.0);
  for (int r = 0; r <= degree; ++r) out[static_cast<std::size_t>(span - degree + r)] = active[r];
  return out;
}

}  // namespace flucast::spline
