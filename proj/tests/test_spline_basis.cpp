#include <doctest.h>

#include <random>

#include "flucast/error.hpp"
#include "flucast/spline_basis.hpp"
#include "oracles.hpp"

using namespace flucast;
using spline::SplineSpec;

namespace {

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    v[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / static_cast<double>(n - 1);
  return v;
}

SplineSpec random_spec(std::mt19937_64& eng) {
  std::uniform_int_distribution<int> df_dist(4, 9);
  std::uniform_int_distribution<int> deg_dist(1, 3);
  std::normal_distribution<double> normal(0.0, 2.0);
  int degree = deg_dist(eng);
  int df = std::max(df_dist(eng), degree + 1);
  std::vector<double> x(40);
  for (auto& v : x) v = normal(eng);
  return spline::make_spec(x, df, degree);
}

double min_knot_gap(const SplineSpec& spec) {
  auto t = spec.padded_knots();
  double gap = spec.hi - spec.lo;
  for (std::size_t i = 1; i < t.size(); ++i)
    if (t[i] > t[i - 1]) gap = std::min(gap, t[i] - t[i - 1]);
  return gap;
}

}  // namespace

TEST_CASE("make_spec places interior knots at quantiles of distinct values") {
  auto x = linspace(0.0, 1.0, 101);
  SplineSpec spec = spline::make_spec(x, 6, 3);
  REQUIRE(spec.interior_knots.size() == 2);
  CHECK(spec.lo == 0.0);
  CHECK(spec.hi == 1.0);
  CHECK(spec.interior_knots[0] ==
        doctest::Approx(oracles::quantile_oracle(x, 1.0 / 3.0)).epsilon(1e-12));
  CHECK(spec.interior_knots[1] ==
        doctest::Approx(oracles::quantile_oracle(x, 2.0 / 3.0)).epsilon(1e-12));
  CHECK(spec.interior_knots[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  CHECK(spec.interior_knots[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("make_spec with df = degree + 1 has no interior knots") {
  auto x = linspace(-2.0, 5.0, 50);
  SplineSpec spec = spline::make_spec(x, 4, 3);
  CHECK(spec.interior_knots.empty());
  CHECK(spec.df == static_cast<int>(spec.interior_knots.size()) + spec.degree + 1);
}

TEST_CASE("make_spec rejects degenerate input") {
  std::vector<double> constant(30, 7.5);
  CHECK_THROWS_AS(spline::make_spec(constant, 6, 3), Error);
  std::vector<double> few = {1.0, 2.0, 3.0};
  CHECK_THROWS_AS(spline::make_spec(few, 6, 3), Error);
}

TEST_CASE("basis interpolates at the boundaries") {
  auto x = linspace(0.0, 10.0, 60);
  SplineSpec spec = spline::make_spec(x, 6, 3);
  auto at_lo = spline::evaluate_basis(spec, spec.lo);
  CHECK(at_lo[0] == doctest::Approx(1.0).epsilon(1e-14));
  for (std::size_t k = 1; k < at_lo.size(); ++k) CHECK(at_lo[k] == 0.0);
  auto at_hi = spline::evaluate_basis(spec, spec.hi);
  CHECK(at_hi.back() == doctest::Approx(1.0).epsilon(1e-14));
  for (std::size_t k = 0; k + 1 < at_hi.size(); ++k) CHECK(at_hi[k] == 0.0);
}

TEST_CASE("basis properties: partition of unity, nonnegativity, local support") {
  std::mt19937_64 eng(2024);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    SplineSpec spec = random_spec(eng);
    for (int k = 0; k < 20; ++k) {
      double x = spec.lo + (spec.hi - spec.lo) * unif(eng);
      auto basis = spline::evaluate_basis(spec, x);
      REQUIRE(static_cast<int>(basis.size()) == spec.df);
      double sum = 0.0;
      int nonzero = 0;
      for (double b : basis) {
        CHECK(b >= 0.0);
        sum += b;
        if (b != 0.0) ++nonzero;
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(nonzero <= spec.degree + 1);
    }
  }
}

TEST_CASE("out-of-range x is clamped to the boundary") {
  auto x = linspace(0.0, 1.0, 30);
  SplineSpec spec = spline::make_spec(x, 6, 3);
  CHECK(spline::evaluate_basis(spec, -4.0) == spline::evaluate_basis(spec, 0.0));
  CHECK(spline::evaluate_basis(spec, 9.0) == spline::evaluate_basis(spec, 1.0));
}

TEST_CASE("basis agrees with the naive recurrence oracle") {
  std::mt19937_64 eng(515);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int rep = 0; rep < 40; ++rep) {
    SplineSpec spec = random_spec(eng);
    auto knots = spec.padded_knots();
    for (int k = 0; k < 25; ++k) {
      double x = spec.lo + (spec.hi - spec.lo) * unif(eng);
      auto ours = spline::evaluate_basis(spec, x);
      auto exact = oracles::bspline_basis_oracle(knots, spec.degree, x);
      REQUIRE(ours.size() == exact.size());
      for (std::size_t i = 0; i < ours.size(); ++i)
        CHECK(ours[i] == doctest::Approx(exact[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("midpoint evaluation matches the oracle componentwise") {
  std::mt19937_64 eng(99);
  std::normal_distribution<double> normal(3.0, 1.5);
  std::vector<double> sample(80);
  for (auto& v : sample) v = normal(eng);
  SplineSpec spec = spline::make_spec(sample, 6, 3);
  double mid = 0.5 * (spec.lo + spec.hi);
  auto ours = spline::evaluate_basis(spec, mid);
  auto exact = oracles::bspline_basis_oracle(spec.padded_knots(), 3, mid);
  for (std::size_t i = 0; i < ours.size(); ++i)
    CHECK(ours[i] == doctest::Approx(exact[i]).epsilon(1e-12));
}

TEST_CASE("basis is continuous in x") {
  std::mt19937_64 eng(7331);
  std::uniform_real_distribution<double> unif(0.05, 0.95);
  for (int rep = 0; rep < 20; ++rep) {
    SplineSpec spec = random_spec(eng);
    double span = spec.hi - spec.lo;
    double h = 1e-6 * span;
    // |dB/dx| <= 2 * degree / smallest positive knot gap
    double lipschitz = 2.0 * spec.degree / min_knot_gap(spec);
    for (int k = 0; k < 10; ++k) {
      double x = spec.lo + span * unif(eng);
      auto a = spline::evaluate_basis(spec, x);
      auto b = spline::evaluate_basis(spec, x + h);
      for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(std::abs(a[i] - b[i]) <= lipschitz * h + 1e-12);
    }
  }
}
