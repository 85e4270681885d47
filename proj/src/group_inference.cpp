#include "flucast/group_inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/students_t.hpp>

#include "flucast/error.hpp"
#include "flucast/parallel.hpp"
#include "flucast/util.hpp"

namespace flucast::infer {

namespace {

constexpr double kTCap = 1e8;

double two_sided_t_pvalue(double t, double dof) {
  boost::math::students_t_distribution<double> dist(dof);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

CorrelationReport correlation_with_pvalue(const std::vector<double>& x,
                                          const std::vector<double>& y) {
  CorrelationReport out;
  out.n = static_cast<int>(x.size());
  out.r = pearson(x, y);
  if (out.n > 2) {
    double denom = 1.0 - out.r * out.r;
    if (denom <= 0.0) {
      out.p_value = 0.0;
    } else {
      double t = out.r * std::sqrt(static_cast<double>(out.n - 2) / denom);
      out.p_value = two_sided_t_pvalue(t, static_cast<double>(out.n - 2));
    }
  }
  return out;
}

}  // namespace

data::QuartileGrouping random_partition(const data::WeeklyPanel& panel, std::mt19937_64& eng) {
  std::vector<std::string> zips;
  zips.reserve(panel.zips.size());
  for (const auto& z : panel.zips) zips.push_back(z.zip);
  if (zips.size() < 4) throw_error(ErrorCode::TooFewZips, "need at least 4 zips");
  shuffle_vector(zips, eng);

  data::QuartileGrouping grouping;
  auto sizes = data::quartile_block_sizes(zips.size());
  std::size_t pos = 0;
  for (int g = 1; g <= 4; ++g) {
    std::int64_t pop = 0;
    for (std::size_t i = 0; i < sizes[static_cast<std::size_t>(g - 1)]; ++i, ++pos) {
      grouping.assignment[zips[pos]] = g;
      pop += panel.zip_record(zips[pos]).population;
    }
    grouping.group_population[g] = pop;
  }
  return grouping;
}

PermutationContext make_permutation_context(const data::WeeklyPanel& panel,
                                            const PermutationSettings& settings,
                                            std::uint64_t seed) {
  PermutationContext ctx;
  ctx.panel = &panel;
  ctx.settings = settings;
  ctx.seed = seed;
  ctx.prep = eval::prepare(panel, settings.variant, settings.horizon, settings.scheme,
                           settings.model);
  return ctx;
}

double permutation_single_null(const PermutationContext& ctx, int repeat) {
  auto eng = make_engine(derive_seed(ctx.seed, "perm", static_cast<std::uint64_t>(repeat)));
  data::QuartileGrouping partition = random_partition(*ctx.panel, eng);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  try {
    for (int g = 1; g <= 4; ++g) {
      data::GroupSeries response = data::group_response(*ctx.panel, partition, g);
      std::uint64_t cv_seed = derive_seed(ctx.seed, "permcv", static_cast<std::uint64_t>(repeat),
                                          static_cast<std::uint64_t>(g));
      eval::EvalReport report =
          eval::evaluate_prepared(ctx.prep, response.counts, response.population,
                                  ctx.settings.scheme, ctx.settings.model, cv_seed, 1);
      lo = std::min(lo, report.ormse_per_million);
      hi = std::max(hi, report.ormse_per_million);
    }
  } catch (const Error&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  return hi - lo;
}

PermutationResult permutation_test(const data::WeeklyPanel& panel,
                                   const data::QuartileGrouping& grouping,
                                   const PermutationSettings& settings, int repeats,
                                   std::uint64_t seed, int jobs) {
  if (repeats < 1) throw_error(ErrorCode::InvalidArgument, "repeats must be >= 1");

  PermutationContext ctx = make_permutation_context(panel, settings, seed);

  PermutationResult result;
  result.seed = seed;
  result.repeats_requested = repeats;

  for (int g = 1; g <= 4; ++g) {
    data::GroupSeries response = data::group_response(panel, grouping, g);
    std::uint64_t cv_seed = derive_seed(seed, "obscv", static_cast<std::uint64_t>(g));
    eval::EvalReport report = eval::evaluate_prepared(
        ctx.prep, response.counts, response.population, settings.scheme, settings.model, cv_seed, jobs);
    result.observed_group_ormse[static_cast<std::size_t>(g - 1)] = report.ormse_per_million;
  }
  if (settings.observed_stat == ObservedStat::Q4MinusQ1) {
    result.observed_diff = result.observed_group_ormse[3] - result.observed_group_ormse[0];
  } else {
    auto [mn, mx] = std::minmax_element(result.observed_group_ormse.begin(),
                                        result.observed_group_ormse.end());
    result.observed_diff = *mx - *mn;
  }

  std::vector<double> nulls(static_cast<std::size_t>(repeats),
                            std::numeric_limits<double>::quiet_NaN());
  parallel_for(static_cast<std::size_t>(repeats), jobs,
               [&](std::size_t r) { nulls[r] = permutation_single_null(ctx, static_cast<int>(r)); });

  int below = 0, at_or_above = 0;
  for (double v : nulls) {
    if (std::isnan(v)) {
      result.repeats_failed++;
      continue;
    }
    result.null_diffs.push_back(v);
    if (v < result.observed_diff)
      ++below;
    else
      ++at_or_above;
  }
  if (result.null_diffs.empty())
    throw_error(ErrorCode::InvalidArgument, "permutation test: every repeat failed");
  const double valid = static_cast<double>(result.null_diffs.size());
  result.p_value = static_cast<double>(below) / valid;
  result.p_upper = static_cast<double>(at_or_above) / valid;
  return result;
}

CorrelationMatrix pairwise_correlation_matrix(const data::WeeklyPanel& panel) {
  const std::size_t n = panel.zips.size();
  const std::size_t w = panel.week_count();
  CorrelationMatrix out;
  out.zips.reserve(n);
  out.constant.assign(n, false);
  out.r = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n),
                                    std::numeric_limits<double>::quiet_NaN());

  Eigen::MatrixXd centered(static_cast<Eigen::Index>(w), static_cast<Eigen::Index>(n));
  std::vector<double> norms(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    out.zips.push_back(panel.zips[i].zip);
    double m = 0.0;
    for (auto c : panel.zips[i].weekly_hosp) m += static_cast<double>(c);
    m /= static_cast<double>(w);
    for (std::size_t t = 0; t < w; ++t)
      centered(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) =
          static_cast<double>(panel.zips[i].weekly_hosp[t]) - m;
    norms[i] = centered.col(static_cast<Eigen::Index>(i)).norm();
    out.constant[i] = norms[i] <= 0.0;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (out.constant[i]) continue;
    out.r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (out.constant[j]) continue;
      double r = centered.col(static_cast<Eigen::Index>(i))
                     .dot(centered.col(static_cast<Eigen::Index>(j))) /
                 (norms[i] * norms[j]);
      out.r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r;
      out.r(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = r;
    }
  }
  return out;
}

namespace {

// Pairwise correlations within one group of zip indices, skipping constant
// series; indices must be sorted for deterministic output order.
std::vector<double> group_pair_correlations(const CorrelationMatrix& cm,
                                            const std::vector<std::size_t>& members) {
  std::vector<double> out;
  for (std::size_t a = 0; a < members.size(); ++a) {
    if (cm.constant[members[a]]) continue;
    for (std::size_t b = a + 1; b < members.size(); ++b) {
      if (cm.constant[members[b]]) continue;
      out.push_back(cm.r(static_cast<Eigen::Index>(members[a]),
                         static_cast<Eigen::Index>(members[b])));
    }
  }
  return out;
}

std::vector<std::size_t> member_indices(const CorrelationMatrix& cm,
                                        const data::QuartileGrouping& grouping, int group) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < cm.zips.size(); ++i) {
    auto it = grouping.assignment.find(cm.zips[i]);
    if (it != grouping.assignment.end() && it->second == group) out.push_back(i);
  }
  return out;
}

}  // namespace

SynchronyResult pairwise_synchrony(const data::WeeklyPanel& panel,
                                   const data::QuartileGrouping& grouping) {
  CorrelationMatrix cm = pairwise_correlation_matrix(panel);
  SynchronyResult out;
  for (bool c : cm.constant)
    if (c) out.excluded_constant_zips++;
  for (int g = 1; g <= 4; ++g) {
    std::vector<std::size_t> members = member_indices(cm, grouping, g);
    if (members.size() < 2)
      throw_error(ErrorCode::GroupTooSmall,
                  "group " + std::to_string(g) + " has fewer than 2 zips");
    out.per_group_correlations[g] = group_pair_correlations(cm, members);
  }
  return out;
}

SynchronyRandomization synchrony_randomization(const data::WeeklyPanel& panel,
                                               const data::QuartileGrouping& grouping,
                                               int repeats, std::uint64_t seed, int jobs) {
  if (repeats < 1) throw_error(ErrorCode::InvalidArgument, "repeats must be >= 1");
  CorrelationMatrix cm = pairwise_correlation_matrix(panel);

  std::vector<std::size_t> top = member_indices(cm, grouping, 4);
  if (top.size() < 2) throw_error(ErrorCode::GroupTooSmall, "group 4 has fewer than 2 zips");
  std::vector<double> observed = group_pair_correlations(cm, top);
  if (observed.size() < 1)
    throw_error(ErrorCode::GroupTooSmall, "group 4 has fewer than 2 usable zips");

  SynchronyRandomization out;
  out.repeats = repeats;
  out.seed = seed;
  out.observed_mean = mean(observed);
  out.observed_median = median_of_sorted(observed);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  out.null_means.assign(static_cast<std::size_t>(repeats), nan);
  out.null_medians.assign(static_cast<std::size_t>(repeats), nan);
  parallel_for(static_cast<std::size_t>(repeats), jobs, [&](std::size_t r) {
    auto eng = make_engine(derive_seed(seed, "sync", r));
    data::QuartileGrouping partition = random_partition(panel, eng);
    std::vector<std::size_t> members = member_indices(cm, partition, 4);
    std::vector<double> pairs = group_pair_correlations(cm, members);
    if (pairs.empty()) return;  // invalid repeat
    out.null_means[r] = mean(pairs);
    out.null_medians[r] = median_of_sorted(pairs);
  });

  int ge_mean = 0, ge_median = 0, valid = 0;
  for (std::size_t r = 0; r < out.null_means.size(); ++r) {
    if (std::isnan(out.null_means[r])) continue;
    ++valid;
    if (out.null_means[r] >= out.observed_mean) ++ge_mean;
    if (out.null_medians[r] >= out.observed_median) ++ge_median;
  }
  if (valid == 0)
    throw_error(ErrorCode::GroupTooSmall, "synchrony randomization: every repeat degenerate");
  out.p_mean = static_cast<double>(ge_mean) / static_cast<double>(valid);
  out.p_median = static_cast<double>(ge_median) / static_cast<double>(valid);
  return out;
}

PcaResult pca(const Eigen::MatrixXd& week_by_zip) {
  if (week_by_zip.rows() < 2 || week_by_zip.cols() < 2)
    throw_error(ErrorCode::InvalidArgument, "pca needs at least 2 weeks and 2 zips");

  Eigen::MatrixXd centered = week_by_zip;
  for (Eigen::Index j = 0; j < centered.cols(); ++j)
    centered.col(j).array() -= centered.col(j).mean();

  double total = centered.squaredNorm();
  if (total <= 0.0)
    throw_error(ErrorCode::DegenerateMatrix, "pca: matrix is rank zero after centering");

  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();

  PcaResult out;
  out.loadings = svd.matrixV();
  out.variance_explained.reserve(static_cast<std::size_t>(sv.size()));
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    out.variance_explained.push_back(sv[i] * sv[i] / total);
  return out;
}

BurdenRegression burden_regression(const std::vector<data::ZipRecord>& zips) {
  const int n = static_cast<int>(zips.size());
  if (n <= 4)
    throw_error(ErrorCode::InvalidArgument, "burden regression needs more than 4 zips");

  Eigen::MatrixXd X(n, 4);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    const auto& z = zips[static_cast<std::size_t>(i)];
    double total = 0.0;
    for (auto c : z.weekly_hosp) total += static_cast<double>(c);
    y[i] = 1000.0 * total / static_cast<double>(z.population);
    X(i, 0) = 1.0;
    X(i, 1) = z.over65_pct;
    X(i, 2) = z.poverty_pct;
    X(i, 3) = z.over65_pct * z.poverty_pct;
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < 4)
    throw_error(ErrorCode::RankDeficient, "burden regression design is rank deficient");

  BurdenRegression out;
  out.term_names = {"Intercept", "over65", "poverty", "interaction"};
  out.n = n;
  out.coefficients = qr.solve(y);

  Eigen::VectorXd resid = y - X * out.coefficients;
  const double dof = static_cast<double>(n - 4);
  const double sigma2 = resid.squaredNorm() / dof;
  Eigen::Matrix4d xtx_inv =
      (X.transpose() * X).ldlt().solve(Eigen::Matrix4d::Identity());

  for (int j = 0; j < 4; ++j) {
    out.std_errors[j] = std::sqrt(std::max(sigma2 * xtx_inv(j, j), 0.0));
    double t = out.std_errors[j] > 0.0 ? out.coefficients[j] / out.std_errors[j]
                                       : std::numeric_limits<double>::infinity();
    if (!std::isfinite(t) || std::abs(t) > kTCap) {
      out.t_capped[static_cast<std::size_t>(j)] = true;
      out.t_values[j] = std::copysign(kTCap, out.coefficients[j]);
      out.p_values[j] = 0.0;
    } else {
      out.t_values[j] = t;
      out.p_values[j] = two_sided_t_pvalue(t, dof);
    }
  }
  return out;
}

BurdenCorrelations burden_correlations(const std::vector<data::ZipRecord>& zips) {
  if (zips.size() < 3)
    throw_error(ErrorCode::InvalidArgument, "burden correlations need at least 3 zips");

  BurdenCorrelations out;
  std::vector<double> poverty, rate;
  for (const auto& z : zips) {
    double total = 0.0;
    for (auto c : z.weekly_hosp) total += static_cast<double>(c);
    poverty.push_back(z.poverty_pct);
    rate.push_back(1000.0 * total / static_cast<double>(z.population));
  }
  out.overall = correlation_with_pvalue(poverty, rate);

  bool stratified = !zips.empty();
  for (const auto& z : zips) stratified = stratified && z.age_stratified();
  if (!stratified) return out;

  auto stratum = [&](bool under) {
    std::vector<double> pov, strat_rate;
    int excluded = 0;
    for (const auto& z : zips) {
      double share = under ? 1.0 - z.over65_pct / 100.0 : z.over65_pct / 100.0;
      double pop = static_cast<double>(z.population) * share;
      if (pop <= 0.0) {
        ++excluded;
        continue;
      }
      double total = 0.0;
      const auto& counts = under ? z.weekly_hosp_under65 : z.weekly_hosp_over65;
      for (auto c : counts) total += static_cast<double>(c);
      pov.push_back(z.poverty_pct);
      strat_rate.push_back(1000.0 * total / pop);
    }
    out.excluded += excluded;
    if (pov.size() >= 3) {
      auto& slot = under ? out.under65 : out.over65;
      slot = correlation_with_pvalue(pov, strat_rate);
    }
  };
  stratum(true);
  stratum(false);
  return out;
}

}  // namespace flucast::infer
