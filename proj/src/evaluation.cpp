#include "flucast/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "flucast/error.hpp"
#include "flucast/parallel.hpp"
#include "flucast/util.hpp"

namespace flucast::eval {

SplitScheme SplitScheme::holdout(double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw_error(ErrorCode::InvalidArgument, "holdout fraction must be in (0,1)");
  return {Kind::Holdout, fraction};
}

SplitScheme SplitScheme::parse(const std::string& s) {
  if (s == "loo") return loo();
  if (s.rfind("holdout:", 0) == 0) {
    double frac = 0.0;
    try {
      frac = std::stod(s.substr(8));
    } catch (...) {
      throw_error(ErrorCode::InvalidArgument, "bad scheme '" + s + "'");
    }
    return holdout(frac);
  }
  throw_error(ErrorCode::InvalidArgument,
              "bad scheme '" + s + "' (expected 'loo' or 'holdout:<fraction>')");
}

std::string SplitScheme::name() const {
  if (kind == Kind::LOO) return "loo";
  std::ostringstream os;
  os << "holdout:" << format_double(train_fraction);
  return os.str();
}

std::string SplitScheme::file_tag() const {
  if (kind == Kind::LOO) return "loo";
  int pct = static_cast<int>(std::lround(train_fraction * 100.0));
  return "h" + std::to_string(pct);
}

double ormse(const std::vector<double>& errors, std::int64_t group_population, double scale) {
  if (errors.empty()) throw_error(ErrorCode::EmptyErrors, "ormse of empty error vector");
  if (group_population <= 0)
    throw_error(ErrorCode::InvalidArgument, "ormse: population must be positive");
  double ss = 0.0;
  for (double e : errors) ss += e * e;
  double rmse = std::sqrt(ss / static_cast<double>(errors.size()));
  return scale * rmse / static_cast<double>(group_population);
}

PreparedDesign prepare(const data::WeeklyPanel& panel, const design::Variant& variant, int horizon,
                       const SplitScheme& scheme, const ModelSettings& settings) {
  PreparedDesign prep;
  prep.matrix = design::build_matrix(panel, variant, horizon);
  const int n_rows = static_cast<int>(prep.matrix.values.rows());
  if (scheme.kind == SplitScheme::Kind::Holdout) {
    int n_train = static_cast<int>(
        std::ceil(scheme.train_fraction * static_cast<double>(n_rows)));
    n_train = std::min(n_train, n_rows);
    if (n_train == n_rows)
      throw_error(ErrorCode::InvalidArgument, "holdout split leaves no test rows");
    for (int i = 0; i < n_train; ++i) prep.train_rows.push_back(i);
    for (int i = n_train; i < n_rows; ++i) prep.test_rows.push_back(i);
    prep.expanded = design::expand(prep.matrix, prep.train_rows, settings.df, settings.degree);
  }
  return prep;
}

namespace {

double heldout_nll(glm::Family family, double y, double predicted, double eta) {
  if (family == glm::Family::Gaussian) return 0.5 * (y - predicted) * (y - predicted);
  return predicted - y * eta;
}

struct SubsetData {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
};

SubsetData take_rows(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                     const std::vector<int>& rows) {
  SubsetData out;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), X.cols());
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.X.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
    out.y[static_cast<Eigen::Index>(i)] = y[rows[i]];
  }
  return out;
}

glm::ModelFit cv_and_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         const ModelSettings& settings, std::uint64_t cv_seed, int jobs = 1) {
  double lmax = glm::lambda_max(X, y, settings.family);
  glm::CvPlan plan = glm::CvPlan::make(static_cast<int>(X.rows()), settings.cv_folds, lmax,
                                       settings.cv_grid_size, settings.cv_grid_min_ratio, cv_seed);
  glm::CvResult cv = glm::cross_validate(X, y, settings.family, plan, settings.fit_options, jobs);
  return glm::fit(X, y, settings.family, cv.lambda_star, settings.fit_options);
}

}  // namespace

LooRow loo_single(const PreparedDesign& prep, const Eigen::VectorXd& y,
                  const ModelSettings& settings, std::uint64_t cv_seed, int row) {
  const int n_rows = static_cast<int>(prep.matrix.values.rows());
  std::vector<int> train_rows;
  train_rows.reserve(static_cast<std::size_t>(n_rows - 1));
  for (int i = 0; i < n_rows; ++i)
    if (i != row) train_rows.push_back(i);

  design::ExpandedMatrix expanded =
      design::expand(prep.matrix, train_rows, settings.df, settings.degree);
  SubsetData train = take_rows(expanded.values, y, train_rows);

  std::uint64_t seed = derive_seed(cv_seed, "loo", static_cast<std::uint64_t>(
                                                       prep.matrix.row_weeks[static_cast<std::size_t>(row)]));
  glm::ModelFit fit = cv_and_fit(train.X, train.y, settings, seed);

  LooRow out;
  Eigen::VectorXd x_row = expanded.values.row(row);
  out.eta = glm::predict_eta(fit, x_row);
  out.predicted = glm::predict(fit, x_row);
  out.error = y[row] - out.predicted;
  out.nonconverged = !fit.diag.converged;
  return out;
}

EvalReport evaluate_prepared(const PreparedDesign& prep, const std::vector<std::int64_t>& counts,
                             std::int64_t population, const SplitScheme& scheme,
                             const ModelSettings& settings, std::uint64_t cv_seed, int jobs) {
  const int n_rows = static_cast<int>(prep.matrix.values.rows());
  const int first_row = static_cast<int>(counts.size()) - n_rows;
  if (first_row < 0)
    throw_error(ErrorCode::LengthMismatch, "response shorter than design matrix rows");

  Eigen::VectorXd y(n_rows);
  for (int i = 0; i < n_rows; ++i)
    y[i] = static_cast<double>(counts[static_cast<std::size_t>(first_row + i)]);

  EvalReport report;
  report.horizon = prep.matrix.horizon;
  report.scheme = scheme;
  report.population = population;

  if (scheme.kind == SplitScheme::Kind::Holdout) {
    SubsetData train = take_rows(prep.expanded.values, y, prep.train_rows);
    glm::ModelFit fit = cv_and_fit(train.X, train.y, settings, cv_seed, jobs);
    if (!fit.diag.converged) report.nonconverged_fits++;

    double nll_sum = 0.0;
    for (int r : prep.test_rows) {
      Eigen::VectorXd x_row = prep.expanded.values.row(r);
      double eta = glm::predict_eta(fit, x_row);
      double pred = glm::predict(fit, x_row);
      double yt = y[r];
      report.test_weeks.push_back(prep.matrix.row_weeks[static_cast<std::size_t>(r)]);
      report.observed.push_back(yt);
      report.predicted.push_back(pred);
      report.errors.push_back(yt - pred);
      nll_sum += heldout_nll(settings.family, yt, pred, eta);
    }
    for (int r : prep.train_rows) {
      Eigen::VectorXd x_row = prep.expanded.values.row(r);
      report.train_weeks.push_back(prep.matrix.row_weeks[static_cast<std::size_t>(r)]);
      report.train_observed.push_back(y[r]);
      report.train_fitted.push_back(glm::predict(fit, x_row));
    }
    report.n_test = static_cast<int>(prep.test_rows.size());
    report.oos_neg_log_lik = nll_sum / static_cast<double>(report.n_test);
  } else {
    std::vector<LooRow> rows(static_cast<std::size_t>(n_rows));
    if (settings.loo_reuse_lambda) {
      // fast mode: one expansion and one CV on the full data, refits at a
      // fixed penalty
      std::vector<int> all_rows(static_cast<std::size_t>(n_rows));
      for (int i = 0; i < n_rows; ++i) all_rows[static_cast<std::size_t>(i)] = i;
      design::ExpandedMatrix expanded =
          design::expand(prep.matrix, all_rows, settings.df, settings.degree);
      double lmax = glm::lambda_max(expanded.values, y, settings.family);
      glm::CvPlan plan = glm::CvPlan::make(n_rows, settings.cv_folds, lmax, settings.cv_grid_size,
                                           settings.cv_grid_min_ratio, cv_seed);
      glm::CvResult cv =
          glm::cross_validate(expanded.values, y, settings.family, plan, settings.fit_options);
      parallel_for(static_cast<std::size_t>(n_rows), jobs, [&](std::size_t i) {
        std::vector<int> train_rows;
        train_rows.reserve(static_cast<std::size_t>(n_rows - 1));
        for (int r = 0; r < n_rows; ++r)
          if (r != static_cast<int>(i)) train_rows.push_back(r);
        SubsetData train = take_rows(expanded.values, y, train_rows);
        glm::ModelFit fit = glm::fit(train.X, train.y, settings.family, cv.lambda_star,
                                     settings.fit_options);
        LooRow row;
        Eigen::VectorXd x_row = expanded.values.row(static_cast<Eigen::Index>(i));
        row.eta = glm::predict_eta(fit, x_row);
        row.predicted = glm::predict(fit, x_row);
        row.error = y[static_cast<Eigen::Index>(i)] - row.predicted;
        row.nonconverged = !fit.diag.converged;
        rows[i] = row;
      });
    } else {
      parallel_for(static_cast<std::size_t>(n_rows), jobs, [&](std::size_t i) {
        rows[i] = loo_single(prep, y, settings, cv_seed, static_cast<int>(i));
      });
    }

    double nll_sum = 0.0;
    for (int i = 0; i < n_rows; ++i) {
      const LooRow& row = rows[static_cast<std::size_t>(i)];
      report.test_weeks.push_back(prep.matrix.row_weeks[static_cast<std::size_t>(i)]);
      report.observed.push_back(y[i]);
      report.predicted.push_back(row.predicted);
      report.errors.push_back(row.error);
      nll_sum += heldout_nll(settings.family, y[i], row.predicted, row.eta);
      if (row.nonconverged) report.nonconverged_fits++;
    }
    report.n_test = n_rows;
    report.oos_neg_log_lik = nll_sum / static_cast<double>(n_rows);
  }

  report.ormse_per_million = ormse(report.errors, population);
  return report;
}

EvalReport evaluate(const data::WeeklyPanel& panel, const data::QuartileGrouping& grouping,
                    int group, const design::Variant& variant, int horizon,
                    const SplitScheme& scheme, const ModelSettings& settings,
                    std::uint64_t cv_seed, int jobs) {
  data::GroupSeries response = data::group_response(panel, grouping, group);
  PreparedDesign prep = prepare(panel, variant, horizon, scheme, settings);
  EvalReport report = evaluate_prepared(prep, response.counts, response.population, scheme,
                                        settings, cv_seed, jobs);
  report.group = group;
  report.variant = variant.name;
  return report;
}

EvalReport combine_reports(const std::vector<EvalReport>& group_reports) {
  if (group_reports.empty())
    throw_error(ErrorCode::InvalidArgument, "combine_reports: no reports");
  EvalReport out;
  out.group = 0;
  out.variant = group_reports.front().variant;
  out.horizon = group_reports.front().horizon;
  out.scheme = group_reports.front().scheme;
  double nll_weighted = 0.0;
  for (const auto& r : group_reports) {
    if (r.variant != out.variant || r.horizon != out.horizon ||
        r.scheme.name() != out.scheme.name())
      throw_error(ErrorCode::InvalidArgument, "combine_reports: mismatched reports");
    out.errors.insert(out.errors.end(), r.errors.begin(), r.errors.end());
    out.population += r.population;
    out.n_test += r.n_test;
    out.nonconverged_fits += r.nonconverged_fits;
    nll_weighted += r.oos_neg_log_lik * static_cast<double>(r.n_test);
  }
  out.oos_neg_log_lik = nll_weighted / static_cast<double>(out.n_test);
  out.ormse_per_million = ormse(out.errors, out.population);
  return out;
}

BiasTestResult residual_bias_test(const std::vector<double>& errors, int resamples,
                                  std::uint64_t seed) {
  if (errors.size() < 5)
    throw_error(ErrorCode::TooFewResiduals, "residual bias test needs at least 5 errors");
  if (resamples < 1) throw_error(ErrorCode::InvalidArgument, "resamples must be positive");

  const double n = static_cast<double>(errors.size());
  double m = 0.0;
  for (double e : errors) m += e;
  const double observed = std::abs(m / n);

  auto eng = make_engine(derive_seed(seed, "signflip"));
  std::uint64_t bits = 0;
  int bits_left = 0;
  int count = 0;
  for (int r = 0; r < resamples; ++r) {
    double s = 0.0;
    for (double e : errors) {
      if (bits_left == 0) {
        bits = eng();
        bits_left = 64;
      }
      s += (bits & 1u) ? e : -e;
      bits >>= 1;
      --bits_left;
    }
    if (std::abs(s / n) >= observed) ++count;
  }

  BiasTestResult out;
  out.observed_mean = m / n;
  out.p_value = static_cast<double>(count) / static_cast<double>(resamples);
  out.resamples = resamples;
  out.seed = seed;
  return out;
}

}  // namespace flucast::eval
