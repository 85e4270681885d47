#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flucast/data_model.hpp"
#include "flucast/design_matrix.hpp"
#include "flucast/penalized_glm.hpp"

namespace flucast::eval {

struct SplitScheme {
  enum class Kind { LOO, Holdout };
  Kind kind = Kind::Holdout;
  double train_fraction = 0.6;  // Holdout only; chronological

  static SplitScheme loo() { return {Kind::LOO, 0.0}; }
  static SplitScheme holdout(double fraction);
  static SplitScheme parse(const std::string& s);  // "loo" or "holdout:0.6"
  std::string name() const;
  std::string file_tag() const;  // "loo", "h60", ...
};

struct ModelSettings {
  int df = 6;
  int degree = 3;
  glm::Family family = glm::Family::Poisson;
  int cv_folds = 10;
  int cv_grid_size = 50;
  double cv_grid_min_ratio = 1e-4;
  glm::FitOptions fit_options;
  bool loo_reuse_lambda = false;  // fast mode: one CV on the full data
};

struct EvalReport {
  int group = 0;  // 1..4, 0 = combined
  std::string variant;
  int horizon = 1;
  SplitScheme scheme;
  double ormse_per_million = 0.0;
  double oos_neg_log_lik = 0.0;  // mean per held-out week
  std::vector<double> errors;    // observed - predicted, one per test row
  int n_test = 0;
  std::int64_t population = 0;
  std::vector<int> test_weeks;
  std::vector<double> observed;
  std::vector<double> predicted;
  std::vector<int> train_weeks;        // holdout: training rows
  std::vector<double> train_observed;  // holdout: training responses
  std::vector<double> train_fitted;    // holdout: in-sample predictions
  int nonconverged_fits = 0;
};

double ormse(const std::vector<double>& errors, std::int64_t group_population, double scale = 1e6);

// The design side of an evaluation; independent of the response, so it can
// be shared across groups and permutation repeats.
struct PreparedDesign {
  design::DesignMatrix matrix;
  std::vector<int> train_rows;       // holdout only
  std::vector<int> test_rows;        // holdout only
  design::ExpandedMatrix expanded;   // holdout only: specs from train rows
};

PreparedDesign prepare(const data::WeeklyPanel& panel, const design::Variant& variant, int horizon,
                       const SplitScheme& scheme, const ModelSettings& settings);

struct LooRow {
  double error = 0.0;
  double predicted = 0.0;
  double eta = 0.0;
  bool nonconverged = false;
};

// One leave-one-out refit: expansion, cross-validation and fit on all rows
// except `row`, then a prediction for `row`.
LooRow loo_single(const PreparedDesign& prep, const Eigen::VectorXd& y,
                  const ModelSettings& settings, std::uint64_t cv_seed, int row);

EvalReport evaluate_prepared(const PreparedDesign& prep, const std::vector<std::int64_t>& counts,
                             std::int64_t population, const SplitScheme& scheme,
                             const ModelSettings& settings, std::uint64_t cv_seed, int jobs = 1);

EvalReport evaluate(const data::WeeklyPanel& panel, const data::QuartileGrouping& grouping,
                    int group, const design::Variant& variant, int horizon,
                    const SplitScheme& scheme, const ModelSettings& settings,
                    std::uint64_t cv_seed, int jobs = 1);

// Pooled errors, pooled population ("Combined" row).
EvalReport combine_reports(const std::vector<EvalReport>& group_reports);

struct BiasTestResult {
  double observed_mean = 0.0;
  double p_value = 1.0;
  int resamples = 0;
  std::uint64_t seed = 0;
};

// Two-sided sign-flip bootstrap of the mean residual.
BiasTestResult residual_bias_test(const std::vector<double>& errors, int resamples = 10000,
                                  std::uint64_t seed = 0);

}  // namespace flucast::eval
