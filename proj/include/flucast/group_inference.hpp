#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "flucast/data_model.hpp"
#include "flucast/evaluation.hpp"

namespace flucast::infer {

enum class ObservedStat { Q4MinusQ1, Spread };

struct PermutationSettings {
  design::Variant variant;
  int horizon = 1;
  eval::SplitScheme scheme = eval::SplitScheme::holdout(0.6);
  eval::ModelSettings model;
  ObservedStat observed_stat = ObservedStat::Q4MinusQ1;
};

struct PermutationResult {
  double observed_diff = 0.0;
  std::array<double, 4> observed_group_ormse{};
  std::vector<double> null_diffs;  // best-vs-worst spread per valid repeat
  double p_value = 0.0;            // #{null < observed} / valid repeats
  double p_upper = 1.0;            // #{null >= observed} / valid repeats
  int repeats_requested = 0;
  int repeats_failed = 0;
  std::uint64_t seed = 0;
};

// Uniform random partition of panel zips into four equal-size groups.
data::QuartileGrouping random_partition(const data::WeeklyPanel& panel, std::mt19937_64& eng);

// Context reused across permutation repeats (the design matrix does not
// depend on the grouping).
struct PermutationContext {
  const data::WeeklyPanel* panel;
  eval::PreparedDesign prep;
  PermutationSettings settings;
  std::uint64_t seed = 0;
};

PermutationContext make_permutation_context(const data::WeeklyPanel& panel,
                                            const PermutationSettings& settings,
                                            std::uint64_t seed);

// Null statistic (max group ORMSE - min group ORMSE) for one random
// regrouping; NaN when a group evaluation fails.
double permutation_single_null(const PermutationContext& ctx, int repeat);

PermutationResult permutation_test(const data::WeeklyPanel& panel,
                                   const data::QuartileGrouping& grouping,
                                   const PermutationSettings& settings, int repeats,
                                   std::uint64_t seed, int jobs = 1);

// Pairwise Pearson correlations of zip hospitalization series; constant
// series carry NaN rows/columns and are excluded from group statistics.
struct CorrelationMatrix {
  std::vector<std::string> zips;
  Eigen::MatrixXd r;
  std::vector<bool> constant;
};

CorrelationMatrix pairwise_correlation_matrix(const data::WeeklyPanel& panel);

struct SynchronyResult {
  std::map<int, std::vector<double>> per_group_correlations;
  int excluded_constant_zips = 0;
};

SynchronyResult pairwise_synchrony(const data::WeeklyPanel& panel,
                                   const data::QuartileGrouping& grouping);

struct SynchronyRandomization {
  double observed_mean = 0.0;
  double observed_median = 0.0;
  double p_mean = 1.0;    // #{null >= observed} / repeats
  double p_median = 1.0;
  std::vector<double> null_means;
  std::vector<double> null_medians;
  int repeats = 0;
  std::uint64_t seed = 0;
};

SynchronyRandomization synchrony_randomization(const data::WeeklyPanel& panel,
                                               const data::QuartileGrouping& grouping,
                                               int repeats = 5000, std::uint64_t seed = 0,
                                               int jobs = 1);

struct PcaResult {
  Eigen::MatrixXd loadings;               // orthonormal columns
  std::vector<double> variance_explained; // descending, sums to <= 1
};

// PCA of a (weeks x zips) matrix after centering each zip column.
PcaResult pca(const Eigen::MatrixXd& week_by_zip);

struct BurdenRegression {
  std::array<std::string, 4> term_names;  // Intercept, over65, poverty, interaction
  Eigen::Vector4d coefficients;
  Eigen::Vector4d std_errors;
  Eigen::Vector4d t_values;
  Eigen::Vector4d p_values;
  std::array<bool, 4> t_capped{};
  int n = 0;
};

// OLS of total hospitalizations per 1,000 persons on over-65 share, poverty
// share and their interaction; classical standard errors.
BurdenRegression burden_regression(const std::vector<data::ZipRecord>& zips);

struct CorrelationReport {
  double r = 0.0;
  double p_value = 1.0;
  int n = 0;
};

struct BurdenCorrelations {
  CorrelationReport overall;
  std::optional<CorrelationReport> under65;
  std::optional<CorrelationReport> over65;
  int excluded = 0;  // zips skipped in stratified branches
};

BurdenCorrelations burden_correlations(const std::vector<data::ZipRecord>& zips);

}  // namespace flucast::infer
