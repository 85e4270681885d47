#include "flucast/reference.hpp"

#include <limits>

#include "flucast/error.hpp"
#include "flucast/util.hpp"

namespace flucast::reference {

eval::EvalReport evaluate_loo_serial(const eval::PreparedDesign& prep,
                                     const std::vector<std::int64_t>& counts,
                                     std::int64_t population,
                                     const eval::ModelSettings& settings, std::uint64_t cv_seed) {
  const int n_rows = static_cast<int>(prep.matrix.values.rows());
  const int first_row = static_cast<int>(counts.size()) - n_rows;
  if (first_row < 0)
    throw_error(ErrorCode::LengthMismatch, "response shorter than design matrix rows");

  Eigen::VectorXd y(n_rows);
  for (int i = 0; i < n_rows; ++i)
    y[i] = static_cast<double>(counts[static_cast<std::size_t>(first_row + i)]);

  eval::EvalReport report;
  report.horizon = prep.matrix.horizon;
  report.scheme = eval::SplitScheme::loo();
  report.population = population;

  double nll_sum = 0.0;
  for (int i = 0; i < n_rows; ++i) {
    eval::LooRow row = eval::loo_single(prep, y, settings, cv_seed, i);
    report.test_weeks.push_back(prep.matrix.row_weeks[static_cast<std::size_t>(i)]);
    report.observed.push_back(y[i]);
    report.predicted.push_back(row.predicted);
    report.errors.push_back(row.error);
    if (settings.family == glm::Family::Gaussian)
      nll_sum += 0.5 * row.error * row.error;
    else
      nll_sum += row.predicted - y[i] * row.eta;
    if (row.nonconverged) report.nonconverged_fits++;
  }
  report.n_test = n_rows;
  report.oos_neg_log_lik = nll_sum / static_cast<double>(n_rows);
  report.ormse_per_million = eval::ormse(report.errors, population);
  return report;
}

std::vector<double> permutation_nulls_serial(const infer::PermutationContext& ctx, int repeats) {
  std::vector<double> nulls(static_cast<std::size_t>(repeats),
                            std::numeric_limits<double>::quiet_NaN());
  for (int r = 0; r < repeats; ++r)
    nulls[static_cast<std::size_t>(r)] = infer::permutation_single_null(ctx, r);
  return nulls;
}

glm::CvResult cross_validate_serial(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                    glm::Family family, const glm::CvPlan& plan,
                                    const glm::FitOptions& options) {
  return glm::cross_validate(X, y, family, plan, options, 1);
}

}  // namespace flucast::reference
