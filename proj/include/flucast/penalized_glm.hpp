#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace flucast::glm {

enum class Family { Poisson, Gaussian };

const char* family_name(Family f);
Family parse_family(const std::string& s);

struct FitOptions {
  double tol = 1e-7;       // max coefficient change at convergence
  int max_passes = 10000;  // total coordinate-descent sweeps
  double eta_clip = 30.0;  // Poisson linear-predictor clip
  bool lambda_max_shortcut = true;
};

struct FitDiagnostics {
  bool converged = true;
  int passes = 0;
  int irls_iterations = 0;
  bool eta_clipped = false;
  std::vector<int> dropped_columns;      // zero-variance columns pinned at 0
  std::vector<double> objective_trace;   // working objective after each outer step
};

struct TrainMeta {
  int rows = 0;
  int cols = 0;
  double objective = 0.0;  // penalized objective at the optimum
};

struct ModelFit {
  double intercept = 0.0;
  Eigen::VectorXd coef;  // original column scale
  double penalty = 0.0;
  Family family = Family::Poisson;
  TrainMeta train_meta;
  FitDiagnostics diag;
  std::string column_digest;
};

struct WarmStart {
  double intercept = 0.0;
  Eigen::VectorXd coef;
};

// Sum over observations; the Poisson log y! constant is omitted.
double neg_log_likelihood(Family family, const Eigen::VectorXd& y, const Eigen::VectorXd& eta);

// Gradient of the smooth part w.r.t. (intercept, coef) on the given matrix.
Eigen::VectorXd smooth_gradient(Family family, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                double intercept, const Eigen::VectorXd& coef);

// Smallest penalty that zeros every coefficient. Columns are standardized
// internally the same way fit() standardizes them.
double lambda_max(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Family family);

// Lasso-penalized GLM with unpenalized intercept: IRLS with per-coordinate
// soft-threshold updates, expanded columns standardized internally and the
// solution mapped back to the original scale.
ModelFit fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Family family, double lambda_pen,
             const FitOptions& options = {}, const std::optional<WarmStart>& warm_start = {});

struct CvPlan {
  int fold_count = 10;
  std::vector<int> fold_assignment;  // row -> fold
  std::vector<double> lambda_grid;   // strictly descending
  std::uint64_t seed = 0;

  // Round-robin folds over a seeded shuffle of the rows; log-spaced grid of
  // `grid_size` values from lambda_max down to grid_min_ratio * lambda_max.
  static CvPlan make(int rows, int fold_count, double lambda_max_value, int grid_size,
                     double grid_min_ratio, std::uint64_t seed);
  void validate(int rows) const;
};

struct CvResult {
  double lambda_star = 0.0;
  std::vector<double> cv_curve;  // mean held-out NLL per grid value; NaN = invalid
};

// Warm-started fits along a descending penalty grid. A failed fit yields an
// empty slot and the path continues from the last success.
std::vector<std::optional<ModelFit>> solve_path(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                                Family family, const std::vector<double>& grid,
                                                const FitOptions& options = {});

CvResult cross_validate(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Family family,
                        const CvPlan& plan, const FitOptions& options = {}, int jobs = 1);

double predict_eta(const ModelFit& fit, const Eigen::VectorXd& x_row);
double predict(const ModelFit& fit, const Eigen::VectorXd& x_row);  // expected count

std::string fit_to_json(const ModelFit& fit);
ModelFit fit_from_json(const std::string& text);

}  // namespace flucast::glm
