#include "flucast/penalized_glm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "flucast/error.hpp"
#include "flucast/parallel.hpp"
#include "flucast/util.hpp"

namespace flucast::glm {

const char* family_name(Family f) {
  return f == Family::Poisson ? "poisson" : "gaussian";
}

Family parse_family(const std::string& s) {
  if (s == "poisson") return Family::Poisson;
  if (s == "gaussian") return Family::Gaussian;
  throw_error(ErrorCode::InvalidArgument, "unknown family '" + s + "'");
}

namespace {

constexpr double kWeightFloor = 1e-10;
constexpr double kSdFloor = 1e-12;
constexpr double kLambdaFloor = 1e-12;

double soft_threshold(double z, double lambda) {
  if (z > lambda) return z - lambda;
  if (z < -lambda) return z + lambda;
  return 0.0;
}

void check_response(Family family, const Eigen::VectorXd& y) {
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (!std::isfinite(y[i]))
      throw_error(ErrorCode::InvalidArgument, "response contains non-finite value");
    if (family == Family::Poisson && (y[i] < 0.0 || y[i] != std::floor(y[i])))
      throw_error(ErrorCode::InvalidArgument, "Poisson response must be nonnegative integers");
  }
}

double null_intercept(Family family, const Eigen::VectorXd& y, double eta_clip) {
  double mean = y.size() > 0 ? y.mean() : 0.0;
  if (family == Family::Gaussian) return mean;
  return mean > 0.0 ? std::log(mean) : -eta_clip;
}

struct Standardized {
  Eigen::MatrixXd X;        // kept columns, mean 0 and unit population sd
  std::vector<int> kept;    // original index per kept column
  Eigen::VectorXd means;    // per original column
  Eigen::VectorXd sds;      // per original column (0 when dropped)
};

Standardized standardize(const Eigen::MatrixXd& X) {
  const Eigen::Index n = X.rows(), p = X.cols();
  Standardized s;
  s.means.resize(p);
  s.sds.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    double m = X.col(j).mean();
    double var = (X.col(j).array() - m).square().sum() / static_cast<double>(n);
    double sd = std::sqrt(var);
    s.means[j] = m;
    if (sd > kSdFloor) {
      s.sds[j] = sd;
      s.kept.push_back(static_cast<int>(j));
    } else {
      s.sds[j] = 0.0;
    }
  }
  s.X.resize(n, static_cast<Eigen::Index>(s.kept.size()));
  for (std::size_t k = 0; k < s.kept.size(); ++k) {
    int j = s.kept[k];
    s.X.col(static_cast<Eigen::Index>(k)) = (X.col(j).array() - s.means[j]) / s.sds[j];
  }
  return s;
}

// max_j |d l / d beta_j| at the null model, on standardized columns
double lambda_max_standardized(const Eigen::MatrixXd& Xs, const Eigen::VectorXd& y, Family family,
                               double eta_clip) {
  if (Xs.cols() == 0) return 0.0;
  double mu0;
  if (family == Family::Gaussian) {
    mu0 = y.mean();
  } else {
    double a = null_intercept(Family::Poisson, y, eta_clip);
    mu0 = std::exp(a);
  }
  Eigen::VectorXd g = Xs.transpose() * (Eigen::VectorXd::Constant(y.size(), mu0) - y);
  return g.cwiseAbs().maxCoeff();
}

struct SolveState {
  double alpha = 0.0;
  Eigen::VectorXd beta;  // standardized scale
  FitDiagnostics diag;
  double objective = 0.0;
};

double penalized_objective(Family family, const Eigen::VectorXd& y, const Eigen::VectorXd& eta,
                           const Eigen::VectorXd& beta, double lambda, double eta_clip) {
  double l = 0.0;
  if (family == Family::Gaussian) {
    l = 0.5 * (y - eta).squaredNorm();
  } else {
    for (Eigen::Index t = 0; t < y.size(); ++t) {
      double e = std::clamp(eta[t], -eta_clip, eta_clip);
      l += std::exp(e) - y[t] * e;
    }
  }
  return l + lambda * beta.template lpNorm<1>();
}

// Gaussian lasso: plain cyclic coordinate descent.
SolveState solve_gaussian(const Eigen::MatrixXd& Xs, const Eigen::VectorXd& y, double lambda,
                          const FitOptions& opt, double alpha0, const Eigen::VectorXd& beta0) {
  const Eigen::Index n = Xs.rows(), p = Xs.cols();
  SolveState st;
  st.alpha = alpha0;
  st.beta = beta0;

  Eigen::VectorXd colsq(p);
  for (Eigen::Index j = 0; j < p; ++j) colsq[j] = Xs.col(j).squaredNorm();

  Eigen::VectorXd r = y - Eigen::VectorXd::Constant(n, st.alpha) - Xs * st.beta;
  st.diag.converged = false;
  while (st.diag.passes < opt.max_passes) {
    double delta = 0.0;
    double step = r.mean();
    st.alpha += step;
    r.array() -= step;
    delta = std::max(delta, std::abs(step));
    for (Eigen::Index j = 0; j < p; ++j) {
      if (colsq[j] <= 0.0) continue;
      double z = Xs.col(j).dot(r) + st.beta[j] * colsq[j];
      double bn = soft_threshold(z, lambda) / colsq[j];
      double db = bn - st.beta[j];
      if (db != 0.0) {
        r -= db * Xs.col(j);
        st.beta[j] = bn;
        delta = std::max(delta, std::abs(db));
      }
    }
    ++st.diag.passes;
    st.diag.objective_trace.push_back(0.5 * r.squaredNorm() +
                                      lambda * st.beta.template lpNorm<1>());
    if (delta < opt.tol) {
      st.diag.converged = true;
      break;
    }
  }
  Eigen::VectorXd eta = Eigen::VectorXd::Constant(n, st.alpha) + Xs * st.beta;
  st.objective = penalized_objective(Family::Gaussian, y, eta, st.beta, lambda, opt.eta_clip);
  return st;
}

// Poisson lasso: IRLS outer loop, weighted coordinate descent inner loop,
// step-halving so the working objective never increases.
SolveState solve_poisson(const Eigen::MatrixXd& Xs, const Eigen::VectorXd& y, double lambda,
                         const FitOptions& opt, double alpha0, const Eigen::VectorXd& beta0) {
  const Eigen::Index n = Xs.rows(), p = Xs.cols();
  SolveState st;
  st.alpha = alpha0;
  st.beta = beta0;
  st.diag.converged = false;

  const double inner_tol = opt.tol * 0.1;
  const int max_inner_sweeps = 1000;

  Eigen::VectorXd eta = Eigen::VectorXd::Constant(n, st.alpha) + Xs * st.beta;
  double f_curr = penalized_objective(Family::Poisson, y, eta, st.beta, lambda, opt.eta_clip);
  st.diag.objective_trace.push_back(f_curr);

  Eigen::VectorXd mu(n), w(n), rr(n), colsq_w(p);
  while (st.diag.passes < opt.max_passes) {
    ++st.diag.irls_iterations;
    for (Eigen::Index t = 0; t < n; ++t) {
      double e = eta[t];
      if (e > opt.eta_clip || e < -opt.eta_clip) {
        st.diag.eta_clipped = true;
        e = std::clamp(e, -opt.eta_clip, opt.eta_clip);
      }
      mu[t] = std::exp(e);
      w[t] = std::max(mu[t], kWeightFloor);
      // working response z = e + (y - mu)/w; rr tracks z - eta
      rr[t] = e + (y[t] - mu[t]) / w[t] - eta[t];
    }
    double sumw = w.sum();
    for (Eigen::Index j = 0; j < p; ++j)
      colsq_w[j] = (w.array() * Xs.col(j).array().square()).sum();

    const double a_prev = st.alpha;
    const Eigen::VectorXd b_prev = st.beta;
    const Eigen::VectorXd eta_prev = eta;

    int inner = 0;
    while (inner < max_inner_sweeps && st.diag.passes < opt.max_passes) {
      double delta = 0.0;
      double step = w.dot(rr) / sumw;
      st.alpha += step;
      rr.array() -= step;
      delta = std::max(delta, std::abs(step));
      for (Eigen::Index j = 0; j < p; ++j) {
        if (colsq_w[j] <= 0.0) continue;
        double z = (w.array() * Xs.col(j).array() * rr.array()).sum() + st.beta[j] * colsq_w[j];
        double bn = soft_threshold(z, lambda) / colsq_w[j];
        double db = bn - st.beta[j];
        if (db != 0.0) {
          rr -= db * Xs.col(j);
          st.beta[j] = bn;
          delta = std::max(delta, std::abs(db));
        }
      }
      ++st.diag.passes;
      ++inner;
      if (delta < inner_tol) break;
    }

    Eigen::VectorXd eta_cand = Eigen::VectorXd::Constant(n, st.alpha) + Xs * st.beta;
    double f_cand =
        penalized_objective(Family::Poisson, y, eta_cand, st.beta, lambda, opt.eta_clip);
    const double a_cand = st.alpha;
    const Eigen::VectorXd b_cand = st.beta;
    double s = 1.0;
    while (f_cand > f_curr + 1e-12 * (1.0 + std::abs(f_curr)) && s > 1e-6) {
      s *= 0.5;
      st.alpha = a_prev + s * (a_cand - a_prev);
      st.beta = b_prev + s * (b_cand - b_prev);
      eta = eta_prev + s * (eta_cand - eta_prev);
      f_cand = penalized_objective(Family::Poisson, y, eta, st.beta, lambda, opt.eta_clip);
    }
    if (s == 1.0) eta = eta_cand;
    f_curr = f_cand;
    st.diag.objective_trace.push_back(f_curr);

    double step_max = std::abs(st.alpha - a_prev);
    for (Eigen::Index j = 0; j < p; ++j)
      step_max = std::max(step_max, std::abs(st.beta[j] - b_prev[j]));
    if (step_max < opt.tol) {
      st.diag.converged = true;
      break;
    }
  }
  st.objective = penalized_objective(Family::Poisson, y, eta, st.beta, lambda, opt.eta_clip);
  return st;
}

}  // namespace

double neg_log_likelihood(Family family, const Eigen::VectorXd& y, const Eigen::VectorXd& eta) {
  if (y.size() != eta.size())
    throw_error(ErrorCode::LengthMismatch, "neg_log_likelihood: length mismatch");
  for (Eigen::Index t = 0; t < eta.size(); ++t)
    if (!std::isfinite(eta[t])) throw_error(ErrorCode::NonFiniteEta, "non-finite linear predictor");
  check_response(family, y);
  double l = 0.0;
  if (family == Family::Gaussian) {
    l = 0.5 * (y - eta).squaredNorm();
  } else {
    for (Eigen::Index t = 0; t < y.size(); ++t) l += std::exp(eta[t]) - y[t] * eta[t];
  }
  return l;
}

Eigen::VectorXd smooth_gradient(Family family, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                double intercept, const Eigen::VectorXd& coef) {
  if (X.rows() != y.size() || X.cols() != coef.size())
    throw_error(ErrorCode::LengthMismatch, "smooth_gradient: dimension mismatch");
  Eigen::VectorXd eta = Eigen::VectorXd::Constant(y.size(), intercept) + X * coef;
  Eigen::VectorXd resid;
  if (family == Family::Gaussian) {
    resid = eta - y;
  } else {
    resid = eta.array().exp().matrix() - y;
  }
  Eigen::VectorXd g(coef.size() + 1);
  g[0] = resid.sum();
  g.tail(coef.size()) = X.transpose() * resid;
  return g;
}

double lambda_max(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Family family) {
  if (X.rows() != y.size()) throw_error(ErrorCode::LengthMismatch, "lambda_max: length mismatch");
  check_response(family, y);
  Standardized s = standardize(X);
  return lambda_max_standardized(s.X, y, family, FitOptions{}.eta_clip);
}

ModelFit fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Family family, double lambda_pen,
             const FitOptions& options, const std::optional<WarmStart>& warm_start) {
  if (X.rows() != y.size()) throw_error(ErrorCode::LengthMismatch, "fit: rows(X) != len(y)");
  if (X.rows() == 0) throw_error(ErrorCode::InvalidArgument, "fit: empty data");
  if (!(lambda_pen >= 0.0) || !std::isfinite(lambda_pen))
    throw_error(ErrorCode::InvalidArgument, "fit: lambda_pen must be finite and >= 0");
  check_response(family, y);
  if (warm_start && warm_start->coef.size() != X.cols())
    throw_error(ErrorCode::LengthMismatch, "fit: warm start length mismatch");

  const Eigen::Index n = X.rows(), p = X.cols();
  Standardized s = standardize(X);
  const Eigen::Index pk = static_cast<Eigen::Index>(s.kept.size());

  ModelFit out;
  out.family = family;
  out.penalty = lambda_pen;
  out.train_meta.rows = static_cast<int>(n);
  out.train_meta.cols = static_cast<int>(p);
  for (Eigen::Index j = 0; j < p; ++j)
    if (s.sds[j] == 0.0) out.diag.dropped_columns.push_back(static_cast<int>(j));

  const double lmax = lambda_max_standardized(s.X, y, family, options.eta_clip);
  if (options.lambda_max_shortcut && lambda_pen > 0.0 && lambda_pen >= lmax) {
    // the null model satisfies the KKT conditions outright
    out.intercept = null_intercept(family, y, options.eta_clip);
    out.coef = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd eta = Eigen::VectorXd::Constant(n, out.intercept);
    out.train_meta.objective = penalized_objective(family, y, eta, Eigen::VectorXd::Zero(pk),
                                                   lambda_pen, options.eta_clip);
    out.diag.objective_trace.push_back(out.train_meta.objective);
    return out;
  }

  double alpha0;
  Eigen::VectorXd beta0 = Eigen::VectorXd::Zero(pk);
  if (warm_start) {
    alpha0 = warm_start->intercept;
    for (Eigen::Index j = 0; j < p; ++j) alpha0 += warm_start->coef[j] * s.means[j];
    for (Eigen::Index k = 0; k < pk; ++k) {
      int j = s.kept[static_cast<std::size_t>(k)];
      beta0[k] = warm_start->coef[j] * s.sds[j];
    }
  } else {
    alpha0 = null_intercept(family, y, options.eta_clip);
  }

  SolveState st = family == Family::Gaussian
                      ? solve_gaussian(s.X, y, lambda_pen, options, alpha0, beta0)
                      : solve_poisson(s.X, y, lambda_pen, options, alpha0, beta0);

  out.coef = Eigen::VectorXd::Zero(p);
  double intercept = st.alpha;
  for (Eigen::Index k = 0; k < pk; ++k) {
    int j = s.kept[static_cast<std::size_t>(k)];
    out.coef[j] = st.beta[k] / s.sds[j];
    intercept -= st.beta[k] * s.means[j] / s.sds[j];
  }
  out.intercept = intercept;
  out.train_meta.objective = st.objective;
  auto dropped = std::move(out.diag.dropped_columns);
  out.diag = std::move(st.diag);
  out.diag.dropped_columns = std::move(dropped);
  return out;
}

CvPlan CvPlan::make(int rows, int fold_count, double lambda_max_value, int grid_size,
                    double grid_min_ratio, std::uint64_t seed) {
  if (fold_count < 2) throw_error(ErrorCode::InvalidArgument, "fold_count must be >= 2");
  if (grid_size < 1) throw_error(ErrorCode::InvalidArgument, "grid_size must be >= 1");
  if (!(grid_min_ratio > 0.0 && grid_min_ratio < 1.0))
    throw_error(ErrorCode::InvalidArgument, "grid_min_ratio must be in (0,1)");

  CvPlan plan;
  plan.fold_count = fold_count;
  plan.seed = seed;

  std::vector<int> perm(static_cast<std::size_t>(rows));
  for (int i = 0; i < rows; ++i) perm[static_cast<std::size_t>(i)] = i;
  auto eng = make_engine(seed);
  shuffle_vector(perm, eng);
  plan.fold_assignment.assign(static_cast<std::size_t>(rows), 0);
  for (int i = 0; i < rows; ++i)
    plan.fold_assignment[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] =
        i % fold_count;

  const double lmax = std::max(lambda_max_value, kLambdaFloor);
  plan.lambda_grid.reserve(static_cast<std::size_t>(grid_size));
  if (grid_size == 1) {
    plan.lambda_grid.push_back(lmax);
  } else {
    const double logr = std::log(grid_min_ratio);
    for (int i = 0; i < grid_size; ++i)
      plan.lambda_grid.push_back(
          lmax * std::exp(logr * static_cast<double>(i) / static_cast<double>(grid_size - 1)));
  }
  plan.validate(rows);
  return plan;
}

void CvPlan::validate(int rows) const {
  if (fold_count < 2) throw_error(ErrorCode::InvalidArgument, "fold_count must be >= 2");
  if (rows < 2 * fold_count)
    throw_error(ErrorCode::InvalidArgument, "cross-validation needs at least 2*fold_count rows");
  if (static_cast<int>(fold_assignment.size()) != rows)
    throw_error(ErrorCode::LengthMismatch, "fold assignment length mismatch");
  std::vector<int> counts(static_cast<std::size_t>(fold_count), 0);
  for (int f : fold_assignment) {
    if (f < 0 || f >= fold_count)
      throw_error(ErrorCode::InvalidArgument, "fold assignment out of range");
    counts[static_cast<std::size_t>(f)]++;
  }
  for (int c : counts)
    if (c == 0) throw_error(ErrorCode::InvalidArgument, "empty cross-validation fold");
  if (lambda_grid.empty()) throw_error(ErrorCode::InvalidArgument, "empty lambda grid");
  for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
    if (!(lambda_grid[i] > 0.0))
      throw_error(ErrorCode::InvalidArgument, "lambda grid values must be positive");
    if (i > 0 && !(lambda_grid[i] < lambda_grid[i - 1]))
      throw_error(ErrorCode::InvalidArgument, "lambda grid must be strictly descending");
  }
}

std::vector<std::optional<ModelFit>> solve_path(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                                Family family, const std::vector<double>& grid,
                                                const FitOptions& options) {
  std::vector<std::optional<ModelFit>> fits(grid.size());
  std::optional<WarmStart> warm;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    try {
      ModelFit f = fit(X, y, family, grid[i], options, warm);
      warm = WarmStart{f.intercept, f.coef};
      fits[i] = std::move(f);
    } catch (const Error&) {
      fits[i] = std::nullopt;
    }
  }
  return fits;
}

CvResult cross_validate(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Family family,
                        const CvPlan& plan, const FitOptions& options, int jobs) {
  const int n = static_cast<int>(X.rows());
  plan.validate(n);

  const std::size_t n_grid = plan.lambda_grid.size();
  const std::size_t n_folds = static_cast<std::size_t>(plan.fold_count);
  std::vector<std::vector<double>> fold_nll(n_folds,
                                            std::vector<double>(n_grid, std::numeric_limits<double>::quiet_NaN()));

  parallel_for(n_folds, jobs, [&](std::size_t k) {
    std::vector<int> train, test;
    for (int i = 0; i < n; ++i) {
      if (plan.fold_assignment[static_cast<std::size_t>(i)] == static_cast<int>(k))
        test.push_back(i);
      else
        train.push_back(i);
    }
    Eigen::MatrixXd Xtr(train.size(), X.cols()), Xte(test.size(), X.cols());
    Eigen::VectorXd ytr(train.size()), yte(test.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
      Xtr.row(static_cast<Eigen::Index>(i)) = X.row(train[i]);
      ytr[static_cast<Eigen::Index>(i)] = y[train[i]];
    }
    for (std::size_t i = 0; i < test.size(); ++i) {
      Xte.row(static_cast<Eigen::Index>(i)) = X.row(test[i]);
      yte[static_cast<Eigen::Index>(i)] = y[test[i]];
    }
    auto path = solve_path(Xtr, ytr, family, plan.lambda_grid, options);
    for (std::size_t i = 0; i < n_grid; ++i) {
      if (!path[i]) continue;
      Eigen::VectorXd eta =
          Eigen::VectorXd::Constant(Xte.rows(), path[i]->intercept) + Xte * path[i]->coef;
      fold_nll[k][i] = neg_log_likelihood(family, yte, eta);
    }
  });

  CvResult out;
  out.cv_curve.assign(n_grid, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < n_grid; ++i) {
    double sum = 0.0;
    bool valid = true;
    for (std::size_t k = 0; k < n_folds; ++k) {
      if (std::isnan(fold_nll[k][i])) {
        valid = false;
        break;
      }
      sum += fold_nll[k][i];
    }
    if (valid) out.cv_curve[i] = sum / static_cast<double>(n_folds);
  }

  int best = -1;
  for (std::size_t i = 0; i < n_grid; ++i) {
    if (std::isnan(out.cv_curve[i])) continue;
    if (best < 0 || out.cv_curve[i] < out.cv_curve[static_cast<std::size_t>(best)])
      best = static_cast<int>(i);
  }
  if (best < 0)
    throw_error(ErrorCode::InvalidArgument, "cross_validate: every grid point failed");
  out.lambda_star = plan.lambda_grid[static_cast<std::size_t>(best)];
  return out;
}

double predict_eta(const ModelFit& fit, const Eigen::VectorXd& x_row) {
  if (x_row.size() != fit.coef.size())
    throw_error(ErrorCode::LengthMismatch, "predict: row length does not match coefficients");
  return fit.intercept + fit.coef.dot(x_row);
}

double predict(const ModelFit& fit, const Eigen::VectorXd& x_row) {
  double eta = predict_eta(fit, x_row);
  return fit.family == Family::Poisson ? std::exp(eta) : eta;
}

std::string fit_to_json(const ModelFit& fit) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["family"] = family_name(fit.family);
  j["intercept"] = fit.intercept;
  j["coef"] = std::vector<double>(fit.coef.data(), fit.coef.data() + fit.coef.size());
  j["penalty"] = fit.penalty;
  j["column_meta_digest"] = fit.column_digest;
  j["train_meta"] = {{"rows", fit.train_meta.rows},
                     {"cols", fit.train_meta.cols},
                     {"objective", fit.train_meta.objective}};
  j["converged"] = fit.diag.converged;
  j["passes"] = fit.diag.passes;
  return j.dump(2) + "\n";
}

ModelFit fit_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (j.at("version").get<int>() != 1)
    throw_error(ErrorCode::SchemaError, "unsupported model fit version");
  ModelFit f;
  f.family = parse_family(j.at("family").get<std::string>());
  f.intercept = j.at("intercept").get<double>();
  auto coef = j.at("coef").get<std::vector<double>>();
  f.coef = Eigen::Map<Eigen::VectorXd>(coef.data(), static_cast<Eigen::Index>(coef.size()));
  f.penalty = j.at("penalty").get<double>();
  f.column_digest = j.value("column_meta_digest", std::string());
  f.train_meta.rows = j.at("train_meta").at("rows").get<int>();
  f.train_meta.cols = j.at("train_meta").at("cols").get<int>();
  f.train_meta.objective = j.at("train_meta").at("objective").get<double>();
  f.diag.converged = j.value("converged", true);
  f.diag.passes = j.value("passes", 0);
  return f;
}

}  // namespace flucast::glm
