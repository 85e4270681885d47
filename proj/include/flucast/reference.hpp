#pragma once

#include "flucast/evaluation.hpp"
#include "flucast/group_inference.hpp"

// Plain-loop serial counterparts of the OpenMP kernels. Kept for testing
// (parallel results must match these bitwise) and for the benchmark tool.
namespace flucast::reference {

eval::EvalReport evaluate_loo_serial(const eval::PreparedDesign& prep,
                                     const std::vector<std::int64_t>& counts,
                                     std::int64_t population,
                                     const eval::ModelSettings& settings, std::uint64_t cv_seed);

std::vector<double> permutation_nulls_serial(const infer::PermutationContext& ctx, int repeats);

glm::CvResult cross_validate_serial(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                    glm::Family family, const glm::CvPlan& plan,
                                    const glm::FitOptions& options = {});

}  // namespace flucast::reference
