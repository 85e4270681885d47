// Benchmark comparing the OpenMP kernels against their serial reference
// implementations, checking bitwise agreement along the way.

#include <chrono>
#include <cstdio>
#include <string>

#include "flucast/data_model.hpp"
#include "flucast/evaluation.hpp"
#include "flucast/group_inference.hpp"
#include "flucast/parallel.hpp"
#include "flucast/penalized_glm.hpp"
#include "flucast/reference.hpp"
#include "flucast/synthetic.hpp"

using namespace flucast;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void report(const char* name, double serial_s, double parallel_s, int jobs, bool equal) {
  std::printf("%-24s serial %8.3fs   parallel(%d) %8.3fs   speedup %.2fx   %s\n", name, serial_s,
              jobs, parallel_s, serial_s / parallel_s, equal ? "bitwise-equal" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  int jobs = hardware_jobs();
  bool full = false;
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    if (arg == "--full") full = true;
    if (arg == "--jobs" && i + 1 < argc) jobs = std::atoi(argv[++i]);
  }

  synth::SynthConfig cfg;
  cfg.weeks = full ? 140 : 70;
  cfg.zips = full ? 120 : 48;
  cfg.ili_series = 2;
  cfg.ed_series = 2;
  cfg.trend_series = 2;
  cfg.baseline_rate_per_1000 = 12.0;
  cfg.seed = 42;
  synth::SynthResult synth_result = synth::generate(cfg);
  const data::WeeklyPanel& panel = synth_result.panel;
  data::QuartileGrouping grouping = data::assign_quartiles(panel);

  eval::ModelSettings settings;
  settings.cv_folds = 5;
  settings.cv_grid_size = 25;
  settings.cv_grid_min_ratio = 1e-3;

  design::Variant variant = design::Variant::from_name("ili+ed+trend");
  data::GroupSeries response = data::group_response(panel, grouping, 4);

  std::printf("panel: %zu weeks, %zu zips, %zu series; jobs=%d\n\n", panel.week_count(),
              panel.zips.size(), panel.series.size(), jobs);

  {  // leave-one-out refits
    eval::PreparedDesign prep =
        eval::prepare(panel, variant, 1, eval::SplitScheme::loo(), settings);
    auto t0 = std::chrono::steady_clock::now();
    eval::EvalReport serial = reference::evaluate_loo_serial(prep, response.counts,
                                                             response.population, settings, 7);
    double serial_s = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    eval::EvalReport parallel =
        eval::evaluate_prepared(prep, response.counts, response.population,
                                eval::SplitScheme::loo(), settings, 7, jobs);
    double parallel_s = seconds_since(t0);
    bool equal = serial.errors == parallel.errors &&
                 serial.ormse_per_million == parallel.ormse_per_million;
    report("loo-refits", serial_s, parallel_s, jobs, equal);
  }

  {  // permutation nulls
    infer::PermutationSettings ps;
    ps.variant = variant;
    ps.horizon = 1;
    ps.scheme = eval::SplitScheme::holdout(0.6);
    ps.model = settings;
    infer::PermutationContext ctx = infer::make_permutation_context(panel, ps, 99);
    const int repeats = full ? 60 : 24;
    auto t0 = std::chrono::steady_clock::now();
    std::vector<double> serial = reference::permutation_nulls_serial(ctx, repeats);
    double serial_s = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    std::vector<double> parallel(static_cast<std::size_t>(repeats));
    parallel_for(static_cast<std::size_t>(repeats), jobs, [&](std::size_t r) {
      parallel[r] = infer::permutation_single_null(ctx, static_cast<int>(r));
    });
    double parallel_s = seconds_since(t0);
    report("permutation-nulls", serial_s, parallel_s, jobs, serial == parallel);
  }

  {  // cross-validation folds
    eval::PreparedDesign prep =
        eval::prepare(panel, variant, 1, eval::SplitScheme::holdout(0.6), settings);
    const int n_rows = static_cast<int>(prep.expanded.values.rows());
    Eigen::VectorXd y(n_rows);
    const int first_row = static_cast<int>(response.counts.size()) - n_rows;
    for (int i = 0; i < n_rows; ++i)
      y[i] = static_cast<double>(response.counts[static_cast<std::size_t>(first_row + i)]);
    double lmax = glm::lambda_max(prep.expanded.values, y, settings.family);
    glm::CvPlan plan = glm::CvPlan::make(n_rows, settings.cv_folds, lmax, settings.cv_grid_size,
                                         settings.cv_grid_min_ratio, 1234);
    auto t0 = std::chrono::steady_clock::now();
    glm::CvResult serial = reference::cross_validate_serial(prep.expanded.values, y,
                                                            settings.family, plan);
    double serial_s = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    glm::CvResult parallel =
        glm::cross_validate(prep.expanded.values, y, settings.family, plan, {}, jobs);
    double parallel_s = seconds_since(t0);
    bool equal = serial.lambda_star == parallel.lambda_star && serial.cv_curve == parallel.cv_curve;
    report("cv-folds", serial_s, parallel_s, jobs, equal);
  }

  return 0;
}
