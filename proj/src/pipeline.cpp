#include "flucast/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "flucast/csv.hpp"
#include "flucast/error.hpp"
#include "flucast/sha256.hpp"
#include "flucast/util.hpp"
#include "flucast/version.hpp"

namespace flucast::pipeline {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

const char* observed_stat_name(infer::ObservedStat s) {
  return s == infer::ObservedStat::Q4MinusQ1 ? "q4_minus_q1" : "spread";
}

infer::ObservedStat parse_observed_stat(const std::string& s) {
  if (s == "q4_minus_q1") return infer::ObservedStat::Q4MinusQ1;
  if (s == "spread") return infer::ObservedStat::Spread;
  throw_error(ErrorCode::InvalidArgument, "unknown observed_stat '" + s + "'");
}

std::string group_label(int group) { return group == 0 ? "combined" : std::to_string(group); }

}  // namespace

RunConfig RunConfig::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw_error(ErrorCode::InvalidArgument, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

RunConfig RunConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw_error(ErrorCode::SchemaError, std::string("config is not valid JSON: ") + e.what());
  }

  RunConfig c;
  try {
    if (j.contains("seed")) {
      c.seed = j.at("seed").get<std::uint64_t>();
      c.seed_set = true;
    }
    if (j.contains("jobs")) c.jobs = j.at("jobs").get<int>();
    if (j.contains("out")) c.out_dir = j.at("out").get<std::string>();
    if (j.contains("input")) {
      InputFiles f;
      f.series = j.at("input").at("series").get<std::string>();
      f.hosp = j.at("input").at("hosp").get<std::string>();
      f.meta = j.at("input").at("meta").get<std::string>();
      c.input = f;
    }
    if (j.contains("synth")) {
      synth::SynthConfig s;
      const json& js = j.at("synth");
      s.weeks = js.value("weeks", s.weeks);
      s.zips = js.value("zips", s.zips);
      s.ili_series = js.value("ili_series", s.ili_series);
      s.ed_series = js.value("ed_series", s.ed_series);
      s.trend_series = js.value("trend_series", s.trend_series);
      s.seasonal_amplitude = js.value("seasonal_amplitude", s.seasonal_amplitude);
      s.baseline_rate_per_1000 = js.value("baseline_rate_per_1000", s.baseline_rate_per_1000);
      s.within_group_rho = js.value("within_group_rho", s.within_group_rho);
      s.shock_sd = js.value("shock_sd", s.shock_sd);
      s.shock_ar = js.value("shock_ar", s.shock_ar);
      s.frailty_sd = js.value("frailty_sd", s.frailty_sd);
      s.source_noise = js.value("source_noise", s.source_noise);
      s.bias_slope = js.value("bias_slope", s.bias_slope);
      s.age_stratified = js.value("age_stratified", s.age_stratified);
      c.synth_config = s;
    }
    if (j.contains("variants")) c.variants = j.at("variants").get<std::vector<std::string>>();
    if (c.variants.empty())
      for (const auto& v : design::Variant::all()) c.variants.push_back(v.name);
    if (j.contains("horizons")) c.horizons = j.at("horizons").get<std::vector<int>>();
    if (j.contains("family")) c.model.family = glm::parse_family(j.at("family").get<std::string>());
    if (j.contains("schemes")) {
      c.schemes.clear();
      for (const auto& s : j.at("schemes"))
        c.schemes.push_back(eval::SplitScheme::parse(s.get<std::string>()));
    }
    if (j.contains("model")) {
      const json& jm = j.at("model");
      c.model.df = jm.value("df", c.model.df);
      c.model.degree = jm.value("degree", c.model.degree);
      c.model.cv_folds = jm.value("cv_folds", c.model.cv_folds);
      c.model.cv_grid_size = jm.value("cv_grid_size", c.model.cv_grid_size);
      c.model.cv_grid_min_ratio = jm.value("cv_grid_min_ratio", c.model.cv_grid_min_ratio);
      c.model.fit_options.tol = jm.value("tol", c.model.fit_options.tol);
      c.model.fit_options.max_passes = jm.value("max_passes", c.model.fit_options.max_passes);
      c.model.loo_reuse_lambda = jm.value("loo_reuse_lambda", c.model.loo_reuse_lambda);
    }
    if (j.contains("permutation")) {
      const json& jp = j.at("permutation");
      c.permutation_repeats = jp.value("repeats", c.permutation_repeats);
      if (jp.contains("variants"))
        c.permutation_variants = jp.at("variants").get<std::vector<std::string>>();
      if (jp.contains("observed_stat"))
        c.permutation_observed = parse_observed_stat(jp.at("observed_stat").get<std::string>());
    }
    if (j.contains("synchrony"))
      c.synchrony_repeats = j.at("synchrony").value("repeats", c.synchrony_repeats);
  } catch (const json::exception& e) {
    throw_error(ErrorCode::SchemaError, std::string("bad config field: ") + e.what());
  }
  if (c.permutation_variants.empty() && !c.variants.empty())
    c.permutation_variants = {c.variants.front()};
  return c;
}

std::string RunConfig::canonical_json() const {
  // jobs and output paths are excluded: results must not depend on them
  ordered_json j;
  j["seed"] = seed;
  if (input) {
    j["input"] = {{"series", input->series.string()},
                  {"hosp", input->hosp.string()},
                  {"meta", input->meta.string()}};
  }
  if (synth_config) {
    const auto& s = *synth_config;
    j["synth"] = ordered_json{{"weeks", s.weeks},
                              {"zips", s.zips},
                              {"ili_series", s.ili_series},
                              {"ed_series", s.ed_series},
                              {"trend_series", s.trend_series},
                              {"seasonal_amplitude", s.seasonal_amplitude},
                              {"baseline_rate_per_1000", s.baseline_rate_per_1000},
                              {"within_group_rho", s.within_group_rho},
                              {"shock_sd", s.shock_sd},
                              {"shock_ar", s.shock_ar},
                              {"frailty_sd", s.frailty_sd},
                              {"source_noise", s.source_noise},
                              {"bias_slope", s.bias_slope},
                              {"age_stratified", s.age_stratified}};
  }
  j["variants"] = variants;
  j["horizons"] = horizons;
  j["family"] = glm::family_name(model.family);
  std::vector<std::string> scheme_names;
  for (const auto& s : schemes) scheme_names.push_back(s.name());
  j["schemes"] = scheme_names;
  j["model"] = ordered_json{{"df", model.df},
                            {"degree", model.degree},
                            {"cv_folds", model.cv_folds},
                            {"cv_grid_size", model.cv_grid_size},
                            {"cv_grid_min_ratio", model.cv_grid_min_ratio},
                            {"tol", model.fit_options.tol},
                            {"max_passes", model.fit_options.max_passes},
                            {"loo_reuse_lambda", model.loo_reuse_lambda}};
  j["permutation"] = ordered_json{{"repeats", permutation_repeats},
                                  {"variants", permutation_variants},
                                  {"observed_stat", observed_stat_name(permutation_observed)}};
  j["synchrony"] = ordered_json{{"repeats", synchrony_repeats}};
  return j.dump(2) + "\n";
}

void RunConfig::validate() const {
  if (!seed_set) throw_error(ErrorCode::InvalidArgument, "config: seed is required");
  if (variants.empty()) throw_error(ErrorCode::InvalidArgument, "config: need at least one variant");
  if (schemes.empty()) throw_error(ErrorCode::InvalidArgument, "config: need at least one scheme");
  if (horizons.empty()) throw_error(ErrorCode::InvalidArgument, "config: need at least one horizon");
  for (int h : horizons)
    if (h != 1 && h != 2) throw_error(ErrorCode::InvalidArgument, "config: horizons must be 1 or 2");
  if (input.has_value() == synth_config.has_value())
    throw_error(ErrorCode::InvalidArgument, "config: exactly one of 'input' or 'synth' required");
  if (jobs < 1) throw_error(ErrorCode::InvalidArgument, "config: jobs must be >= 1");
  if (out_dir.empty()) throw_error(ErrorCode::InvalidArgument, "config: output directory required");
  if (permutation_repeats < 0 || synchrony_repeats < 0)
    throw_error(ErrorCode::InvalidArgument, "config: repeat counts must be nonnegative");
  for (const auto& name : variants) design::Variant::from_name(name);
  for (const auto& name : permutation_variants) {
    if (std::find(variants.begin(), variants.end(), name) == variants.end())
      throw_error(ErrorCode::InvalidArgument,
                  "config: permutation variant '" + name + "' not in variants");
  }
}

namespace {

struct FileRegistry {
  std::filesystem::path root;
  std::vector<std::filesystem::path> files;  // relative paths

  std::filesystem::path abs(const std::filesystem::path& rel) {
    std::filesystem::create_directories((root / rel).parent_path());
    files.push_back(rel);
    return root / rel;
  }
};

ordered_json report_to_json(const eval::EvalReport& r, double bias_p) {
  ordered_json j;
  j["group"] = group_label(r.group);
  j["variant"] = r.variant;
  j["horizon"] = r.horizon;
  j["scheme"] = r.scheme.name();
  j["ormse_per_million"] = r.ormse_per_million;
  j["oos_neg_log_lik"] = r.oos_neg_log_lik;
  j["n_test"] = r.n_test;
  j["population"] = r.population;
  j["nonconverged_fits"] = r.nonconverged_fits;
  j["residual_bias_p"] = bias_p;
  j["test_weeks"] = r.test_weeks;
  j["observed"] = r.observed;
  j["predicted"] = r.predicted;
  j["errors"] = r.errors;
  j["train_weeks"] = r.train_weeks;
  j["train_observed"] = r.train_observed;
  j["train_fitted"] = r.train_fitted;
  return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_error(ErrorCode::InvalidArgument, "cannot write " + path.string());
  out << text;
}

}  // namespace

void write_error_record(const std::filesystem::path& out_dir, const std::string& code,
                        const std::string& message) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  ordered_json j;
  j["error"] = code;
  j["message"] = message;
  std::ofstream out(out_dir / "error.json", std::ios::binary);
  if (out) out << j.dump(2) << "\n";
}

data::WeeklyPanel load_or_synthesize(const RunConfig& config,
                                     std::vector<std::filesystem::path>* written) {
  if (config.synth_config) {
    synth::SynthConfig sc = *config.synth_config;
    sc.seed = derive_seed(config.seed, "synth");
    synth::SynthResult generated = synth::generate(sc);
    synth::PanelPaths paths = synth::write_panel_csvs(generated.panel, config.out_dir / "input");
    if (written) {
      written->push_back(std::filesystem::path("input") / "series.csv");
      written->push_back(std::filesystem::path("input") / "hosp.csv");
      written->push_back(std::filesystem::path("input") / "meta.csv");
    }
    return data::load_panel(paths.series, paths.hosp, paths.meta);
  }
  return data::load_panel(config.input->series, config.input->hosp, config.input->meta);
}

std::filesystem::path fit_single(const RunConfig& config, const std::string& variant_name,
                                 int horizon, int group) {
  config.validate();
  if (group < 1 || group > 4) throw_error(ErrorCode::InvalidArgument, "group must be in 1..4");
  std::filesystem::create_directories(config.out_dir);
  data::WeeklyPanel panel = load_or_synthesize(config);
  data::QuartileGrouping grouping = data::assign_quartiles(panel);
  design::Variant variant = design::Variant::from_name(variant_name);

  design::DesignMatrix matrix = design::build_matrix(panel, variant, horizon);
  const int n_rows = static_cast<int>(matrix.values.rows());
  std::vector<int> all_rows(static_cast<std::size_t>(n_rows));
  for (int i = 0; i < n_rows; ++i) all_rows[static_cast<std::size_t>(i)] = i;
  design::ExpandedMatrix expanded =
      design::expand(matrix, all_rows, config.model.df, config.model.degree);

  data::GroupSeries resp = data::group_response(panel, grouping, group);
  const int first_row = static_cast<int>(resp.counts.size()) - n_rows;
  Eigen::VectorXd y(n_rows);
  for (int i = 0; i < n_rows; ++i)
    y[i] = static_cast<double>(resp.counts[static_cast<std::size_t>(first_row + i)]);

  double lmax = glm::lambda_max(expanded.values, y, config.model.family);
  glm::CvPlan plan = glm::CvPlan::make(n_rows, config.model.cv_folds, lmax,
                                       config.model.cv_grid_size, config.model.cv_grid_min_ratio,
                                       derive_seed(config.seed, "fitcv",
                                                   static_cast<std::uint64_t>(horizon),
                                                   static_cast<std::uint64_t>(group)));
  glm::CvResult cv = glm::cross_validate(expanded.values, y, config.model.family, plan,
                                         config.model.fit_options, config.jobs);
  glm::ModelFit fit =
      glm::fit(expanded.values, y, config.model.family, cv.lambda_star, config.model.fit_options);
  fit.column_digest = expanded.column_digest(matrix.column_meta);

  std::ostringstream name;
  name << "fit_" << variant.name << "_h" << horizon << "_g" << group << ".json";
  std::filesystem::path path = config.out_dir / name.str();
  write_text(path, glm::fit_to_json(fit));
  return path;
}

void run(const RunConfig& config, unsigned stages) {
  config.validate();
  FileRegistry reg{config.out_dir, {}};
  std::filesystem::create_directories(config.out_dir);

  data::WeeklyPanel panel = load_or_synthesize(config, &reg.files);
  data::QuartileGrouping grouping = data::assign_quartiles(panel);

  // --- evaluation grid
  if (stages & kStageEval) {
    struct Cell {
      eval::EvalReport report;
      double bias_p = 1.0;
    };
    std::vector<Cell> cells;
    std::map<std::pair<int, std::string>, std::vector<double>> table2;

    for (std::size_t si = 0; si < config.schemes.size(); ++si) {
      const auto& scheme = config.schemes[si];
      for (int horizon : config.horizons) {
        for (std::size_t vi = 0; vi < config.variants.size(); ++vi) {
          design::Variant variant = design::Variant::from_name(config.variants[vi]);
          eval::PreparedDesign prep =
              eval::prepare(panel, variant, horizon, scheme, config.model);
          std::vector<eval::EvalReport> group_reports;
          for (int g = 1; g <= 4; ++g) {
            data::GroupSeries resp = data::group_response(panel, grouping, g);
            std::uint64_t cv_seed = derive_seed(
                derive_seed(config.seed, variant.name, static_cast<std::uint64_t>(horizon), si),
                "eval", static_cast<std::uint64_t>(g));
            eval::EvalReport r = eval::evaluate_prepared(prep, resp.counts, resp.population,
                                                         scheme, config.model, cv_seed,
                                                         config.jobs);
            r.group = g;
            r.variant = variant.name;
            group_reports.push_back(std::move(r));
          }
          eval::EvalReport combined = eval::combine_reports(group_reports);
          group_reports.push_back(combined);

          auto& row = table2[{horizon, scheme.file_tag()}];
          for (const auto& r : group_reports) row.push_back(r.ormse_per_million);

          for (auto& r : group_reports) {
            Cell cell;
            std::uint64_t bias_seed =
                derive_seed(config.seed, "biastest", static_cast<std::uint64_t>(r.group),
                            vi * 1000 + static_cast<std::uint64_t>(horizon) * 10 + si);
            cell.bias_p = eval::residual_bias_test(r.errors, 10000, bias_seed).p_value;
            cell.report = std::move(r);
            cells.push_back(std::move(cell));
          }
        }
      }
    }

    {
      CsvWriter w(reg.abs("eval_summary.csv"));
      w.write_row({"variant", "horizon", "scheme", "group", "ormse_per_million",
                   "oos_neg_log_lik", "n_test", "population", "nonconverged_fits",
                   "residual_bias_p"});
      for (const auto& c : cells) {
        const auto& r = c.report;
        w.write_row({r.variant, std::to_string(r.horizon), r.scheme.name(), group_label(r.group),
                     format_double(r.ormse_per_million), format_double(r.oos_neg_log_lik),
                     std::to_string(r.n_test), std::to_string(r.population),
                     std::to_string(r.nonconverged_fits), format_double(c.bias_p)});
      }
    }

    // Table-2-shaped CSV per (horizon, scheme): variants as rows, quartile
    // and combined columns
    for (const auto& [key, values] : table2) {
      std::ostringstream name;
      name << "table2_h" << key.first << "_" << key.second << ".csv";
      CsvWriter w(reg.abs(name.str()));
      w.write_row({"variant", "q1", "q2", "q3", "q4", "combined"});
      for (std::size_t vi = 0; vi < config.variants.size(); ++vi) {
        std::vector<std::string> row = {config.variants[vi]};
        for (std::size_t k = 0; k < 5; ++k) row.push_back(format_double(values[vi * 5 + k]));
        w.write_row(row);
      }
    }

    {
      ordered_json arr = ordered_json::array();
      for (const auto& c : cells) arr.push_back(report_to_json(c.report, c.bias_p));
      write_text(reg.abs("eval_detail.json"), arr.dump(2) + "\n");
    }
  }

  // --- permutation tests
  if ((stages & kStagePermutation) && config.permutation_repeats > 0) {
    CsvWriter summary(reg.abs("permutation_summary.csv"));
    summary.write_row({"variant", "horizon", "scheme", "observed_stat", "observed_diff",
                       "p_value", "p_upper", "repeats", "failed"});
    const auto& scheme = config.schemes.front();
    int horizon = config.horizons.front();
    for (std::size_t pi = 0; pi < config.permutation_variants.size(); ++pi) {
      infer::PermutationSettings ps;
      ps.variant = design::Variant::from_name(config.permutation_variants[pi]);
      ps.horizon = horizon;
      ps.scheme = scheme;
      ps.model = config.model;
      ps.observed_stat = config.permutation_observed;
      std::uint64_t seed = derive_seed(config.seed, "permtest", pi);
      infer::PermutationResult res = infer::permutation_test(
          panel, grouping, ps, config.permutation_repeats, seed, config.jobs);
      ordered_json j;
      j["variant"] = ps.variant.name;
      j["horizon"] = horizon;
      j["scheme"] = scheme.name();
      j["observed_stat"] = observed_stat_name(ps.observed_stat);
      j["observed_diff"] = res.observed_diff;
      j["observed_group_ormse"] = res.observed_group_ormse;
      j["p_value"] = res.p_value;
      j["p_upper"] = res.p_upper;
      j["repeats_requested"] = res.repeats_requested;
      j["repeats_failed"] = res.repeats_failed;
      j["null_diffs"] = res.null_diffs;
      std::ostringstream name;
      name << "permutation_" << ps.variant.name << "_h" << horizon << "_" << scheme.file_tag()
           << ".json";
      write_text(reg.abs(name.str()), j.dump(2) + "\n");
      summary.write_row({ps.variant.name, std::to_string(horizon), scheme.name(),
                         observed_stat_name(ps.observed_stat), format_double(res.observed_diff),
                         format_double(res.p_value), format_double(res.p_upper),
                         std::to_string(res.repeats_requested),
                         std::to_string(res.repeats_failed)});
    }
  }

  // --- synchrony
  if (stages & kStageSynchrony) {
    infer::CorrelationMatrix cm = infer::pairwise_correlation_matrix(panel);
    infer::SynchronyResult sync = infer::pairwise_synchrony(panel, grouping);

    ordered_json j;
    j["excluded_constant_zips"] = sync.excluded_constant_zips;
    ordered_json groups = ordered_json::array();
    for (int g = 1; g <= 4; ++g) {
      ordered_json jg;
      jg["group"] = g;
      const auto& rs = sync.per_group_correlations.at(g);
      jg["pair_count"] = rs.size();
      jg["mean_r"] = rs.empty() ? 0.0 : mean(rs);
      jg["median_r"] = rs.empty() ? 0.0 : median_of_sorted(rs);
      ordered_json pairs = ordered_json::array();
      std::vector<std::size_t> members;
      std::vector<std::size_t> all_members;
      for (std::size_t i = 0; i < cm.zips.size(); ++i) {
        auto it = grouping.assignment.find(cm.zips[i]);
        if (it == grouping.assignment.end() || it->second != g) continue;
        all_members.push_back(i);
        if (!cm.constant[i]) members.push_back(i);
      }
      for (std::size_t a = 0; a < members.size(); ++a)
        for (std::size_t b = a + 1; b < members.size(); ++b)
          pairs.push_back(ordered_json{{"zip_a", cm.zips[members[a]]},
                                       {"zip_b", cm.zips[members[b]]},
                                       {"r", cm.r(static_cast<Eigen::Index>(members[a]),
                                                  static_cast<Eigen::Index>(members[b]))}});
      jg["pairs"] = std::move(pairs);

      // PCA of the group's weekly counts backs up the correlation summary
      Eigen::MatrixXd counts(static_cast<Eigen::Index>(panel.week_count()),
                             static_cast<Eigen::Index>(all_members.size()));
      for (std::size_t k = 0; k < all_members.size(); ++k)
        for (std::size_t t = 0; t < panel.week_count(); ++t)
          counts(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k)) =
              static_cast<double>(panel.zips[all_members[k]].weekly_hosp[t]);
      try {
        infer::PcaResult pca = infer::pca(counts);
        jg["pc1_variance_share"] =
            pca.variance_explained.empty() ? 0.0 : pca.variance_explained.front();
      } catch (const Error&) {
        jg["pc1_variance_share"] = nullptr;
      }
      groups.push_back(std::move(jg));
    }
    j["groups"] = std::move(groups);

    if (config.synchrony_repeats > 0) {
      infer::SynchronyRandomization rnd = infer::synchrony_randomization(
          panel, grouping, config.synchrony_repeats, derive_seed(config.seed, "synchrony"),
          config.jobs);
      j["randomization"] = ordered_json{{"observed_mean", rnd.observed_mean},
                                        {"observed_median", rnd.observed_median},
                                        {"p_mean", rnd.p_mean},
                                        {"p_median", rnd.p_median},
                                        {"repeats", rnd.repeats}};
    }
    write_text(reg.abs("synchrony.json"), j.dump(2) + "\n");
  }

  // --- burden regression and correlations
  if (stages & kStageBurden) {
    infer::BurdenRegression br = infer::burden_regression(panel.zips);
    CsvWriter w(reg.abs("burden.csv"));
    w.write_row({"term", "estimate", "std_error", "t_value", "p_value"});
    for (int j = 0; j < 4; ++j)
      w.write_row({br.term_names[static_cast<std::size_t>(j)], format_double(br.coefficients[j]),
                   format_double(br.std_errors[j]), format_double(br.t_values[j]),
                   format_double(br.p_values[j])});

    infer::BurdenCorrelations bc = infer::burden_correlations(panel.zips);
    CsvWriter wc(reg.abs("burden_correlations.csv"));
    wc.write_row({"stratum", "r", "p_value", "n"});
    wc.write_row({"overall", format_double(bc.overall.r), format_double(bc.overall.p_value),
                  std::to_string(bc.overall.n)});
    if (bc.under65)
      wc.write_row({"under65", format_double(bc.under65->r), format_double(bc.under65->p_value),
                    std::to_string(bc.under65->n)});
    if (bc.over65)
      wc.write_row({"over65", format_double(bc.over65->r), format_double(bc.over65->p_value),
                    std::to_string(bc.over65->n)});
  }

  // --- plot-ready tables (from the detail files; same path as `report`)
  if (stages & kStageEval) {
    emit_plot_tables_from_dir(config.out_dir);
    reg.files.push_back(std::filesystem::path("plots") / "predictions.csv");
    reg.files.push_back(std::filesystem::path("plots") / "residuals.csv");
    reg.files.push_back(std::filesystem::path("plots") / "correlations.csv");
  }

  // --- manifest
  {
    std::sort(reg.files.begin(), reg.files.end());
    ordered_json j;
    j["tool"] = "flucast";
    j["version"] = kVersion;
    j["seed"] = config.seed;
    j["config_sha256"] = sha256_hex(config.canonical_json());
    ordered_json files = ordered_json::array();
    for (const auto& rel : reg.files) {
      files.push_back(ordered_json{{"path", rel.generic_string()},
                                   {"sha256", sha256_file_hex(config.out_dir / rel)}});
    }
    j["files"] = std::move(files);
    write_text(config.out_dir / "manifest.json", j.dump(2) + "\n");
  }
}

void emit_plot_tables_from_dir(const std::filesystem::path& out_dir) {
  std::ifstream in(out_dir / "eval_detail.json");
  if (!in)
    throw_error(ErrorCode::InvalidArgument,
                "missing eval_detail.json in " + out_dir.string() + " (run evaluate first)");
  json details = json::parse(in);

  std::filesystem::create_directories(out_dir / "plots");
  {
    CsvWriter w(out_dir / "plots" / "predictions.csv");
    w.write_row(
        {"variant", "horizon", "scheme", "group", "week", "split", "observed", "predicted"});
    for (const auto& r : details) {
      std::string variant = r.at("variant");
      std::string horizon = std::to_string(r.at("horizon").get<int>());
      std::string scheme = r.at("scheme");
      std::string group = r.at("group");
      const auto& tw = r.at("train_weeks");
      for (std::size_t i = 0; i < tw.size(); ++i)
        w.write_row({variant, horizon, scheme, group, std::to_string(tw[i].get<int>()), "train",
                     format_double(r.at("train_observed")[i].get<double>()),
                     format_double(r.at("train_fitted")[i].get<double>())});
      const auto& weeks = r.at("test_weeks");
      for (std::size_t i = 0; i < weeks.size(); ++i)
        w.write_row({variant, horizon, scheme, group, std::to_string(weeks[i].get<int>()), "test",
                     format_double(r.at("observed")[i].get<double>()),
                     format_double(r.at("predicted")[i].get<double>())});
    }
  }
  {
    CsvWriter w(out_dir / "plots" / "residuals.csv");
    w.write_row({"variant", "horizon", "scheme", "group", "week", "error"});
    for (const auto& r : details) {
      std::string variant = r.at("variant");
      std::string horizon = std::to_string(r.at("horizon").get<int>());
      std::string scheme = r.at("scheme");
      std::string group = r.at("group");
      const auto& weeks = r.at("test_weeks");
      for (std::size_t i = 0; i < weeks.size(); ++i)
        w.write_row({variant, horizon, scheme, group, std::to_string(weeks[i].get<int>()),
                     format_double(r.at("errors")[i].get<double>())});
    }
  }
  {
    CsvWriter w(out_dir / "plots" / "correlations.csv");
    w.write_row({"group", "zip_a", "zip_b", "r"});
    std::ifstream sin(out_dir / "synchrony.json");
    if (sin) {
      json sync = json::parse(sin);
      for (const auto& jg : sync.at("groups")) {
        std::string group = std::to_string(jg.at("group").get<int>());
        for (const auto& p : jg.at("pairs"))
          w.write_row({group, p.at("zip_a").get<std::string>(), p.at("zip_b").get<std::string>(),
                       format_double(p.at("r").get<double>())});
      }
    }
  }
}

}  // namespace flucast::pipeline
