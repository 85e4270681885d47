#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include <json.hpp>

#include "flucast/data_model.hpp"
#include "flucast/error.hpp"
#include "flucast/pipeline.hpp"
#include "flucast/util.hpp"
#include "flucast/version.hpp"

namespace {

using flucast::Error;
using flucast::ErrorCode;
namespace pipeline = flucast::pipeline;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::SchemaError:
    case ErrorCode::MissingWeek:
    case ErrorCode::UnknownZip:
    case ErrorCode::InvalidArgument:
      return 2;
    default:
      return 1;
  }
}

struct GlobalOpts {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir;
  int jobs = 0;
  std::string variant;
  int horizon = 0;
  std::string scheme;
};

pipeline::RunConfig build_config(const GlobalOpts& g, bool require_input = true) {
  pipeline::RunConfig c;
  if (!g.config_path.empty()) c = pipeline::RunConfig::from_json_file(g.config_path);
  if (g.seed_set) {
    c.seed = g.seed;
    c.seed_set = true;
  }
  if (!g.out_dir.empty()) c.out_dir = g.out_dir;
  if (g.jobs > 0) c.jobs = g.jobs;
  if (!g.variant.empty()) {
    c.variants = {g.variant};
    c.permutation_variants = {g.variant};
  }
  if (g.horizon > 0) c.horizons = {g.horizon};
  if (!g.scheme.empty()) c.schemes = {flucast::eval::SplitScheme::parse(g.scheme)};
  if (require_input && !c.input && !c.synth_config) {
    // default to the standard synthetic panel so every subcommand can run
    // without a config file
    c.synth_config = flucast::synth::SynthConfig{};
  }
  return c;
}

void print_error(const GlobalOpts& g, ErrorCode code, const std::string& message) {
  nlohmann::ordered_json j;
  j["error"] = flucast::error_code_name(code);
  j["message"] = message;
  std::cerr << j.dump() << "\n";
  if (!g.out_dir.empty())
    pipeline::write_error_record(g.out_dir, flucast::error_code_name(code), message);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flucast: multi-source influenza hospitalization forecasting"};
  app.set_version_flag("--version", flucast::kVersion);
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "JSON run configuration")
      ->envname("FLUCAST_CONFIG");
  auto* seed_opt =
      app.add_option("--seed", g.seed, "master seed")->envname("FLUCAST_SEED");
  app.add_option("--out", g.out_dir, "output directory")->envname("FLUCAST_OUT");
  app.add_option("--jobs", g.jobs, "parallel worker count")->envname("FLUCAST_JOBS");
  app.add_option("--variant", g.variant, "restrict to one variant (e.g. ili+ed)")
      ->envname("FLUCAST_VARIANT");
  app.add_option("--horizon", g.horizon, "restrict to one horizon (1 or 2)")
      ->envname("FLUCAST_HORIZON");
  app.add_option("--scheme", g.scheme, "restrict to one scheme (loo or holdout:<f>)")
      ->envname("FLUCAST_SCHEME");

  std::string v_series, v_hosp, v_meta;
  auto* validate = app.add_subcommand("validate", "parse and validate the input CSV files");
  validate->add_option("--series", v_series, "series CSV");
  validate->add_option("--hosp", v_hosp, "hospitalization CSV");
  validate->add_option("--meta", v_meta, "zip metadata CSV");

  auto* synth = app.add_subcommand("synth", "generate a synthetic panel and write its CSV files");
  auto* fit = app.add_subcommand("fit", "fit one model on the full panel");
  int fit_group = 1;
  fit->add_option("--group", fit_group, "poverty quartile (1..4)");
  auto* evaluate = app.add_subcommand("evaluate", "run the evaluation grid");
  auto* permute = app.add_subcommand("permute", "permutation test of group differences");
  auto* synchrony = app.add_subcommand("synchrony", "within-group synchrony analysis");
  auto* burden = app.add_subcommand("burden", "zip-level burden regression and correlations");
  auto* report = app.add_subcommand("report", "regenerate plot-ready tables from a run directory");
  auto* run_all = app.add_subcommand("run-all", "full pipeline");

  CLI11_PARSE(app, argc, argv);
  g.seed_set = seed_opt->count() > 0;  // env values count as provided

  try {
    if (validate->parsed()) {
      pipeline::RunConfig c = build_config(g, false);
      std::filesystem::path series =
          v_series.empty() ? (c.input ? c.input->series : std::filesystem::path())
                           : std::filesystem::path(v_series);
      std::filesystem::path hosp = v_hosp.empty()
                                       ? (c.input ? c.input->hosp : std::filesystem::path())
                                       : std::filesystem::path(v_hosp);
      std::filesystem::path meta = v_meta.empty()
                                       ? (c.input ? c.input->meta : std::filesystem::path())
                                       : std::filesystem::path(v_meta);
      if (series.empty() || hosp.empty() || meta.empty())
        flucast::throw_error(ErrorCode::InvalidArgument,
                             "validate needs --series/--hosp/--meta or a config with input files");
      flucast::data::WeeklyPanel panel = flucast::data::load_panel(series, hosp, meta);
      std::cout << "ok: " << panel.week_count() << " weeks, " << panel.zips.size() << " zips, "
                << panel.series.size() << " series (ILI "
                << panel.count_series(flucast::data::SourceFamily::ILI) << ", ED "
                << panel.count_series(flucast::data::SourceFamily::ED) << ", TREND "
                << panel.count_series(flucast::data::SourceFamily::TREND) << ")\n";
      return 0;
    }

    if (synth->parsed()) {
      pipeline::RunConfig c = build_config(g);
      c.validate();
      if (!c.synth_config)
        flucast::throw_error(ErrorCode::InvalidArgument, "synth requires a 'synth' config block");
      flucast::synth::SynthConfig sc = *c.synth_config;
      sc.seed = flucast::derive_seed(c.seed, "synth");
      flucast::synth::SynthResult res = flucast::synth::generate(sc);
      flucast::synth::PanelPaths paths =
          flucast::synth::write_panel_csvs(res.panel, c.out_dir / "input");
      std::cout << "wrote " << paths.series.string() << ", " << paths.hosp.string() << ", "
                << paths.meta.string() << "\n";
      return 0;
    }

    if (fit->parsed()) {
      pipeline::RunConfig c = build_config(g);
      std::string variant = c.variants.front();
      int horizon = c.horizons.front();
      std::filesystem::path path = pipeline::fit_single(c, variant, horizon, fit_group);
      std::cout << "wrote " << path.string() << "\n";
      return 0;
    }

    if (report->parsed()) {
      pipeline::RunConfig c = build_config(g, false);
      if (c.out_dir.empty())
        flucast::throw_error(ErrorCode::InvalidArgument, "report requires --out");
      pipeline::emit_plot_tables_from_dir(c.out_dir);
      std::cout << "wrote plot tables under " << (c.out_dir / "plots").string() << "\n";
      return 0;
    }

    unsigned stages = 0;
    if (evaluate->parsed()) stages = pipeline::kStageEval;
    if (permute->parsed()) stages = pipeline::kStagePermutation;
    if (synchrony->parsed()) stages = pipeline::kStageSynchrony;
    if (burden->parsed()) stages = pipeline::kStageBurden;
    if (run_all->parsed()) stages = pipeline::kStageAll;
    pipeline::RunConfig c = build_config(g);
    pipeline::run(c, stages);
    std::cout << "wrote results under " << c.out_dir.string() << "\n";
    return 0;
  } catch (const Error& e) {
    print_error(g, e.code(), e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    print_error(g, ErrorCode::InvalidArgument, e.what());
    return 1;
  }
}
