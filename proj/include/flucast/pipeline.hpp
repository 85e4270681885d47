#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "flucast/evaluation.hpp"
#include "flucast/group_inference.hpp"
#include "flucast/synthetic.hpp"

namespace flucast::pipeline {

struct InputFiles {
  std::filesystem::path series;
  std::filesystem::path hosp;
  std::filesystem::path meta;
};

struct RunConfig {
  std::optional<InputFiles> input;
  std::optional<synth::SynthConfig> synth_config;
  std::vector<std::string> variants;  // canonical names; default all seven
  std::vector<int> horizons = {1};
  std::vector<eval::SplitScheme> schemes = {eval::SplitScheme::holdout(0.6),
                                            eval::SplitScheme::holdout(0.8)};
  eval::ModelSettings model;
  int permutation_repeats = 500;
  std::vector<std::string> permutation_variants;  // default: first variant
  infer::ObservedStat permutation_observed = infer::ObservedStat::Q4MinusQ1;
  int synchrony_repeats = 5000;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 1;
  std::filesystem::path out_dir;

  static RunConfig from_json_text(const std::string& text);
  static RunConfig from_json_file(const std::filesystem::path& path);
  std::string canonical_json() const;  // deterministic; hashed into the manifest
  void validate() const;
};

enum Stage : unsigned {
  kStageEval = 1u << 0,
  kStagePermutation = 1u << 1,
  kStageSynchrony = 1u << 2,
  kStageBurden = 1u << 3,
  kStageAll = 0xF,
};

// Pipeline: load/synthesize -> evaluate grid -> permutation -> synchrony ->
// burden -> plot tables -> manifest, restricted to the requested stages.
// Outputs are byte-identical for identical (config, seed) at any jobs level.
void run(const RunConfig& config, unsigned stages = kStageAll);

// Loads the configured input files or synthesizes the panel (writing the
// synthetic CSVs under out/input and reading them back).
data::WeeklyPanel load_or_synthesize(const RunConfig& config,
                                     std::vector<std::filesystem::path>* written = nullptr);

// Fits one (variant, horizon, group) model on the full panel with
// cross-validated penalty and writes the serialized fit.
std::filesystem::path fit_single(const RunConfig& config, const std::string& variant_name,
                                 int horizon, int group);

// Regenerates the plot-ready tables from a run directory's detail files.
void emit_plot_tables_from_dir(const std::filesystem::path& out_dir);

// Machine-readable error record written on failure.
void write_error_record(const std::filesystem::path& out_dir, const std::string& code,
                        const std::string& message);

}  // namespace flucast::pipeline
