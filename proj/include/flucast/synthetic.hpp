#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "flucast/data_model.hpp"

namespace flucast::synth {

struct SynthConfig {
  int weeks = 188;
  int zips = 305;
  int ili_series = 5;
  int ed_series = 6;
  int trend_series = 6;
  double seasonal_amplitude = 0.5;      // in [0, 1)
  double baseline_rate_per_1000 = 0.7;  // annual hospitalizations per 1,000 persons
  double within_group_rho = 0.8;        // share of shock variance common to a poverty group
  double shock_sd = 0.12;               // log-scale sd of weekly incidence shocks
  double shock_ar = 0.35;               // AR(1) coefficient of the shocks
  double frailty_sd = 0.0;              // log-scale sd of per-zip frailty
  double source_noise = 0.07;           // relative scale of series reporting noise
  double bias_slope = 0.0;              // poverty attenuation of series signal
  bool age_stratified = false;          // emit under/over-65 count columns
  std::uint64_t seed = 0;

  void validate() const;
};

struct GroundTruth {
  Eigen::MatrixXd expected_counts;    // zips x weeks latent Poisson means
  std::vector<double> signal_weight;  // per-zip series attenuation in (0, 1]
  std::vector<double> realized_snr;   // per-zip signal sd over series noise scale
};

struct SynthResult {
  data::WeeklyPanel panel;
  GroundTruth truth;
};

// Seeded generator: seasonal latent incidence with AR(1) shocks partially
// shared within poverty quartiles, Poisson hospitalization counts, and
// surveillance series observing attenuated catchment aggregates.
SynthResult generate(const SynthConfig& config);

struct PanelPaths {
  std::filesystem::path series;
  std::filesystem::path hosp;
  std::filesystem::path meta;
};

// Writes the three CSV files consumed by data::load_panel.
PanelPaths write_panel_csvs(const data::WeeklyPanel& panel, const std::filesystem::path& dir);

// Last-value-carried-forward predictions: element i predicts week horizon+i
// with the count of week i.
std::vector<double> naive_baseline(const std::vector<std::int64_t>& y, int horizon);

}  // namespace flucast::synth
