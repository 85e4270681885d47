#include "flucast/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "flucast/csv.hpp"
#include "flucast/error.hpp"
#include "flucast/util.hpp"

namespace flucast::synth {

void SynthConfig::validate() const {
  if (weeks < 8) throw_error(ErrorCode::InvalidArgument, "synth: need at least 8 weeks");
  if (zips < 4) throw_error(ErrorCode::InvalidArgument, "synth: need at least 4 zips");
  if (ili_series < 1 || ed_series < 1 || trend_series < 1)
    throw_error(ErrorCode::InvalidArgument, "synth: each family needs at least one series");
  if (!(seasonal_amplitude >= 0.0 && seasonal_amplitude < 1.0))
    throw_error(ErrorCode::InvalidArgument, "synth: seasonal amplitude must be in [0,1)");
  if (!(baseline_rate_per_1000 > 0.0))
    throw_error(ErrorCode::InvalidArgument, "synth: baseline rate must be positive");
  if (!(within_group_rho >= 0.0 && within_group_rho <= 1.0))
    throw_error(ErrorCode::InvalidArgument, "synth: rho must be in [0,1]");
  if (shock_sd < 0.0 || frailty_sd < 0.0 || source_noise < 0.0 || bias_slope < 0.0)
    throw_error(ErrorCode::InvalidArgument, "synth: scales must be nonnegative");
  if (!(shock_ar >= 0.0 && shock_ar < 1.0))
    throw_error(ErrorCode::InvalidArgument, "synth: shock_ar must be in [0,1)");
}

namespace {

// Stationary AR(1) path with unit marginal variance.
std::vector<double> ar1_path(int length, double ar, std::mt19937_64& eng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> path(static_cast<std::size_t>(length));
  double innov_sd = std::sqrt(1.0 - ar * ar);
  path[0] = normal(eng);
  for (int t = 1; t < length; ++t)
    path[static_cast<std::size_t>(t)] = ar * path[static_cast<std::size_t>(t - 1)] +
                                        innov_sd * normal(eng);
  return path;
}

// Consecutive balanced blocks over [0, n); block count k.
std::vector<int> block_assignment(int n, int k) {
  std::vector<int> out(static_cast<std::size_t>(n));
  int base = n / k, rem = n % k;
  int pos = 0;
  for (int b = 0; b < k; ++b) {
    int size = base + (b < rem ? 1 : 0);
    for (int i = 0; i < size; ++i) out[static_cast<std::size_t>(pos++)] = b;
  }
  return out;
}

std::string series_id(const char* token, int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%s:s%02d", token, i + 1);
  return buf;
}

}  // namespace

SynthResult generate(const SynthConfig& config) {
  config.validate();
  const int W = config.weeks;
  const int Z = config.zips;

  SynthResult out;
  data::WeeklyPanel& panel = out.panel;

  const long long base_day = days_from_civil(2007, 1, 7);
  for (int t = 0; t < W; ++t) {
    data::WeekIndex wi;
    wi.index = t;
    wi.label = iso_date(base_day + 7LL * t);
    panel.weeks.push_back(std::move(wi));
  }

  // zip metadata
  auto meta_eng = make_engine(derive_seed(config.seed, "meta"));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  panel.zips.resize(static_cast<std::size_t>(Z));
  for (int z = 0; z < Z; ++z) {
    auto& rec = panel.zips[static_cast<std::size_t>(z)];
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%05d", 75001 + z);
    rec.zip = buf;
    double pop = std::exp(std::log(18000.0) + 0.6 * normal(meta_eng));
    rec.population = static_cast<std::int64_t>(std::clamp(pop, 1500.0, 120000.0));
    rec.poverty_pct = 2.0 + 43.0 * unif(meta_eng);
    rec.over65_pct = 5.0 + 20.0 * unif(meta_eng);
    rec.weekly_hosp.assign(static_cast<std::size_t>(W), 0);
  }

  // poverty-quartile ids for shock sharing (same rule as assign_quartiles)
  std::vector<int> order(static_cast<std::size_t>(Z));
  for (int z = 0; z < Z; ++z) order[static_cast<std::size_t>(z)] = z;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const auto& za = panel.zips[static_cast<std::size_t>(a)];
    const auto& zb = panel.zips[static_cast<std::size_t>(b)];
    return std::tie(za.poverty_pct, za.zip) < std::tie(zb.poverty_pct, zb.zip);
  });
  std::vector<int> group_of(static_cast<std::size_t>(Z));
  {
    auto blocks = block_assignment(Z, 4);
    for (int pos = 0; pos < Z; ++pos)
      group_of[static_cast<std::size_t>(order[static_cast<std::size_t>(pos)])] =
          blocks[static_cast<std::size_t>(pos)];
  }

  std::vector<std::vector<double>> group_shock(4);
  for (int g = 0; g < 4; ++g) {
    auto eng = make_engine(derive_seed(config.seed, "gshock", static_cast<std::uint64_t>(g)));
    group_shock[static_cast<std::size_t>(g)] = ar1_path(W, config.shock_ar, eng);
  }

  // latent incidence and hospitalization counts
  out.truth.expected_counts.resize(Z, W);
  out.truth.signal_weight.resize(static_cast<std::size_t>(Z));
  out.truth.realized_snr.resize(static_cast<std::size_t>(Z));
  const double weekly_per_capita = config.baseline_rate_per_1000 / 1000.0 / 52.0;
  const double rho_shared = std::sqrt(config.within_group_rho);
  const double rho_own = std::sqrt(1.0 - config.within_group_rho);
  const double shock_adj = 0.5 * config.shock_sd * config.shock_sd;

  for (int z = 0; z < Z; ++z) {
    auto& rec = panel.zips[static_cast<std::size_t>(z)];
    auto eng = make_engine(derive_seed(config.seed, "zip", static_cast<std::uint64_t>(z)));
    double frailty =
        config.frailty_sd > 0.0
            ? std::exp(config.frailty_sd * normal(eng) - 0.5 * config.frailty_sd * config.frailty_sd)
            : 1.0;
    std::vector<double> own = ar1_path(W, config.shock_ar, eng);
    const auto& shared = group_shock[static_cast<std::size_t>(group_of[static_cast<std::size_t>(z)])];

    if (config.age_stratified) {
      rec.weekly_hosp_under65.assign(static_cast<std::size_t>(W), 0);
      rec.weekly_hosp_over65.assign(static_cast<std::size_t>(W), 0);
    }
    double p_over65 = std::min(0.9, 2.5 * rec.over65_pct / 100.0);
    for (int t = 0; t < W; ++t) {
      double seasonal = 1.0 + config.seasonal_amplitude *
                                  std::cos(2.0 * std::numbers::pi * (t - 26) / 52.0);
      double e = rho_shared * shared[static_cast<std::size_t>(t)] +
                 rho_own * own[static_cast<std::size_t>(t)];
      double shock = config.shock_sd > 0.0 ? std::exp(config.shock_sd * e - shock_adj) : 1.0;
      double lambda = static_cast<double>(rec.population) * weekly_per_capita * seasonal *
                      frailty * shock;
      out.truth.expected_counts(z, t) = lambda;
      std::poisson_distribution<std::int64_t> pois(lambda);
      std::int64_t count = pois(eng);
      rec.weekly_hosp[static_cast<std::size_t>(t)] = count;
      if (config.age_stratified) {
        std::binomial_distribution<std::int64_t> binom(count, p_over65);
        std::int64_t over = count > 0 ? binom(eng) : 0;
        rec.weekly_hosp_over65[static_cast<std::size_t>(t)] = over;
        rec.weekly_hosp_under65[static_cast<std::size_t>(t)] = count - over;
      }
    }
  }

  // per-zip attenuation of the surveillance signal; realized SNR compares the
  // attenuated signal sd against the zip's share of the series noise floor
  for (int z = 0; z < Z; ++z) {
    const auto& rec = panel.zips[static_cast<std::size_t>(z)];
    double a = std::exp(-config.bias_slope * rec.poverty_pct / 100.0);
    out.truth.signal_weight[static_cast<std::size_t>(z)] = a;
    std::vector<double> lam(static_cast<std::size_t>(W));
    for (int t = 0; t < W; ++t) lam[static_cast<std::size_t>(t)] = out.truth.expected_counts(z, t);
    double floor = config.source_noise * static_cast<double>(rec.population) * weekly_per_capita;
    out.truth.realized_snr[static_cast<std::size_t>(z)] =
        a * std::sqrt(sample_variance(lam)) / (1e-9 + floor);
  }

  // surveillance series: each family partitions the zips into catchments.
  // Catchments follow the poverty gradient (poverty clusters geographically),
  // so series differ in group composition.
  struct FamilyPlan {
    data::SourceFamily family;
    const char* token;
    int count;
  };
  const FamilyPlan plans[] = {{data::SourceFamily::ILI, "ili", config.ili_series},
                              {data::SourceFamily::ED, "ed", config.ed_series},
                              {data::SourceFamily::TREND, "trend", config.trend_series}};
  int global_series = 0;
  for (const auto& plan : plans) {
    std::vector<int> catchment(static_cast<std::size_t>(Z));
    {
      auto blocks = block_assignment(Z, plan.count);
      for (int pos = 0; pos < Z; ++pos)
        catchment[static_cast<std::size_t>(order[static_cast<std::size_t>(pos)])] =
            blocks[static_cast<std::size_t>(pos)];
    }
    for (int sidx = 0; sidx < plan.count; ++sidx, ++global_series) {
      data::SurveillanceSeries s;
      s.source_id = series_id(plan.token, sidx);
      s.family = plan.family;
      s.values.assign(static_cast<std::size_t>(W), 0.0);

      double pop_c = 0.0;
      double ref_c = 0.0;  // unattenuated baseline signal; the noise floor
      for (int z = 0; z < Z; ++z) {
        if (catchment[static_cast<std::size_t>(z)] != sidx) continue;
        pop_c += static_cast<double>(panel.zips[static_cast<std::size_t>(z)].population);
        ref_c += static_cast<double>(panel.zips[static_cast<std::size_t>(z)].population) *
                 weekly_per_capita;
      }

      auto eng = make_engine(derive_seed(config.seed, "series",
                                         static_cast<std::uint64_t>(global_series)));
      const double noise_adj = 0.5 * config.source_noise * config.source_noise;
      for (int t = 0; t < W; ++t) {
        double signal = 0.0;
        for (int z = 0; z < Z; ++z) {
          if (catchment[static_cast<std::size_t>(z)] != sidx) continue;
          signal += out.truth.signal_weight[static_cast<std::size_t>(z)] *
                    out.truth.expected_counts(z, t);
        }
        // multiplicative reporting noise plus an additive floor at the
        // unattenuated scale, so attenuation genuinely costs information
        double observed = signal;
        if (config.source_noise > 0.0) {
          observed = signal * std::exp(config.source_noise * normal(eng) - noise_adj) +
                     config.source_noise * ref_c * normal(eng);
          observed = std::max(observed, 0.0);
        }
        double scaled;
        switch (plan.family) {
          case data::SourceFamily::ILI: scaled = 25.0 * observed; break;
          case data::SourceFamily::ED: scaled = 2.0e5 * observed / pop_c; break;
          case data::SourceFamily::TREND: scaled = 3.0e6 * observed / pop_c; break;
          default: scaled = observed; break;
        }
        s.values[static_cast<std::size_t>(t)] = scaled;
      }
      panel.series.push_back(std::move(s));
    }
  }
  std::sort(panel.series.begin(), panel.series.end(), [](const auto& a, const auto& b) {
    return std::tie(a.family, a.source_id) < std::tie(b.family, b.source_id);
  });

  data::validate_panel(panel);
  return out;
}

PanelPaths write_panel_csvs(const data::WeeklyPanel& panel, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  PanelPaths paths{dir / "series.csv", dir / "hosp.csv", dir / "meta.csv"};

  {
    CsvWriter w(paths.series);
    w.write_row({"week_index", "week_start", "source_id", "family", "value"});
    for (const auto& s : panel.series) {
      for (std::size_t t = 0; t < panel.weeks.size(); ++t) {
        w.write_row({std::to_string(panel.weeks[t].index), panel.weeks[t].label, s.source_id,
                     data::family_name(s.family), format_double(s.values[t])});
      }
    }
  }
  {
    bool stratified = !panel.zips.empty() && panel.zips.front().age_stratified();
    CsvWriter w(paths.hosp);
    std::vector<std::string> header = {"week_index", "zip", "count"};
    if (stratified) {
      header.push_back("count_under65");
      header.push_back("count_over65");
    }
    w.write_row(header);
    for (const auto& z : panel.zips) {
      for (std::size_t t = 0; t < panel.weeks.size(); ++t) {
        std::vector<std::string> row = {std::to_string(panel.weeks[t].index), z.zip,
                                        std::to_string(z.weekly_hosp[t])};
        if (stratified) {
          row.push_back(std::to_string(z.weekly_hosp_under65[t]));
          row.push_back(std::to_string(z.weekly_hosp_over65[t]));
        }
        w.write_row(row);
      }
    }
  }
  {
    CsvWriter w(paths.meta);
    w.write_row({"zip", "population", "poverty_pct", "over65_pct"});
    for (const auto& z : panel.zips)
      w.write_row({z.zip, std::to_string(z.population), format_double(z.poverty_pct),
                   format_double(z.over65_pct)});
  }
  return paths;
}

std::vector<double> naive_baseline(const std::vector<std::int64_t>& y, int horizon) {
  if (horizon != 1 && horizon != 2)
    throw_error(ErrorCode::InvalidArgument, "horizon must be 1 or 2");
  if (static_cast<int>(y.size()) <= horizon)
    throw_error(ErrorCode::InsufficientHistory, "series too short for baseline");
  std::vector<double> out;
  out.reserve(y.size() - static_cast<std::size_t>(horizon));
  for (std::size_t i = 0; i + static_cast<std::size_t>(horizon) < y.size(); ++i)
    out.push_back(static_cast<double>(y[i]));
  return out;
}

}  // namespace flucast::synth
