#include "flucast/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "flucast/csv.hpp"
#include "flucast/error.hpp"
#include "flucast/util.hpp"

namespace flucast::data {

const char* family_name(SourceFamily f) {
  switch (f) {
    case SourceFamily::ILI: return "ILI";
    case SourceFamily::ED: return "ED";
    case SourceFamily::TREND: return "TREND";
  }
  return "?";
}

SourceFamily parse_family(const std::string& s) {
  if (s == "ILI") return SourceFamily::ILI;
  if (s == "ED") return SourceFamily::ED;
  if (s == "TREND") return SourceFamily::TREND;
  throw_error(ErrorCode::SchemaError, "unknown family '" + s + "' (expected ILI, ED or TREND)");
}

namespace {

long long parse_iso_date(const std::string& s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-')
    throw_error(ErrorCode::SchemaError, "bad ISO date '" + s + "'");
  auto digits = [&](int from, int to) {
    int v = 0;
    for (int i = from; i < to; ++i) {
      if (s[i] < '0' || s[i] > '9')
        throw_error(ErrorCode::SchemaError, "bad ISO date '" + s + "'");
      v = v * 10 + (s[i] - '0');
    }
    return v;
  };
  int y = digits(0, 4), m = digits(5, 7), d = digits(8, 10);
  if (m < 1 || m > 12 || d < 1 || d > 31)
    throw_error(ErrorCode::SchemaError, "bad ISO date '" + s + "'");
  return days_from_civil(y, m, d);
}

struct WeekRange {
  int lo;
  int hi;  // inclusive
};

// Validates contiguity of the sorted week indices of one input entity.
WeekRange contiguous_range(std::vector<int>& weeks, const std::string& what) {
  std::sort(weeks.begin(), weeks.end());
  for (std::size_t i = 1; i < weeks.size(); ++i) {
    if (weeks[i] == weeks[i - 1])
      throw_error(ErrorCode::SchemaError, what + ": duplicate week " + std::to_string(weeks[i]));
    if (weeks[i] != weeks[i - 1] + 1)
      throw_error(ErrorCode::MissingWeek,
                  what + ": gap between week " + std::to_string(weeks[i - 1]) + " and week " +
                      std::to_string(weeks[i]));
  }
  return {weeks.front(), weeks.back()};
}

}  // namespace

std::size_t WeeklyPanel::count_series(SourceFamily f) const {
  std::size_t n = 0;
  for (const auto& s : series)
    if (s.family == f) ++n;
  return n;
}

const ZipRecord& WeeklyPanel::zip_record(const std::string& zip) const {
  for (const auto& z : zips)
    if (z.zip == zip) return z;
  throw_error(ErrorCode::UnknownZip, "zip '" + zip + "' not in panel");
}

std::vector<std::string> QuartileGrouping::zips_in_group(int group) const {
  std::vector<std::string> out;
  for (const auto& [zip, g] : assignment)
    if (g == group) out.push_back(zip);
  return out;  // map iteration is already sorted by zip
}

void validate_panel(const WeeklyPanel& panel) {
  const std::size_t n_weeks = panel.weeks.size();
  if (n_weeks == 0) throw_error(ErrorCode::SchemaError, "panel has no weeks");
  for (std::size_t i = 1; i < n_weeks; ++i) {
    if (panel.weeks[i].index != panel.weeks[i - 1].index + 1)
      throw_error(ErrorCode::MissingWeek, "panel weeks are not contiguous");
    if (!panel.weeks[i].label.empty() && !panel.weeks[i - 1].label.empty()) {
      long long d1 = parse_iso_date(panel.weeks[i - 1].label);
      long long d2 = parse_iso_date(panel.weeks[i].label);
      if (d2 - d1 != 7)
        throw_error(ErrorCode::SchemaError, "week labels " + panel.weeks[i - 1].label + " and " +
                                                panel.weeks[i].label + " are not 7 days apart");
    }
  }
  for (const auto& s : panel.series) {
    if (s.values.size() != n_weeks)
      throw_error(ErrorCode::SchemaError, "series " + s.source_id + " length mismatch");
    for (double v : s.values) {
      if (!std::isfinite(v))
        throw_error(ErrorCode::SchemaError, "series " + s.source_id + " has non-finite value");
      if ((s.family == SourceFamily::ED || s.family == SourceFamily::TREND) && v < 0.0)
        throw_error(ErrorCode::SchemaError, "series " + s.source_id + " has negative value");
    }
  }
  if (panel.zips.size() < 4) throw_error(ErrorCode::SchemaError, "panel requires at least 4 zips");
  for (const auto& z : panel.zips) {
    if (z.population <= 0)
      throw_error(ErrorCode::SchemaError, "zip " + z.zip + " has non-positive population");
    if (z.poverty_pct < 0.0 || z.poverty_pct > 100.0)
      throw_error(ErrorCode::SchemaError, "zip " + z.zip + " poverty_pct outside [0,100]");
    if (z.over65_pct < 0.0 || z.over65_pct > 100.0)
      throw_error(ErrorCode::SchemaError, "zip " + z.zip + " over65_pct outside [0,100]");
    if (z.weekly_hosp.size() != n_weeks)
      throw_error(ErrorCode::SchemaError, "zip " + z.zip + " hospitalization length mismatch");
    for (auto c : z.weekly_hosp)
      if (c < 0) throw_error(ErrorCode::SchemaError, "zip " + z.zip + " has negative count");
    if (z.age_stratified()) {
      if (z.weekly_hosp_under65.size() != n_weeks || z.weekly_hosp_over65.size() != n_weeks)
        throw_error(ErrorCode::SchemaError, "zip " + z.zip + " stratified count length mismatch");
      for (std::size_t t = 0; t < n_weeks; ++t) {
        if (z.weekly_hosp_under65[t] < 0 || z.weekly_hosp_over65[t] < 0 ||
            z.weekly_hosp_under65[t] + z.weekly_hosp_over65[t] != z.weekly_hosp[t])
          throw_error(ErrorCode::SchemaError,
                      "zip " + z.zip + " stratified counts do not sum to total");
      }
    }
  }
}

WeeklyPanel load_panel(const std::filesystem::path& series_file,
                       const std::filesystem::path& hosp_file,
                       const std::filesystem::path& meta_file) {
  // --- metadata ---
  CsvTable meta = read_csv(meta_file);
  int mc_zip = meta.require_column("zip");
  int mc_pop = meta.require_column("population");
  int mc_pov = meta.require_column("poverty_pct");
  int mc_o65 = meta.require_column("over65_pct");

  std::map<std::string, ZipRecord> zip_meta;
  for (std::size_t i = 0; i < meta.rows.size(); ++i) {
    ZipRecord z;
    z.zip = meta.rows[i][mc_zip];
    z.population = parse_int_field(meta, i, mc_pop);
    z.poverty_pct = parse_double_field(meta, i, mc_pov);
    z.over65_pct = parse_double_field(meta, i, mc_o65);
    if (z.zip.empty())
      throw_error(ErrorCode::SchemaError,
                  meta.path + ":" + std::to_string(meta.line_numbers[i]) + " empty zip");
    if (!zip_meta.emplace(z.zip, std::move(z)).second)
      throw_error(ErrorCode::SchemaError, meta.path + ": duplicate zip '" + meta.rows[i][mc_zip] + "'");
  }

  // --- surveillance series ---
  CsvTable ser = read_csv(series_file);
  int sc_week = ser.require_column("week_index");
  int sc_start = ser.require_column("week_start");
  int sc_id = ser.require_column("source_id");
  int sc_fam = ser.require_column("family");
  int sc_val = ser.require_column("value");

  struct RawSeries {
    SourceFamily family;
    std::map<int, double> values;
  };
  std::map<std::string, RawSeries> raw_series;
  std::map<int, std::string> week_labels;
  for (std::size_t i = 0; i < ser.rows.size(); ++i) {
    int week = static_cast<int>(parse_int_field(ser, i, sc_week));
    std::string id = ser.rows[i][sc_id];
    SourceFamily fam = parse_family(ser.rows[i][sc_fam]);
    double value = parse_double_field(ser, i, sc_val);
    auto [it, fresh] = raw_series.try_emplace(id, RawSeries{fam, {}});
    if (!fresh && it->second.family != fam)
      throw_error(ErrorCode::SchemaError, ser.path + ": source '" + id + "' has mixed families");
    if (!it->second.values.emplace(week, value).second)
      throw_error(ErrorCode::SchemaError, ser.path + ":" + std::to_string(ser.line_numbers[i]) +
                                              " duplicate (week, source) entry");
    const std::string& label = ser.rows[i][sc_start];
    if (!label.empty()) {
      parse_iso_date(label);  // validate format
      auto [lit, lfresh] = week_labels.emplace(week, label);
      if (!lfresh && lit->second != label)
        throw_error(ErrorCode::SchemaError, ser.path + ": conflicting week_start for week " +
                                                std::to_string(week));
    }
  }
  if (raw_series.empty()) throw_error(ErrorCode::SchemaError, ser.path + ": no series rows");

  // --- hospitalizations ---
  CsvTable hosp = read_csv(hosp_file);
  int hc_week = hosp.require_column("week_index");
  int hc_zip = hosp.require_column("zip");
  int hc_count = hosp.require_column("count");
  int hc_u65 = hosp.column("count_under65");
  int hc_o65 = hosp.column("count_over65");
  if ((hc_u65 >= 0) != (hc_o65 >= 0))
    throw_error(ErrorCode::SchemaError,
                hosp.path + ": count_under65 and count_over65 must appear together");
  const bool stratified = hc_u65 >= 0;

  struct RawCounts {
    std::map<int, std::int64_t> total, under65, over65;
  };
  std::map<std::string, RawCounts> raw_counts;
  for (std::size_t i = 0; i < hosp.rows.size(); ++i) {
    int week = static_cast<int>(parse_int_field(hosp, i, hc_week));
    const std::string& zip = hosp.rows[i][hc_zip];
    if (!zip_meta.count(zip))
      throw_error(ErrorCode::UnknownZip, hosp.path + ":" + std::to_string(hosp.line_numbers[i]) +
                                             " zip '" + zip + "' has no metadata");
    auto& rc = raw_counts[zip];
    std::int64_t count = parse_int_field(hosp, i, hc_count);
    if (!rc.total.emplace(week, count).second)
      throw_error(ErrorCode::SchemaError, hosp.path + ":" + std::to_string(hosp.line_numbers[i]) +
                                              " duplicate (week, zip) entry");
    if (stratified) {
      rc.under65.emplace(week, parse_int_field(hosp, i, hc_u65));
      rc.over65.emplace(week, parse_int_field(hosp, i, hc_o65));
    }
  }
  if (raw_counts.empty()) throw_error(ErrorCode::SchemaError, hosp.path + ": no count rows");

  // --- align to the intersection of week ranges ---
  int lo = std::numeric_limits<int>::min();
  int hi = std::numeric_limits<int>::max();
  for (auto& [id, rs] : raw_series) {
    std::vector<int> weeks;
    weeks.reserve(rs.values.size());
    for (auto& [w, v] : rs.values) weeks.push_back(w);
    WeekRange r = contiguous_range(weeks, ser.path + " source '" + id + "'");
    lo = std::max(lo, r.lo);
    hi = std::min(hi, r.hi);
  }
  for (auto& [zip, rc] : raw_counts) {
    std::vector<int> weeks;
    weeks.reserve(rc.total.size());
    for (auto& [w, v] : rc.total) weeks.push_back(w);
    WeekRange r = contiguous_range(weeks, hosp.path + " zip '" + zip + "'");
    lo = std::max(lo, r.lo);
    hi = std::min(hi, r.hi);
  }
  if (lo > hi)
    throw_error(ErrorCode::MissingWeek, "week ranges of the input files do not overlap");

  WeeklyPanel panel;
  for (int w = lo; w <= hi; ++w) {
    WeekIndex wi;
    wi.index = w;
    auto it = week_labels.find(w);
    if (it != week_labels.end()) wi.label = it->second;
    panel.weeks.push_back(std::move(wi));
  }
  for (auto& [id, rs] : raw_series) {
    SurveillanceSeries s;
    s.source_id = id;
    s.family = rs.family;
    s.values.reserve(panel.weeks.size());
    for (int w = lo; w <= hi; ++w) s.values.push_back(rs.values.at(w));
    panel.series.push_back(std::move(s));
  }
  std::sort(panel.series.begin(), panel.series.end(), [](const auto& a, const auto& b) {
    return std::tie(a.family, a.source_id) < std::tie(b.family, b.source_id);
  });
  for (auto& [zip, rc] : raw_counts) {
    ZipRecord z = zip_meta.at(zip);
    for (int w = lo; w <= hi; ++w) {
      z.weekly_hosp.push_back(rc.total.at(w));
      if (stratified) {
        z.weekly_hosp_under65.push_back(rc.under65.at(w));
        z.weekly_hosp_over65.push_back(rc.over65.at(w));
      }
    }
    panel.zips.push_back(std::move(z));
  }
  std::sort(panel.zips.begin(), panel.zips.end(),
            [](const auto& a, const auto& b) { return a.zip < b.zip; });

  validate_panel(panel);
  return panel;
}

std::vector<std::size_t> quartile_block_sizes(std::size_t n) {
  std::vector<std::size_t> sizes(4, n / 4);
  for (std::size_t g = 0; g < n % 4; ++g) sizes[g] += 1;
  return sizes;
}

QuartileGrouping assign_quartiles(const WeeklyPanel& panel) {
  if (panel.zips.size() < 4)
    throw_error(ErrorCode::TooFewZips, "need at least 4 zips to form quartiles");

  std::vector<const ZipRecord*> order;
  order.reserve(panel.zips.size());
  for (const auto& z : panel.zips) order.push_back(&z);
  std::sort(order.begin(), order.end(), [](const ZipRecord* a, const ZipRecord* b) {
    return std::tie(a->poverty_pct, a->zip) < std::tie(b->poverty_pct, b->zip);
  });

  QuartileGrouping grouping;
  auto sizes = quartile_block_sizes(order.size());
  std::size_t pos = 0;
  for (int g = 1; g <= 4; ++g) {
    std::int64_t pop = 0;
    for (std::size_t i = 0; i < sizes[g - 1]; ++i, ++pos) {
      grouping.assignment[order[pos]->zip] = g;
      pop += order[pos]->population;
    }
    grouping.group_population[g] = pop;
  }
  return grouping;
}

GroupSeries group_response(const WeeklyPanel& panel, const QuartileGrouping& grouping, int group) {
  if (group < 1 || group > 4)
    throw_error(ErrorCode::InvalidArgument, "group must be in 1..4");

  GroupSeries out;
  out.counts.assign(panel.weeks.size(), 0);
  for (const auto& z : panel.zips) {
    auto it = grouping.assignment.find(z.zip);
    if (it == grouping.assignment.end())
      throw_error(ErrorCode::UnknownZip, "zip '" + z.zip + "' missing from grouping");
    if (it->second != group) continue;
    out.population += z.population;
    for (std::size_t t = 0; t < z.weekly_hosp.size(); ++t) out.counts[t] += z.weekly_hosp[t];
  }
  return out;
}

}  // namespace flucast::data
