#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace flucast::data {

struct WeekIndex {
  int index = 0;
  std::string label;  // ISO date of the week start; empty when absent
};

enum class SourceFamily { ILI = 0, ED = 1, TREND = 2 };

const char* family_name(SourceFamily f);
SourceFamily parse_family(const std::string& s);

struct SurveillanceSeries {
  std::string source_id;
  SourceFamily family = SourceFamily::ILI;
  std::vector<double> values;  // one per panel week
};

struct ZipRecord {
  std::string zip;
  std::int64_t population = 0;
  double poverty_pct = 0.0;
  double over65_pct = 0.0;
  std::vector<std::int64_t> weekly_hosp;  // one per panel week
  // Optional age-stratified counts; both empty or both full-length.
  std::vector<std::int64_t> weekly_hosp_under65;
  std::vector<std::int64_t> weekly_hosp_over65;

  bool age_stratified() const { return !weekly_hosp_under65.empty(); }
};

struct QuartileGrouping {
  std::map<std::string, int> assignment;       // zip -> group in 1..4 (1 = lowest poverty)
  std::map<int, std::int64_t> group_population;

  std::vector<std::string> zips_in_group(int group) const;
};

struct WeeklyPanel {
  std::vector<WeekIndex> weeks;
  std::vector<SurveillanceSeries> series;  // sorted by (family, source_id)
  std::vector<ZipRecord> zips;             // sorted by zip

  std::size_t week_count() const { return weeks.size(); }
  std::size_t count_series(SourceFamily f) const;
  const ZipRecord& zip_record(const std::string& zip) const;
};

// Parses and validates the three CSV inputs; weeks are aligned to the
// intersection of the week ranges across all series and all zips.
WeeklyPanel load_panel(const std::filesystem::path& series_file,
                       const std::filesystem::path& hosp_file,
                       const std::filesystem::path& meta_file);

// Sorts zips by (poverty_pct, zip) and splits them into four consecutive
// blocks; any remainder goes to the lowest-numbered groups.
QuartileGrouping assign_quartiles(const WeeklyPanel& panel);

// Equal-size block boundaries for n items split into four groups.
std::vector<std::size_t> quartile_block_sizes(std::size_t n);

struct GroupSeries {
  std::vector<std::int64_t> counts;  // one per panel week
  std::int64_t population = 0;
};

GroupSeries group_response(const WeeklyPanel& panel, const QuartileGrouping& grouping, int group);

// Structural validation shared by load_panel and the synthetic generator.
void validate_panel(const WeeklyPanel& panel);

}  // namespace flucast::data
