#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "flucast/data_model.hpp"
#include "flucast/error.hpp"
#include "flucast/synthetic.hpp"
#include "flucast/util.hpp"

using namespace flucast;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("flucast_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

// Three consistent files: weeks [w0, w1], 8 zips, one series per family.
struct Fixture {
  fs::path series, hosp, meta;

  explicit Fixture(const fs::path& dir, int w0 = 0, int w1 = 9) {
    series = dir / "series.csv";
    hosp = dir / "hosp.csv";
    meta = dir / "meta.csv";

    std::string s = "week_index,week_start,source_id,family,value\n";
    for (int w = w0; w <= w1; ++w) {
      s += std::to_string(w) + ",,ili:a,ILI," + std::to_string(10 + w) + "\n";
      s += std::to_string(w) + ",,ed:a,ED," + std::to_string(2 + w % 3) + "\n";
      s += std::to_string(w) + ",,trend:a,TREND," + std::to_string(100 + 5 * w) + "\n";
    }
    write_file(series, s);

    std::string h = "week_index,zip,count\n";
    for (int z = 0; z < 8; ++z)
      for (int w = w0; w <= w1; ++w)
        h += std::to_string(w) + ",7500" + std::to_string(z) + "," +
             std::to_string((z + w) % 4) + "\n";
    write_file(hosp, h);

    std::string m = "zip,population,poverty_pct,over65_pct\n";
    for (int z = 0; z < 8; ++z)
      m += "7500" + std::to_string(z) + "," + std::to_string(10000 + 1000 * z) + "," +
           std::to_string(z + 1) + ".0," + std::to_string(10 + z) + ".0\n";
    write_file(meta, m);
  }
};

}  // namespace

TEST_CASE("load_panel ingests three well-formed files") {
  auto dir = temp_dir("load_ok");
  Fixture f(dir);
  data::WeeklyPanel panel = data::load_panel(f.series, f.hosp, f.meta);
  CHECK(panel.week_count() == 10);
  CHECK(panel.zips.size() == 8);
  CHECK(panel.series.size() == 3);
  CHECK(panel.count_series(data::SourceFamily::ILI) == 1);
  // series sorted by family then id, zips sorted by zip string
  CHECK(panel.series[0].family == data::SourceFamily::ILI);
  CHECK(panel.series[1].family == data::SourceFamily::ED);
  CHECK(panel.series[2].family == data::SourceFamily::TREND);
  CHECK(std::is_sorted(panel.zips.begin(), panel.zips.end(),
                       [](const auto& a, const auto& b) { return a.zip < b.zip; }));
}

TEST_CASE("load_panel detects a missing week") {
  auto dir = temp_dir("load_gap");
  Fixture f(dir);
  // drop week 5 of one zip
  std::ifstream in(f.hosp);
  std::string line, out;
  while (std::getline(in, line))
    if (line != "5,75003,0") out += line + "\n";
  in.close();
  write_file(f.hosp, out);

  CHECK_THROWS_WITH_AS(static_cast<void>(data::load_panel(f.series, f.hosp, f.meta)),
                       doctest::Contains("gap"), Error);
  try {
    data::load_panel(f.series, f.hosp, f.meta);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingWeek);
  }
}

TEST_CASE("weeks align to the intersection of ranges") {
  auto dir = temp_dir("load_intersect");
  Fixture f(dir);
  // hosp covers weeks 2..12, series cover 0..9 -> panel over 2..9
  std::string h = "week_index,zip,count\n";
  for (int z = 0; z < 8; ++z)
    for (int w = 2; w <= 12; ++w)
      h += std::to_string(w) + ",7500" + std::to_string(z) + ",1\n";
  write_file(f.hosp, h);

  data::WeeklyPanel panel = data::load_panel(f.series, f.hosp, f.meta);
  CHECK(panel.week_count() == 8);
  CHECK(panel.weeks.front().index == 2);
  CHECK(panel.weeks.back().index == 9);
}

TEST_CASE("disjoint week ranges are a MissingWeek error") {
  auto dir = temp_dir("load_disjoint");
  Fixture f(dir, 0, 9);
  std::string h = "week_index,zip,count\n";
  for (int z = 0; z < 8; ++z)
    for (int w = 20; w <= 25; ++w)
      h += std::to_string(w) + ",7500" + std::to_string(z) + ",1\n";
  write_file(f.hosp, h);
  try {
    data::load_panel(f.series, f.hosp, f.meta);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingWeek);
  }
}

TEST_CASE("hosp rows with unknown zips are rejected") {
  auto dir = temp_dir("load_unknown");
  Fixture f(dir);
  std::ofstream app(f.hosp, std::ios::app);
  app << "3,99999,2\n";
  app.close();
  try {
    data::load_panel(f.series, f.hosp, f.meta);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownZip);
  }
}

TEST_CASE("schema violations carry file and line context") {
  auto dir = temp_dir("load_schema");
  Fixture f(dir);

  SUBCASE("bad header") {
    write_file(f.meta, "zip,population,poverty\n75000,1000,5\n");
    try {
      data::load_panel(f.series, f.hosp, f.meta);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::SchemaError);
      CHECK(std::string(e.what()).find("poverty_pct") != std::string::npos);
    }
  }
  SUBCASE("bad numeric field") {
    std::ofstream app(f.hosp, std::ios::app);
    app << "4,75000,two\n";
    app.close();
    try {
      data::load_panel(f.series, f.hosp, f.meta);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::SchemaError);
      CHECK(std::string(e.what()).find("hosp.csv") != std::string::npos);
      CHECK(std::string(e.what()).find("count") != std::string::npos);
    }
  }
  SUBCASE("duplicate hosp row") {
    std::ofstream app(f.hosp, std::ios::app);
    app << "4,75000,2\n";
    app.close();
    CHECK_THROWS_AS(static_cast<void>(data::load_panel(f.series, f.hosp, f.meta)), Error);
  }
  SUBCASE("negative ED value") {
    write_file(f.series,
               "week_index,week_start,source_id,family,value\n"
               "0,,ed:a,ED,-1\n1,,ed:a,ED,2\n2,,ed:a,ED,2\n3,,ed:a,ED,2\n");
    CHECK_THROWS_AS(static_cast<void>(data::load_panel(f.series, f.hosp, f.meta)), Error);
  }
  SUBCASE("week labels must be 7 days apart") {
    write_file(f.series,
               "week_index,week_start,source_id,family,value\n"
               "0,2007-01-07,ili:a,ILI,1\n"
               "1,2007-01-15,ili:a,ILI,1\n"
               "2,,ili:a,ILI,1\n3,,ili:a,ILI,1\n4,,ili:a,ILI,1\n5,,ili:a,ILI,1\n"
               "6,,ili:a,ILI,1\n7,,ili:a,ILI,1\n8,,ili:a,ILI,1\n9,,ili:a,ILI,1\n");
    CHECK_THROWS_AS(static_cast<void>(data::load_panel(f.series, f.hosp, f.meta)), Error);
  }
}

TEST_CASE("age-stratified counts must sum to the total") {
  auto dir = temp_dir("load_strat");
  Fixture f(dir, 0, 4);
  std::string h = "week_index,zip,count,count_under65,count_over65\n";
  for (int z = 0; z < 8; ++z)
    for (int w = 0; w <= 4; ++w)
      h += std::to_string(w) + ",7500" + std::to_string(z) + ",3,2,1\n";
  write_file(f.hosp, h);
  data::WeeklyPanel ok = data::load_panel(f.series, f.hosp, f.meta);
  CHECK(ok.zips.front().age_stratified());
  CHECK(ok.zips.front().weekly_hosp_under65[0] == 2);

  h += "0,75000,3,1,1\n";  // duplicate AND bad sum; duplicate hits first
  write_file(f.hosp, h);
  CHECK_THROWS_AS(static_cast<void>(data::load_panel(f.series, f.hosp, f.meta)), Error);

  std::string bad = "week_index,zip,count,count_under65,count_over65\n";
  for (int z = 0; z < 8; ++z)
    for (int w = 0; w <= 4; ++w)
      bad += std::to_string(w) + ",7500" + std::to_string(z) + ",3,1,1\n";
  write_file(f.hosp, bad);
  try {
    data::load_panel(f.series, f.hosp, f.meta);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SchemaError);
    CHECK(std::string(e.what()).find("sum") != std::string::npos);
  }
}

TEST_CASE("assign_quartiles splits sorted zips into equal blocks") {
  data::WeeklyPanel panel;
  panel.weeks.push_back({0, ""});
  for (int z = 0; z < 8; ++z) {
    data::ZipRecord r;
    r.zip = "z" + std::to_string(z);
    r.population = 100;
    r.poverty_pct = static_cast<double>(8 - z);  // poverty 8..1 in reverse zip order
    r.weekly_hosp = {0};
    panel.zips.push_back(r);
  }
  auto grouping = data::assign_quartiles(panel);
  // poverty 1..2 -> group 1 (zips z7, z6), ..., poverty 7..8 -> group 4
  CHECK(grouping.assignment.at("z7") == 1);
  CHECK(grouping.assignment.at("z6") == 1);
  CHECK(grouping.assignment.at("z5") == 2);
  CHECK(grouping.assignment.at("z4") == 2);
  CHECK(grouping.assignment.at("z1") == 4);
  CHECK(grouping.assignment.at("z0") == 4);
  CHECK(grouping.group_population.at(1) == 200);
}

TEST_CASE("quartile ties break on the zip string") {
  data::WeeklyPanel panel;
  panel.weeks.push_back({0, ""});
  for (const char* zip : {"75002", "75001", "75004", "75003"}) {
    data::ZipRecord r;
    r.zip = zip;
    r.population = 50;
    r.poverty_pct = 10.0;  // full tie
    r.weekly_hosp = {1};
    panel.zips.push_back(r);
  }
  auto grouping = data::assign_quartiles(panel);
  CHECK(grouping.assignment.at("75001") == 1);
  CHECK(grouping.assignment.at("75002") == 2);
  CHECK(grouping.assignment.at("75003") == 3);
  CHECK(grouping.assignment.at("75004") == 4);
}

TEST_CASE("305 zips split 77/76/76/76") {
  auto sizes = data::quartile_block_sizes(305);
  CHECK(sizes[0] == 77);
  CHECK(sizes[1] == 76);
  CHECK(sizes[2] == 76);
  CHECK(sizes[3] == 76);

  data::WeeklyPanel panel;
  panel.weeks.push_back({0, ""});
  std::mt19937_64 eng(5);
  std::uniform_real_distribution<double> unif(0.0, 50.0);
  for (int z = 0; z < 305; ++z) {
    data::ZipRecord r;
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%05d", 10000 + z);
    r.zip = buf;
    r.population = 1000;
    r.poverty_pct = unif(eng);
    r.weekly_hosp = {0};
    panel.zips.push_back(r);
  }
  auto grouping = data::assign_quartiles(panel);
  std::map<int, int> count;
  for (auto& [zip, g] : grouping.assignment) count[g]++;
  CHECK(count[1] == 77);
  CHECK(count[2] == 76);
  CHECK(count[3] == 76);
  CHECK(count[4] == 76);
}

TEST_CASE("quartile assignment is invariant to input row order") {
  synth::SynthConfig cfg;
  cfg.weeks = 10;
  cfg.zips = 23;
  cfg.ili_series = cfg.ed_series = cfg.trend_series = 1;
  cfg.seed = 7;
  data::WeeklyPanel panel = synth::generate(cfg).panel;
  auto before = data::assign_quartiles(panel);

  std::mt19937_64 eng(3);
  shuffle_vector(panel.zips, eng);
  auto after = data::assign_quartiles(panel);
  CHECK(before.assignment == after.assignment);
  CHECK(before.group_population == after.group_population);
}

TEST_CASE("group_response sums member counts") {
  data::WeeklyPanel panel;
  panel.weeks = {{0, ""}, {1, ""}};
  auto add_zip = [&](const std::string& zip, double pov, std::vector<std::int64_t> counts) {
    data::ZipRecord r;
    r.zip = zip;
    r.population = 10;
    r.poverty_pct = pov;
    r.weekly_hosp = std::move(counts);
    panel.zips.push_back(r);
  };
  add_zip("a", 1, {1, 2});
  add_zip("b", 2, {3, 4});
  add_zip("c", 3, {0, 0});
  add_zip("d", 4, {7, 1});
  auto grouping = data::assign_quartiles(panel);

  auto g1 = data::group_response(panel, grouping, 1);
  CHECK(g1.counts == std::vector<std::int64_t>{1, 2});
  CHECK(g1.population == 10);

  // two zips forced into one group via a 8-zip panel
  add_zip("e", 1.5, {3, 4});
  add_zip("f", 2.5, {1, 1});
  add_zip("g", 3.5, {2, 2});
  add_zip("h", 4.5, {5, 5});
  auto grouping2 = data::assign_quartiles(panel);
  auto low = data::group_response(panel, grouping2, 1);
  CHECK(low.counts == std::vector<std::int64_t>{4, 6});  // zips a and e

  // week 0 of group with counts {2,0,5} sums to 7 by hand
  data::WeeklyPanel p3;
  p3.weeks = {{0, ""}};
  p3.zips.clear();
  auto add3 = [&](const std::string& zip, std::int64_t c) {
    data::ZipRecord r;
    r.zip = zip;
    r.population = 5;
    r.poverty_pct = 1;
    r.weekly_hosp = {c};
    p3.zips.push_back(r);
  };
  add3("a", 2);
  add3("b", 0);
  add3("c", 5);
  data::QuartileGrouping manual;
  manual.assignment = {{"a", 1}, {"b", 1}, {"c", 1}};
  manual.group_population = {{1, 15}};
  CHECK(data::group_response(p3, manual, 1).counts[0] == 7);
}

TEST_CASE("group responses sum to the panel total week by week") {
  synth::SynthConfig cfg;
  cfg.weeks = 16;
  cfg.zips = 30;
  cfg.ili_series = cfg.ed_series = cfg.trend_series = 1;
  cfg.seed = 99;
  data::WeeklyPanel panel = synth::generate(cfg).panel;
  auto grouping = data::assign_quartiles(panel);

  std::vector<std::int64_t> total(panel.week_count(), 0);
  for (int g = 1; g <= 4; ++g) {
    auto resp = data::group_response(panel, grouping, g);
    for (std::size_t t = 0; t < total.size(); ++t) total[t] += resp.counts[t];
  }
  for (std::size_t t = 0; t < total.size(); ++t) {
    std::int64_t direct = 0;
    for (const auto& z : panel.zips) direct += z.weekly_hosp[t];
    CHECK(total[t] == direct);
  }
}

TEST_CASE("panels with fewer than 4 zips are rejected") {
  data::WeeklyPanel panel;
  panel.weeks = {{0, ""}};
  data::ZipRecord r;
  r.zip = "a";
  r.population = 1;
  r.weekly_hosp = {0};
  panel.zips = {r, r, r};
  CHECK_THROWS_AS(data::assign_quartiles(panel), Error);
}
