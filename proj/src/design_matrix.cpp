#include "flucast/design_matrix.hpp"

#include <algorithm>
#include <sstream>

#include "flucast/error.hpp"
#include "flucast/sha256.hpp"

namespace flucast::design {

namespace {

const std::vector<data::SourceFamily> kFamilyOrder = {
    data::SourceFamily::ILI, data::SourceFamily::ED, data::SourceFamily::TREND};

std::string family_token(data::SourceFamily f) {
  switch (f) {
    case data::SourceFamily::ILI: return "ili";
    case data::SourceFamily::ED: return "ed";
    case data::SourceFamily::TREND: return "trend";
  }
  return "?";
}

}  // namespace

const char* feature_name(Feature f) {
  switch (f) {
    case Feature::Level: return "level";
    case Feature::Slope: return "slope";
    case Feature::Accel: return "accel";
  }
  return "?";
}

Variant Variant::from_sources(std::set<data::SourceFamily> sources) {
  if (sources.empty()) throw_error(ErrorCode::InvalidArgument, "variant needs at least one family");
  Variant v;
  v.sources = std::move(sources);
  std::string name;
  for (auto f : kFamilyOrder) {
    if (!v.sources.count(f)) continue;
    if (!name.empty()) name += '+';
    name += family_token(f);
  }
  v.name = name;
  return v;
}

Variant Variant::from_name(const std::string& name) {
  std::set<data::SourceFamily> sources;
  std::string token;
  std::istringstream in(name);
  while (std::getline(in, token, '+')) {
    if (token == "ili")
      sources.insert(data::SourceFamily::ILI);
    else if (token == "ed")
      sources.insert(data::SourceFamily::ED);
    else if (token == "trend")
      sources.insert(data::SourceFamily::TREND);
    else
      throw_error(ErrorCode::InvalidArgument, "unknown variant token '" + token + "'");
  }
  Variant v = from_sources(std::move(sources));
  if (v.name != name)
    throw_error(ErrorCode::InvalidArgument,
                "variant '" + name + "' is not canonical (use '" + v.name + "')");
  return v;
}

std::vector<Variant> Variant::all() {
  static const char* names[] = {"ili", "ed", "trend", "ili+ed", "ili+trend", "ed+trend",
                                "ili+ed+trend"};
  std::vector<Variant> out;
  for (const char* n : names) out.push_back(from_name(n));
  return out;
}

LagFeatures lag_features(const std::vector<double>& series, int t, int horizon) {
  const int base = t - horizon;  // trailing week at prediction time
  if (base - 2 < 0)
    throw_error(ErrorCode::InsufficientHistory,
                "week " + std::to_string(t) + " needs history back to week " +
                    std::to_string(base - 2));
  if (base >= static_cast<int>(series.size()))
    throw_error(ErrorCode::InsufficientHistory, "trailing week beyond series end");
  double level = series[static_cast<std::size_t>(base)];
  double prev = series[static_cast<std::size_t>(base - 1)];
  double prev2 = series[static_cast<std::size_t>(base - 2)];
  double slope = level - prev;
  double accel = (level - prev) - (prev - prev2);
  return {level, slope, accel};
}

DesignMatrix build_matrix(const data::WeeklyPanel& panel, const Variant& variant, int horizon) {
  if (horizon != 1 && horizon != 2)
    throw_error(ErrorCode::InvalidArgument, "horizon must be 1 or 2");
  const int n_weeks = static_cast<int>(panel.week_count());
  if (n_weeks < horizon + 3)
    throw_error(ErrorCode::InsufficientHistory,
                "panel needs at least " + std::to_string(horizon + 3) + " weeks");

  std::vector<const data::SurveillanceSeries*> picked;
  for (auto fam : kFamilyOrder) {
    if (!variant.sources.count(fam)) continue;
    std::size_t before = picked.size();
    for (const auto& s : panel.series)
      if (s.family == fam) picked.push_back(&s);
    if (picked.size() == before)
      throw_error(ErrorCode::InvalidArgument,
                  "variant '" + variant.name + "' needs at least one " +
                      std::string(data::family_name(fam)) + " series");
    std::sort(picked.begin() + static_cast<std::ptrdiff_t>(before), picked.end(),
              [](const auto* a, const auto* b) { return a->source_id < b->source_id; });
  }

  DesignMatrix m;
  m.horizon = horizon;
  const int first_row_week = horizon + 2;  // earliest week with full trailing history
  const int n_rows = n_weeks - first_row_week;
  const int n_cols = 3 * static_cast<int>(picked.size());
  m.values.resize(n_rows, n_cols);
  m.row_weeks.reserve(static_cast<std::size_t>(n_rows));

  for (const auto* s : picked) {
    for (Feature f : {Feature::Level, Feature::Slope, Feature::Accel})
      m.column_meta.push_back({s->source_id, s->family, f});
  }
  for (int r = 0; r < n_rows; ++r) {
    int t = first_row_week + r;
    m.row_weeks.push_back(panel.weeks[static_cast<std::size_t>(t)].index);
    int c = 0;
    for (const auto* s : picked) {
      LagFeatures lf = lag_features(s->values, t, horizon);
      m.values(r, c++) = lf.level;
      m.values(r, c++) = lf.slope;
      m.values(r, c++) = lf.accel;
    }
  }
  return m;
}

std::string ExpandedMatrix::column_digest(const std::vector<ColumnMeta>& meta) const {
  std::ostringstream os;
  os << "df=" << df << ";degree=" << degree << ";";
  for (std::size_t j = 0; j < meta.size(); ++j) {
    os << meta[j].source_id << ":" << data::family_name(meta[j].family) << ":"
       << feature_name(meta[j].feature) << (degenerate[j] ? ":linear" : ":spline") << ";";
  }
  return sha256_hex(os.str());
}

ExpandedMatrix expand(const DesignMatrix& design, const std::vector<int>& train_rows, int df,
                      int degree) {
  if (train_rows.empty()) throw_error(ErrorCode::InvalidArgument, "expand: no training rows");
  const int n_rows = static_cast<int>(design.values.rows());
  const int n_raw = static_cast<int>(design.values.cols());
  for (int r : train_rows)
    if (r < 0 || r >= n_rows)
      throw_error(ErrorCode::InvalidArgument, "expand: training row out of range");

  ExpandedMatrix out;
  out.df = df;
  out.degree = degree;
  out.values = Eigen::MatrixXd::Zero(n_rows, static_cast<Eigen::Index>(n_raw) * df);
  out.specs.resize(static_cast<std::size_t>(n_raw));
  out.degenerate.assign(static_cast<std::size_t>(n_raw), false);

  std::vector<double> train_values(train_rows.size());
  for (int j = 0; j < n_raw; ++j) {
    for (std::size_t i = 0; i < train_rows.size(); ++i)
      train_values[i] = design.values(train_rows[i], j);
    const int base = j * df;
    try {
      out.specs[static_cast<std::size_t>(j)] = spline::make_spec(train_values, df, degree);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateInput) throw;
      // fallback: one centered linear column, remaining block columns zero
      out.degenerate[static_cast<std::size_t>(j)] = true;
      double m = 0.0;
      for (double v : train_values) m += v;
      m /= static_cast<double>(train_values.size());
      spline::SplineSpec stub;
      stub.degree = degree;
      stub.df = df;
      stub.lo = m;
      stub.hi = m;
      out.specs[static_cast<std::size_t>(j)] = stub;
      for (int r = 0; r < n_rows; ++r) out.values(r, base) = design.values(r, j) - m;
      continue;
    }
    const auto& spec = out.specs[static_cast<std::size_t>(j)];
    for (int r = 0; r < n_rows; ++r) {
      std::vector<double> basis = spline::evaluate_basis(spec, design.values(r, j));
      for (int k = 0; k < df; ++k) out.values(r, base + k) = basis[static_cast<std::size_t>(k)];
    }
  }
  return out;
}

}  // namespace flucast::design
