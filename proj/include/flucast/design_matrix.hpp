#pragma once

#include <Eigen/Dense>
#include <set>
#include <string>
#include <vector>

#include "flucast/data_model.hpp"
#include "flucast/spline_basis.hpp"

namespace flucast::design {

struct Variant {
  std::set<data::SourceFamily> sources;
  std::string name;  // canonical, e.g. "ili+ed+trend"

  static Variant from_name(const std::string& name);
  static Variant from_sources(std::set<data::SourceFamily> sources);
  // The seven source combinations, in reporting order.
  static std::vector<Variant> all();
};

enum class Feature { Level = 0, Slope = 1, Accel = 2 };

const char* feature_name(Feature f);

struct ColumnMeta {
  std::string source_id;
  data::SourceFamily family;
  Feature feature;
};

struct DesignMatrix {
  Eigen::MatrixXd values;               // rows x D
  std::vector<ColumnMeta> column_meta;  // size D
  std::vector<int> row_weeks;           // target week index per row
  int horizon = 1;
};

struct LagFeatures {
  double level;
  double slope;
  double accel;
};

// Trailing level / first difference / second difference of `series` for a
// forecast of week t at the given horizon. Weeks are 0-based; t may point
// one past the end of the series (only history is read).
LagFeatures lag_features(const std::vector<double>& series, int t, int horizon);

DesignMatrix build_matrix(const data::WeeklyPanel& panel, const Variant& variant, int horizon);

struct ExpandedMatrix {
  Eigen::MatrixXd values;  // rows x (D * df)
  std::vector<spline::SplineSpec> specs;       // one per raw column
  std::vector<bool> degenerate;                // raw columns under the linear fallback
  int df = 6;
  int degree = 3;

  int raw_columns() const { return static_cast<int>(specs.size()); }
  int block_begin(int raw_col) const { return raw_col * df; }

  // Digest over the provenance of the expanded columns; stored with fits.
  std::string column_digest(const std::vector<ColumnMeta>& meta) const;
};

// Spline-expands every row using specs fitted on train_rows only. A raw
// column with fewer than df distinct training values falls back to a single
// centered linear column padded with zeros.
ExpandedMatrix expand(const DesignMatrix& design, const std::vector<int>& train_rows,
                      int df = 6, int degree = 3);

}  // namespace flucast::design
