#include "flucast/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "flucast/error.hpp"

namespace flucast {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      out.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  out.push_back(field);
  return out;
}

std::string cell_context(const CsvTable& t, std::size_t row, int col) {
  std::ostringstream os;
  os << t.path << ":" << t.line_numbers[row] << " column '" << t.header[col] << "'";
  return os.str();
}

}  // namespace

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

int CsvTable::require_column(const std::string& name) const {
  int c = column(name);
  if (c < 0) throw_error(ErrorCode::SchemaError, path + ": missing column '" + name + "'");
  return c;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw_error(ErrorCode::SchemaError, "cannot open " + path.string());

  CsvTable t;
  t.path = path.string();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    auto fields = split_line(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size()) {
      std::ostringstream os;
      os << t.path << ":" << line_no << " has " << fields.size() << " fields, expected "
         << t.header.size();
      throw_error(ErrorCode::SchemaError, os.str());
    }
    t.rows.push_back(std::move(fields));
    t.line_numbers.push_back(line_no);
  }
  if (t.header.empty()) throw_error(ErrorCode::SchemaError, path.string() + ": empty file");
  return t;
}

long long parse_int_field(const CsvTable& t, std::size_t row, int col) {
  const std::string& s = t.rows[row][col];
  long long value = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw_error(ErrorCode::SchemaError, "bad integer '" + s + "' at " + cell_context(t, row, col));
  return value;
}

double parse_double_field(const CsvTable& t, std::size_t row, int col) {
  const std::string& s = t.rows[row][col];
  double value = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw_error(ErrorCode::SchemaError, "bad number '" + s + "' at " + cell_context(t, row, col));
  return value;
}

struct CsvWriter::Impl {
  std::ofstream out;
};

CsvWriter::CsvWriter(const std::filesystem::path& path) : impl_(new Impl) {
  impl_->out.open(path, std::ios::binary);  // binary keeps line endings stable
  if (!impl_->out) {
    delete impl_;
    throw_error(ErrorCode::InvalidArgument, "cannot write " + path.string());
  }
}

CsvWriter::~CsvWriter() { delete impl_; }

void CsvWriter::write_row(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) impl_->out << ',';
    impl_->out << fields[i];
  }
  impl_->out << '\n';
}

}  // namespace flucast
