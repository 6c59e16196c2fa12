#include "envelope/csv_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <vector>

namespace envelope {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

Matrix parse_matrix_csv(std::istream& in, bool skip_header, const std::string& source) {
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_header && line_no == 1) continue;
    const std::string_view view = trim(line);
    if (view.empty()) continue;

    std::vector<double> row;
    std::size_t start = 0;
    int col = 1;
    while (true) {
      const std::size_t comma = view.find(',', start);
      const std::string_view cell = trim(view.substr(
          start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
        fail(ErrorCode::InvalidInput, source + ": line " + std::to_string(line_no) + ", column " +
                                          std::to_string(col) + ": cannot parse '" +
                                          std::string(cell) + "' as a number");
      }
      if (!std::isfinite(v)) {
        fail(ErrorCode::InvalidInput, source + ": line " + std::to_string(line_no) + ", column " +
                                          std::to_string(col) + ": non-finite value '" +
                                          std::string(cell) + "'");
      }
      row.push_back(v);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
      ++col;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      fail(ErrorCode::InvalidInput, source + ": line " + std::to_string(line_no) + " has " +
                                        std::to_string(row.size()) + " columns, expected " +
                                        std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) fail(ErrorCode::InvalidInput, source + ": no data rows");

  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return m;
}

Matrix read_matrix_csv(const std::string& path, bool skip_header) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::InvalidInput, "cannot open " + path);
  return parse_matrix_csv(in, skip_header, path);
}

void write_matrix_csv(std::ostream& out, const Matrix& m) {
  char buf[64];
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      const auto res = std::to_chars(buf, buf + sizeof buf, m(i, j));
      if (j) out << ',';
      out.write(buf, res.ptr - buf);
    }
    out << '\n';
  }
}

void write_matrix_csv(const std::string& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::InvalidInput, "cannot write " + path);
  write_matrix_csv(out, m);
}

}  // namespace envelope
