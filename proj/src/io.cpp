#include "regfact/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace regfact::io {

namespace {

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string where(std::string_view source, std::size_t line) {
  return std::string(source) + ": line " + std::to_string(line);
}

}  // namespace

MatrixXd parse_matrix_csv(std::string_view text, std::string_view source) {
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  std::size_t last_data_line = 0;
  while (!text.empty()) {
    ++line_no;
    const std::size_t eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    line = trim(line);
    if (line.empty()) continue;
    if (last_data_line != 0 && last_data_line + 1 != line_no) {
      throw FormatError(where(source, line_no) + ": blank line inside matrix data");
    }
    last_data_line = line_no;

    std::vector<double> row;
    std::size_t field = 0;
    while (true) {
      ++field;
      const std::size_t comma = line.find(',');
      const std::string_view cell = trim(line.substr(0, comma));
      double value = 0;
      const char* first = cell.data();
      const char* last = cell.data() + cell.size();
      if (!cell.empty() && *first == '+') ++first;
      const auto [ptr, ec] = std::from_chars(first, last, value);
      if (cell.empty() || ec != std::errc{} || ptr != last) {
        throw FormatError(where(source, line_no) + ", field " + std::to_string(field) +
                          ": not a number: '" + std::string(cell) + "'");
      }
      if (!std::isfinite(value)) {
        throw FormatError(where(source, line_no) + ", field " + std::to_string(field) +
                          ": non-finite value");
      }
      row.push_back(value);
      if (comma == std::string_view::npos) break;
      line = line.substr(comma + 1);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw FormatError(where(source, line_no) + ": expected " +
                        std::to_string(rows.front().size()) + " fields, found " +
                        std::to_string(row.size()) + " (ragged rows)");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw FormatError(std::string(source) + ": empty matrix file");

  MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return x;
}

MatrixXd read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open matrix file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_matrix_csv(buffer.str(), path.string());
}

std::string format_matrix_csv(const MatrixXd& x) {
  std::string out;
  char buf[64];
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (j > 0) out.push_back(',');
      const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x(i, j));
      out.append(buf, ptr);
    }
    out.push_back('\n');
  }
  return out;
}

void write_text(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_matrix_csv(const MatrixXd& x, const std::filesystem::path& path) {
  write_text(path, format_matrix_csv(x));
}

std::string format_pgm(const MatrixXd& x) {
  std::ostringstream out;
  out << "P2\n" << x.cols() << ' ' << x.rows() << "\n255\n";
  const double lo = x.size() > 0 ? x.minCoeff() : 0.0;
  const double hi = x.size() > 0 ? x.maxCoeff() : 0.0;
  const double span = hi - lo;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const long level = span > 0 ? std::lround(255.0 * (x(i, j) - lo) / span) : 0;
      if (j > 0) out << ' ';
      out << level;
    }
    out << '\n';
  }
  return out.str();
}

void write_pgm(const MatrixXd& x, const std::filesystem::path& path) {
  write_text(path, format_pgm(x));
}

}  // namespace regfact::io
