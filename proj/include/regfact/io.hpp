#pragma once

// Plain-text matrix I/O: comma-separated values (one row per line, no header)
// and ASCII PGM renderings.

#include "regfact/matrix_core.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

namespace regfact::io {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses CSV text. Blank trailing lines are ignored; everything else must be
/// a rectangular grid of finite numbers. Errors name the 1-based line.
MatrixXd parse_matrix_csv(std::string_view text, std::string_view source = "<string>");

MatrixXd read_matrix_csv(const std::filesystem::path& path);

/// Shortest decimal form that round-trips each double exactly.
std::string format_matrix_csv(const MatrixXd& x);

void write_matrix_csv(const MatrixXd& x, const std::filesystem::path& path);

/// P2 greyscale image, entries min-max scaled to 0..255 (constant input maps
/// to 0). Row i of the matrix is image row i.
std::string format_pgm(const MatrixXd& x);

void write_pgm(const MatrixXd& x, const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, std::string_view contents);

}  // namespace regfact::io
