#pragma once

// Headerless numeric CSV: comma separated, '.' decimal point, one matrix
// row per line. Blank lines are ignored.

#include <iosfwd>
#include <string>

#include "envelope/matrix_kernel.hpp"

namespace envelope {

/// Throws InvalidInput naming the offending line and column.
Matrix parse_matrix_csv(std::istream& in, bool skip_header = false, const std::string& source = "<input>");
Matrix read_matrix_csv(const std::string& path, bool skip_header = false);

/// Shortest round-trip representation of every entry.
void write_matrix_csv(std::ostream& out, const Matrix& m);
void write_matrix_csv(const std::string& path, const Matrix& m);

}  // namespace envelope
