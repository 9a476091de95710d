#pragma once

#include <string>
#include <vector>

#include "ctxsel/matrix.hpp"

namespace ctxsel {

// Plain-text matrix files: one `F C` header line, then F rows of C reals.
// An optional trailing `clips: i0 i1 ...` line carries clip boundaries.
// Values are printed with max_digits10 so write/read round-trips exactly.

struct EmbeddingFile {
  Matrix values;
  std::vector<std::size_t> clip_starts;  // empty when the file has no clips line
};

std::string format_double(double x);

void write_matrix_file(const std::string& path, const Matrix& m,
                       const std::vector<std::size_t>& clip_starts = {});

EmbeddingFile read_matrix_file(const std::string& path);

}  // namespace ctxsel
