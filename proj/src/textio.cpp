#include "ctxsel/textio.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "ctxsel/errors.hpp"

namespace ctxsel {

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void write_matrix_file(const std::string& path, const Matrix& m,
                       const std::vector<std::size_t>& clip_starts) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  out << m.rows() << " " << m.cols() << "\n";
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out << " ";
      out << format_double(m(i, j));
    }
    out << "\n";
  }
  if (!clip_starts.empty()) {
    out << "clips:";
    for (std::size_t c : clip_starts) out << " " << c;
    out << "\n";
  }
}

EmbeddingFile read_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::size_t rows = 0, cols = 0;
  if (!(in >> rows >> cols)) throw ConfigError("malformed header in " + path);

  EmbeddingFile file;
  file.values = Matrix(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      if (!(in >> file.values(i, j))) {
        throw ConfigError("truncated matrix data in " + path);
      }
    }
  }
  std::string tag;
  if (in >> tag) {
    if (tag != "clips:") throw ConfigError("unexpected trailer '" + tag + "' in " + path);
    std::size_t c = 0;
    while (in >> c) file.clip_starts.push_back(c);
  }
  return file;
}

}  // namespace ctxsel
