#pragma once
// Matrix Market coordinate export/import for the assembled operators.
// 1-based indices, %% comment lines carry the run metadata so an exported
// operator can be reproduced.

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "cdo/assembly.hpp"

namespace cdo {

inline void write_matrix_market(const std::string& path, const SparseOperator& m,
                                const std::map<std::string, std::string>& meta = {}) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_matrix_market: cannot open " + path);
  f << "%%MatrixMarket matrix coordinate real general\n";
  for (auto& kv : meta) f << "% " << kv.first << " = " << kv.second << "\n";
  f << m.n << " " << m.n << " " << m.nnz() << "\n";
  char buf[96];
  for (int64_t r = 0; r < m.n; ++r)
    for (int64_t k = m.rowptr[r]; k < m.rowptr[r + 1]; ++k) {
      std::snprintf(buf, sizeof buf, "%lld %lld %.17g\n", (long long)(r + 1),
                    (long long)(m.col[k] + 1), m.val[k]);
      f << buf;
    }
  if (!f) throw std::runtime_error("write_matrix_market: write failed for " + path);
}

inline SparseOperator read_matrix_market(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_matrix_market: cannot open " + path);
  std::string line;
  if (!std::getline(f, line) || line.rfind("%%MatrixMarket", 0) != 0)
    throw std::runtime_error("read_matrix_market: missing banner");
  int64_t rows = 0, cols = 0, nnz = 0;
  while (std::getline(f, line)) {
    if (!line.empty() && line[0] == '%') continue;
    std::istringstream ss(line);
    if (ss >> rows >> cols >> nnz) break;
  }
  if (rows <= 0 || rows != cols) throw std::runtime_error("read_matrix_market: bad size line");
  std::vector<std::tuple<int64_t, int64_t, double>> t;
  t.reserve((size_t)nnz);
  int64_t r, c;
  double v;
  while (f >> r >> c >> v) t.emplace_back(r - 1, c - 1, v);
  if ((int64_t)t.size() != nnz) throw std::runtime_error("read_matrix_market: entry count mismatch");
  return SparseOperator::from_triplets(rows, t);
}

}  // namespace cdo
