// Rectangular level grids: the VGLC-style symbol grid and the discretized
// cluster-id grid, plus the scan-order linearization used by the sequence
// models (rows emitted bottom to top, each left to right).

#pragma once

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "cte/common.hpp"

namespace cte {

using TileSymbol = char;

// Text level: one printable character per tile.
struct LevelGrid {
  int rows = 0;
  int cols = 0;
  std::vector<TileSymbol> cells;  // row-major, row 0 is the top row

  TileSymbol& at(int r, int c) { return cells[static_cast<std::size_t>(r) * cols + c]; }
  TileSymbol at(int r, int c) const { return cells[static_cast<std::size_t>(r) * cols + c]; }

  bool in_bounds(int r, int c) const {
    return r >= 0 && r < rows && c >= 0 && c < cols;
  }

  std::set<TileSymbol> symbol_set() const {
    return std::set<TileSymbol>(cells.begin(), cells.end());
  }
};

// Discretized level: one DBSCAN cluster id per tile.
struct ClusterGrid {
  int rows = 0;
  int cols = 0;
  int num_clusters = 0;  // K; every id must lie in [0, K)
  std::vector<int> cells;

  int& at(int r, int c) { return cells[static_cast<std::size_t>(r) * cols + c]; }
  int at(int r, int c) const { return cells[static_cast<std::size_t>(r) * cols + c]; }
};

// Parses a VGLC-style text level. Every line must have the same length.
inline LevelGrid parse_vglc_level(const std::string& text) {
  std::vector<std::string> lines;
  std::string line;
  std::istringstream in(text);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw FormatError("empty level text");

  LevelGrid g;
  g.rows = static_cast<int>(lines.size());
  g.cols = static_cast<int>(lines[0].size());
  if (g.cols == 0) throw FormatError("empty first line in level text");
  g.cells.reserve(static_cast<std::size_t>(g.rows) * g.cols);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (static_cast<int>(lines[i].size()) != g.cols) {
      throw FormatError("ragged level text: line " + std::to_string(i + 1) +
                        " has length " + std::to_string(lines[i].size()) +
                        ", expected " + std::to_string(g.cols));
    }
    g.cells.insert(g.cells.end(), lines[i].begin(), lines[i].end());
  }
  return g;
}

inline std::string serialize_level(const LevelGrid& g) {
  std::string out;
  out.reserve(static_cast<std::size_t>(g.rows) * (g.cols + 1));
  for (int r = 0; r < g.rows; ++r) {
    out.append(&g.cells[static_cast<std::size_t>(r) * g.cols],
               static_cast<std::size_t>(g.cols));
    out.push_back('\n');
  }
  return out;
}

// Scan order: bottom row first, each row left to right.
template <typename Grid>
std::vector<typename std::decay_t<decltype(std::declval<Grid>().cells)>::value_type>
linearize(const Grid& g) {
  using Cell = typename std::decay_t<decltype(g.cells)>::value_type;
  std::vector<Cell> seq;
  seq.reserve(g.cells.size());
  for (int r = g.rows - 1; r >= 0; --r) {
    for (int c = 0; c < g.cols; ++c) seq.push_back(g.at(r, c));
  }
  return seq;
}

template <typename Cell>
void delinearize_into(const std::vector<Cell>& seq, int rows, int cols,
                      std::vector<Cell>& cells) {
  if (static_cast<std::size_t>(rows) * cols != seq.size()) {
    throw DimensionError("delinearize: sequence length " +
                         std::to_string(seq.size()) + " != " +
                         std::to_string(rows) + "x" + std::to_string(cols));
  }
  cells.assign(seq.size(), Cell{});
  std::size_t i = 0;
  for (int r = rows - 1; r >= 0; --r) {
    for (int c = 0; c < cols; ++c) {
      cells[static_cast<std::size_t>(r) * cols + c] = seq[i++];
    }
  }
}

inline LevelGrid delinearize_level(const std::vector<TileSymbol>& seq, int rows,
                                   int cols) {
  LevelGrid g;
  g.rows = rows;
  g.cols = cols;
  delinearize_into(seq, rows, cols, g.cells);
  return g;
}

inline ClusterGrid delinearize_clusters(const std::vector<int>& seq, int rows,
                                        int cols, int num_clusters) {
  ClusterGrid g;
  g.rows = rows;
  g.cols = cols;
  g.num_clusters = num_clusters;
  delinearize_into(seq, rows, cols, g.cells);
  return g;
}

// Cluster-level text file: header "K=<count> rows=<r> cols=<c>", then one
// line per row with space-separated ids.
inline std::string serialize_cluster_grid(const ClusterGrid& g) {
  std::ostringstream out;
  out << "K=" << g.num_clusters << " rows=" << g.rows << " cols=" << g.cols
      << "\n";
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      if (c) out << ' ';
      out << g.at(r, c);
    }
    out << "\n";
  }
  return out.str();
}

inline ClusterGrid parse_cluster_grid(const std::string& text) {
  std::istringstream in(text);
  std::string header;
  if (!std::getline(in, header)) throw FormatError("empty cluster-level file");
  ClusterGrid g;
  if (std::sscanf(header.c_str(), "K=%d rows=%d cols=%d", &g.num_clusters,
                  &g.rows, &g.cols) != 3) {
    throw FormatError("bad cluster-level header: " + header);
  }
  g.cells.reserve(static_cast<std::size_t>(g.rows) * g.cols);
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      int id = 0;
      if (!(in >> id)) throw FormatError("truncated cluster-level file");
      if (id < 0 || id >= g.num_clusters) {
        throw FormatError("cluster id " + std::to_string(id) +
                          " out of range [0, " +
                          std::to_string(g.num_clusters) + ")");
      }
      g.cells.push_back(id);
    }
  }
  return g;
}

}  // namespace cte
