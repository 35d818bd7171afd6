// Game corpus handling: VGLC-style text levels, tile-affordance mappings,
// level images, per-tile training samples, dataset splits and tile
// statistics. Games without affordance annotations are supported; their
// symbol grids are derived from byte-identical 16x16 image patches and every
// affordance lookup returns the zero vector.

#pragma once

#include <json.hpp>

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cte/common.hpp"
#include "cte/edges.hpp"
#include "cte/grid.hpp"
#include "cte/image.hpp"
#include "cte/rng.hpp"

namespace cte {

inline constexpr int kAffordanceDims = 13;

using TileBytes = std::array<std::uint8_t, kTileSize * kTileSize * 3>;

struct AffordanceMap {
  std::string game;
  bool annotated = true;
  std::vector<std::string> names;  // ordered affordance labels, 13 entries
  std::map<TileSymbol, std::vector<double>> entries;
};

// Returns the mapped 13-dim binary vector; the zero vector for unannotated
// games. Unknown symbols in annotated games are an error.
inline std::vector<double> lookup_affordance(const AffordanceMap& map,
                                             TileSymbol symbol) {
  if (!map.annotated) return std::vector<double>(kAffordanceDims, 0.0);
  auto it = map.entries.find(symbol);
  if (it == map.entries.end()) {
    throw FormatError("no affordance mapping for symbol '" +
                      std::string(1, symbol) + "' in game " + map.game);
  }
  return it->second;
}

// JSON schema: {"affordances": [13 names], "tiles": {"X": ["solid", ...]}}.
inline AffordanceMap parse_affordance_json(const std::string& text,
                                           const std::string& game) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw FormatError("bad affordance JSON for " + game + ": " + e.what());
  }
  AffordanceMap map;
  map.game = game;
  map.annotated = true;
  if (!j.contains("affordances") || !j["affordances"].is_array()) {
    throw FormatError("affordance JSON missing \"affordances\" list");
  }
  for (const auto& name : j["affordances"]) {
    map.names.push_back(name.get<std::string>());
  }
  if (static_cast<int>(map.names.size()) != kAffordanceDims) {
    throw FormatError("affordance list must have 13 entries, got " +
                      std::to_string(map.names.size()));
  }
  if (!j.contains("tiles") || !j["tiles"].is_object()) {
    throw FormatError("affordance JSON missing \"tiles\" object");
  }
  for (auto it = j["tiles"].begin(); it != j["tiles"].end(); ++it) {
    const std::string key = it.key();
    if (key.size() != 1) {
      throw FormatError("tile key must be a single character: \"" + key + "\"");
    }
    std::vector<double> vec(kAffordanceDims, 0.0);
    for (const auto& a : it.value()) {
      const std::string name = a.get<std::string>();
      auto pos = std::find(map.names.begin(), map.names.end(), name);
      if (pos == map.names.end()) {
        throw FormatError("unknown affordance \"" + name + "\" for tile '" +
                          key + "'");
      }
      vec[static_cast<std::size_t>(pos - map.names.begin())] = 1.0;
    }
    map.entries[key[0]] = vec;
  }
  return map;
}

inline AffordanceMap load_affordance_json(const std::string& path,
                                          const std::string& game) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open affordance JSON: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_affordance_json(ss.str(), game);
}

inline AffordanceMap zero_affordance_map(const std::string& game) {
  AffordanceMap map;
  map.game = game;
  map.annotated = false;
  return map;
}

struct TileOrigin {
  std::string level_id;
  int row = 0;
  int col = 0;
};

// One tile's feature triple plus its provenance. tile_pixels/tile_raw carry
// the candidate's own 16x16 patch (clustering features and rendering).
struct TileSample {
  std::vector<double> context;     // 48x48x3 in [0,1], candidate centred
  std::vector<double> affordance;  // 13-dim binary
  std::vector<double> edges;       // 16x16 binary
  std::vector<double> tile_pixels; // 16x16x3 in [0,1]
  TileBytes tile_raw{};
  TileSymbol symbol = '?';
  TileOrigin origin;
};

struct Level {
  std::string id;
  LevelGrid grid;
  Image image;
};

struct GameData {
  std::string name;
  bool annotated = true;
  AffordanceMap affordances;
  std::vector<Level> levels;
  // First-seen sprite per symbol (ground-truth renders of symbol grids).
  std::map<TileSymbol, TileBytes> sprites;
};

struct CorpusSplit {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
  std::uint64_t seed = 0;
  bool small_corpus_warning = false;
};

// 80-10-10 split, deterministic in the seed. Sizes round to nearest with
// train receiving remainders; corpora under 10 levels fall back to floor
// counts with at least one test level.
inline CorpusSplit split_levels(const std::vector<std::string>& level_ids,
                                std::uint64_t seed) {
  if (level_ids.empty()) throw Error("split_levels: empty level list");
  const int n = static_cast<int>(level_ids.size());
  int n_val, n_test;
  CorpusSplit split;
  split.seed = seed;
  if (n < 10) {
    split.small_corpus_warning = true;
    n_val = static_cast<int>(0.1 * n);
    n_test = std::max(1, static_cast<int>(0.1 * n));
  } else {
    n_val = static_cast<int>(std::lround(0.1 * n));
    n_test = static_cast<int>(std::lround(0.1 * n));
  }
  const int n_train = n - n_val - n_test;
  require(n_train >= 1, "split_levels: too few levels for a train split");

  std::vector<std::string> ids = level_ids;
  std::sort(ids.begin(), ids.end());
  Rng rng(derive_seed(seed, "corpus_split"));
  rng.shuffle(ids);
  split.train.assign(ids.begin(), ids.begin() + n_train);
  split.validation.assign(ids.begin() + n_train, ids.begin() + n_train + n_val);
  split.test.assign(ids.begin() + n_train + n_val, ids.end());
  return split;
}

// Per-symbol median over levels of the symbol's percentage share of the
// level's tiles; levels lacking the symbol contribute 0%.
inline std::map<TileSymbol, double> tile_distribution(
    const std::vector<LevelGrid>& levels) {
  require(!levels.empty(), "tile_distribution: empty level list");
  std::set<TileSymbol> symbols;
  for (const auto& g : levels) {
    for (TileSymbol s : g.cells) symbols.insert(s);
  }
  std::map<TileSymbol, double> out;
  for (TileSymbol s : symbols) {
    std::vector<double> pct;
    pct.reserve(levels.size());
    for (const auto& g : levels) {
      const auto count = std::count(g.cells.begin(), g.cells.end(), s);
      pct.push_back(100.0 * static_cast<double>(count) /
                    static_cast<double>(g.cells.size()));
    }
    std::sort(pct.begin(), pct.end());
    const std::size_t m = pct.size();
    out[s] = (m % 2 == 1) ? pct[m / 2] : 0.5 * (pct[m / 2 - 1] + pct[m / 2]);
  }
  return out;
}

// Derives a symbol grid for an image-only level: two tiles share a symbol
// iff their 16x16 patches are byte-identical. The mapping is shared across
// levels via `palette` (first-seen order).
inline LevelGrid derive_symbol_grid(const Image& image,
                                    std::map<TileBytes, TileSymbol>& palette) {
  static const std::string kAlphabet =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789"
      "!@#$%^&*()_+=~{}|;:,.<>/?";
  check_level_image(image, "derive_symbol_grid");
  LevelGrid grid;
  grid.rows = image.tile_rows();
  grid.cols = image.tile_cols();
  grid.cells.reserve(static_cast<std::size_t>(grid.rows) * grid.cols);
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      const TileBytes bytes = tile_bytes(image, r, c);
      auto it = palette.find(bytes);
      if (it == palette.end()) {
        if (palette.size() >= kAlphabet.size()) {
          throw FormatError("derive_symbol_grid: more distinct tiles than "
                            "available symbols (" +
                            std::to_string(kAlphabet.size()) + ")");
        }
        it = palette.emplace(bytes, kAlphabet[palette.size()]).first;
      }
      grid.cells.push_back(it->second);
    }
  }
  return grid;
}

namespace detail {
inline std::vector<std::filesystem::path> sorted_files(
    const std::string& dir, const std::string& ext) {
  std::vector<std::filesystem::path> out;
  if (!std::filesystem::is_directory(dir)) {
    throw FormatError("not a directory: " + dir);
  }
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ext) {
      out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}
}  // namespace detail

// Loads one game from disk. Annotated games pair levels/<id>.txt with
// images/<id>.png and an affordance JSON; unannotated games supply images
// only and get derived symbol grids plus zero affordances.
inline GameData load_game(const std::string& name,
                          const std::string& levels_dir,
                          const std::string& images_dir,
                          const std::string& affordance_json_path) {
  GameData game;
  game.name = name;
  game.annotated = !affordance_json_path.empty();
  game.affordances = game.annotated
                         ? load_affordance_json(affordance_json_path, name)
                         : zero_affordance_map(name);

  std::map<TileBytes, TileSymbol> palette;
  const auto images = detail::sorted_files(images_dir, ".png");
  require(!images.empty(), "no PNG levels found in " + images_dir);
  for (const auto& img_path : images) {
    Level level;
    level.id = img_path.stem().string();
    level.image = read_png(img_path.string());
    check_level_image(level.image, name + "/" + level.id);
    if (game.annotated) {
      const auto txt = std::filesystem::path(levels_dir) /
                       (level.id + std::string(".txt"));
      std::ifstream in(txt);
      if (!in) {
        throw FormatError("missing level text for image " + level.id + ": " +
                          txt.string());
      }
      std::stringstream ss;
      ss << in.rdbuf();
      level.grid = parse_vglc_level(ss.str());
      if (level.grid.rows != level.image.tile_rows() ||
          level.grid.cols != level.image.tile_cols()) {
        throw FormatError("level " + level.id + ": text grid " +
                          std::to_string(level.grid.rows) + "x" +
                          std::to_string(level.grid.cols) +
                          " does not match image tiling " +
                          std::to_string(level.image.tile_rows()) + "x" +
                          std::to_string(level.image.tile_cols()));
      }
      for (TileSymbol s : level.grid.symbol_set()) {
        if (!game.affordances.entries.count(s)) {
          throw FormatError("level " + level.id + " uses symbol '" +
                            std::string(1, s) +
                            "' with no affordance mapping");
        }
      }
    } else {
      level.grid = derive_symbol_grid(level.image, palette);
    }
    for (int r = 0; r < level.grid.rows; ++r) {
      for (int c = 0; c < level.grid.cols; ++c) {
        const TileSymbol s = level.grid.at(r, c);
        if (!game.sprites.count(s)) {
          game.sprites[s] = tile_bytes(level.image, r, c);
        }
      }
    }
    game.levels.push_back(std::move(level));
  }
  return game;
}

inline const Level& find_level(const GameData& game, const std::string& id) {
  for (const auto& l : game.levels) {
    if (l.id == id) return l;
  }
  throw Error("level not found: " + game.name + "/" + id);
}

// Builds the feature triple for one tile of one level.
inline TileSample make_tile_sample(const GameData& game, const Level& level,
                                   int row, int col,
                                   const CannyParams& canny = CannyParams{}) {
  TileSample s;
  s.context = slice_context(level.image, row, col);
  s.symbol = level.grid.at(row, col);
  s.affordance = lookup_affordance(game.affordances, s.symbol);
  s.tile_pixels = tile_patch(level.image, row, col);
  s.tile_raw = tile_bytes(level.image, row, col);
  s.edges = canny_edges(to_grayscale(s.tile_pixels), kTileSize, canny);
  s.origin = TileOrigin{level.id, row, col};
  return s;
}

// All tiles of the given levels, row-major per level.
inline std::vector<TileSample> build_samples(
    const GameData& game, const std::vector<std::string>& level_ids,
    const CannyParams& canny = CannyParams{}) {
  std::vector<TileSample> out;
  for (const auto& id : level_ids) {
    const Level& level = find_level(game, id);
    for (int r = 0; r < level.grid.rows; ++r) {
      for (int c = 0; c < level.grid.cols; ++c) {
        out.push_back(make_tile_sample(game, level, r, c, canny));
      }
    }
  }
  return out;
}

}  // namespace cte
