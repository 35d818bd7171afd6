#include "cte/grid.hpp"

#include <gtest/gtest.h>

#include "cte/rng.hpp"

namespace {

using namespace cte;

TEST(ParseVglcLevel, TranscribesRowsAndCols) {
  const LevelGrid g = parse_vglc_level("--\nXX\n");
  EXPECT_EQ(g.rows, 2);
  EXPECT_EQ(g.cols, 2);
  EXPECT_EQ(g.at(0, 0), '-');
  EXPECT_EQ(g.at(0, 1), '-');
  EXPECT_EQ(g.at(1, 0), 'X');
  EXPECT_EQ(g.at(1, 1), 'X');
}

TEST(ParseVglcLevel, RaggedLinesRejectedWithLineNumber) {
  try {
    parse_vglc_level("abc\nde\n");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(ParseVglcLevel, EmptyInputRejected) {
  EXPECT_THROW(parse_vglc_level(""), FormatError);
  EXPECT_THROW(parse_vglc_level("\n\n"), FormatError);
}

TEST(ParseVglcLevel, WindowsLineEndingsAccepted) {
  const LevelGrid g = parse_vglc_level("ab\r\ncd\r\n");
  EXPECT_EQ(g.rows, 2);
  EXPECT_EQ(g.cols, 2);
  EXPECT_EQ(g.at(1, 1), 'd');
}

TEST(ParseVglcLevel, RoundTripReproducesInput) {
  Rng rng(7);
  const std::string symbols = "-X?SQE<>[]o";
  for (int trial = 0; trial < 50; ++trial) {
    const int rows = 1 + static_cast<int>(rng.index(20));
    const int cols = 1 + static_cast<int>(rng.index(40));
    std::string text;
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        text += symbols[rng.index(symbols.size())];
      }
      text += '\n';
    }
    EXPECT_EQ(serialize_level(parse_vglc_level(text)), text);
  }
}

TEST(Linearize, BottomRowFirstLeftToRight) {
  // [[a,b],[c,d]] with the top row first must linearize to c,d,a,b.
  LevelGrid g;
  g.rows = 2;
  g.cols = 2;
  g.cells = {'a', 'b', 'c', 'd'};
  const auto seq = linearize(g);
  ASSERT_EQ(seq.size(), 4u);
  EXPECT_EQ(seq[0], 'c');
  EXPECT_EQ(seq[1], 'd');
  EXPECT_EQ(seq[2], 'a');
  EXPECT_EQ(seq[3], 'b');
}

TEST(Linearize, SingleRowIsIdentity) {
  LevelGrid g;
  g.rows = 1;
  g.cols = 4;
  g.cells = {'p', 'q', 'r', 's'};
  const auto seq = linearize(g);
  EXPECT_EQ(std::string(seq.begin(), seq.end()), "pqrs");
}

TEST(Linearize, DelinearizeIsInverse) {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const int rows = 1 + static_cast<int>(rng.index(12));
    const int cols = 1 + static_cast<int>(rng.index(12));
    ClusterGrid g;
    g.rows = rows;
    g.cols = cols;
    g.num_clusters = 9;
    for (int i = 0; i < rows * cols; ++i) {
      g.cells.push_back(static_cast<int>(rng.index(9)));
    }
    const auto seq = linearize(g);
    const ClusterGrid back = delinearize_clusters(seq, rows, cols, 9);
    EXPECT_EQ(back.cells, g.cells);
  }
}

TEST(ClusterGridText, HeaderAndRoundTrip) {
  ClusterGrid g;
  g.rows = 2;
  g.cols = 3;
  g.num_clusters = 5;
  g.cells = {0, 1, 2, 3, 4, 0};
  const std::string text = serialize_cluster_grid(g);
  EXPECT_EQ(text.substr(0, text.find('\n')), "K=5 rows=2 cols=3");
  const ClusterGrid back = parse_cluster_grid(text);
  EXPECT_EQ(back.num_clusters, 5);
  EXPECT_EQ(back.cells, g.cells);
}

TEST(ClusterGridText, OutOfRangeIdRejected) {
  EXPECT_THROW(parse_cluster_grid("K=2 rows=1 cols=2\n0 2\n"), FormatError);
}

}  // namespace
