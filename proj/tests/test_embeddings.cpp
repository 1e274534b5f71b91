#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "treegate/embeddings.hpp"
#include "treegate/errors.hpp"

using namespace treegate;

namespace {

const char* kTwoRows = "movie 0.1 0.2 0.3\ngood -1 0.5 2\n";

std::filesystem::path temp_file(const std::string& name, const std::string& body) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream(path, std::ios::binary) << body;
  return path;
}

}  // namespace

TEST(Embeddings, TwoRowsPlusUnknown) {
  const EmbeddingTable t = parse_embeddings(kTwoRows, 3, 1);
  EXPECT_EQ(t.size(), 3);
  EXPECT_EQ(t.dim(), 3);
  EXPECT_EQ(t.vocab().back(), kUnknownToken);
  EXPECT_EQ(t.unk_index(), 2);
  for (int k = 0; k < 3; ++k) {
    EXPECT_GE(t.row(2)(k), -0.05);
    EXPECT_LE(t.row(2)(k), 0.05);
  }
  EXPECT_FALSE(t.trainable);
}

TEST(Embeddings, ShortLineNamesLine) {
  try {
    parse_embeddings("a 1 2 3\nb 1 2\n", 3, 1);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(Embeddings, RejectsBadFields) {
  EXPECT_THROW(parse_embeddings("a 1 2 3 4\n", 3, 1), DataError);
  EXPECT_THROW(parse_embeddings("a 1 nan 3\n", 3, 1), DataError);
  EXPECT_THROW(parse_embeddings("a 1 inf 3\n", 3, 1), DataError);
  EXPECT_THROW(parse_embeddings("a 1 x 3\n", 3, 1), DataError);
  EXPECT_THROW(parse_embeddings("a 1  2 3\n", 3, 1), DataError);
}

TEST(Embeddings, UnknownRowIsDeterministicPerSeed) {
  const auto path = temp_file("treegate_emb_seed.txt", kTwoRows);
  const EmbeddingTable a = load_embeddings(path, 3, 42);
  const EmbeddingTable b = load_embeddings(path, 3, 42);
  const EmbeddingTable c = load_embeddings(path, 3, 43);
  for (int k = 0; k < 3; ++k) {
    EXPECT_EQ(std::bit_cast<std::uint64_t>(a.row(2)(k)), std::bit_cast<std::uint64_t>(b.row(2)(k)));
  }
  EXPECT_NE(a.row(2), c.row(2));
}

TEST(Embeddings, ExistingUnknownRowIsKept) {
  const EmbeddingTable t = parse_embeddings("<UNK> 9 9\na 1 2\n", 2, 1);
  EXPECT_EQ(t.size(), 2);
  EXPECT_EQ(t.unk_index(), 0);
  EXPECT_EQ(t.lookup("zzz")(0), 9.0);
}

TEST(Embeddings, DuplicatesKeepFirst) {
  const EmbeddingTable t = parse_embeddings("a 1 2\nb 3 4\na 5 6\n", 2, 1);
  EXPECT_EQ(t.size(), 3);
  EXPECT_EQ(t.duplicates_skipped, 1);
  EXPECT_EQ(t.lookup("a")(0), 1.0);
}

TEST(Lookup, ExactThenLowercaseThenUnknown) {
  const EmbeddingTable t = parse_embeddings("movie 1 2\nMovie 3 4\ngood 5 6\n", 2, 1);
  EXPECT_EQ(t.lookup("Movie")(0), 3.0);
  EXPECT_EQ(t.lookup("GOOD")(0), 5.0);
  EXPECT_EQ(t.index_of("Good"), t.index_of("good"));
  EXPECT_EQ(t.index_of("unseen"), t.unk_index());
  EXPECT_EQ(t.lookup("unseen"), t.row(t.unk_index()).transpose());
  EXPECT_EQ(t.lookup("").size(), 2);
}

TEST(Lookup, LowercaseFallbackWhenOnlyLowerExists) {
  const EmbeddingTable t = parse_embeddings("movie 1 2\n", 2, 1);
  EXPECT_EQ(t.index_of("Movie"), 0);
}

TEST(Embeddings, ConstructorValidates) {
  Mat m(2, 2);
  m << 1, 2, 3, 4;
  EXPECT_THROW(EmbeddingTable({"a", "a"}, m), DataError);
  EXPECT_THROW(EmbeddingTable({"a"}, m), DataError);
  m(0, 0) = std::nan("");
  EXPECT_THROW(EmbeddingTable({"a", "b"}, m), DataError);
}

TEST(Embeddings, SaveLoadRoundTrip) {
  const EmbeddingTable t = parse_embeddings("a 0.1 -2.5e-7\nb 3 4\n", 2, 5);
  const auto path = std::filesystem::temp_directory_path() / "treegate_emb_roundtrip.txt";
  save_embeddings(t, path);
  const EmbeddingTable u = load_embeddings(path, 2, 99);
  EXPECT_EQ(u.vocab(), t.vocab());
  EXPECT_EQ(u.vectors(), t.vectors());
}
