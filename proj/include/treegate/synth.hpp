#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "treegate/embeddings.hpp"

namespace treegate {

struct SynthConfig {
  int vocab_size = 200;  // keywords included
  int examples = 2000;
  double keyword_rate = 1.0;
  int depth = 6;
  int classes = 2;
  int dim = 16;
  int keywords_per_class = 3;
  std::uint64_t seed = 1;

  void validate() const;
};

// Random binary trees whose root label is signalled by one class keyword
// planted at the bottom of a path of length `depth`; every other leaf is a
// filler token. Non-root nodes carry label 0.
struct SynthCorpus {
  std::vector<std::string> tree_lines;
  EmbeddingTable embeddings;
};

// Keywords are named `kw<class>_<j>`, filler tokens `w<i>`.
std::string keyword_token(int cls, int j);
bool is_keyword_token(std::string_view token);

SynthCorpus generate_synthetic(const SynthConfig& config);

// Writes `<prefix>.trees` and `<prefix>.emb`.
void write_synthetic(const SynthCorpus& corpus, const std::filesystem::path& prefix);

}  // namespace treegate
