#include "treegate/synth.hpp"

#include <fstream>

#include "treegate/errors.hpp"
#include "treegate/rng.hpp"

namespace treegate {

namespace {

constexpr double kSplitProbability = 0.55;

class TreeWriter {
 public:
  TreeWriter(Rng& rng, int filler_count) : rng_(rng), filler_count_(filler_count) {}

  // Subtree of height <= `remaining`. On the spine, one child continues the
  // spine until height 0, where `spine_leaf` is emitted.
  void subtree(int remaining, bool spine, const std::string& spine_leaf, std::string& out) {
    const bool split = remaining > 0 && (spine || rng_.bernoulli(kSplitProbability));
    if (!split) {
      out += "(0 ";
      out += spine ? spine_leaf : filler();
      out += ')';
      return;
    }
    const bool spine_left = spine && rng_.bernoulli(0.5);
    out += "(0 ";
    subtree(remaining - 1, spine && spine_left, spine_leaf, out);
    out += ' ';
    subtree(remaining - 1, spine && !spine_left, spine_leaf, out);
    out += ')';
  }

  std::string filler() { return "w" + std::to_string(rng_.below(static_cast<std::uint64_t>(filler_count_))); }

 private:
  Rng& rng_;
  int filler_count_;
};

}  // namespace

void SynthConfig::validate() const {
  if (classes < 2) throw ConfigError("classes must be at least 2");
  if (examples < 1) throw ConfigError("examples must be positive");
  if (depth < 1) throw ConfigError("depth must be at least 1");
  if (dim < 1) throw ConfigError("dim must be positive");
  if (keywords_per_class < 1) throw ConfigError("keywords per class must be positive");
  if (!(keyword_rate >= 0.0 && keyword_rate <= 1.0)) throw ConfigError("keyword rate must be in [0, 1]");
  if (vocab_size <= classes * keywords_per_class) {
    throw ConfigError("vocabulary must be larger than the " +
                      std::to_string(classes * keywords_per_class) + " keywords");
  }
}

std::string keyword_token(int cls, int j) {
  return "kw" + std::to_string(cls) + "_" + std::to_string(j);
}

bool is_keyword_token(std::string_view token) { return token.starts_with("kw"); }

SynthCorpus generate_synthetic(const SynthConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const int keyword_count = config.classes * config.keywords_per_class;
  const int filler_count = config.vocab_size - keyword_count;

  std::vector<std::string> vocab;
  for (int c = 0; c < config.classes; ++c) {
    for (int j = 0; j < config.keywords_per_class; ++j) vocab.push_back(keyword_token(c, j));
  }
  for (int i = 0; i < filler_count; ++i) vocab.push_back("w" + std::to_string(i));
  Mat vectors(static_cast<Eigen::Index>(vocab.size()), config.dim);
  for (Eigen::Index r = 0; r < vectors.rows(); ++r) {
    for (Eigen::Index k = 0; k < vectors.cols(); ++k) vectors(r, k) = rng.uniform(-1.0, 1.0);
  }

  SynthCorpus corpus;
  corpus.tree_lines.reserve(static_cast<std::size_t>(config.examples));
  TreeWriter writer(rng, filler_count);
  for (int e = 0; e < config.examples; ++e) {
    const int label = static_cast<int>(rng.below(static_cast<std::uint64_t>(config.classes)));
    const std::string leaf =
        rng.bernoulli(config.keyword_rate)
            ? keyword_token(label, static_cast<int>(rng.below(
                                       static_cast<std::uint64_t>(config.keywords_per_class))))
            : writer.filler();
    std::string line;
    writer.subtree(config.depth, true, leaf, line);
    // The root carries the sentence label.
    line.replace(1, 1, std::to_string(label));
    corpus.tree_lines.push_back(std::move(line));
  }
  // Written without <UNK>; the loader appends it.
  corpus.embeddings = EmbeddingTable(std::move(vocab), std::move(vectors));
  return corpus;
}

void write_synthetic(const SynthCorpus& corpus, const std::filesystem::path& prefix) {
  const std::filesystem::path trees = prefix.string() + ".trees";
  const std::filesystem::path emb = prefix.string() + ".emb";
  std::ofstream out(trees, std::ios::binary);
  if (!out) throw DataError("cannot write " + trees.string());
  for (const std::string& line : corpus.tree_lines) out << line << '\n';

  save_embeddings(corpus.embeddings, emb, /*include_unknown=*/false);
}

}  // namespace treegate
