#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace treegate {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

inline constexpr std::string_view kUnknownToken = "<UNK>";

// Word vectors, one row per vocabulary entry. `<UNK>` is always present.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  // Rows of `vectors` align with `vocab`; appends `<UNK>` (zero row) if absent.
  EmbeddingTable(std::vector<std::string> vocab, Mat vectors);

  int dim() const { return static_cast<int>(vectors_.cols()); }
  int size() const { return static_cast<int>(vocab_.size()); }
  const std::vector<std::string>& vocab() const { return vocab_; }
  int unk_index() const { return unk_index_; }

  // Exact match, then ASCII-lowercased match, then `<UNK>`.
  int index_of(std::string_view token) const;
  Eigen::Ref<const Vec> lookup(std::string_view token) const;
  auto row(int index) const { return vectors_.row(index); }

  const Mat& vectors() const { return vectors_; }
  Mat& vectors() { return vectors_; }

  bool trainable = false;
  // Duplicate tokens skipped while loading (first occurrence wins).
  int duplicates_skipped = 0;

 private:
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, int> index_;
  Mat vectors_;
  int unk_index_ = -1;
};

// `token v1 ... vK` per line, single-space separated. A missing `<UNK>` row is
// appended with entries drawn uniformly from [-0.05, 0.05] using `seed`.
EmbeddingTable load_embeddings(const std::filesystem::path& path, int dim, std::uint64_t seed);
EmbeddingTable parse_embeddings(std::string_view text, int dim, std::uint64_t seed);

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path,
                     bool include_unknown = true);

}  // namespace treegate
