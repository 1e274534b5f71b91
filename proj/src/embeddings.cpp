#include "treegate/embeddings.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "treegate/rng.hpp"
#include "treegate/errors.hpp"
#include "treegate/format.hpp"

namespace treegate {

namespace {

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

EmbeddingTable::EmbeddingTable(std::vector<std::string> vocab, Mat vectors)
    : vocab_(std::move(vocab)), vectors_(std::move(vectors)) {
  if (static_cast<Eigen::Index>(vocab_.size()) != vectors_.rows()) {
    throw DataError("vocabulary size does not match vector rows");
  }
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    if (!index_.emplace(vocab_[i], static_cast<int>(i)).second) {
      throw DataError("duplicate vocabulary token '" + vocab_[i] + "'");
    }
  }
  auto unk = index_.find(std::string(kUnknownToken));
  if (unk == index_.end()) {
    const int at = static_cast<int>(vocab_.size());
    vocab_.emplace_back(kUnknownToken);
    index_.emplace(std::string(kUnknownToken), at);
    vectors_.conservativeResize(vectors_.rows() + 1, Eigen::NoChange);
    vectors_.row(at).setZero();
    unk_index_ = at;
  } else {
    unk_index_ = unk->second;
  }
  if (!vectors_.allFinite()) throw DataError("embedding table has non-finite entries");
}

int EmbeddingTable::index_of(std::string_view token) const {
  // Heterogeneous lookup on unordered_map needs C++20 transparent hashing;
  // the string copy is cheap next to a forward pass.
  if (auto it = index_.find(std::string(token)); it != index_.end()) return it->second;
  if (auto it = index_.find(ascii_lower(token)); it != index_.end()) return it->second;
  return unk_index_;
}

Eigen::Ref<const Vec> EmbeddingTable::lookup(std::string_view token) const {
  return vectors_.row(index_of(token)).transpose();
}

EmbeddingTable parse_embeddings(std::string_view text, int dim, std::uint64_t seed) {
  if (dim < 1) throw DataError("embedding dimension must be positive");
  std::vector<std::string> vocab;
  std::vector<double> values;
  std::unordered_map<std::string, int> seen;
  int duplicates = 0;

  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.empty()) continue;

    const std::string where = "line " + std::to_string(line_no) + ": ";
    std::vector<std::string_view> fields;
    std::size_t f = 0;
    while (true) {
      const std::size_t sp = line.find(' ', f);
      fields.push_back(line.substr(f, sp == std::string_view::npos ? sp : sp - f));
      if (sp == std::string_view::npos) break;
      f = sp + 1;
    }
    if (fields.size() != static_cast<std::size_t>(dim) + 1) {
      throw DataError(where + "expected token and " + std::to_string(dim) + " values, found " +
                      std::to_string(fields.size()) + " fields");
    }
    if (fields[0].empty()) throw DataError(where + "empty token");

    std::vector<double> row(static_cast<std::size_t>(dim));
    for (int k = 0; k < dim; ++k) {
      const std::string_view field = fields[static_cast<std::size_t>(k) + 1];
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw DataError(where + "malformed value '" + std::string(field) + "'");
      }
      if (!std::isfinite(v)) throw DataError(where + "non-finite value");
      row[static_cast<std::size_t>(k)] = v;
    }
    if (!seen.emplace(std::string(fields[0]), static_cast<int>(vocab.size())).second) {
      ++duplicates;
      continue;
    }
    vocab.emplace_back(fields[0]);
    values.insert(values.end(), row.begin(), row.end());
  }

  if (!seen.contains(std::string(kUnknownToken))) {
    Rng rng(seed);
    vocab.emplace_back(kUnknownToken);
    for (int k = 0; k < dim; ++k) values.push_back(rng.uniform(-0.05, 0.05));
  }

  Mat vectors = Eigen::Map<Mat>(values.data(), static_cast<Eigen::Index>(vocab.size()), dim);
  EmbeddingTable table(std::move(vocab), std::move(vectors));
  table.duplicates_skipped = duplicates;
  return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, int dim, std::uint64_t seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_embeddings(buffer.str(), dim, seed);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path,
                     bool include_unknown) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (int i = 0; i < table.size(); ++i) {
    if (i == table.unk_index() && !include_unknown) continue;
    out << table.vocab()[static_cast<std::size_t>(i)];
    for (int k = 0; k < table.dim(); ++k) out << ' ' << format_double(table.vectors()(i, k));
    out << '\n';
  }
}

}  // namespace treegate
