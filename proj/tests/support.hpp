#pragma once

#include <bit>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <vector>

#include "treegate/composers.hpp"
#include "treegate/gradcheck.hpp"
#include "treegate/model.hpp"
#include "treegate/rng.hpp"
#include "treegate/tree.hpp"

namespace treegate::testing {

// Fresh model over vocabulary `vocab` with rows `vectors`; every tensor is
// zero so tests can set exactly what they need.
inline Model zero_model(ModelKind kind, int dim, int gate_hidden, const std::vector<std::string>& vocab,
                        const Mat& vectors, int classes = 2, bool gated_bias = true,
                        const std::vector<int>& table_labels = {}) {
  ModelConfig config;
  config.kind = kind;
  config.dim = dim;
  config.gate_hidden = gate_hidden;
  config.classes = classes;
  config.gated_bias = gated_bias;
  Model m = init_model(config, EmbeddingTable(vocab, vectors), table_labels, 1);
  m.for_each_tensor([](const TensorView& t) {
    for (double& v : t.data) v = 0.0;
  });
  return m;
}

inline void randomize(Model& m, Rng& rng, double scale = 0.5) {
  m.for_each_tensor([&](const TensorView& t) {
    for (double& v : t.data) v = rng.uniform(-scale, scale);
  });
  for (Eigen::Index i = 0; i < m.embeddings.vectors().size(); ++i) {
    m.embeddings.vectors().data()[i] = rng.uniform(-scale, scale);
  }
}

// Distance in units in the last place between two finite doubles.
inline std::uint64_t ulp_distance(double a, double b) {
  auto key = [](double x) {
    const auto bits = std::bit_cast<std::int64_t>(x);
    return bits < 0 ? std::numeric_limits<std::int64_t>::min() - bits : bits;
  };
  const std::int64_t ka = key(a), kb = key(b);
  return ka > kb ? static_cast<std::uint64_t>(ka - kb) : static_cast<std::uint64_t>(kb - ka);
}

inline bool bitwise_equal(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a(i)) != std::bit_cast<std::uint64_t>(b(i))) return false;
  }
  return true;
}

inline const std::vector<std::string>& leaf_tokens() {
  static const std::vector<std::string> tokens = {"a", "b", "c", "d", "e"};
  return tokens;
}

// Random binary tree over leaf_tokens() with node labels in [0, 3).
inline LabeledTree random_binary_tree(Rng& rng, int max_depth) {
  return random_tree(rng, max_depth, leaf_tokens(), 3);
}

// Model of the given kind with every tensor and embedding uniform in [-0.5, 0.5].
inline Model random_model(ModelKind kind, int dim, int gate_hidden, Rng& rng, int classes = 2,
                          bool gated_bias = true) {
  Mat vectors(5, dim);
  vectors.setZero();
  Model m = zero_model(kind, dim, gate_hidden, leaf_tokens(), vectors, classes, gated_bias, {0, 1});
  randomize(m, rng);
  return m;
}

}  // namespace treegate::testing
