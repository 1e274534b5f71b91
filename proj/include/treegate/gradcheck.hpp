#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "treegate/model.hpp"
#include "treegate/rng.hpp"
#include "treegate/tree.hpp"

namespace treegate {

// |a - b| / max(|a|, |b|, 1e-8)
double relative_error(double a, double b);

// A tiny randomized problem: trainable embeddings over a five-word vocabulary,
// two random binary trees of depth <= max_depth, all parameters (biases
// included) uniform in [-0.5, 0.5].
struct GradcheckInstance {
  Model model;
  std::vector<Example> examples;
  double l2 = 0.01;
};

// Random binary tree of depth 1..max_depth; leaves draw from `tokens`,
// node labels from [0, labels).
LabeledTree random_tree(Rng& rng, int max_depth, const std::vector<std::string>& tokens, int labels);

// `trial` varies the class count (2 or 3) and, for gated models, whether the
// parent composition has a bias.
GradcheckInstance random_instance(ModelKind kind, int dim, int gate_hidden, int max_depth,
                                  int trial, Rng& rng);

struct GradcheckOptions {
  ModelKind kind = ModelKind::wnn;
  int dim = 3;
  int gate_hidden = 3;
  int depth = 3;
  int trials = 100;
  double eps = 1e-5;
  double tolerance = 1e-4;
  std::uint64_t seed = 1;
};

struct TensorError {
  std::string name;
  double worst = 0.0;
};

struct GradcheckReport {
  std::vector<TensorError> tensors;  // in parameter order
  double worst = 0.0;
  bool passed = false;  // worst < tolerance
};

GradcheckReport run_gradcheck(const GradcheckOptions& options);

}  // namespace treegate
