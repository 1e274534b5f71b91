#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <vector>

#include "treegate/model.hpp"
#include "treegate/tree.hpp"

namespace treegate {

double sigmoid(double x);
Vec activate(const Vec& x, Activation f);
// f'(pre), given both the pre-activation and f(pre).
Vec activation_derivative(const Vec& pre, const Vec& out, Activation f);

Vec concat(const Vec& left, const Vec& right);

// f(W [left; right] + b); the bias is skipped when p.b is empty.
Vec compose_standard(const Vec& left, const Vec& right, const CompositionParams& p, Activation f);

struct GateOutput {
  Vec hidden_pre;  // W h + b
  Vec hidden;      // R = f(W h + b)
  double value;    // sigmoid(u . R), strictly inside (0, 1)
};

GateOutput gate(const Vec& h, const GateParams& g, Activation f);

// Component i is f(x' V_i x + (W x)_i) with x = [left; right].
Vec rntn_compose(const Vec& left, const Vec& right, const Mat& V, const Mat& W, Activation f);

// Uses tables[label] when present, otherwise the fallback composition.
Vec label_specific_compose(int label, const Vec& left, const Vec& right,
                           const std::map<int, CompositionParams>& tables,
                           const CompositionParams& fallback, Activation f);

Vec class_logits(const Vec& h, const ClassifierParams& c);
// Binary: [1 - p, p] with p = sigmoid(logit). Otherwise softmax over logits.
Vec class_probabilities(const Vec& logits, int classes);
Vec classify(const Vec& h, const ClassifierParams& c, int classes);

// Gate configurations of (left, right) in the order used throughout the BENN
// code: both pass, left dropped, right dropped, both dropped.
inline constexpr std::array<std::array<int, 2>, 4> kGateCases = {{{1, 1}, {0, 1}, {1, 0}, {0, 0}}};

// Probabilities of the four cases for left/right pass probabilities l, r.
std::array<double, 4> gate_case_probabilities(double l, double r);

struct NodeTrace {
  int vocab_index = -1;  // leaves
  Vec input;             // internal: concatenated child outputs
  Vec pre;               // internal: pre-activation
  Vec h;                 // node representation (the expectation under BENN)

  // Gate on the node's output to its parent; unset at the root.
  Vec gate_pre;
  Vec gate_hidden;
  double gate = 1.0;

  // BENN internal nodes, indexed like kGateCases.
  std::array<Vec, 4> candidate_pre;
  std::array<Vec, 4> candidates;
  std::array<double, 4> probs{};
};

struct ForwardTrace {
  ModelKind kind = ModelKind::standard;
  std::vector<NodeTrace> nodes;  // indexed by node id

  const Vec& root_representation() const { return nodes.front().h; }
};

ForwardTrace standard_forward(const Model& model, const LabeledTree& tree);
ForwardTrace wnn_forward(const Model& model, const LabeledTree& tree);
ForwardTrace benn_forward(const Model& model, const LabeledTree& tree);
ForwardTrace rntn_forward(const Model& model, const LabeledTree& tree);
ForwardTrace label_forward(const Model& model, const LabeledTree& tree);

// Dispatches on model.config.kind.
ForwardTrace forward(const Model& model, const LabeledTree& tree);

// One stochastic BENN pass: every non-root node draws B ~ Bernoulli(L) (in
// pre-order from `seed`) and a dropped node contributes a zero vector.
Vec benn_sample(const Model& model, const LabeledTree& tree, std::uint64_t seed);

}  // namespace treegate
