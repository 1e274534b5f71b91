#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "treegate/embeddings.hpp"
#include "treegate/tree.hpp"

namespace treegate {

enum class ModelKind { standard, wnn, benn, rntn, label };
enum class Activation { tanh, sigmoid, relu };
// Test hook forcing every gate scalar to a constant.
enum class GatePin { off, ones, zeros };

std::string_view to_string(ModelKind kind);
std::string_view to_string(Activation act);
std::optional<ModelKind> parse_model_kind(std::string_view s);
std::optional<Activation> parse_activation(std::string_view s);

inline bool is_gated(ModelKind kind) { return kind == ModelKind::wnn || kind == ModelKind::benn; }

struct ModelConfig {
  ModelKind kind = ModelKind::standard;
  int dim = 300;          // K
  int gate_hidden = 300;  // D
  Activation activation = Activation::tanh;
  int classes = 2;
  bool gated_bias = true;  // bias in WNN/BENN parent composition
  bool train_embeddings = false;
  std::uint64_t seed = 0;

  // Classifier rows: one logit for binary (sigmoid), one per class otherwise.
  int logits() const { return classes == 2 ? 1 : classes; }
  // RNTN has no bias; WNN/BENN follow gated_bias.
  bool composition_bias() const {
    return kind == ModelKind::standard || kind == ModelKind::label ||
           (is_gated(kind) && gated_bias);
  }
  void validate() const;
};

// Parent composition f(W [left; right] + b). An empty `b` means no bias.
struct CompositionParams {
  Mat W;  // K x 2K
  Vec b;  // K or empty

  bool has_bias() const { return b.size() > 0; }
};

// R = f(W h + b), gate = sigmoid(u . R).
struct GateParams {
  Mat W;  // D x K
  Vec b;  // D
  Vec u;  // D
};

struct ClassifierParams {
  Mat U;  // logits x K
  Vec b;  // logits
};

// All weights except the embedding table. Tensors a model kind does not use
// are left empty.
struct ParamSet {
  CompositionParams composition;
  GateParams gate;
  ClassifierParams classifier;
  Mat rntn_V;  // K stacked slices of 2K x 2K; slice i is rows [2K*i, 2K*(i+1))
  std::map<int, CompositionParams> label_tables;
};

// One trainable tensor, flattened in row-major order.
struct TensorView {
  std::string name;
  std::span<double> data;
  Eigen::Index rows;
  Eigen::Index cols;
  bool regularized;  // biases are excluded from the L2 term
};

struct ConstTensorView {
  std::string name;
  std::span<const double> data;
  Eigen::Index rows;
  Eigen::Index cols;
  bool regularized;
};

namespace detail {

template <class Tensor, class Fn>
void visit_tensor(std::string name, Tensor& t, bool regularized, Fn& fn) {
  if (t.size() == 0) return;
  using Value = std::remove_pointer_t<decltype(t.data())>;
  if constexpr (std::is_const_v<Value>) {
    fn(ConstTensorView{std::move(name), std::span<const double>(t.data(), t.size()), t.rows(),
                       t.cols(), regularized});
  } else {
    fn(TensorView{std::move(name), std::span<double>(t.data(), t.size()), t.rows(), t.cols(),
                  regularized});
  }
}

}  // namespace detail

// Visits tensors in the fixed order: composition, gate, classifier, rntn,
// label tables by ascending label, then `embeddings` (if non-null and non-empty).
template <class Set, class EmbedMat, class Fn>
void visit_tensors(Set& params, EmbedMat* embeddings, Fn&& fn) {
  using detail::visit_tensor;
  visit_tensor("composition.W", params.composition.W, true, fn);
  visit_tensor("composition.b", params.composition.b, false, fn);
  visit_tensor("gate.W", params.gate.W, true, fn);
  visit_tensor("gate.b", params.gate.b, false, fn);
  visit_tensor("gate.u", params.gate.u, true, fn);
  visit_tensor("classifier.U", params.classifier.U, true, fn);
  visit_tensor("classifier.b", params.classifier.b, false, fn);
  visit_tensor("rntn.V", params.rntn_V, true, fn);
  for (auto& [label, table] : params.label_tables) {
    const std::string prefix = "label." + std::to_string(label);
    visit_tensor(prefix + ".W", table.W, true, fn);
    visit_tensor(prefix + ".b", table.b, false, fn);
  }
  if (embeddings != nullptr) visit_tensor("embeddings", *embeddings, true, fn);
}

class Model {
 public:
  ModelConfig config;
  ParamSet params;
  EmbeddingTable embeddings;
  GatePin pin = GatePin::off;

  // Trainable tensors; the embedding table is included only when trainable.
  template <class Fn>
  void for_each_tensor(Fn&& fn) {
    visit_tensors(params, embeddings.trainable ? &embeddings.vectors() : nullptr, fn);
  }
  template <class Fn>
  void for_each_tensor(Fn&& fn) const {
    visit_tensors(params, embeddings.trainable ? &embeddings.vectors() : nullptr, fn);
  }

  std::size_t parameter_count() const;
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
  bool all_finite() const;
};

// Same tensor layout as the trainable part of a Model.
class Gradients {
 public:
  ParamSet params;
  Mat embeddings;  // empty unless the model's embeddings are trainable

  static Gradients zeros_like(const Model& model);

  template <class Fn>
  void for_each_tensor(Fn&& fn) {
    visit_tensors(params, &embeddings, fn);
  }
  template <class Fn>
  void for_each_tensor(Fn&& fn) const {
    visit_tensors(params, &embeddings, fn);
  }

  void add(const Gradients& other);
  void scale(double factor);
  std::vector<double> flatten() const;
  bool all_finite() const;
};

// Creates a model with freshly initialized weights: matrices uniform in
// +/- sqrt(6 / (fan_in + fan_out)), biases zero, gate output vector uniform
// in +/- 0.01. `table_labels` selects which node labels get their own
// composition table in the label-specific model.
Model init_model(const ModelConfig& config, EmbeddingTable embeddings,
                 std::span<const int> table_labels, std::uint64_t seed);

// Internal-node labels present in the selected examples, ascending.
std::vector<int> internal_labels(const Dataset& data, std::span<const std::size_t> indices);

}  // namespace treegate
