#include "treegate/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "treegate/errors.hpp"
#include "treegate/rng.hpp"

namespace treegate {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::standard: return "standard";
    case ModelKind::wnn: return "wnn";
    case ModelKind::benn: return "benn";
    case ModelKind::rntn: return "rntn";
    case ModelKind::label: return "label";
  }
  return "?";
}

std::string_view to_string(Activation act) {
  switch (act) {
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    case Activation::relu: return "relu";
  }
  return "?";
}

std::optional<ModelKind> parse_model_kind(std::string_view s) {
  for (ModelKind k : {ModelKind::standard, ModelKind::wnn, ModelKind::benn, ModelKind::rntn,
                      ModelKind::label}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

std::optional<Activation> parse_activation(std::string_view s) {
  for (Activation a : {Activation::tanh, Activation::sigmoid, Activation::relu}) {
    if (to_string(a) == s) return a;
  }
  return std::nullopt;
}

void ModelConfig::validate() const {
  if (dim < 1) throw ConfigError("dimension must be positive");
  if (is_gated(kind) && gate_hidden < 1) throw ConfigError("gate hidden width must be positive");
  if (classes < 2) throw ConfigError("classes must be at least 2");
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor([&](const ConstTensorView& t) { n += t.data.size(); });
  return n;
}

std::vector<double> Model::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for_each_tensor([&](const ConstTensorView& t) { out.insert(out.end(), t.data.begin(), t.data.end()); });
  return out;
}

void Model::assign(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw ConfigError("flat parameter size mismatch");
  std::size_t at = 0;
  for_each_tensor([&](const TensorView& t) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(at), t.data.size(), t.data.begin());
    at += t.data.size();
  });
}

bool Model::all_finite() const {
  bool ok = true;
  for_each_tensor([&](const ConstTensorView& t) {
    ok = ok && std::all_of(t.data.begin(), t.data.end(), [](double v) { return std::isfinite(v); });
  });
  return ok;
}

Gradients Gradients::zeros_like(const Model& model) {
  Gradients g;
  const ParamSet& p = model.params;
  auto zero_mat = [](const Mat& m) { return Mat::Zero(m.rows(), m.cols()).eval(); };
  auto zero_vec = [](const Vec& v) { return Vec::Zero(v.size()).eval(); };
  g.params.composition = {zero_mat(p.composition.W), zero_vec(p.composition.b)};
  g.params.gate = {zero_mat(p.gate.W), zero_vec(p.gate.b), zero_vec(p.gate.u)};
  g.params.classifier = {zero_mat(p.classifier.U), zero_vec(p.classifier.b)};
  g.params.rntn_V = zero_mat(p.rntn_V);
  for (const auto& [label, table] : p.label_tables) {
    g.params.label_tables[label] = {zero_mat(table.W), zero_vec(table.b)};
  }
  if (model.embeddings.trainable) g.embeddings = zero_mat(model.embeddings.vectors());
  return g;
}

void Gradients::add(const Gradients& other) {
  std::vector<std::span<const double>> src;
  other.for_each_tensor([&](const ConstTensorView& t) { src.push_back(t.data); });
  std::size_t i = 0;
  for_each_tensor([&](const TensorView& t) {
    if (i >= src.size() || src[i].size() != t.data.size()) {
      throw ConfigError("gradient layout mismatch in add()");
    }
    for (std::size_t j = 0; j < t.data.size(); ++j) t.data[j] += src[i][j];
    ++i;
  });
}

void Gradients::scale(double factor) {
  for_each_tensor([&](const TensorView& t) {
    for (double& v : t.data) v *= factor;
  });
}

std::vector<double> Gradients::flatten() const {
  std::vector<double> out;
  for_each_tensor([&](const ConstTensorView& t) { out.insert(out.end(), t.data.begin(), t.data.end()); });
  return out;
}

bool Gradients::all_finite() const {
  bool ok = true;
  for_each_tensor([&](const ConstTensorView& t) {
    ok = ok && std::all_of(t.data.begin(), t.data.end(), [](double v) { return std::isfinite(v); });
  });
  return ok;
}

Model init_model(const ModelConfig& config, EmbeddingTable embeddings,
                 std::span<const int> table_labels, std::uint64_t seed) {
  config.validate();
  if (embeddings.dim() != config.dim) {
    throw ConfigError("embedding dimension " + std::to_string(embeddings.dim()) +
                      " does not match model dimension " + std::to_string(config.dim));
  }
  const Eigen::Index K = config.dim;
  const Eigen::Index D = config.gate_hidden;

  Model m;
  m.config = config;
  m.embeddings = std::move(embeddings);
  m.embeddings.trainable = config.train_embeddings;

  ParamSet& p = m.params;
  p.composition.W = Mat::Zero(K, 2 * K);
  if (config.composition_bias()) p.composition.b = Vec::Zero(K);
  if (is_gated(config.kind)) {
    p.gate.W = Mat::Zero(D, K);
    p.gate.b = Vec::Zero(D);
    p.gate.u = Vec::Zero(D);
  }
  p.classifier.U = Mat::Zero(config.logits(), K);
  p.classifier.b = Vec::Zero(config.logits());
  if (config.kind == ModelKind::rntn) p.rntn_V = Mat::Zero(2 * K * K, 2 * K);
  if (config.kind == ModelKind::label) {
    for (int label : table_labels) p.label_tables[label] = {Mat::Zero(K, 2 * K), Vec::Zero(K)};
  }

  Rng rng(seed);
  auto glorot = [&](std::span<double> data, Eigen::Index fan_in, Eigen::Index fan_out) {
    const double r = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : data) v = rng.uniform(-r, r);
  };
  visit_tensors(p, static_cast<Mat*>(nullptr), [&](const TensorView& t) {
    if (!t.regularized) return;  // biases stay zero
    if (t.name == "gate.u") {
      for (double& v : t.data) v = rng.uniform(-0.01, 0.01);
    } else if (t.name == "gate.W") {
      glorot(t.data, K, D);
    } else if (t.name == "classifier.U") {
      glorot(t.data, K, config.logits());
    } else if (t.name == "rntn.V") {
      glorot(t.data, 2 * K, 2 * K);
    } else {
      glorot(t.data, 2 * K, K);
    }
  });
  return m;
}

std::vector<int> internal_labels(const Dataset& data, std::span<const std::size_t> indices) {
  std::set<int> labels;
  for (std::size_t i : indices) {
    for (const TreeNode& n : data.examples.at(i).tree.nodes()) {
      if (!n.is_leaf()) labels.insert(n.label);
    }
  }
  return {labels.begin(), labels.end()};
}

}  // namespace treegate
