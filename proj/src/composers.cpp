#include "treegate/composers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "treegate/errors.hpp"
#include "treegate/rng.hpp"

namespace treegate {

namespace {

void check_size(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want) {
    throw ConfigError(std::string("shape mismatch in ") + what + ": got " + std::to_string(got) +
                      ", expected " + std::to_string(want));
  }
}

Vec composition_pre(const Vec& x, const CompositionParams& p) {
  check_size(p.W.cols(), x.size(), "composition");
  Vec pre = p.W * x;
  if (p.has_bias()) pre += p.b;
  return pre;
}

Vec rntn_pre(const Vec& x, const Mat& V, const Mat& W) {
  const Eigen::Index n = x.size();
  check_size(W.cols(), n, "rntn W");
  check_size(V.cols(), n, "rntn V");
  check_size(V.rows(), W.rows() * n, "rntn V slices");
  Vec pre = W * x;
  for (Eigen::Index i = 0; i < pre.size(); ++i) {
    pre(i) += x.dot(V.middleRows(i * n, n) * x);
  }
  return pre;
}

double pinned_gate(GatePin pin) { return pin == GatePin::ones ? 1.0 : 0.0; }

void set_gate(NodeTrace& node, const Model& model) {
  if (model.pin != GatePin::off) {
    node.gate = pinned_gate(model.pin);
    return;
  }
  GateOutput g = gate(node.h, model.params.gate, model.config.activation);
  node.gate_pre = std::move(g.hidden_pre);
  node.gate_hidden = std::move(g.hidden);
  node.gate = g.value;
}

// Shared bottom-up driver; `internal` fills an internal node from its children.
template <class Internal>
ForwardTrace run_forward(const Model& model, const LabeledTree& tree, ModelKind kind,
                         bool gated, Internal&& internal) {
  if (!tree.is_binary()) throw ConfigError("forward pass requires a binarized tree");
  if (model.embeddings.dim() != model.config.dim) {
    throw ConfigError("embedding dimension does not match the model");
  }
  ForwardTrace trace;
  trace.kind = kind;
  trace.nodes.resize(static_cast<std::size_t>(tree.size()));
  for (int id = tree.size() - 1; id >= 0; --id) {
    const TreeNode& n = tree.node(id);
    NodeTrace& node = trace.nodes[static_cast<std::size_t>(id)];
    if (n.is_leaf()) {
      node.vocab_index = model.embeddings.index_of(n.token);
      node.h = model.embeddings.row(node.vocab_index).transpose();
    } else {
      internal(n, node, trace.nodes[static_cast<std::size_t>(n.children[0])],
               trace.nodes[static_cast<std::size_t>(n.children[1])]);
    }
    if (gated && id != 0) set_gate(node, model);
  }
  return trace;
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vec activate(const Vec& x, Activation f) {
  switch (f) {
    case Activation::tanh: return x.array().tanh().matrix();
    case Activation::sigmoid: return x.unaryExpr([](double v) { return sigmoid(v); });
    case Activation::relu: return x.cwiseMax(0.0);
  }
  return x;
}

Vec activation_derivative(const Vec& pre, const Vec& out, Activation f) {
  switch (f) {
    case Activation::tanh: return (1.0 - out.array().square()).matrix();
    case Activation::sigmoid: return (out.array() * (1.0 - out.array())).matrix();
    case Activation::relu: return (pre.array() > 0.0).cast<double>().matrix();
  }
  return Vec::Ones(pre.size());
}

Vec concat(const Vec& left, const Vec& right) {
  Vec x(left.size() + right.size());
  x << left, right;
  return x;
}

Vec compose_standard(const Vec& left, const Vec& right, const CompositionParams& p, Activation f) {
  check_size(left.size(), right.size(), "compose_standard children");
  return activate(composition_pre(concat(left, right), p), f);
}

GateOutput gate(const Vec& h, const GateParams& g, Activation f) {
  check_size(g.W.cols(), h.size(), "gate W");
  check_size(g.u.size(), g.W.rows(), "gate u");
  GateOutput out;
  out.hidden_pre = g.W * h + g.b;
  out.hidden = activate(out.hidden_pre, f);
  // Saturated logits would round to exactly 0 or 1; keep the open interval.
  out.value = std::clamp(sigmoid(g.u.dot(out.hidden)), std::numeric_limits<double>::min(),
                         std::nextafter(1.0, 0.0));
  return out;
}

Vec rntn_compose(const Vec& left, const Vec& right, const Mat& V, const Mat& W, Activation f) {
  check_size(left.size(), right.size(), "rntn_compose children");
  return activate(rntn_pre(concat(left, right), V, W), f);
}

Vec label_specific_compose(int label, const Vec& left, const Vec& right,
                           const std::map<int, CompositionParams>& tables,
                           const CompositionParams& fallback, Activation f) {
  auto it = tables.find(label);
  return compose_standard(left, right, it != tables.end() ? it->second : fallback, f);
}

Vec class_logits(const Vec& h, const ClassifierParams& c) {
  check_size(c.U.cols(), h.size(), "classifier");
  return c.U * h + c.b;
}

Vec class_probabilities(const Vec& logits, int classes) {
  if (classes == 2) {
    check_size(logits.size(), 1, "binary classifier");
    const double p = sigmoid(logits(0));
    Vec out(2);
    out << 1.0 - p, p;
    return out;
  }
  check_size(logits.size(), classes, "softmax classifier");
  const Vec e = (logits.array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

Vec classify(const Vec& h, const ClassifierParams& c, int classes) {
  return class_probabilities(class_logits(h, c), classes);
}

std::array<double, 4> gate_case_probabilities(double l, double r) {
  return {l * r, (1.0 - l) * r, l * (1.0 - r), (1.0 - l) * (1.0 - r)};
}

ForwardTrace standard_forward(const Model& model, const LabeledTree& tree) {
  const auto& p = model.params.composition;
  const Activation f = model.config.activation;
  return run_forward(model, tree, ModelKind::standard, false,
                     [&](const TreeNode&, NodeTrace& node, const NodeTrace& l, const NodeTrace& r) {
                       node.input = concat(l.h, r.h);
                       node.pre = composition_pre(node.input, p);
                       node.h = activate(node.pre, f);
                     });
}

ForwardTrace wnn_forward(const Model& model, const LabeledTree& tree) {
  const auto& p = model.params.composition;
  const Activation f = model.config.activation;
  return run_forward(model, tree, ModelKind::wnn, true,
                     [&](const TreeNode&, NodeTrace& node, const NodeTrace& l, const NodeTrace& r) {
                       node.input = concat(l.gate * l.h, r.gate * r.h);
                       node.pre = composition_pre(node.input, p);
                       node.h = activate(node.pre, f);
                     });
}

ForwardTrace benn_forward(const Model& model, const LabeledTree& tree) {
  const auto& p = model.params.composition;
  const Activation f = model.config.activation;
  return run_forward(
      model, tree, ModelKind::benn, true,
      [&](const TreeNode&, NodeTrace& node, const NodeTrace& l, const NodeTrace& r) {
        node.probs = gate_case_probabilities(l.gate, r.gate);
        const Vec zero = Vec::Zero(l.h.size());
        for (std::size_t c = 0; c < 4; ++c) {
          const Vec x = concat(kGateCases[c][0] ? l.h : zero, kGateCases[c][1] ? r.h : zero);
          node.candidate_pre[c] = composition_pre(x, p);
          node.candidates[c] = activate(node.candidate_pre[c], f);
        }
        node.h = node.probs[0] * node.candidates[0];
        for (std::size_t c = 1; c < 4; ++c) node.h += node.probs[c] * node.candidates[c];
      });
}

ForwardTrace rntn_forward(const Model& model, const LabeledTree& tree) {
  const Activation f = model.config.activation;
  return run_forward(model, tree, ModelKind::rntn, false,
                     [&](const TreeNode&, NodeTrace& node, const NodeTrace& l, const NodeTrace& r) {
                       node.input = concat(l.h, r.h);
                       node.pre = rntn_pre(node.input, model.params.rntn_V,
                                           model.params.composition.W);
                       node.h = activate(node.pre, f);
                     });
}

ForwardTrace label_forward(const Model& model, const LabeledTree& tree) {
  const Activation f = model.config.activation;
  const auto& tables = model.params.label_tables;
  return run_forward(model, tree, ModelKind::label, false,
                     [&](const TreeNode& n, NodeTrace& node, const NodeTrace& l, const NodeTrace& r) {
                       auto it = tables.find(n.label);
                       const CompositionParams& p =
                           it != tables.end() ? it->second : model.params.composition;
                       node.input = concat(l.h, r.h);
                       node.pre = composition_pre(node.input, p);
                       node.h = activate(node.pre, f);
                     });
}

ForwardTrace forward(const Model& model, const LabeledTree& tree) {
  switch (model.config.kind) {
    case ModelKind::standard: return standard_forward(model, tree);
    case ModelKind::wnn: return wnn_forward(model, tree);
    case ModelKind::benn: return benn_forward(model, tree);
    case ModelKind::rntn: return rntn_forward(model, tree);
    case ModelKind::label: return label_forward(model, tree);
  }
  throw ConfigError("unknown model kind");
}

Vec benn_sample(const Model& model, const LabeledTree& tree, std::uint64_t seed) {
  if (!tree.is_binary()) throw ConfigError("forward pass requires a binarized tree");
  const auto n = static_cast<std::size_t>(tree.size());
  std::vector<double> draws(n, 0.0);
  Rng rng(seed);
  for (std::size_t id = 1; id < n; ++id) draws[id] = rng.uniform();

  std::vector<Vec> h(n);
  std::vector<bool> keep(n, true);
  for (int id = tree.size() - 1; id >= 0; --id) {
    const auto i = static_cast<std::size_t>(id);
    const TreeNode& node = tree.node(id);
    if (node.is_leaf()) {
      h[i] = model.embeddings.lookup(node.token);
    } else {
      const auto l = static_cast<std::size_t>(node.children[0]);
      const auto r = static_cast<std::size_t>(node.children[1]);
      const Vec zero = Vec::Zero(h[l].size());
      h[i] = compose_standard(keep[l] ? h[l] : zero, keep[r] ? h[r] : zero,
                              model.params.composition, model.config.activation);
    }
    if (id != 0) {
      const double pass = model.pin != GatePin::off
                              ? pinned_gate(model.pin)
                              : gate(h[i], model.params.gate, model.config.activation).value;
      keep[i] = draws[i] < pass;
    }
  }
  return h.front();
}

}  // namespace treegate
