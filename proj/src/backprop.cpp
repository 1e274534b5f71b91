#include <cmath>
#include <map>

#include "parallel.hpp"
#include "treegate/errors.hpp"
#include "treegate/training.hpp"

namespace treegate {

namespace {

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// Weight gradients of one example plus the embedding rows it touched.
struct ExampleGradient {
  Gradients weights;
  std::map<int, Vec> embedding_rows;
};

Gradients zero_weight_gradients(const Model& model) {
  Gradients g = Gradients::zeros_like(model);
  g.embeddings.resize(0, 0);
  return g;
}

// Reverse pass over one tree. Pre-order visits parents before children, so a
// node's incoming gradient is complete when it is reached.
class TreeBackprop {
 public:
  TreeBackprop(const Model& model, const LabeledTree& tree, const ForwardTrace& trace,
               ExampleGradient& out)
      : model_(model),
        tree_(tree),
        trace_(trace),
        out_(out),
        g_(out.weights.params),
        f_(model.config.activation),
        dh_(static_cast<std::size_t>(tree.size())),
        dgate_(static_cast<std::size_t>(tree.size()), 0.0) {
    for (Vec& v : dh_) v = Vec::Zero(model.config.dim);
  }

  void run(const Vec& dlogits) {
    const Vec& root = trace_.root_representation();
    g_.classifier.U.noalias() += dlogits * root.transpose();
    g_.classifier.b += dlogits;
    dh_[0].noalias() += model_.params.classifier.U.transpose() * dlogits;

    const bool gated = is_gated(model_.config.kind) && model_.pin == GatePin::off;
    for (int id = 0; id < tree_.size(); ++id) {
      if (gated && id != 0) gate_backward(id);
      const TreeNode& n = tree_.node(id);
      const NodeTrace& node = at(id);
      if (n.is_leaf()) {
        if (model_.embeddings.trainable) {
          auto [it, fresh] = out_.embedding_rows.try_emplace(node.vocab_index, dh_[idx(id)]);
          if (!fresh) it->second += dh_[idx(id)];
        }
        continue;
      }
      switch (model_.config.kind) {
        case ModelKind::standard:
          affine_backward(id, model_.params.composition, g_.composition, true);
          break;
        case ModelKind::label: {
          auto it = model_.params.label_tables.find(n.label);
          if (it != model_.params.label_tables.end()) {
            affine_backward(id, it->second, g_.label_tables.at(n.label), true);
          } else {
            affine_backward(id, model_.params.composition, g_.composition, true);
          }
          break;
        }
        case ModelKind::wnn:
          affine_backward(id, model_.params.composition, g_.composition, false);
          break;
        case ModelKind::rntn:
          rntn_backward(id);
          break;
        case ModelKind::benn:
          benn_backward(id);
          break;
      }
    }
  }

 private:
  static std::size_t idx(int id) { return static_cast<std::size_t>(id); }
  const NodeTrace& at(int id) const { return trace_.nodes[idx(id)]; }

  void add_to_children(int id, const Vec& dx, bool left_on = true, bool right_on = true) {
    const TreeNode& n = tree_.node(id);
    const Eigen::Index K = model_.config.dim;
    if (left_on) dh_[idx(n.children[0])] += dx.head(K);
    if (right_on) dh_[idx(n.children[1])] += dx.tail(K);
  }

  // h = f(W x + b). `ungated` routes dx straight to the children; otherwise
  // x = [m_l h_l; m_r h_r] and the product rule splits dx between h and m.
  void affine_backward(int id, const CompositionParams& p, CompositionParams& gp, bool ungated) {
    const NodeTrace& node = at(id);
    const Vec dpre = dh_[idx(id)].cwiseProduct(activation_derivative(node.pre, node.h, f_));
    gp.W.noalias() += dpre * node.input.transpose();
    if (p.has_bias()) gp.b += dpre;
    const Vec dx = p.W.transpose() * dpre;
    if (ungated) {
      add_to_children(id, dx);
      return;
    }
    const TreeNode& n = tree_.node(id);
    const Eigen::Index K = model_.config.dim;
    for (int side = 0; side < 2; ++side) {
      const int c = n.children[static_cast<std::size_t>(side)];
      const auto dout = side == 0 ? dx.head(K) : dx.tail(K);
      dh_[idx(c)] += at(c).gate * dout;
      dgate_[idx(c)] += dout.dot(at(c).h);
    }
  }

  void rntn_backward(int id) {
    const NodeTrace& node = at(id);
    const Mat& V = model_.params.rntn_V;
    const Eigen::Index n = node.input.size();
    const Vec dpre = dh_[idx(id)].cwiseProduct(activation_derivative(node.pre, node.h, f_));
    g_.composition.W.noalias() += dpre * node.input.transpose();
    const Mat outer = node.input * node.input.transpose();
    Vec dx = model_.params.composition.W.transpose() * dpre;
    for (Eigen::Index i = 0; i < dpre.size(); ++i) {
      const auto slice = V.middleRows(i * n, n);
      g_.rntn_V.middleRows(i * n, n) += dpre(i) * outer;
      dx.noalias() += dpre(i) * (slice * node.input + slice.transpose() * node.input);
    }
    add_to_children(id, dx);
  }

  // v = sum_c P_c f(W x_c + b) over the four gate cases; P depends on the
  // children's pass probabilities, which depend on the children's v.
  void benn_backward(int id) {
    const NodeTrace& node = at(id);
    const TreeNode& n = tree_.node(id);
    const NodeTrace& left = at(n.children[0]);
    const NodeTrace& right = at(n.children[1]);
    const CompositionParams& p = model_.params.composition;
    const Vec& dv = dh_[idx(id)];
    const Vec zero = Vec::Zero(left.h.size());

    std::array<double, 4> dprob{};
    for (std::size_t c = 0; c < 4; ++c) {
      dprob[c] = dv.dot(node.candidates[c]);
      const Vec dpre = (node.probs[c] * dv).cwiseProduct(
          activation_derivative(node.candidate_pre[c], node.candidates[c], f_));
      const bool l_on = kGateCases[c][0] != 0;
      const bool r_on = kGateCases[c][1] != 0;
      g_.composition.W.noalias() += dpre * concat(l_on ? left.h : zero, r_on ? right.h : zero).transpose();
      if (p.has_bias()) g_.composition.b += dpre;
      add_to_children(id, p.W.transpose() * dpre, l_on, r_on);
    }
    const double l = left.gate;
    const double r = right.gate;
    // P = {l r, (1-l) r, l (1-r), (1-l)(1-r)}
    dgate_[idx(n.children[0])] += (dprob[0] - dprob[1]) * r + (dprob[2] - dprob[3]) * (1.0 - r);
    dgate_[idx(n.children[1])] += (dprob[0] - dprob[2]) * l + (dprob[1] - dprob[3]) * (1.0 - l);
  }

  // gate = sigmoid(u . R), R = f(W h + b).
  void gate_backward(int id) {
    const NodeTrace& node = at(id);
    const GateParams& gp = model_.params.gate;
    const double dlogit = dgate_[idx(id)] * node.gate * (1.0 - node.gate);
    g_.gate.u += dlogit * node.gate_hidden;
    const Vec dq = (dlogit * gp.u).cwiseProduct(
        activation_derivative(node.gate_pre, node.gate_hidden, f_));
    g_.gate.W.noalias() += dq * node.h.transpose();
    g_.gate.b += dq;
    dh_[idx(id)].noalias() += gp.W.transpose() * dq;
  }

  const Model& model_;
  const LabeledTree& tree_;
  const ForwardTrace& trace_;
  ExampleGradient& out_;
  ParamSet& g_;
  Activation f_;
  std::vector<Vec> dh_;
  std::vector<double> dgate_;
};

}  // namespace

std::vector<const Example*> as_batch(std::span<const Example> examples) {
  std::vector<const Example*> out;
  out.reserve(examples.size());
  for (const Example& e : examples) out.push_back(&e);
  return out;
}

double example_nll(const Vec& logits, int label, int classes) {
  if (classes == 2) return label == 1 ? softplus(-logits(0)) : softplus(logits(0));
  const double m = logits.maxCoeff();
  return m + std::log((logits.array() - m).exp().sum()) - logits(label);
}

Vec nll_logit_gradient(const Vec& logits, int label, int classes) {
  if (classes == 2) {
    Vec g(1);
    g(0) = sigmoid(logits(0)) - (label == 1 ? 1.0 : 0.0);
    return g;
  }
  Vec g = class_probabilities(logits, classes);
  g(label) -= 1.0;
  return g;
}

double l2_norm_squared(const Model& model) {
  double sum = 0.0;
  model.for_each_tensor([&](const ConstTensorView& t) {
    if (!t.regularized) return;
    for (double v : t.data) sum += v * v;
  });
  return sum;
}

LossResult loss(Batch batch, const Model& model, double l2, int threads) {
  if (batch.empty()) throw DataError("loss of an empty batch");
  const int classes = model.config.classes;
  LossResult out;
  out.traces.resize(batch.size());
  std::vector<double> nll(batch.size());
  detail::parallel_for(batch.size(), threads, [&](std::size_t i) {
    const Example& ex = *batch[i];
    if (ex.label < 0 || ex.label >= classes) {
      throw DataError("example " + std::to_string(i) + " has label outside the model's classes");
    }
    out.traces[i] = forward(model, ex.tree);
    nll[i] = example_nll(class_logits(out.traces[i].root_representation(), model.params.classifier),
                         ex.label, classes);
    if (!std::isfinite(nll[i]) || !out.traces[i].root_representation().allFinite()) {
      throw NumericError("non-finite forward value on batch tree " + std::to_string(i));
    }
  });
  double total = 0.0;
  for (double v : nll) total += v;
  out.mean_nll = total / static_cast<double>(batch.size());
  out.value = out.mean_nll + l2 * l2_norm_squared(model);
  return out;
}

Gradients backward(Batch batch, const Model& model, double l2,
                   const std::vector<ForwardTrace>& traces, int threads) {
  if (batch.empty()) throw DataError("backward of an empty batch");
  if (traces.size() != batch.size()) throw ConfigError("traces do not match the batch");
  std::vector<ExampleGradient> parts(batch.size());
  detail::parallel_for(batch.size(), threads, [&](std::size_t i) {
    const Example& ex = *batch[i];
    parts[i].weights = zero_weight_gradients(model);
    const Vec logits = class_logits(traces[i].root_representation(), model.params.classifier);
    TreeBackprop(model, ex.tree, traces[i], parts[i])
        .run(nll_logit_gradient(logits, ex.label, model.config.classes));
  });

  Gradients total = Gradients::zeros_like(model);
  Mat embeddings = std::move(total.embeddings);
  total.embeddings.resize(0, 0);
  for (ExampleGradient& part : parts) {
    total.add(part.weights);
    for (const auto& [row, grad] : part.embedding_rows) embeddings.row(row) += grad.transpose();
  }
  total.embeddings = std::move(embeddings);
  total.scale(1.0 / static_cast<double>(batch.size()));

  if (l2 != 0.0) {
    std::vector<std::span<const double>> theta;
    model.for_each_tensor([&](const ConstTensorView& t) { theta.push_back(t.data); });
    std::size_t k = 0;
    total.for_each_tensor([&](const TensorView& t) {
      if (t.regularized) {
        for (std::size_t j = 0; j < t.data.size(); ++j) t.data[j] += 2.0 * l2 * theta[k][j];
      }
      ++k;
    });
  }
  if (!total.all_finite()) throw NumericError("non-finite gradient");
  return total;
}

}  // namespace treegate
