#include "treegate/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "treegate/errors.hpp"
#include "treegate/training.hpp"

namespace treegate {

namespace {

void build_random(Rng& rng, int remaining, bool force_split, const std::vector<std::string>& tokens,
                  int labels, std::vector<TreeNode>& out) {
  const std::size_t id = out.size();
  out.push_back(TreeNode{static_cast<int>(rng.below(static_cast<std::uint64_t>(labels))), {}, {}});
  if (remaining > 0 && (force_split || rng.bernoulli(0.6))) {
    for (int side = 0; side < 2; ++side) {
      out[id].children.push_back(static_cast<int>(out.size()));
      build_random(rng, remaining - 1, false, tokens, labels, out);
    }
  } else {
    out[id].token = tokens[rng.below(tokens.size())];
  }
}

}  // namespace

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

LabeledTree random_tree(Rng& rng, int max_depth, const std::vector<std::string>& tokens, int labels) {
  std::vector<TreeNode> nodes;
  build_random(rng, std::max(max_depth, 1), true, tokens, labels, nodes);
  return LabeledTree(std::move(nodes));
}

GradcheckInstance random_instance(ModelKind kind, int dim, int gate_hidden, int max_depth,
                                  int trial, Rng& rng) {
  std::vector<std::string> vocab = {"a", "b", "c", "d", "e"};
  Mat vectors(static_cast<Eigen::Index>(vocab.size()), dim);
  for (Eigen::Index i = 0; i < vectors.size(); ++i) vectors.data()[i] = rng.uniform(-0.5, 0.5);
  EmbeddingTable table(vocab, std::move(vectors));

  ModelConfig config;
  config.kind = kind;
  config.dim = dim;
  config.gate_hidden = gate_hidden;
  config.classes = trial % 2 == 0 ? 2 : 3;
  config.gated_bias = trial % 4 < 2;
  config.train_embeddings = true;

  const std::vector<int> table_labels = {0, 1};  // label 2 exercises the fallback
  GradcheckInstance inst{init_model(config, std::move(table), table_labels, rng.below(1u << 30)), {}};
  inst.model.for_each_tensor([&](const TensorView& t) {
    for (double& v : t.data) v = rng.uniform(-0.5, 0.5);
  });

  // "A" resolves through lowercase folding and "zz" through <UNK>.
  const std::vector<std::string> tokens = {"a", "b", "c", "d", "e", "A", "zz"};
  for (int i = 0; i < 2; ++i) {
    LabeledTree tree = random_tree(rng, max_depth, tokens, 3);
    const int label = static_cast<int>(rng.below(static_cast<std::uint64_t>(config.classes)));
    inst.examples.push_back(Example{std::move(tree), label});
  }
  return inst;
}

GradcheckReport run_gradcheck(const GradcheckOptions& options) {
  if (options.trials < 1) throw ConfigError("trials must be positive");
  if (options.dim < 1 || options.gate_hidden < 1 || options.depth < 1) {
    throw ConfigError("dim, gate hidden width and depth must be positive");
  }
  Rng rng(options.seed);
  GradcheckReport report;
  for (int trial = 0; trial < options.trials; ++trial) {
    GradcheckInstance inst =
        random_instance(options.kind, options.dim, options.gate_hidden, options.depth, trial, rng);
    const auto batch = as_batch(inst.examples);
    const LossResult lr = loss(batch, inst.model, inst.l2);
    const Gradients analytic = backward(batch, inst.model, inst.l2, lr.traces);
    const Gradients numeric = finite_diff_grad(batch, inst.model, inst.l2, options.eps);

    std::vector<std::span<const double>> num;
    numeric.for_each_tensor([&](const ConstTensorView& t) { num.push_back(t.data); });
    std::size_t k = 0;
    analytic.for_each_tensor([&](const ConstTensorView& t) {
      double worst = 0.0;
      for (std::size_t j = 0; j < t.data.size(); ++j) {
        worst = std::max(worst, relative_error(t.data[j], num[k][j]));
      }
      ++k;
      auto it = std::find_if(report.tensors.begin(), report.tensors.end(),
                             [&](const TensorError& e) { return e.name == t.name; });
      if (it == report.tensors.end()) {
        report.tensors.push_back({t.name, worst});
      } else {
        it->worst = std::max(it->worst, worst);
      }
      report.worst = std::max(report.worst, worst);
    });
  }
  report.passed = report.worst < options.tolerance;
  return report;
}

}  // namespace treegate
