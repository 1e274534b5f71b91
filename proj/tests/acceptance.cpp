// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 iff all pass.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>

#include "support.hpp"
#include "treegate/checkpoint.hpp"
#include "treegate/cli.hpp"
#include "treegate/training.hpp"

using namespace treegate;
using namespace treegate::testing;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

const ModelKind kKinds[] = {ModelKind::standard, ModelKind::wnn, ModelKind::benn, ModelKind::rntn,
                            ModelKind::label};

struct Check {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) detail = what;
    ok = ok && cond;
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int cli(const std::vector<std::string>& args, std::string* out = nullptr) {
  std::ostringstream o, e;
  const int code = run_cli(args, o, e);
  if (out != nullptr) *out = o.str();
  if (code != kExitOk) std::cerr << e.str();
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// `key=value` from command output, or NaN.
double field(const std::string& text, const std::string& key) {
  const auto at = text.find(key + "=");
  if (at == std::string::npos) return std::nan("");
  return std::stod(text.substr(at + key.size() + 1));
}

std::vector<double> fold_accuracies(const std::string& text) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("fold=", 0) == 0) out.push_back(field(line, "val_accuracy"));
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

Check criterion1() {
  Check c;
  const auto t0 = Clock::now();
  std::string worst;
  for (ModelKind kind : kKinds) {
    std::string out;
    const int code = cli({"gradcheck", "--model", std::string(to_string(kind)), "--dim", "3", "--gate-hidden",
                          "3", "--depth", "3", "--trials", "100", "--eps", "1e-5", "--tolerance", "1e-4"},
                         &out);
    c.require(code == kExitOk, std::string(to_string(kind)) + " failed: worst=" + fmt(field(out, "worst")));
    worst += std::string(to_string(kind)) + "=" + fmt(field(out, "worst")) + " ";
  }
  const double elapsed = seconds_since(t0);
  c.require(elapsed < 60.0, "took " + fmt(elapsed) + " s");
  if (c.ok) c.detail = worst + "in " + fmt(elapsed) + " s";
  return c;
}

Check criterion2() {
  Check c;
  Rng rng(2002);
  int instances = 0;
  for (ModelKind kind : {ModelKind::wnn, ModelKind::benn}) {
    for (int trial = 0; trial < 100; ++trial) {
      GradcheckInstance inst = random_instance(kind, 3, 3, 3, trial, rng);
      inst.model.pin = GatePin::ones;
      Model standard = inst.model;
      standard.config.kind = ModelKind::standard;
      standard.params.gate = {};
      for (const Example& ex : inst.examples) {
        const ForwardTrace g = forward(inst.model, ex.tree);
        const ForwardTrace s = forward(standard, ex.tree);
        for (std::size_t i = 0; i < g.nodes.size(); ++i) {
          c.require(bitwise_equal(g.nodes[i].h, s.nodes[i].h), "trace differs at node " + std::to_string(i));
        }
      }
      // No L2 here: the penalty's own 2Q*theta term is not a path through the gates.
      const auto batch = as_batch(inst.examples);
      const LossResult r = loss(batch, inst.model, 0.0);
      const Gradients grads = backward(batch, inst.model, 0.0, r.traces);
      grads.for_each_tensor([&](const ConstTensorView& t) {
        if (t.name.rfind("gate.", 0) != 0) return;
        for (double v : t.data) c.require(v == 0.0, "nonzero " + t.name + " gradient");
      });
      ++instances;
    }
  }
  if (c.ok) c.detail = std::to_string(instances) + " pinned WNN/BENN instances";
  return c;
}

// Shared by criteria 3 and 4: the BENN traces examined in criterion 3.
std::vector<ForwardTrace> g_benn_traces;

Vec four_case_sum(const Model& m, const Vec& l, const Vec& r) {
  const double pl = gate(l, m.params.gate, m.config.activation).value;
  const double pr = gate(r, m.params.gate, m.config.activation).value;
  Vec v = Vec::Zero(l.size());
  for (int gr = 1; gr >= 0; --gr) {
    for (int gl = 1; gl >= 0; --gl) {
      Vec x = concat(gl ? l : Vec::Zero(l.size()), gr ? r : Vec::Zero(r.size()));
      Vec pre = m.params.composition.W * x;
      if (m.params.composition.has_bias()) pre += m.params.composition.b;
      v += ((gl ? pl : 1 - pl) * (gr ? pr : 1 - pr)) * activate(pre, m.config.activation);
    }
  }
  return v;
}

Check criterion3() {
  Check c;
  Rng rng(3003);
  std::uint64_t worst_ulp = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Model m = random_model(ModelKind::benn, 3, 3, rng, 2, trial % 2 == 0);
    const LabeledTree t = random_binary_tree(rng, 1);
    const ForwardTrace trace = benn_forward(m, t);
    const Vec expected = four_case_sum(m, m.embeddings.lookup(t.node(1).token), m.embeddings.lookup(t.node(2).token));
    for (Eigen::Index k = 0; k < expected.size(); ++k) {
      worst_ulp = std::max(worst_ulp, ulp_distance(trace.root_representation()(k), expected(k)));
    }
    g_benn_traces.push_back(trace);
  }
  c.require(worst_ulp <= 4, "depth-1 enumeration off by " + std::to_string(worst_ulp) + " ulp");

  std::uint64_t worst_deep = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Model m = random_model(ModelKind::benn, 3, 3, rng, 2, trial % 2 == 0);
    const LabeledTree t = random_binary_tree(rng, 4);
    const ForwardTrace trace = benn_forward(m, t);
    for (int id = 0; id < t.size(); ++id) {
      const TreeNode& n = t.node(id);
      if (n.is_leaf()) continue;
      const Vec expected = four_case_sum(m, trace.nodes[n.children[0]].h, trace.nodes[n.children[1]].h);
      for (Eigen::Index k = 0; k < expected.size(); ++k) {
        worst_deep = std::max(worst_deep, ulp_distance(trace.nodes[id].h(k), expected(k)));
      }
    }
    g_benn_traces.push_back(trace);
  }
  c.require(worst_deep <= 4, "layerwise recursion off by " + std::to_string(worst_deep) + " ulp");

  const Model m = random_model(ModelKind::benn, 3, 3, rng);
  const LabeledTree pair = parse_tree_line("(1 (0 a) (0 d))");
  const Vec expectation = benn_forward(m, pair).root_representation();
  const int n = 100000;
  Vec sum = Vec::Zero(3), sq = Vec::Zero(3);
  for (int s = 0; s < n; ++s) {
    const Vec x = benn_sample(m, pair, static_cast<std::uint64_t>(s));
    sum += x;
    sq += x.cwiseProduct(x);
  }
  const Vec mean = sum / n;
  double worst_z = 0;
  for (Eigen::Index k = 0; k < 3; ++k) {
    const double se = std::sqrt((sq(k) / n - mean(k) * mean(k)) / n);
    worst_z = std::max(worst_z, std::abs(mean(k) - expectation(k)) / se);
  }
  c.require(worst_z <= 3.0, "Monte Carlo mean " + fmt(worst_z) + " standard errors away");
  if (c.ok) {
    c.detail = "enumeration " + std::to_string(worst_ulp) + " ulp, recursion " + std::to_string(worst_deep) +
               " ulp, Monte Carlo max |z|=" + fmt(worst_z);
  }
  return c;
}

Check criterion4() {
  Check c;
  std::uint64_t worst = 0;
  std::size_t nodes = 0;
  for (const ForwardTrace& trace : g_benn_traces) {
    for (const NodeTrace& node : trace.nodes) {
      if (node.input.size() == 0 && node.candidates[0].size() == 0) continue;
      const double s = node.probs[0] + node.probs[1] + node.probs[2] + node.probs[3];
      worst = std::max(worst, ulp_distance(s, 1.0));
      ++nodes;
    }
  }
  c.require(nodes > 0, "no BENN nodes examined");
  c.require(worst <= 4, "probabilities off by " + std::to_string(worst) + " ulp");

  Rng rng(4004);
  double worst_softmax = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const int classes = trial % 2 ? 5 : 2;
    Vec logits(classes == 2 ? 1 : classes);
    for (Eigen::Index i = 0; i < logits.size(); ++i) logits(i) = rng.uniform(-50, 50);
    worst_softmax = std::max(worst_softmax, std::abs(class_probabilities(logits, classes).sum() - 1.0));
  }
  c.require(worst_softmax <= 1e-12, "classifier output sums off by " + fmt(worst_softmax));
  if (c.ok) {
    c.detail = std::to_string(nodes) + " BENN nodes within " + std::to_string(worst) +
               " ulp; classifier sums within " + fmt(worst_softmax);
  }
  return c;
}

Check criterion5() {
  Check c;
  double theta = 0.0, acc = 0.0;
  adagrad_update(theta, acc, 3.0, 0.1, 1e-8);
  const double first = theta;
  adagrad_update(theta, acc, 4.0, 0.1, 1e-8);
  const double second = theta - first;
  c.require(std::abs(first - (-0.1 * 3.0 / (3.0 + 1e-8))) <= 1e-9, "first update " + fmt(first));
  c.require(std::abs(first - -0.099999) <= 1e-6, "first update " + fmt(first));
  c.require(std::abs(second - -0.08) <= 1e-9, "second update " + fmt(second));
  c.require(acc == 25.0, "accumulator " + fmt(acc));
  if (c.ok) c.detail = "updates " + fmt(first) + ", " + fmt(second);
  return c;
}

Check criterion6() {
  Check c;
  Mat vectors(2, 3);
  vectors << 0.1, 0.2, 0.3, -0.4, 0.5, -0.6;
  const Model m = zero_model(ModelKind::standard, 3, 3, {"a", "b"}, vectors);
  std::vector<Example> ex;
  ex.push_back({parse_tree_line("(1 (0 a) (0 b))"), 1});
  const LossResult r = loss(as_batch(ex), m, 0.0);
  const Gradients g = backward(as_batch(ex), m, 0.0, r.traces);
  c.require(std::abs(r.value - std::numbers::ln2) <= 1e-12, "loss " + fmt(r.value));
  c.require(std::abs(g.params.classifier.b(0) - -0.5) <= 1e-12, "dJ/db " + fmt(g.params.classifier.b(0)));
  if (c.ok) c.detail = "J=" + fmt(r.value) + " dJ/db=" + fmt(g.params.classifier.b(0));
  return c;
}

Check criterion7(const fs::path& dir) {
  Check c;
  const std::string prefix = (dir / "det").string();
  c.require(cli({"gen-synth", "--examples", "300", "--vocab-size", "60", "--depth", "4", "--dim", "8",
                 "--seed", "17", "--out", prefix}) == kExitOk,
            "gen-synth failed");
  for (const char* model : {"wnn", "benn"}) {
    std::vector<std::string> files;
    for (int run = 0; run < 2; ++run) {
      const std::string out = (dir / (std::string(model) + std::to_string(run) + ".ckpt")).string();
      c.require(cli({"train", "--model", model, "--data", prefix + ".trees", "--embeddings", prefix + ".emb",
                     "--dim", "8", "--gate-hidden", "6", "--epochs", "3", "--threads", "4",
                     "--train-embeddings", "--seed", "23", "--out", out}) == kExitOk,
                "train failed");
      files.push_back(slurp(out));
      files.push_back(slurp(out + ".history.tsv"));
    }
    c.require(!files[0].empty() && files[0] == files[2], std::string(model) + " checkpoints differ");
    c.require(!files[1].empty() && files[1] == files[3], std::string(model) + " histories differ");
  }
  if (c.ok) c.detail = "wnn and benn, --threads 4, checkpoints and histories byte-identical";
  return c;
}

Check criterion8(const fs::path& dir) {
  Check c;
  const auto t0 = Clock::now();
  const std::string prefix = (dir / "synth").string();
  c.require(cli({"gen-synth", "--examples", "2000", "--vocab-size", "200", "--keyword-rate", "1.0", "--depth",
                 "6", "--dim", "16", "--seed", "7", "--out", prefix}) == kExitOk,
            "gen-synth failed");
  auto run = [&](const std::string& model, std::string& out) {
    return cli({"train", "--model", model, "--data", prefix + ".trees", "--embeddings", prefix + ".emb",
                "--dim", "16", "--gate-hidden", "16", "--epochs", "50", "--lr", "0.1", "--train-embeddings",
                "--seed", "1", "--out", (dir / (model + ".ckpt")).string()},
               &out);
  };
  std::string wnn_out, std_out;
  c.require(run("wnn", wnn_out) == kExitOk, "wnn training failed");
  c.require(run("standard", std_out) == kExitOk, "standard training failed");

  const std::vector<double> folds = fold_accuracies(wnn_out);
  const double worst_fold = folds.empty() ? 0.0 : *std::min_element(folds.begin(), folds.end());
  c.require(folds.size() == 5 && worst_fold >= 0.95, "(a) lowest WNN fold accuracy " + fmt(worst_fold));
  const double wnn_cv = field(wnn_out, "cv_accuracy"), std_cv = field(std_out, "cv_accuracy");
  c.require(wnn_cv >= std_cv, "(b) WNN cv " + fmt(wnn_cv) + " < standard cv " + fmt(std_cv));

  const fs::path gates = dir / "gates";
  c.require(cli({"inspect-gates", "--model-file", (dir / "wnn.ckpt").string(), "--data", prefix + ".trees",
                 "--out", gates.string()}) == kExitOk,
            "inspect-gates failed");
  double kw_sum = 0, filler_sum = 0;
  std::size_t kw_n = 0, filler_n = 0;
  for (int i = 0; i < 2000; ++i) {
    std::istringstream tsv(slurp(gates / ("tree_" + std::to_string(i) + ".tsv")));
    std::string line;
    std::getline(tsv, line);
    while (std::getline(tsv, line)) {
      std::istringstream fields(line);
      std::string id, span, kind, value;
      std::getline(fields, id, '\t');
      std::getline(fields, span, '\t');
      std::getline(fields, kind, '\t');
      std::getline(fields, value, '\t');
      if (kind != "leaf") continue;
      (span.rfind("kw", 0) == 0 ? kw_sum : filler_sum) += std::stod(value);
      ++(span.rfind("kw", 0) == 0 ? kw_n : filler_n);
    }
  }
  const double kw_mean = kw_n ? kw_sum / kw_n : 0.0, filler_mean = filler_n ? filler_sum / filler_n : 1.0;
  c.require(kw_n == 2000 && kw_mean > filler_mean,
            "(c) keyword gate " + fmt(kw_mean) + " vs filler gate " + fmt(filler_mean));
  const double elapsed = seconds_since(t0);
  c.require(elapsed < 600.0, "took " + fmt(elapsed) + " s");
  if (c.ok) {
    c.detail = "(a) WNN folds >= " + fmt(worst_fold) + " (b) cv WNN " + fmt(wnn_cv) + " vs standard " +
               fmt(std_cv) + " (c) gate keyword " + fmt(kw_mean) + " vs filler " + fmt(filler_mean) + " in " +
               fmt(elapsed) + " s";
  }
  return c;
}

Check criterion9(const fs::path& dir) {
  Check c;
  Rng rng(9009);
  int checked = 0;
  for (ModelKind kind : kKinds) {
    for (int trial = 0; trial < 4; ++trial) {
      GradcheckInstance inst = random_instance(kind, 4, 3, 3, trial, rng);
      inst.model.config.train_embeddings = trial % 2 == 0;
      inst.model.embeddings.trainable = trial % 2 == 0;
      const fs::path a = dir / "a.ckpt", b = dir / "b.ckpt";
      save_checkpoint(inst.model, a);
      save_checkpoint(load_checkpoint(a), b);
      c.require(slurp(a) == slurp(b), std::string(to_string(kind)) + " checkpoint changed on reload");
      ++checked;
    }
  }
  if (c.ok) c.detail = std::to_string(checked) + " checkpoints over all model kinds";
  return c;
}

std::string random_sexpr(Rng& rng, int depth) {
  const int label = static_cast<int>(rng.below(5));
  if (depth == 0 || rng.bernoulli(0.3)) return "(" + std::to_string(label) + " w" + std::to_string(rng.below(9)) + ")";
  std::string s = "(" + std::to_string(label);
  const int arity = 1 + static_cast<int>(rng.below(4));
  for (int i = 0; i < arity; ++i) s += " " + random_sexpr(rng, depth - 1);
  return s + ")";
}

Check criterion10() {
  Check c;
  Rng rng(1010);
  for (int trial = 0; trial < 1000 && c.ok; ++trial) {
    const LabeledTree once = binarize(parse_tree_line(random_sexpr(rng, 5)));
    c.require(once.is_binary(), "binarize left a non-binary node");
    c.require(binarize(once) == once, "binarize is not idempotent on " + serialize(once));
  }
  for (int trial = 0; trial < 1000 && c.ok; ++trial) {
    const std::size_t n = 2 + rng.below(300);
    const int k = 2 + static_cast<int>(rng.below(std::min<std::size_t>(n - 1, 20)));
    const std::vector<Fold> folds = kfold_split(n, k, rng.below(1u << 30));
    std::vector<int> hits(n, 0);
    std::size_t lo = n, hi = 0;
    for (const Fold& f : folds) {
      lo = std::min(lo, f.validation.size());
      hi = std::max(hi, f.validation.size());
      for (std::size_t i : f.validation) ++hits[i];
      std::vector<int> in_train(n, 0);
      for (std::size_t i : f.train) ++in_train[i];
      for (std::size_t i : f.validation) ++in_train[i];
      c.require(std::all_of(in_train.begin(), in_train.end(), [](int h) { return h == 1; }),
                "train and validation do not partition the indices");
    }
    c.require(folds.size() == static_cast<std::size_t>(k) && hi - lo <= 1, "fold sizes unbalanced");
    c.require(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }),
              "validation sets do not partition the indices");
  }
  if (c.ok) c.detail = "1000 binarize cases, 1000 k-fold cases";
  return c;
}

}  // namespace

int main() {
  const fs::path dir = fs::temp_directory_path() / "treegate_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);

  const std::vector<std::pair<std::string, std::function<Check()>>> criteria = {
      {"gradient correctness", criterion1},
      {"pinned-gate reductions", criterion2},
      {"BENN expectation semantics", criterion3},
      {"probability normalization", criterion4},
      {"AdaGrad unit values", criterion5},
      {"loss reference values", criterion6},
      {"training determinism", [&] { return criterion7(dir); }},
      {"synthetic separation", [&] { return criterion8(dir); }},
      {"checkpoint round trip", [&] { return criterion9(dir); }},
      {"data plumbing properties", criterion10},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Check c;
    try {
      c = criteria[i].second();
    } catch (const std::exception& e) {
      c.ok = false;
      c.detail = std::string("exception: ") + e.what();
    }
    failed += !c.ok;
    std::cout << (c.ok ? "PASS" : "FAIL") << " criterion " << i + 1 << " (" << criteria[i].first
              << "): " << c.detail << std::endl;
  }
  fs::remove_all(dir);
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
