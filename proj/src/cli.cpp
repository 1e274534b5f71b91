#include "treegate/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <algorithm>

#include "treegate/checkpoint.hpp"
#include "treegate/composers.hpp"
#include "treegate/errors.hpp"
#include "treegate/format.hpp"
#include "treegate/gradcheck.hpp"
#include "treegate/synth.hpp"
#include "treegate/training.hpp"

namespace treegate {

namespace {

const std::vector<std::string> kModelNames = {"standard", "wnn", "benn", "rntn", "label"};
const std::vector<std::string> kActivationNames = {"tanh", "sigmoid", "relu"};

struct TrainFlags {
  std::string kind;
  std::string data;
  std::string embeddings;
  int dim = 300;
  int gate_hidden = 0;  // 0: same as dim
  std::string activation = "tanh";
  int classes = 2;
  double l2 = 1e-4;
  double lr = 0.05;
  int batch = 25;
  int epochs = 10;
  int folds = 5;
  std::uint64_t seed = 1;
  bool train_embeddings = false;
  std::string gated_bias = "on";
  int threads = 1;
  std::string out;
  std::string history;
};

struct EvalFlags {
  std::string model_file;
  std::string data;
  int classes = 0;  // 0: take from the checkpoint
};

struct GradcheckFlags {
  std::string kind;
  int dim = 3;
  int gate_hidden = 0;
  int depth = 3;
  int trials = 100;
  double eps = 1e-5;
  double tolerance = 1e-4;
  std::uint64_t seed = 1;
};

struct InspectFlags {
  std::string model_file;
  std::string data;
  std::string out;
};

int cmd_train(const TrainFlags& f, std::ostream& out) {
  TrainConfig config;
  config.model.kind = *parse_model_kind(f.kind);
  config.model.dim = f.dim;
  config.model.gate_hidden = f.gate_hidden > 0 ? f.gate_hidden : f.dim;
  config.model.activation = *parse_activation(f.activation);
  config.model.classes = f.classes;
  config.model.gated_bias = f.gated_bias == "on";
  config.model.train_embeddings = f.train_embeddings;
  config.model.seed = f.seed;
  config.l2 = f.l2;
  config.learning_rate = f.lr;
  config.batch_size = f.batch;
  config.epochs = f.epochs;
  config.folds = f.folds;
  config.threads = f.threads;
  config.validate();

  const Dataset data = load_dataset(f.data, f.classes);
  const EmbeddingTable table = load_embeddings(f.embeddings, f.dim, f.seed);
  const TrainResult result = train(config, data, table);

  save_checkpoint(result.best, f.out);
  const std::string history_path = f.history.empty() ? f.out + ".history.tsv" : f.history;
  std::ofstream history(history_path, std::ios::binary);
  if (!history) throw DataError("cannot write " + history_path);
  history << "fold\tepoch\ttrain_loss\tval_accuracy\n";
  for (const EpochRecord& r : result.history) {
    history << r.fold << '\t' << r.epoch << '\t' << format_double(r.train_loss) << '\t'
            << format_fixed(r.val_accuracy, 6) << '\n';
  }
  for (std::size_t i = 0; i < result.fold_accuracy.size(); ++i) {
    out << "fold=" << i << " val_accuracy=" << format_fixed(result.fold_accuracy[i], 6) << '\n';
  }
  out << "best_fold=" << result.best_fold << '\n';
  out << "cv_accuracy=" << format_fixed(result.cv_accuracy, 6) << '\n';
  return kExitOk;
}

int cmd_eval(const EvalFlags& f, std::ostream& out, std::ostream& err) {
  const Model model = load_checkpoint(f.model_file);
  if (f.classes != 0 && f.classes != model.config.classes) {
    err << "error: --classes " << f.classes << " does not match the model's "
        << model.config.classes << " classes\n";
    return kExitFailure;
  }
  const Dataset data = load_dataset(f.data, model.config.classes);
  const Metrics m = evaluate(model, data);
  out << "accuracy=" << format_fixed(m.accuracy, 6) << '\n';
  out << "mean_nll=" << format_fixed(m.mean_nll, 6) << '\n';
  for (std::size_t c = 0; c < m.gold.size(); ++c) {
    out << "class=" << c << " gold=" << m.gold[c] << " predicted=" << m.predicted[c]
        << " correct=" << m.correct[c] << '\n';
  }
  return kExitOk;
}

int cmd_gradcheck(const GradcheckFlags& f, std::ostream& out) {
  GradcheckOptions opt;
  opt.kind = *parse_model_kind(f.kind);
  opt.dim = f.dim;
  opt.gate_hidden = f.gate_hidden > 0 ? f.gate_hidden : f.dim;
  opt.depth = f.depth;
  opt.trials = f.trials;
  opt.eps = f.eps;
  opt.tolerance = f.tolerance;
  opt.seed = f.seed;
  const GradcheckReport report = run_gradcheck(opt);
  out << "tensor\tworst_relative_error\n";
  for (const TensorError& t : report.tensors) out << t.name << '\t' << format_double(t.worst, 6) << '\n';
  out << "worst=" << format_double(report.worst, 6) << '\n';
  out << "status=" << (report.passed ? "pass" : "fail") << '\n';
  return report.passed ? kExitOk : kExitFailure;
}

int cmd_inspect_gates(const InspectFlags& f, std::ostream& out, std::ostream& err) {
  const Model model = load_checkpoint(f.model_file);
  if (!is_gated(model.config.kind)) {
    err << "error: model has no gates\n";
    return kExitFailure;
  }
  const Dataset data = load_dataset(f.data, model.config.classes);
  std::filesystem::create_directories(f.out);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const LabeledTree& tree = data.examples[i].tree;
    const ForwardTrace trace = forward(model, tree);
    const auto path = std::filesystem::path(f.out) / ("tree_" + std::to_string(i) + ".tsv");
    std::ofstream tsv(path, std::ios::binary);
    if (!tsv) throw DataError("cannot write " + path.string());
    tsv << "node_id\tspan\tkind\tgate\n";
    for (int id = 1; id < tree.size(); ++id) {
      // Six decimals would print saturated gates as 0 or 1; keep the open interval.
      const double g = std::clamp(trace.nodes[static_cast<std::size_t>(id)].gate, 1e-6, 1.0 - 1e-6);
      tsv << id << '\t' << tree.span(id) << '\t' << (tree.node(id).is_leaf() ? "leaf" : "internal")
          << '\t' << format_fixed(g, 6) << '\n';
    }
  }
  out << "trees=" << data.size() << '\n';
  return kExitOk;
}

int cmd_gen_synth(const SynthConfig& config, const std::string& prefix, std::ostream& out) {
  const SynthCorpus corpus = generate_synthetic(config);
  write_synthetic(corpus, prefix);
  out << "trees=" << prefix << ".trees\n";
  out << "embeddings=" << prefix << ".emb\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gated recursive neural networks over parse trees"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  TrainFlags tf;
  CLI::App* train_cmd = app.add_subcommand("train", "Cross-validated training; writes a checkpoint");
  train_cmd->add_option("--model", tf.kind)
      ->required()
      ->check(CLI::IsMember(kModelNames));
  train_cmd->add_option("--data", tf.data, "Tree file")->required();
  train_cmd->add_option("--embeddings", tf.embeddings, "Embedding file")->required();
  train_cmd->add_option("--dim", tf.dim, "Embedding dimension K")->capture_default_str();
  train_cmd->add_option("--gate-hidden", tf.gate_hidden, "Gate hidden width D (default K)");
  train_cmd->add_option("--activation", tf.activation)
      ->check(CLI::IsMember(kActivationNames))->capture_default_str();
  train_cmd->add_option("--classes", tf.classes)->check(CLI::IsMember({2, 5}))->capture_default_str();
  train_cmd->add_option("--l2", tf.l2, "L2 coefficient Q")->capture_default_str();
  train_cmd->add_option("--lr", tf.lr, "AdaGrad learning rate")->capture_default_str();
  train_cmd->add_option("--batch", tf.batch, "Minibatch size")->capture_default_str();
  train_cmd->add_option("--epochs", tf.epochs)->capture_default_str();
  train_cmd->add_option("--folds", tf.folds, "Cross-validation folds")->capture_default_str();
  train_cmd->add_option("--seed", tf.seed)->capture_default_str();
  train_cmd->add_flag("--train-embeddings", tf.train_embeddings, "Optimize embedding rows too");
  train_cmd->add_option("--gated-bias", tf.gated_bias, "Bias in gated composition")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  train_cmd->add_option("--threads", tf.threads)->capture_default_str();
  train_cmd->add_option("--out", tf.out, "Checkpoint path")->required();
  train_cmd->add_option("--history", tf.history, "History TSV (default <out>.history.tsv)");

  EvalFlags ef;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Accuracy of a checkpoint on a tree file");
  eval_cmd->add_option("--model-file", ef.model_file)->required();
  eval_cmd->add_option("--data", ef.data)->required();
  eval_cmd->add_option("--classes", ef.classes, "Expected class count");

  GradcheckFlags gf;
  CLI::App* grad_cmd = app.add_subcommand("gradcheck", "Backprop vs central differences");
  grad_cmd->add_option("--model", gf.kind)->required()->check(CLI::IsMember(kModelNames));
  grad_cmd->add_option("--dim", gf.dim)->capture_default_str();
  grad_cmd->add_option("--gate-hidden", gf.gate_hidden, "Default: --dim");
  grad_cmd->add_option("--depth", gf.depth)->capture_default_str();
  grad_cmd->add_option("--trials", gf.trials)->capture_default_str();
  grad_cmd->add_option("--eps", gf.eps)->capture_default_str();
  grad_cmd->add_option("--tolerance", gf.tolerance)->capture_default_str();
  grad_cmd->add_option("--seed", gf.seed)->capture_default_str();

  InspectFlags inf;
  CLI::App* inspect_cmd = app.add_subcommand("inspect-gates", "Per-node gate values as TSV");
  inspect_cmd->add_option("--model-file", inf.model_file)->required();
  inspect_cmd->add_option("--data", inf.data)->required();
  inspect_cmd->add_option("--out", inf.out, "Output directory")->required();

  SynthConfig sc;
  std::string synth_out;
  CLI::App* synth_cmd = app.add_subcommand("gen-synth", "Synthetic keyword-tree corpus");
  synth_cmd->add_option("--vocab-size", sc.vocab_size)->capture_default_str();
  synth_cmd->add_option("--examples", sc.examples)->capture_default_str();
  synth_cmd->add_option("--keyword-rate", sc.keyword_rate)->capture_default_str();
  synth_cmd->add_option("--depth", sc.depth)->capture_default_str();
  synth_cmd->add_option("--classes", sc.classes)->capture_default_str();
  synth_cmd->add_option("--dim", sc.dim, "Embedding dimension")->capture_default_str();
  synth_cmd->add_option("--seed", sc.seed)->capture_default_str();
  synth_cmd->add_option("--out", synth_out, "Output prefix")->required();

  std::vector<const char*> argv = {"treegate"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(tf, out);
    if (eval_cmd->parsed()) return cmd_eval(ef, out, err);
    if (grad_cmd->parsed()) return cmd_gradcheck(gf, out);
    if (inspect_cmd->parsed()) return cmd_inspect_gates(inf, out, err);
    if (synth_cmd->parsed()) return cmd_gen_synth(sc, synth_out, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace treegate
