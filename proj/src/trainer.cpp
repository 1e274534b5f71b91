#include <cmath>

#include "treegate/errors.hpp"
#include "treegate/rng.hpp"
#include "treegate/training.hpp"

namespace treegate {

void TrainConfig::validate() const {
  model.validate();
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (!(l2 >= 0.0)) throw ConfigError("L2 coefficient must be non-negative");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (folds < 2) throw ConfigError("folds must be at least 2");
}

int predict(const Vec& probabilities) {
  int best = 0;
  for (int c = 1; c < probabilities.size(); ++c) {
    if (probabilities(c) > probabilities(best)) best = c;
  }
  return best;
}

Metrics evaluate(const Model& model, Batch examples) {
  if (examples.empty()) throw DataError("cannot evaluate an empty dataset");
  const int classes = model.config.classes;
  Metrics m;
  m.count = examples.size();
  m.gold.assign(static_cast<std::size_t>(classes), 0);
  m.predicted = m.gold;
  m.correct = m.gold;
  std::size_t hits = 0;
  double nll = 0.0;
  for (const Example* ex : examples) {
    if (ex->label < 0 || ex->label >= classes) {
      throw DataError("example label " + std::to_string(ex->label) + " outside the model's " +
                      std::to_string(classes) + " classes");
    }
    const ForwardTrace trace = forward(model, ex->tree);
    const Vec logits = class_logits(trace.root_representation(), model.params.classifier);
    const int y = predict(class_probabilities(logits, classes));
    ++m.gold[static_cast<std::size_t>(ex->label)];
    ++m.predicted[static_cast<std::size_t>(y)];
    if (y == ex->label) {
      ++m.correct[static_cast<std::size_t>(y)];
      ++hits;
    }
    nll += example_nll(logits, ex->label, classes);
  }
  m.accuracy = static_cast<double>(hits) / static_cast<double>(m.count);
  m.mean_nll = nll / static_cast<double>(m.count);
  return m;
}

Metrics evaluate(const Model& model, const Dataset& data) {
  if (data.classes != model.config.classes) {
    throw DataError("dataset has " + std::to_string(data.classes) + " classes, model has " +
                    std::to_string(model.config.classes));
  }
  const auto batch = as_batch(data.examples);
  return evaluate(model, batch);
}

SplitResult train_split(const TrainConfig& config, const Dataset& data,
                        const EmbeddingTable& table, std::span<const std::size_t> train_ids,
                        std::span<const std::size_t> validation_ids, std::uint64_t seed,
                        int fold) {
  config.validate();
  if (data.classes != config.model.classes) {
    throw DataError("dataset has " + std::to_string(data.classes) + " classes, model expects " +
                    std::to_string(config.model.classes));
  }
  if (train_ids.empty() || validation_ids.empty()) {
    throw ConfigError("training and validation sets must be non-empty");
  }

  const std::vector<int> labels = internal_labels(data, train_ids);
  Model model = init_model(config.model, table, labels, derive_seed(seed, 0));
  AdaGrad optimizer(model, config.learning_rate);
  Rng shuffler(derive_seed(seed, 1));

  std::vector<const Example*> validation;
  for (std::size_t i : validation_ids) validation.push_back(&data.examples.at(i));
  std::vector<std::size_t> order(train_ids.begin(), train_ids.end());

  SplitResult result;
  result.best_accuracy = -1.0;
  const auto batch_size = static_cast<std::size_t>(config.batch_size);
  std::vector<const Example*> batch;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffler.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      batch.clear();
      for (std::size_t j = start; j < end; ++j) batch.push_back(&data.examples[order[j]]);
      const std::string where = "fold " + std::to_string(fold) + " epoch " +
                                std::to_string(epoch) + " batch " + std::to_string(batches);
      try {
        LossResult lr = loss(batch, model, config.l2, config.threads);
        if (!std::isfinite(lr.value)) throw NumericError("non-finite loss");
        const Gradients grads = backward(batch, model, config.l2, lr.traces, config.threads);
        optimizer.step(model, grads);
        loss_sum += lr.value;
      } catch (const NumericError& e) {
        throw NumericError(where + ": " + e.what());
      }
      ++batches;
    }
    const double accuracy = evaluate(model, validation).accuracy;
    result.history.push_back({fold, epoch, loss_sum / batches, accuracy});
    if (accuracy > result.best_accuracy) {
      result.best_accuracy = accuracy;
      result.best = model;
    }
  }
  return result;
}

TrainResult train(const TrainConfig& config, const Dataset& data, const EmbeddingTable& table) {
  config.validate();
  const std::uint64_t seed = config.model.seed;
  const std::vector<Fold> folds = kfold_split(data.size(), config.folds, seed);
  TrainResult out;
  double best = -1.0;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const int fold = static_cast<int>(f);
    SplitResult split = train_split(config, data, table, folds[f].train, folds[f].validation,
                                    derive_seed(seed, 100 + f), fold);
    out.fold_accuracy.push_back(split.best_accuracy);
    out.history.insert(out.history.end(), split.history.begin(), split.history.end());
    if (split.best_accuracy > best) {
      best = split.best_accuracy;
      out.best = std::move(split.best);
      out.best_fold = fold;
    }
  }
  double sum = 0.0;
  for (double a : out.fold_accuracy) sum += a;
  out.cv_accuracy = sum / static_cast<double>(out.fold_accuracy.size());
  return out;
}

}  // namespace treegate
