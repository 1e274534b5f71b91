#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "treegate/composers.hpp"
#include "treegate/model.hpp"
#include "treegate/tree.hpp"

namespace treegate {

// Minibatches are views of examples owned by a Dataset.
using Batch = std::span<const Example* const>;

std::vector<const Example*> as_batch(std::span<const Example> examples);

// Negative log-likelihood of `label` under the classifier logits.
double example_nll(const Vec& logits, int label, int classes);
// d nll / d logits: p - y (binary) or softmax - onehot.
Vec nll_logit_gradient(const Vec& logits, int label, int classes);

// Sum of squares over regularized (non-bias) trainable tensors.
double l2_norm_squared(const Model& model);

struct LossResult {
  double value = 0.0;      // mean NLL + l2 * sum(theta^2)
  double mean_nll = 0.0;
  std::vector<ForwardTrace> traces;
};

LossResult loss(Batch batch, const Model& model, double l2, int threads = 1);

// Exact reverse-mode gradient of loss(batch, model, l2).value, reusing the
// traces produced by loss(). Per-example contributions are summed in batch
// order, so the result does not depend on `threads`.
Gradients backward(Batch batch, const Model& model, double l2,
                   const std::vector<ForwardTrace>& traces, int threads = 1);

// Central differences (f(x + eps) - f(x - eps)) / (2 eps) for every entry of
// `theta`, restoring each entry afterwards.
std::vector<double> central_difference(std::span<double> theta,
                                       const std::function<double()>& objective, double eps);

// Finite-difference gradient of loss(batch, model, l2).value; tiny models only.
Gradients finite_diff_grad(Batch batch, const Model& model, double l2, double eps);

// acc += g^2; theta -= lr * g / (sqrt(acc) + eps).
void adagrad_update(double& theta, double& acc, double g, double lr, double eps);

class AdaGrad {
 public:
  AdaGrad(const Model& model, double learning_rate, double epsilon = 1e-8);

  void step(Model& model, const Gradients& grads);

  // Flattened in Model::for_each_tensor order.
  const std::vector<double>& accumulators() const { return acc_; }
  double learning_rate() const { return lr_; }
  double epsilon() const { return eps_; }

 private:
  std::vector<double> acc_;
  double lr_;
  double eps_;
};

struct Metrics {
  std::size_t count = 0;
  double accuracy = 0.0;
  double mean_nll = 0.0;
  std::vector<int> gold;       // examples per gold class
  std::vector<int> predicted;  // predictions per class
  std::vector<int> correct;    // correct predictions per class

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

// Argmax prediction; ties go to the lower class index.
int predict(const Vec& probabilities);
Metrics evaluate(const Model& model, Batch examples);
Metrics evaluate(const Model& model, const Dataset& data);

struct TrainConfig {
  ModelConfig model;
  double l2 = 1e-4;  // Q
  double learning_rate = 0.05;
  int batch_size = 25;
  int epochs = 10;
  int folds = 5;
  int threads = 1;

  void validate() const;
};

struct EpochRecord {
  int fold = 0;
  int epoch = 0;  // 1-based
  double train_loss = 0.0;  // mean minibatch loss over the epoch
  double val_accuracy = 0.0;
};

struct SplitResult {
  Model best;  // parameters at the epoch with the highest validation accuracy
  double best_accuracy = 0.0;
  std::vector<EpochRecord> history;
};

// Trains one model on `train_ids`, validating on `validation_ids` after
// every epoch. Initialization and epoch shuffles are drawn from `seed`.
SplitResult train_split(const TrainConfig& config, const Dataset& data,
                        const EmbeddingTable& table, std::span<const std::size_t> train_ids,
                        std::span<const std::size_t> validation_ids, std::uint64_t seed,
                        int fold = 0);

struct TrainResult {
  Model best;  // best fold's best-epoch model
  int best_fold = 0;
  std::vector<double> fold_accuracy;  // best-epoch validation accuracy per fold
  double cv_accuracy = 0.0;           // mean of fold_accuracy
  std::vector<EpochRecord> history;
};

// k-fold cross-validated training; deterministic given config.model.seed.
TrainResult train(const TrainConfig& config, const Dataset& data, const EmbeddingTable& table);

}  // namespace treegate
