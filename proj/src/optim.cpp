#include <cmath>

#include "treegate/errors.hpp"
#include "treegate/training.hpp"

namespace treegate {

std::vector<double> central_difference(std::span<double> theta,
                                       const std::function<double()>& objective, double eps) {
  if (!(eps > 0.0)) throw ConfigError("finite-difference step must be positive");
  std::vector<double> grad(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    theta[i] = saved + eps;
    const double plus = objective();
    theta[i] = saved - eps;
    const double minus = objective();
    theta[i] = saved;
    grad[i] = (plus - minus) / (2.0 * eps);
  }
  return grad;
}

Gradients finite_diff_grad(Batch batch, const Model& model, double l2, double eps) {
  if (!(eps > 0.0)) throw ConfigError("finite-difference step must be positive");
  Model probe = model;
  Gradients out = Gradients::zeros_like(model);
  std::vector<std::vector<double>> per_tensor;
  const std::function<double()> objective = [&] { return loss(batch, probe, l2).value; };
  probe.for_each_tensor(
      [&](const TensorView& t) { per_tensor.push_back(central_difference(t.data, objective, eps)); });
  std::size_t k = 0;
  out.for_each_tensor([&](const TensorView& t) {
    std::copy(per_tensor[k].begin(), per_tensor[k].end(), t.data.begin());
    ++k;
  });
  return out;
}

void adagrad_update(double& theta, double& acc, double g, double lr, double eps) {
  acc += g * g;
  theta -= lr * g / (std::sqrt(acc) + eps);
}

AdaGrad::AdaGrad(const Model& model, double learning_rate, double epsilon)
    : acc_(model.parameter_count(), 0.0), lr_(learning_rate), eps_(epsilon) {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(epsilon > 0.0)) throw ConfigError("AdaGrad epsilon must be positive");
}

void AdaGrad::step(Model& model, const Gradients& grads) {
  std::vector<std::span<const double>> g;
  grads.for_each_tensor([&](const ConstTensorView& t) { g.push_back(t.data); });
  std::size_t k = 0;
  std::size_t at = 0;
  model.for_each_tensor([&](const TensorView& t) {
    if (k >= g.size() || g[k].size() != t.data.size()) {
      throw ConfigError("gradient shape does not match parameter '" + t.name + "'");
    }
    for (std::size_t j = 0; j < t.data.size(); ++j) {
      adagrad_update(t.data[j], acc_[at + j], g[k][j], lr_, eps_);
    }
    at += t.data.size();
    ++k;
  });
  if (k != g.size() || at != acc_.size()) throw ConfigError("gradient layout does not match model");
}

}  // namespace treegate
