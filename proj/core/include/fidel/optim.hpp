#ifndef FIDEL_OPTIM_HPP_
#define FIDEL_OPTIM_HPP_

#include "fidel/model.hpp"

namespace fidel {

// p <- p - eta * g for every trainable parameter.
void sgd_step(Model& model, const Gradients& grads, double eta);

// Adadelta with the framework convention of scaling the computed step by a
// learning rate. Accumulators are per-parameter and start at zero.
struct AdadeltaState {
  double lr = 0.001;
  double rho = 0.95;
  double eps = 1e-7;
  std::vector<LayerParams> acc_grad_sq;   // E[g^2]
  std::vector<LayerParams> acc_delta_sq;  // E[dx^2]

  static AdadeltaState for_model(const Model& model, double lr = 0.001, double rho = 0.95,
                                 double eps = 1e-7);
};

void adadelta_step(AdadeltaState& state, Model& model, const Gradients& grads);

}  // namespace fidel

#endif  // FIDEL_OPTIM_HPP_
