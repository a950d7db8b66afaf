#include "fidel/optim.hpp"

#include <cmath>

namespace fidel {

void sgd_step(Model& model, const Gradients& grads, double eta) {
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    if (!model.layers[i].has_weights()) continue;
    LayerParams& p = model.params[i];
    const LayerParams& g = grads.layers[i];
    for (std::size_t j = 0; j < p.w.numel(); ++j) p.w.data[j] -= eta * g.w.data[j];
    for (std::size_t j = 0; j < p.b.numel(); ++j) p.b.data[j] -= eta * g.b.data[j];
  }
}

AdadeltaState AdadeltaState::for_model(const Model& model, double lr, double rho, double eps) {
  AdadeltaState s;
  s.lr = lr;
  s.rho = rho;
  s.eps = eps;
  Gradients z = zero_gradients(model);
  s.acc_grad_sq = z.layers;
  s.acc_delta_sq = std::move(z.layers);
  return s;
}

namespace {

void adadelta_update(std::vector<double>& p, const std::vector<double>& g,
                     std::vector<double>& eg2, std::vector<double>& ed2, double lr, double rho,
                     double eps) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    eg2[i] = rho * eg2[i] + (1.0 - rho) * g[i] * g[i];
    const double step = -std::sqrt(ed2[i] + eps) / std::sqrt(eg2[i] + eps) * g[i];
    ed2[i] = rho * ed2[i] + (1.0 - rho) * step * step;
    p[i] += lr * step;
  }
}

}  // namespace

void adadelta_step(AdadeltaState& state, Model& model, const Gradients& grads) {
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    if (!model.layers[i].has_weights()) continue;
    adadelta_update(model.params[i].w.data, grads.layers[i].w.data, state.acc_grad_sq[i].w.data,
                    state.acc_delta_sq[i].w.data, state.lr, state.rho, state.eps);
    adadelta_update(model.params[i].b.data, grads.layers[i].b.data, state.acc_grad_sq[i].b.data,
                    state.acc_delta_sq[i].b.data, state.lr, state.rho, state.eps);
  }
}

}  // namespace fidel
