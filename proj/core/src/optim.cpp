#include "bmamba/optim.hpp"

#include <cmath>

#include "bmamba/errors.hpp"

namespace bmamba::optim {

void AdamW::step(const std::vector<model::ParameterView>& params, const std::vector<model::ParameterView>& grads) {
  if (params.size() != grads.size()) throw ConfigError("AdamW: parameter and gradient lists differ");
  std::size_t total = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != grads[i].size()) throw ConfigError("AdamW: shape mismatch for " + params[i].name);
    total += static_cast<std::size_t>(params[i].size());
  }
  if (m_.empty()) {
    m_.assign(total, 0.0);
    v_.assign(total, 0.0);
  } else if (m_.size() != total) {
    throw ConfigError("AdamW: parameter count changed between steps");
  }

  ++step_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  const double lr = config_.lr;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  std::size_t k = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Index n = params[i].size();
    Eigen::Map<Eigen::ArrayXd> theta(params[i].data, n);
    Eigen::Map<const Eigen::ArrayXd> g(grads[i].data, n);
    Eigen::Map<Eigen::ArrayXd> m(m_.data() + k, n);
    Eigen::Map<Eigen::ArrayXd> v(v_.data() + k, n);
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.square();
    theta -= lr * ((m / c1) / ((v / c2).sqrt() + config_.eps) + config_.weight_decay * theta);
    k += static_cast<std::size_t>(n);
  }
}

}  // namespace bmamba::optim
