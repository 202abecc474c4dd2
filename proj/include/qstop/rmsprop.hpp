#pragma once

// RMSProp without centering or momentum: per parameter
//   v <- rho * v + (1 - rho) * g^2
//   p <- p - lr * g / (sqrt(v) + eps)
// with eps added outside the square root.

#include <cmath>
#include <stdexcept>

#include "qstop/net.hpp"

namespace qstop {

struct RmsPropConfig {
  double lr = 1e-3;
  double rho = 0.99;
  double eps = 1e-8;
};

class RmsProp {
 public:
  RmsProp(const DenseNet& net, RmsPropConfig cfg)
      : cfg_(cfg), v_(GradientSet::zeros_like(net)) {
    if (!(cfg.lr > 0.0)) throw std::invalid_argument("RmsProp: lr must be > 0");
    if (!(cfg.rho >= 0.0 && cfg.rho < 1.0)) {
      throw std::invalid_argument("RmsProp: rho must lie in [0,1)");
    }
    if (!(cfg.eps > 0.0)) throw std::invalid_argument("RmsProp: eps must be > 0");
  }

  void step(DenseNet& net, const GradientSet& grads) {
    if (!grads.shapes_match(net) || !v_.shapes_match(net)) {
      throw std::invalid_argument("RmsProp: gradient/accumulator shape mismatch");
    }
    const double rho = cfg_.rho;
    const double one_minus = 1.0 - rho;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      auto& w = net.layers[l].weights.values();
      const auto& gw = grads.dw[l].values();
      auto& vw = v_.dw[l].values();
      for (std::size_t i = 0; i < w.size(); ++i) {
        vw[i] = rho * vw[i] + one_minus * gw[i] * gw[i];
        w[i] -= cfg_.lr * gw[i] / (std::sqrt(vw[i]) + cfg_.eps);
      }
      auto& b = net.layers[l].bias;
      const auto& gb = grads.db[l];
      auto& vb = v_.db[l];
      for (std::size_t i = 0; i < b.size(); ++i) {
        vb[i] = rho * vb[i] + one_minus * gb[i] * gb[i];
        b[i] -= cfg_.lr * gb[i] / (std::sqrt(vb[i]) + cfg_.eps);
      }
    }
  }

  const RmsPropConfig& config() const { return cfg_; }
  const GradientSet& accumulator() const { return v_; }

 private:
  RmsPropConfig cfg_;
  GradientSet v_;
};

}  // namespace qstop
