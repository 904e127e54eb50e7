#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace amrg::optim {

/// AdamW with decoupled weight decay.
struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

class AdamW {
public:
  explicit AdamW(AdamWConfig cfg) : cfg_(cfg) {}

  /// Updates every tensor in `params` in place from the matching gradient.
  /// The tensor list must keep the same order and sizes across calls.
  void step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads) {
    if (params.size() != grads.size()) throw std::invalid_argument("AdamW: parameter/gradient count mismatch");
    if (m_.empty()) {
      for (const auto &p : params) {
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto p = params[i];
      auto g = grads[i];
      if (p.size() != g.size() || p.size() != m_[i].size()) throw std::invalid_argument("AdamW: tensor size changed");
      for (std::size_t j = 0; j < p.size(); ++j) {
        m_[i][j] = cfg_.beta1 * m_[i][j] + (1.0 - cfg_.beta1) * g[j];
        v_[i][j] = cfg_.beta2 * v_[i][j] + (1.0 - cfg_.beta2) * g[j] * g[j];
        p[j] -= cfg_.lr * cfg_.weight_decay * p[j];
        p[j] -= cfg_.lr * (m_[i][j] / c1) / (std::sqrt(v_[i][j] / c2) + cfg_.eps);
      }
    }
  }

  auto steps() const -> long { return t_; }

private:
  AdamWConfig cfg_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  long t_ = 0;
};

} // namespace amrg::optim
