#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "nocguard/tensor.hpp"

namespace nocguard {

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam. Moments are kept in double regardless of parameter type.
template <class T>
class Adam {
 public:
  Adam() = default;
  Adam(const std::vector<Tensor<T>*>& params, AdamConfig cfg) : cfg_(cfg) {
    for (auto* p : params) {
      m_.emplace_back(p->size(), 0.0);
      v_.emplace_back(p->size(), 0.0);
    }
  }

  void step(const std::vector<Tensor<T>*>& params, const std::vector<const Tensor<T>*>& grads) {
    if (params.size() != m_.size() || grads.size() != m_.size())
      throw Error(ErrorCode::Shape, "adam: parameter list changed since construction");
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& p = *params[k];
      const auto& g = *grads[k];
      if (g.size() != p.size() || m_[k].size() != p.size())
        throw Error(ErrorCode::Shape, "adam: gradient shape " + shape_string(g.shape) + " vs parameter " +
                                          shape_string(p.shape));
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = static_cast<double>(g[i]);
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
        const double update = cfg_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.eps);
        p[i] = static_cast<T>(static_cast<double>(p[i]) - update);
      }
    }
  }

  double lr() const noexcept { return cfg_.lr; }
  void set_lr(double lr) noexcept { cfg_.lr = lr; }
  std::uint64_t steps() const noexcept { return t_; }
  const AdamConfig& config() const noexcept { return cfg_; }

 private:
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::uint64_t t_ = 0;
};

struct PlateauConfig {
  std::uint32_t plateau_patience = 15;
  std::uint32_t stop_patience = 60;
  double factor = 0.1;
  double tolerance = 1e-6;  // improvement must beat the best by more than this
};

/// Learning-rate plateau schedule and early stopping, fed one validation loss per epoch.
class PlateauMonitor {
 public:
  struct Decision {
    bool improved = false;
    bool lr_reduced = false;
    bool stop = false;
  };

  explicit PlateauMonitor(PlateauConfig cfg = {}) : cfg_(cfg) {}

  Decision observe(double val_loss, double& lr) {
    Decision d;
    if (val_loss < best_ - cfg_.tolerance) {
      best_ = val_loss;
      since_best_ = 0;
      since_drop_ = 0;
      d.improved = true;
      return d;
    }
    ++since_best_;
    ++since_drop_;
    if (since_drop_ >= cfg_.plateau_patience) {
      lr *= cfg_.factor;
      since_drop_ = 0;
      d.lr_reduced = true;
    }
    d.stop = since_best_ >= cfg_.stop_patience;
    return d;
  }

  double best() const noexcept { return best_; }
  std::uint32_t epochs_since_best() const noexcept { return since_best_; }

 private:
  PlateauConfig cfg_;
  double best_ = std::numeric_limits<double>::infinity();
  std::uint32_t since_best_ = 0;
  std::uint32_t since_drop_ = 0;
};

}  // namespace nocguard
