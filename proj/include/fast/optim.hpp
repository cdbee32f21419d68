#pragma once

#include <cmath>
#include <map>
#include <string>

#include "fast/error.hpp"
#include "fast/params.hpp"
#include "fast/tensor.hpp"

namespace fast {

struct AdamWOptions {
  Real learning_rate = 1e-3;
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real epsilon = 1e-8;
  Real weight_decay = 0.01;
};

/// Adam with decoupled weight decay:
///   theta -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta)
class AdamW {
 public:
  explicit AdamW(AdamWOptions opts) : opts_(opts) {
    if (!(opts_.learning_rate >= 0.0)) throw Error("learning rate must be non-negative");
  }

  const AdamWOptions& options() const { return opts_; }
  std::size_t steps() const { return t_; }

  void step(ParameterSet& params, const Gradients& grads) {
    ++t_;
    const Real bc1 = 1.0 - std::pow(opts_.beta1, static_cast<Real>(t_));
    const Real bc2 = 1.0 - std::pow(opts_.beta2, static_cast<Real>(t_));
    for (auto& [name, theta] : params) {
      auto git = grads.find(name);
      if (git == grads.end()) continue;
      const Tensor& g = git->second;
      kernels::require_same_shape(theta, g, "adamw");
      auto [mit, fresh] = m_.try_emplace(name, theta.rows(), theta.cols());
      Tensor& m = mit->second;
      Tensor& v = v_.try_emplace(name, theta.rows(), theta.cols()).first->second;
      (void)fresh;
      for (std::size_t i = 0; i < theta.size(); ++i) {
        m[i] = opts_.beta1 * m[i] + (1.0 - opts_.beta1) * g[i];
        v[i] = opts_.beta2 * v[i] + (1.0 - opts_.beta2) * g[i] * g[i];
        const Real update = (m[i] / bc1) / (std::sqrt(v[i] / bc2) + opts_.epsilon);
        theta[i] -= opts_.learning_rate * (update + opts_.weight_decay * theta[i]);
      }
    }
  }

 private:
  AdamWOptions opts_;
  std::size_t t_ = 0;
  std::map<std::string, Tensor> m_;
  std::map<std::string, Tensor> v_;
};

inline Real global_norm(const Gradients& grads) {
  Real s = 0.0;
  for (const auto& [_, g] : grads) s += kernels::squared_norm(g);
  return std::sqrt(s);
}

/// Rescales all gradients so that their joint L2 norm is at most `max_norm`.
/// Non-positive `max_norm` disables clipping. Returns the norm before clipping.
inline Real clip_global_norm(Gradients& grads, Real max_norm) {
  const Real norm = global_norm(grads);
  if (max_norm > 0.0 && norm > max_norm) {
    const Real s = max_norm / norm;
    for (auto& [_, g] : grads) {
      for (Real& v : g.data()) v *= s;
    }
  }
  return norm;
}

/// acc += g for every entry, allocating missing slots.
inline void accumulate(Gradients& acc, const Gradients& g) {
  for (const auto& [name, t] : g) {
    auto it = acc.find(name);
    if (it == acc.end()) {
      acc.emplace(name, t);
    } else {
      kernels::add_into(it->second, t);
    }
  }
}

inline void scale_gradients(Gradients& grads, Real s) {
  for (auto& [_, g] : grads) {
    for (Real& v : g.data()) v *= s;
  }
}

}  // namespace fast
