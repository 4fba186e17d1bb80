#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcw/tensor.hpp"

namespace dcw {

template <class T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

/// Adam with bias correction. First/second moment buffers are kept per
/// parameter, aligned by position with the parameter list handed to step().
template <class T>
class Adam {
 public:
  explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  int64_t steps() const { return t_; }

  /// One update over all parameters; rejects non-finite gradients before
  /// touching any state, and zeroes gradients afterward.
  void step(std::vector<NamedTensor<T>>& params) {
    for (auto& p : params) {
      const auto* g = p.tensor.grad_if();
      if (!g) continue;
      for (T v : *g)
        if (!std::isfinite(static_cast<double>(v)))
          throw std::runtime_error("adam: non-finite gradient in parameter '" +
                                   p.name + "'");
    }
    if (m_.size() != params.size()) {
      m_.assign(params.size(), {});
      v_.assign(params.size(), {});
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t pi = 0; pi < params.size(); ++pi) {
      auto& p = params[pi].tensor;
      auto& g = p.grad();
      auto& m = m_[pi];
      auto& v = v_[pi];
      if (m.size() != g.size()) {
        m.assign(g.size(), T(0));
        v.assign(g.size(), T(0));
      }
      auto& w = p.values();
      for (size_t i = 0; i < g.size(); ++i) {
        m[i] = static_cast<T>(beta1_ * m[i] + (1.0 - beta1_) * g[i]);
        v[i] = static_cast<T>(beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i]);
        const double mh = m[i] / bc1;
        const double vh = v[i] / bc2;
        w[i] -= static_cast<T>(lr_ * mh / (std::sqrt(vh) + eps_));
      }
      p.zero_grad();
    }
  }

  double lr() const { return lr_; }
  double beta1() const { return beta1_; }
  double beta2() const { return beta2_; }
  double eps() const { return eps_; }

  // Checkpoint access.
  std::vector<std::vector<T>>& moment1() { return m_; }
  std::vector<std::vector<T>>& moment2() { return v_; }
  const std::vector<std::vector<T>>& moment1() const { return m_; }
  const std::vector<std::vector<T>>& moment2() const { return v_; }
  void set_steps(int64_t t) { t_ = t; }

 private:
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::vector<std::vector<T>> m_, v_;
};

/// Scales all gradients so their global L2 norm does not exceed max_norm.
/// Returns the pre-clip norm.
template <class T>
double clip_grad_norm(std::vector<NamedTensor<T>>& params, double max_norm) {
  double sq = 0;
  for (auto& p : params) {
    const auto* g = p.tensor.grad_if();
    if (!g) continue;
    for (T v : *g) sq += static_cast<double>(v) * static_cast<double>(v);
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const T s = static_cast<T>(max_norm / norm);
    for (auto& p : params) {
      const auto* g = p.tensor.grad_if();
      if (!g) continue;
      for (auto& v : p.tensor.grad()) v *= s;
    }
  }
  return norm;
}

/// Compares tape gradients of a scalar-valued function against central finite
/// differences and returns the maximum relative error, with the denominator
/// max(|analytic|, |numeric|, 1e-8). The function is evaluated twice up front;
/// a mismatch means it is not deterministic and is rejected.
template <class T>
double gradient_check(const std::function<Tensor<T>()>& f,
                      std::vector<Tensor<T>> params, double h = 1e-5) {
  const auto eval = [&]() -> double {
    NoTapeScope<T> no_tape;
    return static_cast<double>(f().item());
  };
  const double f0 = eval();
  const double f1 = eval();
  if (f0 != f1)
    throw std::runtime_error(
        "gradient_check: function is not deterministic (" +
        std::to_string(f0) + " vs " + std::to_string(f1) + ")");

  // analytic pass
  std::vector<std::vector<T>> analytic;
  {
    for (auto& p : params) {
      p.set_requires_grad(true);
      p.zero_grad();
    }
    Tape<T> tape;
    TapeScope<T> scope(tape);
    Tensor<T> loss = f();
    if (loss.requires_grad()) tape.backward(loss);  // else all gradients are 0
    for (auto& p : params) analytic.push_back(p.grad());
    for (auto& p : params) p.zero_grad();
  }
  // numeric pass
  double max_rel = 0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto& w = params[pi].values();
    for (size_t i = 0; i < w.size(); ++i) {
      const T saved = w[i];
      w[i] = static_cast<T>(saved + h);
      const double fp = eval();
      w[i] = static_cast<T>(saved - h);
      const double fm = eval();
      w[i] = saved;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = static_cast<double>(analytic[pi][i]);
      const double denom =
          std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      max_rel = std::max(max_rel, std::fabs(a - numeric) / denom);
    }
  }
  return max_rel;
}

}  // namespace dcw
