#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dcw {

using Shape = std::vector<int>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ']';
  return os.str();
}

template <class T>
class Tape;

/// Dense row-major tensor. A Tensor is a cheap handle onto shared storage;
/// ops create new tensors and, when a tape is active and an input requires
/// grad, record a backward closure onto that tape.
template <class T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return Tensor(std::move(shape), {}, requires_grad);
  }

  static Tensor full(Shape shape, T value, bool requires_grad = false) {
    Tensor t(std::move(shape), {}, requires_grad);
    std::fill(t.values().begin(), t.values().end(), value);
    return t;
  }

  static Tensor from_values(Shape shape, std::vector<T> values,
                            bool requires_grad = false) {
    if (shape_numel(shape) != static_cast<int64_t>(values.size()))
      throw std::invalid_argument("Tensor: shape " + shape_str(shape) +
                                  " does not match value count " +
                                  std::to_string(values.size()));
    Tensor t;
    t.p_ = std::make_shared<Payload>();
    t.p_->shape = std::move(shape);
    t.p_->values = std::move(values);
    t.p_->requires_grad = requires_grad;
    return t;
  }

  static Tensor scalar(T value, bool requires_grad = false) {
    return from_values({1}, {value}, requires_grad);
  }

  bool defined() const { return static_cast<bool>(p_); }
  const Shape& shape() const { return p_->shape; }
  int ndim() const { return static_cast<int>(p_->shape.size()); }
  int dim(int i) const { return p_->shape[i]; }
  int64_t size() const { return static_cast<int64_t>(p_->values.size()); }

  std::vector<T>& values() { return p_->values; }
  const std::vector<T>& values() const { return p_->values; }

  T item() const {
    if (size() != 1)
      throw std::invalid_argument("Tensor::item: tensor has " +
                                  std::to_string(size()) + " elements");
    return p_->values[0];
  }

  bool requires_grad() const { return p_ && p_->requires_grad; }
  void set_requires_grad(bool b) { p_->requires_grad = b; }

  /// Gradient buffer, same shape as values. Allocated zeroed on first use.
  std::vector<T>& grad() {
    if (p_->grad.size() != p_->values.size())
      p_->grad.assign(p_->values.size(), T(0));
    return p_->grad;
  }
  const std::vector<T>* grad_if() const {
    return p_->grad.size() == p_->values.size() ? &p_->grad : nullptr;
  }
  void zero_grad() {
    if (!p_->grad.empty()) std::fill(p_->grad.begin(), p_->grad.end(), T(0));
  }

  /// Same storage, detached from gradient flow.
  Tensor detach() const {
    Tensor t;
    t.p_ = std::make_shared<Payload>();
    t.p_->shape = p_->shape;
    t.p_->values = p_->values;
    t.p_->requires_grad = false;
    return t;
  }

  /// Storage identity, used by tests asserting bit-identical carry-over.
  const void* payload_id() const { return p_.get(); }

 private:
  struct Payload {
    Shape shape;
    std::vector<T> values;
    std::vector<T> grad;
    bool requires_grad = false;
  };

  Tensor(Shape shape, std::vector<T>, bool requires_grad) {
    p_ = std::make_shared<Payload>();
    p_->values.assign(static_cast<size_t>(shape_numel(shape)), T(0));
    p_->shape = std::move(shape);
    p_->requires_grad = requires_grad;
  }

  std::shared_ptr<Payload> p_;
};

/// Reverse-mode tape. Ops append their backward closures in execution order,
/// so replaying the list in reverse visits every node after all consumers.
template <class T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::function<void()> fn) { ops_.push_back(std::move(fn)); }
  size_t size() const { return ops_.size(); }

  void clear() { ops_.clear(); }

  /// Seeds d(loss)/d(loss) = 1, replays the tape backward, then consumes it.
  void backward(Tensor<T>& loss) {
    if (loss.size() != 1)
      throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                  shape_str(loss.shape()));
    if (!loss.requires_grad())
      throw std::invalid_argument("backward: loss is not on the active tape");
    loss.grad()[0] += T(1);
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
    clear();
  }

  static Tape*& active() {
    thread_local Tape* a = nullptr;
    return a;
  }

 private:
  std::vector<std::function<void()>> ops_;
};

/// RAII scope making a tape the active recording target for this thread.
template <class T>
class TapeScope {
 public:
  explicit TapeScope(Tape<T>& t) : prev_(Tape<T>::active()) {
    Tape<T>::active() = &t;
  }
  ~TapeScope() { Tape<T>::active() = prev_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape<T>* prev_;
};

/// RAII scope suspending recording (values-only evaluation).
template <class T>
class NoTapeScope {
 public:
  NoTapeScope() : prev_(Tape<T>::active()) { Tape<T>::active() = nullptr; }
  ~NoTapeScope() { Tape<T>::active() = prev_; }

 private:
  Tape<T>* prev_;
};

namespace detail {

template <class T>
inline bool taping(std::initializer_list<const Tensor<T>*> inputs) {
  if (!Tape<T>::active()) return false;
  for (const Tensor<T>* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

template <class T>
inline void mark(Tensor<T>& out) {
  out.set_requires_grad(true);
}

inline void check_shapes(const char* op, const Shape& a, const Shape& b) {
  if (a != b)
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a) + " vs " + shape_str(b));
}

inline void check_matrix(const char* op, const Shape& s) {
  if (s.size() != 2)
    throw std::invalid_argument(std::string(op) + ": expected matrix, got " +
                                shape_str(s));
}

inline void check_vector(const char* op, const Shape& s) {
  if (s.size() != 1)
    throw std::invalid_argument(std::string(op) + ": expected vector, got " +
                                shape_str(s));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise binary ops
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_shapes("add", a.shape(), b.shape());
  auto out = Tensor<T>::zeros(a.shape());
  const T* av = a.values().data();
  const T* bv = b.values().data();
  T* ov = out.values().data();
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) ov[i] = av[i] + bv[i];
  if (detail::taping<T>({&a, &b})) {
    detail::mark(out);
    Tensor<T> A = a, B = b, O = out;
    Tape<T>::active()->record([A, B, O]() mutable {
      const auto& g = O.grad();
      if (A.requires_grad()) {
        auto& ga = A.grad();
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (B.requires_grad()) {
        auto& gb = B.grad();
        for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      }
    });
  }
  return out;
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_shapes("sub", a.shape(), b.shape());
  auto out = Tensor<T>::zeros(a.shape());
  const T* av = a.values().data();
  const T* bv = b.values().data();
  T* ov = out.values().data();
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) ov[i] = av[i] - bv[i];
  if (detail::taping<T>({&a, &b})) {
    detail::mark(out);
    Tensor<T> A = a, B = b, O = out;
    Tape<T>::active()->record([A, B, O]() mutable {
      const auto& g = O.grad();
      if (A.requires_grad()) {
        auto& ga = A.grad();
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (B.requires_grad()) {
        auto& gb = B.grad();
        for (size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      }
    });
  }
  return out;
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_shapes("mul", a.shape(), b.shape());
  auto out = Tensor<T>::zeros(a.shape());
  const T* av = a.values().data();
  const T* bv = b.values().data();
  T* ov = out.values().data();
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) ov[i] = av[i] * bv[i];
  if (detail::taping<T>({&a, &b})) {
    detail::mark(out);
    Tensor<T> A = a, B = b, O = out;
    Tape<T>::active()->record([A, B, O]() mutable {
      const auto& g = O.grad();
      if (A.requires_grad()) {
        auto& ga = A.grad();
        const auto& bv2 = B.values();
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv2[i];
      }
      if (B.requires_grad()) {
        auto& gb = B.grad();
        const auto& av2 = A.values();
        for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av2[i];
      }
    });
  }
  return out;
}

template <class T>
Tensor<T> divide(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_shapes("divide", a.shape(), b.shape());
  auto out = Tensor<T>::zeros(a.shape());
  const T* av = a.values().data();
  const T* bv = b.values().data();
  T* ov = out.values().data();
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) ov[i] = av[i] / bv[i];
  if (detail::taping<T>({&a, &b})) {
    detail::mark(out);
    Tensor<T> A = a, B = b, O = out;
    Tape<T>::active()->record([A, B, O]() mutable {
      const auto& g = O.grad();
      const auto& av2 = A.values();
      const auto& bv2 = B.values();
      if (A.requires_grad()) {
        auto& ga = A.grad();
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / bv2[i];
      }
      if (B.requires_grad()) {
        auto& gb = B.grad();
        for (size_t i = 0; i < g.size(); ++i)
          gb[i] -= g[i] * av2[i] / (bv2[i] * bv2[i]);
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scalar broadcast (constant scalar, and 1-element tensor with gradient)
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> add_scalar(const Tensor<T>& a, T c) {
  auto out = Tensor<T>::zeros(a.shape());
  const T* av = a.values().data();
  T* ov = out.values().data();
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) ov[i] = av[i] + c;
  if (detail::taping<T>({&a})) {
    detail::mark(out);
    Tensor<T> A = a, O = out;
    Tape<T>::active()->record([A, O]() mutable {
      const auto& g = O.grad();
      auto& ga = A.grad();
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
  }
  return out;
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T c) {
  auto out = Tensor<T>::zeros(a.shape());
  const T* av = a.values().data();
  T* ov = out.values().data();
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) ov[i] = av[i] * c;
  if (detail::taping<T>({&a})) {
    detail::mark(out);
    Tensor<T> A = a, O = out;
    Tape<T>::active()->record([A, O, c]() mutable {
      const auto& g = O.grad();
      auto& ga = A.grad();
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c;
    });
  }
  return out;
}

/// Elementwise multiply by a 1-element tensor; gradient flows to both sides.
template <class T>
Tensor<T> mul_scalar(const Tensor<T>& a, const Tensor<T>& s) {
  if (s.size() != 1)
    throw std::invalid_argument("mul_scalar: scalar operand has shape " +
                                shape_str(s.shape()));
  auto out = Tensor<T>::zeros(a.shape());
  const T* av = a.values().data();
  const T sv = s.values()[0];
  T* ov = out.values().data();
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) ov[i] = av[i] * sv;
  if (detail::taping<T>({&a, &s})) {
    detail::mark(out);
    Tensor<T> A = a, S = s, O = out;
    Tape<T>::active()->record([A, S, O]() mutable {
      const auto& g = O.grad();
      const T sv2 = S.values()[0];
      if (A.requires_grad()) {
        auto& ga = A.grad();
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * sv2;
      }
      if (S.requires_grad()) {
        const auto& av2 = A.values();
        T acc = 0;
        for (size_t i = 0; i < g.size(); ++i) acc += g[i] * av2[i];
        S.grad()[0] += acc;
      }
    });
  }
  return out;
}

/// 1 - x, elementwise.
template <class T>
Tensor<T> one_minus(const Tensor<T>& a) {
  return add_scalar(scale(a, T(-1)), T(1));
}

// ---------------------------------------------------------------------------
// Matrix ops
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_matrix("matmul", a.shape());
  detail::check_matrix("matmul", b.shape());
  const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  if (k != k2)
    throw std::invalid_argument("matmul: shape mismatch " +
                                shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  auto out = Tensor<T>::zeros({m, n});
  const T* av = a.values().data();
  const T* bv = b.values().data();
  T* ov = out.values().data();
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < k; ++p) {
      const T aip = av[i * k + p];
      if (aip == T(0)) continue;
      const T* brow = bv + p * n;
      T* orow = ov + i * n;
      for (int j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  if (detail::taping<T>({&a, &b})) {
    detail::mark(out);
    Tensor<T> A = a, B = b, O = out;
    Tape<T>::active()->record([A, B, O, m, k, n]() mutable {
      const auto& g = O.grad();
      if (A.requires_grad()) {
        auto& ga = A.grad();
        const auto& bv2 = B.values();
        for (int i = 0; i < m; ++i)
          for (int p = 0; p < k; ++p) {
            T acc = 0;
            for (int j = 0; j < n; ++j) acc += g[i * n + j] * bv2[p * n + j];
            ga[i * k + p] += acc;
          }
      }
      if (B.requires_grad()) {
        auto& gb = B.grad();
        const auto& av2 = A.values();
        for (int p = 0; p < k; ++p)
          for (int i = 0; i < m; ++i) {
            const T aip = av2[i * k + p];
            if (aip == T(0)) continue;
            for (int j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
          }
      }
    });
  }
  return out;
}

template <class T>
Tensor<T> matvec(const Tensor<T>& a, const Tensor<T>& x) {
  detail::check_matrix("matvec", a.shape());
  detail::check_vector("matvec", x.shape());
  const int m = a.dim(0), k = a.dim(1);
  if (k != x.dim(0))
    throw std::invalid_argument("matvec: shape mismatch " +
                                shape_str(a.shape()) + " vs " +
                                shape_str(x.shape()));
  auto out = Tensor<T>::zeros({m});
  const T* av = a.values().data();
  const T* xv = x.values().data();
  T* ov = out.values().data();
  for (int i = 0; i < m; ++i) {
    const T* arow = av + static_cast<int64_t>(i) * k;
    T acc = 0;
    for (int j = 0; j < k; ++j) acc += arow[j] * xv[j];
    ov[i] = acc;
  }
  if (detail::taping<T>({&a, &x})) {
    detail::mark(out);
    Tensor<T> A = a, X = x, O = out;
    Tape<T>::active()->record([A, X, O, m, k]() mutable {
      const auto& g = O.grad();
      if (A.requires_grad()) {
        auto& ga = A.grad();
        const auto& xv2 = X.values();
        for (int i = 0; i < m; ++i) {
          const T gi = g[i];
          if (gi == T(0)) continue;
          T* grow = ga.data() + static_cast<int64_t>(i) * k;
          for (int j = 0; j < k; ++j) grow[j] += gi * xv2[j];
        }
      }
      if (X.requires_grad()) {
        auto& gx = X.grad();
        const auto& av2 = A.values();
        for (int i = 0; i < m; ++i) {
          const T gi = g[i];
          if (gi == T(0)) continue;
          const T* arow = av2.data() + static_cast<int64_t>(i) * k;
          for (int j = 0; j < k; ++j) gx[j] += gi * arow[j];
        }
      }
    });
  }
  return out;
}

/// A^T x for A of shape {m,k} and x of length m; result length k.
template <class T>
Tensor<T> matvec_t(const Tensor<T>& a, const Tensor<T>& x) {
  detail::check_matrix("matvec_t", a.shape());
  detail::check_vector("matvec_t", x.shape());
  const int m = a.dim(0), k = a.dim(1);
  if (m != x.dim(0))
    throw std::invalid_argument("matvec_t: shape mismatch " +
                                shape_str(a.shape()) + " vs " +
                                shape_str(x.shape()));
  auto out = Tensor<T>::zeros({k});
  const T* av = a.values().data();
  const T* xv = x.values().data();
  T* ov = out.values().data();
  for (int i = 0; i < m; ++i) {
    const T xi = xv[i];
    if (xi == T(0)) continue;
    const T* arow = av + static_cast<int64_t>(i) * k;
    for (int j = 0; j < k; ++j) ov[j] += xi * arow[j];
  }
  if (detail::taping<T>({&a, &x})) {
    detail::mark(out);
    Tensor<T> A = a, X = x, O = out;
    Tape<T>::active()->record([A, X, O, m, k]() mutable {
      const auto& g = O.grad();
      if (A.requires_grad()) {
        auto& ga = A.grad();
        const auto& xv2 = X.values();
        for (int i = 0; i < m; ++i) {
          const T xi = xv2[i];
          if (xi == T(0)) continue;
          T* grow = ga.data() + static_cast<int64_t>(i) * k;
          for (int j = 0; j < k; ++j) grow[j] += xi * g[j];
        }
      }
      if (X.requires_grad()) {
        auto& gx = X.grad();
        const auto& av2 = A.values();
        for (int i = 0; i < m; ++i) {
          const T* arow = av2.data() + static_cast<int64_t>(i) * k;
          T acc = 0;
          for (int j = 0; j < k; ++j) acc += arow[j] * g[j];
          gx[i] += acc;
        }
      }
    });
  }
  return out;
}

template <class T>
Tensor<T> outer(const Tensor<T>& x, const Tensor<T>& y) {
  detail::check_vector("outer", x.shape());
  detail::check_vector("outer", y.shape());
  const int m = x.dim(0), n = y.dim(0);
  auto out = Tensor<T>::zeros({m, n});
  const T* xv = x.values().data();
  const T* yv = y.values().data();
  T* ov = out.values().data();
  for (int i = 0; i < m; ++i) {
    const T xi = xv[i];
    T* orow = ov + static_cast<int64_t>(i) * n;
    for (int j = 0; j < n; ++j) orow[j] = xi * yv[j];
  }
  if (detail::taping<T>({&x, &y})) {
    detail::mark(out);
    Tensor<T> X = x, Y = y, O = out;
    Tape<T>::active()->record([X, Y, O, m, n]() mutable {
      const auto& g = O.grad();
      if (X.requires_grad()) {
        auto& gx = X.grad();
        const auto& yv2 = Y.values();
        for (int i = 0; i < m; ++i) {
          const T* grow = g.data() + static_cast<int64_t>(i) * n;
          T acc = 0;
          for (int j = 0; j < n; ++j) acc += grow[j] * yv2[j];
          gx[i] += acc;
        }
      }
      if (Y.requires_grad()) {
        auto& gy = Y.grad();
        const auto& xv2 = X.values();
        for (int i = 0; i < m; ++i) {
          const T xi = xv2[i];
          if (xi == T(0)) continue;
          const T* grow = g.data() + static_cast<int64_t>(i) * n;
          for (int j = 0; j < n; ++j) gy[j] += xi * grow[j];
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shape ops: concat, slice, split, gather, rows
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  int64_t total = 0;
  for (const auto& p : parts) {
    detail::check_vector("concat", p.shape());
    total += p.size();
  }
  auto out = Tensor<T>::zeros({static_cast<int>(total)});
  T* ov = out.values().data();
  int64_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.values().begin(), p.values().end(), ov + off);
    off += p.size();
  }
  bool rec = false;
  if (Tape<T>::active())
    for (const auto& p : parts)
      if (p.requires_grad()) rec = true;
  if (rec) {
    detail::mark(out);
    std::vector<Tensor<T>> P = parts;
    Tensor<T> O = out;
    Tape<T>::active()->record([P, O]() mutable {
      const auto& g = O.grad();
      int64_t off2 = 0;
      for (auto& p : P) {
        if (p.requires_grad()) {
          auto& gp = p.grad();
          for (int64_t i = 0; i < p.size(); ++i) gp[i] += g[off2 + i];
        }
        off2 += p.size();
      }
    });
  }
  return out;
}

template <class T>
Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b) {
  return concat(std::vector<Tensor<T>>{a, b});
}

template <class T>
Tensor<T> slice(const Tensor<T>& x, int begin, int end) {
  detail::check_vector("slice", x.shape());
  if (begin < 0 || end > x.dim(0) || begin > end)
    throw std::invalid_argument(
        "slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
        ") out of bounds for " + shape_str(x.shape()));
  const int n = end - begin;
  auto out = Tensor<T>::zeros({n});
  std::copy(x.values().begin() + begin, x.values().begin() + end,
            out.values().begin());
  if (detail::taping<T>({&x})) {
    detail::mark(out);
    Tensor<T> X = x, O = out;
    Tape<T>::active()->record([X, O, begin, n]() mutable {
      const auto& g = O.grad();
      auto& gx = X.grad();
      for (int i = 0; i < n; ++i) gx[begin + i] += g[i];
    });
  }
  return out;
}

template <class T>
std::vector<Tensor<T>> split(const Tensor<T>& x, const std::vector<int>& sizes) {
  std::vector<Tensor<T>> parts;
  int off = 0;
  for (int s : sizes) {
    parts.push_back(slice(x, off, off + s));
    off += s;
  }
  if (off != x.dim(0))
    throw std::invalid_argument("split: sizes sum to " + std::to_string(off) +
                                ", tensor has " + std::to_string(x.dim(0)));
  return parts;
}

/// Gather elements by index list. Indices are constants in the backward pass.
template <class T>
Tensor<T> gather(const Tensor<T>& x, const std::vector<int>& idx) {
  detail::check_vector("gather", x.shape());
  const int n = x.dim(0);
  auto out = Tensor<T>::zeros({static_cast<int>(idx.size())});
  T* ov = out.values().data();
  const T* xv = x.values().data();
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= n)
      throw std::invalid_argument("gather: index " + std::to_string(idx[i]) +
                                  " out of range for " + shape_str(x.shape()));
    ov[i] = xv[idx[i]];
  }
  if (detail::taping<T>({&x})) {
    detail::mark(out);
    Tensor<T> X = x, O = out;
    std::vector<int> I = idx;
    Tape<T>::active()->record([X, O, I]() mutable {
      const auto& g = O.grad();
      auto& gx = X.grad();
      for (size_t i = 0; i < I.size(); ++i) gx[I[i]] += g[i];
    });
  }
  return out;
}

/// Row r of a matrix as a vector (embedding lookup).
template <class T>
Tensor<T> take_row(const Tensor<T>& m, int r) {
  detail::check_matrix("take_row", m.shape());
  const int rows = m.dim(0), cols = m.dim(1);
  if (r < 0 || r >= rows)
    throw std::invalid_argument("take_row: row " + std::to_string(r) +
                                " out of range for " + shape_str(m.shape()));
  auto out = Tensor<T>::zeros({cols});
  const T* mv = m.values().data() + static_cast<int64_t>(r) * cols;
  std::copy(mv, mv + cols, out.values().begin());
  if (detail::taping<T>({&m})) {
    detail::mark(out);
    Tensor<T> M = m, O = out;
    Tape<T>::active()->record([M, O, r, cols]() mutable {
      const auto& g = O.grad();
      T* grow = M.grad().data() + static_cast<int64_t>(r) * cols;
      for (int j = 0; j < cols; ++j) grow[j] += g[j];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Elementwise nonlinearities
// ---------------------------------------------------------------------------

namespace detail {

template <class T, class FwdF, class BwdF>
Tensor<T> unary_op(const char*, const Tensor<T>& x, FwdF fwd, BwdF bwd) {
  auto out = Tensor<T>::zeros(x.shape());
  const T* xv = x.values().data();
  T* ov = out.values().data();
  const int64_t n = x.size();
  for (int64_t i = 0; i < n; ++i) ov[i] = fwd(xv[i]);
  if (taping<T>({&x})) {
    mark(out);
    Tensor<T> X = x, O = out;
    Tape<T>::active()->record([X, O, bwd]() mutable {
      const auto& g = O.grad();
      const auto& xv2 = X.values();
      const auto& ov2 = O.values();
      auto& gx = X.grad();
      for (size_t i = 0; i < g.size(); ++i)
        gx[i] += g[i] * bwd(xv2[i], ov2[i]);
    });
  }
  return out;
}

}  // namespace detail

template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return detail::unary_op(
      "sigmoid", x,
      [](T v) {
        // evaluate on the negative side to avoid exp overflow
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <class T>
Tensor<T> tanh(const Tensor<T>& x) {
  return detail::unary_op(
      "tanh", x, [](T v) { return std::tanh(v); },
      [](T, T y) { return T(1) - y * y; });
}

template <class T>
Tensor<T> exp(const Tensor<T>& x) {
  return detail::unary_op(
      "exp", x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <class T>
Tensor<T> log(const Tensor<T>& x) {
  return detail::unary_op(
      "log", x, [](T v) { return std::log(v); },
      [](T v, T) { return T(1) / v; });
}

template <class T>
Tensor<T> sqrt(const Tensor<T>& x) {
  return detail::unary_op(
      "sqrt", x, [](T v) { return std::sqrt(v); },
      [](T, T y) { return T(0.5) / std::max(y, T(1e-30)); });
}

/// 1 + log(1 + exp(x)), elementwise; output strictly greater than 1.
template <class T>
Tensor<T> oneplus(const Tensor<T>& x) {
  return detail::unary_op(
      "oneplus", x,
      [](T v) {
        if (v > T(0)) return T(1) + v + std::log1p(std::exp(-v));
        return T(1) + std::log1p(std::exp(v));
      },
      [](T v, T) {
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      });
}

/// Clamp to [0,1]; gradient passes only strictly inside the interval.
template <class T>
Tensor<T> clamp01(const Tensor<T>& x) {
  return detail::unary_op(
      "clamp01", x,
      [](T v) { return std::min(std::max(v, T(0)), T(1)); },
      [](T v, T) { return (v > T(0) && v < T(1)) ? T(1) : T(0); });
}

// ---------------------------------------------------------------------------
// Reductions and fused ops
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc = 0;
  for (T v : x.values()) acc += v;
  auto out = Tensor<T>::scalar(acc);
  if (detail::taping<T>({&x})) {
    detail::mark(out);
    Tensor<T> X = x, O = out;
    Tape<T>::active()->record([X, O]() mutable {
      const T g = O.grad()[0];
      auto& gx = X.grad();
      for (size_t i = 0; i < gx.size(); ++i) gx[i] += g;
    });
  }
  return out;
}

template <class T>
Tensor<T> mean(const Tensor<T>& x) {
  return scale(sum(x), T(1) / static_cast<T>(x.size()));
}

/// Numerically stable softmax over a vector.
template <class T>
Tensor<T> softmax(const Tensor<T>& x) {
  detail::check_vector("softmax", x.shape());
  if (x.size() == 0) throw std::invalid_argument("softmax: empty vector");
  const auto& xv = x.values();
  const T mx = *std::max_element(xv.begin(), xv.end());
  auto out = Tensor<T>::zeros(x.shape());
  auto& ov = out.values();
  T z = 0;
  for (size_t i = 0; i < xv.size(); ++i) {
    ov[i] = std::exp(xv[i] - mx);
    z += ov[i];
  }
  for (auto& v : ov) v /= z;
  if (detail::taping<T>({&x})) {
    detail::mark(out);
    Tensor<T> X = x, O = out;
    Tape<T>::active()->record([X, O]() mutable {
      const auto& g = O.grad();
      const auto& y = O.values();
      auto& gx = X.grad();
      T dot = 0;
      for (size_t i = 0; i < g.size(); ++i) dot += g[i] * y[i];
      for (size_t i = 0; i < g.size(); ++i) gx[i] += y[i] * (g[i] - dot);
    });
  }
  return out;
}

/// a.b / (|a||b| + eps); eps guards freshly zeroed vectors.
template <class T>
Tensor<T> cosine_similarity(const Tensor<T>& a, const Tensor<T>& b,
                            T eps = T(1e-8)) {
  detail::check_vector("cosine_similarity", a.shape());
  detail::check_shapes("cosine_similarity", a.shape(), b.shape());
  const auto& av = a.values();
  const auto& bv = b.values();
  T dot = 0, na2 = 0, nb2 = 0;
  for (size_t i = 0; i < av.size(); ++i) {
    dot += av[i] * bv[i];
    na2 += av[i] * av[i];
    nb2 += bv[i] * bv[i];
  }
  const T na = std::sqrt(na2), nb = std::sqrt(nb2);
  const T denom = na * nb + eps;
  auto out = Tensor<T>::scalar(dot / denom);
  if (detail::taping<T>({&a, &b})) {
    detail::mark(out);
    Tensor<T> A = a, B = b, O = out;
    Tape<T>::active()->record([A, B, O, dot, na, nb, denom]() mutable {
      const T g = O.grad()[0];
      const auto& av2 = A.values();
      const auto& bv2 = B.values();
      const T c = dot / denom;
      if (A.requires_grad()) {
        auto& ga = A.grad();
        const T ra = na > T(0) ? nb * c / (denom * na) : T(0);
        for (size_t i = 0; i < av2.size(); ++i)
          ga[i] += g * (bv2[i] / denom - ra * av2[i]);
      }
      if (B.requires_grad()) {
        auto& gb = B.grad();
        const T rb = nb > T(0) ? na * c / (denom * nb) : T(0);
        for (size_t i = 0; i < bv2.size(); ++i)
          gb[i] += g * (av2[i] / denom - rb * bv2[i]);
      }
    });
  }
  return out;
}

/// Cosine similarity of every row of M against key k; result length N.
template <class T>
Tensor<T> row_cosine(const Tensor<T>& m, const Tensor<T>& k, T eps = T(1e-8)) {
  detail::check_matrix("row_cosine", m.shape());
  detail::check_vector("row_cosine", k.shape());
  const int rows = m.dim(0), cols = m.dim(1);
  if (cols != k.dim(0))
    throw std::invalid_argument("row_cosine: shape mismatch " +
                                shape_str(m.shape()) + " vs " +
                                shape_str(k.shape()));
  const T* mv = m.values().data();
  const T* kv = k.values().data();
  T nk2 = 0;
  for (int j = 0; j < cols; ++j) nk2 += kv[j] * kv[j];
  const T nk = std::sqrt(nk2);
  auto out = Tensor<T>::zeros({rows});
  T* ov = out.values().data();
  std::vector<T> dots(rows), norms(rows);
  for (int i = 0; i < rows; ++i) {
    const T* row = mv + static_cast<int64_t>(i) * cols;
    T dot = 0, nr2 = 0;
    for (int j = 0; j < cols; ++j) {
      dot += row[j] * kv[j];
      nr2 += row[j] * row[j];
    }
    dots[i] = dot;
    norms[i] = std::sqrt(nr2);
    ov[i] = dot / (norms[i] * nk + eps);
  }
  if (detail::taping<T>({&m, &k})) {
    detail::mark(out);
    Tensor<T> M = m, K = k, O = out;
    Tape<T>::active()->record(
        [M, K, O, dots, norms, nk, eps, rows, cols]() mutable {
          const auto& g = O.grad();
          const auto& mv2 = M.values();
          const auto& kv2 = K.values();
          const bool gm = M.requires_grad(), gk = K.requires_grad();
          for (int i = 0; i < rows; ++i) {
            const T gi = g[i];
            if (gi == T(0)) continue;
            const T denom = norms[i] * nk + eps;
            const T c = dots[i] / denom;
            const T* row = mv2.data() + static_cast<int64_t>(i) * cols;
            if (gm) {
              T* grow = M.grad().data() + static_cast<int64_t>(i) * cols;
              const T rm = norms[i] > T(0) ? nk * c / (denom * norms[i]) : T(0);
              for (int j = 0; j < cols; ++j)
                grow[j] += gi * (kv2[j] / denom - rm * row[j]);
            }
            if (gk) {
              auto& gkv = K.grad();
              const T rk = nk > T(0) ? norms[i] * c / (denom * nk) : T(0);
              for (int j = 0; j < cols; ++j)
                gkv[j] += gi * (row[j] / denom - rk * kv2[j]);
            }
          }
        });
  }
  return out;
}

/// Categorical cross-entropy of a logits vector against a target index,
/// computed as logsumexp(z) - z[target].
template <class T>
Tensor<T> cross_entropy_logits(const Tensor<T>& logits, int target) {
  detail::check_vector("cross_entropy_logits", logits.shape());
  if (target < 0 || target >= logits.dim(0))
    throw std::invalid_argument("cross_entropy_logits: target " +
                                std::to_string(target) + " out of range for " +
                                shape_str(logits.shape()));
  const auto& zv = logits.values();
  const T mx = *std::max_element(zv.begin(), zv.end());
  T z = 0;
  for (T v : zv) z += std::exp(v - mx);
  const T lse = mx + std::log(z);
  auto out = Tensor<T>::scalar(lse - zv[target]);
  if (detail::taping<T>({&logits})) {
    detail::mark(out);
    Tensor<T> L = logits, O = out;
    Tape<T>::active()->record([L, O, target, mx, z]() mutable {
      const T g = O.grad()[0];
      const auto& zv2 = L.values();
      auto& gl = L.grad();
      for (size_t i = 0; i < zv2.size(); ++i) {
        T p = std::exp(zv2[i] - mx) / z;
        gl[i] += g * (p - (static_cast<int>(i) == target ? T(1) : T(0)));
      }
    });
  }
  return out;
}

/// Square matrix with the diagonal forced to zero.
template <class T>
Tensor<T> zero_diag(const Tensor<T>& m) {
  detail::check_matrix("zero_diag", m.shape());
  if (m.dim(0) != m.dim(1))
    throw std::invalid_argument("zero_diag: matrix not square " +
                                shape_str(m.shape()));
  const int n = m.dim(0);
  auto out = Tensor<T>::zeros(m.shape());
  out.values() = m.values();
  for (int i = 0; i < n; ++i) out.values()[static_cast<int64_t>(i) * n + i] = 0;
  if (detail::taping<T>({&m})) {
    detail::mark(out);
    Tensor<T> M = m, O = out;
    Tape<T>::active()->record([M, O, n]() mutable {
      const auto& g = O.grad();
      auto& gm = M.grad();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          if (i != j) gm[static_cast<int64_t>(i) * n + j] +=
              g[static_cast<int64_t>(i) * n + j];
    });
  }
  return out;
}

/// Index of the largest element; ties broken by lowest index. Not recorded.
template <class T>
int argmax_index(const Tensor<T>& x) {
  detail::check_vector("argmax_index", x.shape());
  if (x.size() == 0) throw std::invalid_argument("argmax_index: empty vector");
  const auto& v = x.values();
  int best = 0;
  for (int i = 1; i < x.dim(0); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace dcw
