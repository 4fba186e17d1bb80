#pragma once

#include <numeric>
#include <utility>
#include <vector>

#include "dcw/tensor.hpp"

namespace dcw {

enum class Phase { Encode, Decode };

/// External memory carried across time steps: contents M {N,D}, usage u {N},
/// precedence p {N}, temporal link matrix L {N,N}, and the previous write /
/// read weightings. States are values; a step returns a new state.
template <class T>
struct MemoryState {
  Tensor<T> contents;                // {N, D}
  Tensor<T> usage;                   // {N}
  Tensor<T> precedence;              // {N}
  Tensor<T> link;                    // {N, N}
  Tensor<T> write_w;                 // {N}
  std::vector<Tensor<T>> read_w;     // R x {N}

  int slots() const { return contents.dim(0); }
  int word_size() const { return contents.dim(1); }
  int read_heads() const { return static_cast<int>(read_w.size()); }

  /// Fresh memory: contents near a small constant so cosine similarity is
  /// defined, everything else zero. Each row gets a slightly different
  /// direction; bit-identical rows would tie the usage sort exactly, and the
  /// allocation weighting is discontinuous at ties.
  static MemoryState fresh(int slots, int word_size, int read_heads,
                           T init_value = T(1e-2)) {
    MemoryState s;
    s.contents = Tensor<T>::full({slots, word_size}, init_value);
    auto& m = s.contents.values();
    for (int i = 0; i < slots; ++i)
      for (int j = 0; j < word_size; ++j)
        m[static_cast<int64_t>(i) * word_size + j] *=
            T(1) + T((static_cast<uint64_t>(i) * word_size + j) * 2654435761u %
                     97u) / T(97);
    s.usage = Tensor<T>::zeros({slots});
    s.precedence = Tensor<T>::zeros({slots});
    s.link = Tensor<T>::zeros({slots, slots});
    s.write_w = Tensor<T>::zeros({slots});
    s.read_w.assign(read_heads, Tensor<T>());
    for (auto& w : s.read_w) w = Tensor<T>::zeros({slots});
    return s;
  }
};

/// Parsed controller emissions driving one memory step. Activations are
/// already applied: strengths through oneplus (>= 1), gates and erase through
/// sigmoid, read modes through a per-head softmax.
template <class T>
struct InterfaceVector {
  std::vector<Tensor<T>> read_keys;       // R x {D}
  std::vector<Tensor<T>> read_strengths;  // R x {1}
  Tensor<T> write_key;                    // {D}
  Tensor<T> write_strength;               // {1}
  Tensor<T> erase;                        // {D}
  Tensor<T> write_vec;                    // {D}
  std::vector<Tensor<T>> free_gates;      // R x {1}
  Tensor<T> alloc_gate;                   // {1}
  Tensor<T> write_gate;                   // {1}
  std::vector<Tensor<T>> read_modes;      // R x {3}, each on the simplex
};

inline int interface_size(int read_heads, int word_size) {
  return (read_heads + 3) * word_size + 5 * read_heads + 3;
}

/// Splits a raw controller emission of length (R+3)*D + 5R + 3 into the
/// interface fields, in the fixed order
/// [read keys, read strengths, write key, write strength, erase, write vec,
///  free gates, alloc gate, write gate, read modes].
template <class T>
InterfaceVector<T> parse_interface(const Tensor<T>& raw, int read_heads,
                                   int word_size) {
  const int expected = interface_size(read_heads, word_size);
  if (raw.ndim() != 1 || raw.dim(0) != expected)
    throw std::invalid_argument(
        "parse_interface: expected length " + std::to_string(expected) +
        ", got " + shape_str(raw.shape()));
  InterfaceVector<T> iface;
  int off = 0;
  auto take = [&](int n) {
    auto t = slice(raw, off, off + n);
    off += n;
    return t;
  };
  for (int k = 0; k < read_heads; ++k)
    iface.read_keys.push_back(take(word_size));
  for (int k = 0; k < read_heads; ++k)
    iface.read_strengths.push_back(oneplus(take(1)));
  iface.write_key = take(word_size);
  iface.write_strength = oneplus(take(1));
  iface.erase = sigmoid(take(word_size));
  iface.write_vec = take(word_size);
  for (int k = 0; k < read_heads; ++k)
    iface.free_gates.push_back(sigmoid(take(1)));
  iface.alloc_gate = sigmoid(take(1));
  iface.write_gate = sigmoid(take(1));
  for (int k = 0; k < read_heads; ++k)
    iface.read_modes.push_back(softmax(take(3)));
  return iface;
}

/// Content addressing: softmax over strength-scaled cosine similarity of the
/// key against every memory row.
template <class T>
Tensor<T> content_weighting(const Tensor<T>& contents, const Tensor<T>& key,
                            const Tensor<T>& strength) {
  return softmax(mul_scalar(row_cosine(contents, key), strength));
}

/// Usage update: locations written last step become used, locations whose
/// free gate fires on a read are released.
template <class T>
Tensor<T> update_usage(const Tensor<T>& usage_prev, const Tensor<T>& write_w_prev,
                       const std::vector<Tensor<T>>& read_w_prev,
                       const std::vector<Tensor<T>>& free_gates) {
  // retention = prod_k (1 - f_k * w_prev^rk)
  Tensor<T> retention = Tensor<T>::full(usage_prev.shape(), T(1));
  for (size_t k = 0; k < read_w_prev.size(); ++k)
    retention = mul(retention,
                    one_minus(mul_scalar(read_w_prev[k], free_gates[k])));
  auto written = sub(add(usage_prev, write_w_prev), mul(usage_prev, write_w_prev));
  return mul(written, retention);
}

/// Allocation weighting over ascending usage order:
/// a[phi_j] = (1 - u[phi_j]) * prod_{i<j} u[phi_i].
/// The sort permutation is a constant in the backward pass; ties break on the
/// lowest index.
template <class T>
Tensor<T> allocation_weighting(const Tensor<T>& usage) {
  detail::check_vector("allocation_weighting", usage.shape());
  const int n = usage.dim(0);
  const auto& uv = usage.values();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return uv[a] < uv[b]; });
  auto out = Tensor<T>::zeros({n});
  auto& av = out.values();
  T running = 1;
  std::vector<T> prefix(n);  // prefix[j] = prod_{i<j} u[order[i]]
  for (int j = 0; j < n; ++j) {
    prefix[j] = running;
    av[order[j]] = (T(1) - uv[order[j]]) * running;
    running *= uv[order[j]];
  }
  if (detail::taping<T>({&usage})) {
    detail::mark(out);
    Tensor<T> U = usage, O = out;
    Tape<T>::active()->record([U, O, order, prefix, n]() mutable {
      const auto& g = O.grad();
      const auto& uv2 = U.values();
      auto& gu = U.grad();
      // In sorted coordinates: a_j = (1-u_j) P_j with P_j = prod_{i<j} u_i.
      // d a_j / d u_k = -P_j            (k == j)
      //               = (1-u_j) P_k prod_{k<i<j} u_i   (k < j)
      for (int k = 0; k < n; ++k) {
        const int loc_k = order[k];
        T acc = -g[loc_k] * prefix[k];
        T run = prefix[k];
        for (int j = k + 1; j < n; ++j) {
          const int loc_j = order[j];
          acc += g[loc_j] * (T(1) - uv2[loc_j]) * run;
          run *= uv2[loc_j];
        }
        gu[loc_k] += acc;
      }
    });
  }
  return out;
}

/// Final write weighting: gate-scaled interpolation between allocation and
/// content addressing.
template <class T>
Tensor<T> write_weighting(const Tensor<T>& write_gate,
                          const Tensor<T>& alloc_gate, const Tensor<T>& alloc,
                          const Tensor<T>& content_w) {
  auto mixed = add(mul_scalar(alloc, alloc_gate),
                   mul_scalar(content_w, one_minus(alloc_gate)));
  return mul_scalar(mixed, write_gate);
}

/// Temporal link update. Writing to location i removes old links to and from
/// i and adds a link from the previously written location:
/// L[i,j] = (1 - w[i] - w[j]) L_prev[i,j] + w[i] p_prev[j], diagonal zero.
/// Precedence: p = (1 - sum(w)) p_prev + w.
template <class T>
std::pair<Tensor<T>, Tensor<T>> update_link(const Tensor<T>& link_prev,
                                            const Tensor<T>& precedence_prev,
                                            const Tensor<T>& write_w) {
  const int n = write_w.dim(0);
  auto ones = Tensor<T>::full({n}, T(1));
  auto keep = one_minus(add(outer(write_w, ones), outer(ones, write_w)));
  auto link = zero_diag(
      clamp01(add(mul(link_prev, keep), outer(write_w, precedence_prev))));
  auto precedence =
      add(mul_scalar(precedence_prev, one_minus(sum(write_w))), write_w);
  return {link, precedence};
}

/// Read weighting: modes blend backward (L^T w_prev), content, and forward
/// (L w_prev) addressing, in that order.
template <class T>
Tensor<T> read_weighting(const Tensor<T>& link, const Tensor<T>& read_w_prev,
                         const Tensor<T>& content_r, const Tensor<T>& modes) {
  auto backward_w = matvec_t(link, read_w_prev);
  auto forward_w = matvec(link, read_w_prev);
  auto m1 = slice(modes, 0, 1);
  auto m2 = slice(modes, 1, 2);
  auto m3 = slice(modes, 2, 3);
  return add(add(mul_scalar(backward_w, m1), mul_scalar(content_r, m2)),
             mul_scalar(forward_w, m3));
}

/// Read values r_k = sum_i w_k[i] M(i).
template <class T>
std::vector<Tensor<T>> read_memory(const Tensor<T>& contents,
                                   const std::vector<Tensor<T>>& read_w) {
  std::vector<Tensor<T>> reads;
  reads.reserve(read_w.size());
  for (const auto& w : read_w) reads.push_back(matvec_t(contents, w));
  return reads;
}

/// Write-protected memory update: erase and write only while encoding, the
/// decode branch returns the previous contents untouched.
template <class T>
Tensor<T> update_memory(const Tensor<T>& contents_prev, const Tensor<T>& write_w,
                        const Tensor<T>& erase, const Tensor<T>& write_vec,
                        Phase phase) {
  if (phase == Phase::Decode) return contents_prev;
  auto keep = one_minus(outer(write_w, erase));
  return add(mul(contents_prev, keep), outer(write_w, write_vec));
}

/// One full memory step. Encode runs the write path then the read path;
/// decode freezes all write-side state (contents, usage, precedence, link
/// carried over; write weighting forced to zero) and runs only the read path.
template <class T>
std::pair<MemoryState<T>, std::vector<Tensor<T>>> memory_step(
    const MemoryState<T>& state, const InterfaceVector<T>& iface, Phase phase) {
  MemoryState<T> next;
  if (phase == Phase::Encode) {
    next.usage = update_usage(state.usage, state.write_w, state.read_w,
                              iface.free_gates);
    auto alloc = allocation_weighting(next.usage);
    auto content_w =
        content_weighting(state.contents, iface.write_key, iface.write_strength);
    next.write_w =
        write_weighting(iface.write_gate, iface.alloc_gate, alloc, content_w);
    next.contents = update_memory(state.contents, next.write_w, iface.erase,
                                  iface.write_vec, phase);
    auto lp = update_link(state.link, state.precedence, next.write_w);
    next.link = lp.first;
    next.precedence = lp.second;
  } else {
    next.contents = state.contents;
    next.usage = state.usage;
    next.precedence = state.precedence;
    next.link = state.link;
    next.write_w = Tensor<T>::zeros({state.slots()});
  }
  next.read_w.reserve(state.read_w.size());
  for (size_t k = 0; k < state.read_w.size(); ++k) {
    auto content_r = content_weighting(next.contents, iface.read_keys[k],
                                       iface.read_strengths[k]);
    next.read_w.push_back(
        read_weighting(next.link, state.read_w[k], content_r,
                       iface.read_modes[k]));
  }
  auto reads = read_memory(next.contents, next.read_w);
  return {std::move(next), std::move(reads)};
}

}  // namespace dcw
