#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dcw/memory.hpp"
#include "dcw/adam.hpp"
#include "dcw/tensor.hpp"
#include "dcw/tokens.hpp"

namespace dcw {

enum class Variant { Seq2Seq, DNC, DNC_WP, DC_MANN, DCW_MANN };

inline std::string variant_name(Variant v) {
  switch (v) {
    case Variant::Seq2Seq: return "seq2seq";
    case Variant::DNC: return "dnc";
    case Variant::DNC_WP: return "dnc-wp";
    case Variant::DC_MANN: return "dc-mann";
    case Variant::DCW_MANN: return "dcw-mann";
  }
  return "?";
}

inline Variant variant_from_name(const std::string& s) {
  if (s == "seq2seq") return Variant::Seq2Seq;
  if (s == "dnc") return Variant::DNC;
  if (s == "dnc-wp") return Variant::DNC_WP;
  if (s == "dc-mann") return Variant::DC_MANN;
  if (s == "dcw-mann") return Variant::DCW_MANN;
  throw std::invalid_argument("unknown model variant '" + s + "'");
}

struct ModelConfig {
  Variant variant = Variant::DCW_MANN;
  int hidden = 256;
  int embed = 64;
  int mem_slots = 128;
  int word_size = 128;
  int read_heads = 1;
  int vocab_in = 0;
  int vocab_out = 0;
  int decode_cap = 40;            // inference length cap
  bool teacher_forcing = false;
  std::string precision = "f64";  // f64 | f32

  bool has_memory() const { return variant != Variant::Seq2Seq; }
  bool dual_controller() const {
    return variant == Variant::Seq2Seq || variant == Variant::DC_MANN ||
           variant == Variant::DCW_MANN;
  }
  bool write_protected_decode() const {
    return variant == Variant::DNC_WP || variant == Variant::DCW_MANN;
  }
  int controller_input() const {
    return embed + (has_memory() ? read_heads * word_size : 0);
  }
  int head_input() const {
    return hidden + (has_memory() ? read_heads * word_size : 0);
  }

  void validate() const {
    if (hidden <= 0 || embed <= 0 || vocab_in <= 0 || vocab_out <= 0 ||
        decode_cap <= 0)
      throw std::invalid_argument("model config: extents must be positive");
    if (has_memory() && (mem_slots <= 0 || word_size <= 0 || read_heads <= 0))
      throw std::invalid_argument("model config: memory extents must be positive");
    if (precision != "f64" && precision != "f32")
      throw std::invalid_argument("model config: precision must be f64 or f32");
  }
};

template <class T>
struct ControllerState {
  Tensor<T> h;
  Tensor<T> c;
  static ControllerState zeros(int hidden) {
    return {Tensor<T>::zeros({hidden}), Tensor<T>::zeros({hidden})};
  }
};

/// Fused LSTM weights: W {4H, in+H} over [x; h], bias {4H}; gate row order
/// is input, forget, output, candidate.
template <class T>
struct LstmParams {
  Tensor<T> W;
  Tensor<T> b;
};

template <class T>
ControllerState<T> lstm_cell(const Tensor<T>& x, const ControllerState<T>& state,
                             const LstmParams<T>& params) {
  const int hidden = state.h.dim(0);
  const int in = x.dim(0);
  if (params.W.dim(1) != in + hidden || params.W.dim(0) != 4 * hidden)
    throw std::invalid_argument(
        "lstm_cell: weight shape " + shape_str(params.W.shape()) +
        " does not fit input " + shape_str(x.shape()) + " + hidden " +
        std::to_string(hidden));
  auto z = add(matvec(params.W, concat(x, state.h)), params.b);
  auto gates = split(z, {hidden, hidden, hidden, hidden});
  auto gi = sigmoid(gates[0]);
  auto gf = sigmoid(gates[1]);
  auto go = sigmoid(gates[2]);
  auto gc = tanh(gates[3]);
  auto c = add(mul(gf, state.c), mul(gi, gc));
  auto h = mul(go, tanh(c));
  return {h, c};
}

/// One-hot at the argmax, ties to the lowest index. The result is a constant:
/// no gradient flows through this operation.
template <class T>
Tensor<T> onehot_argmax(const Tensor<T>& logits) {
  const int idx = argmax_index(logits);
  auto out = Tensor<T>::zeros(logits.shape());
  out.values()[idx] = T(1);
  return out;
}

template <class T>
struct ModelParams {
  ModelConfig config;
  Tensor<T> embed_in;    // {vocab_in, E}
  Tensor<T> embed_out;   // {vocab_out, E}
  LstmParams<T> enc;     // encoder, or the single shared controller
  LstmParams<T> dec;     // decoder; only for dual-controller variants
  Tensor<T> iface_enc_W, iface_enc_b;  // controller -> interface projection
  Tensor<T> iface_dec_W, iface_dec_b;  // decode-side projection (dual + memory)
  Tensor<T> head_W, head_b;            // output head

  /// Stable name -> tensor listing for the optimizer and checkpoints.
  std::vector<NamedTensor<T>> named() {
    std::vector<NamedTensor<T>> out;
    out.push_back({"embed_in", embed_in});
    out.push_back({"embed_out", embed_out});
    out.push_back({"enc.lstm.W", enc.W});
    out.push_back({"enc.lstm.b", enc.b});
    if (config.dual_controller()) {
      out.push_back({"dec.lstm.W", dec.W});
      out.push_back({"dec.lstm.b", dec.b});
    }
    if (config.has_memory()) {
      out.push_back({"enc.iface.W", iface_enc_W});
      out.push_back({"enc.iface.b", iface_enc_b});
      if (config.dual_controller()) {
        out.push_back({"dec.iface.W", iface_dec_W});
        out.push_back({"dec.iface.b", iface_dec_b});
      }
    }
    out.push_back({"head.W", head_W});
    out.push_back({"head.b", head_b});
    return out;
  }

  int64_t parameter_count() {
    int64_t n = 0;
    for (auto& p : named()) n += p.tensor.size();
    return n;
  }
};

/// Builds the requested variant with deterministic initialization: weights
/// uniform(-0.1, 0.1) from the seed, biases zero.
template <class T>
ModelParams<T> build_model(const ModelConfig& config, uint64_t seed) {
  config.validate();
  ModelParams<T> p;
  p.config = config;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-0.1, 0.1);
  auto init = [&](Shape shape, bool zero = false) {
    auto t = Tensor<T>::zeros(std::move(shape), true);
    if (!zero)
      for (auto& v : t.values()) v = static_cast<T>(dist(rng));
    return t;
  };
  const int in = config.controller_input();
  const int hid = config.hidden;
  p.embed_in = init({config.vocab_in, config.embed});
  p.embed_out = init({config.vocab_out, config.embed});
  p.enc.W = init({4 * hid, in + hid});
  p.enc.b = init({4 * hid}, true);
  if (config.dual_controller()) {
    p.dec.W = init({4 * hid, in + hid});
    p.dec.b = init({4 * hid}, true);
  }
  if (config.has_memory()) {
    const int iface = interface_size(config.read_heads, config.word_size);
    p.iface_enc_W = init({iface, hid});
    p.iface_enc_b = init({iface}, true);
    if (config.dual_controller()) {
      p.iface_dec_W = init({iface, hid});
      p.iface_dec_b = init({iface}, true);
    }
  }
  p.head_W = init({config.vocab_out, config.head_input()});
  p.head_b = init({config.vocab_out}, true);
  return p;
}

struct ReadModeLogEntry {
  int step;
  Phase phase;
  std::array<double, 3> pi;
};

/// Per-step memory snapshot for inspection tooling.
struct StepTrace {
  int step;
  Phase phase;
  std::vector<double> write_w;
  std::vector<double> usage;
  std::vector<std::vector<double>> read_w;
  std::vector<std::array<double, 3>> pi;
};

struct ForwardLogs {
  std::vector<ReadModeLogEntry> read_modes;
  std::vector<StepTrace> trace;
  bool want_trace = false;
};

enum class RunMode { Train, Infer };

template <class T>
struct StepIo {
  ControllerState<T> state;
  MemoryState<T> memory;
  std::vector<Tensor<T>> reads;
};

namespace detail {

template <class T>
void log_memory_step(const ModelConfig& config, const MemoryState<T>& mem,
                     const InterfaceVector<T>& iface, int step, Phase phase,
                     ForwardLogs* logs) {
  if (!logs) return;
  for (size_t k = 0; k < iface.read_modes.size(); ++k) {
    const auto& pv = iface.read_modes[k].values();
    logs->read_modes.push_back(
        {step, phase,
         {static_cast<double>(pv[0]), static_cast<double>(pv[1]),
          static_cast<double>(pv[2])}});
  }
  if (!logs->want_trace) return;
  StepTrace t;
  t.step = step;
  t.phase = phase;
  t.write_w.assign(mem.write_w.values().begin(), mem.write_w.values().end());
  t.usage.assign(mem.usage.values().begin(), mem.usage.values().end());
  for (int k = 0; k < config.read_heads; ++k) {
    t.read_w.emplace_back(mem.read_w[k].values().begin(),
                          mem.read_w[k].values().end());
    const auto& pv = iface.read_modes[k].values();
    t.pi.push_back({static_cast<double>(pv[0]), static_cast<double>(pv[1]),
                    static_cast<double>(pv[2])});
  }
  logs->trace.push_back(std::move(t));
}

}  // namespace detail

/// One encoder step: embed the token, concatenate the previous reads, run
/// the encoding controller, and (for memory variants) drive a write-enabled
/// memory step from its interface emission.
template <class T>
StepIo<T> encode_step(ModelParams<T>& params, int token_id,
                      const ControllerState<T>& state,
                      const MemoryState<T>& memory,
                      const std::vector<Tensor<T>>& prev_reads, int step = 0,
                      ForwardLogs* logs = nullptr) {
  const auto& cfg = params.config;
  if (token_id < 0 || token_id >= cfg.vocab_in)
    throw std::invalid_argument("encode_step: token id " +
                                std::to_string(token_id) +
                                " outside input vocabulary of size " +
                                std::to_string(cfg.vocab_in));
  auto emb = take_row(params.embed_in, token_id);
  Tensor<T> x = emb;
  if (cfg.has_memory()) {
    std::vector<Tensor<T>> parts{emb};
    parts.insert(parts.end(), prev_reads.begin(), prev_reads.end());
    x = concat(parts);
  }
  StepIo<T> out;
  out.state = lstm_cell(x, state, params.enc);
  if (cfg.has_memory()) {
    auto raw = add(matvec(params.iface_enc_W, out.state.h), params.iface_enc_b);
    auto iface = parse_interface(raw, cfg.read_heads, cfg.word_size);
    auto stepped = memory_step(memory, iface, Phase::Encode);
    out.memory = std::move(stepped.first);
    out.reads = std::move(stepped.second);
    detail::log_memory_step(cfg, out.memory, iface, step, Phase::Encode, logs);
  }
  return out;
}

template <class T>
struct DecodeOut {
  ControllerState<T> state;
  MemoryState<T> memory;
  std::vector<Tensor<T>> reads;
  Tensor<T> logits;
};

/// One decoder step: embed the previous prediction (or GO), run the decoding
/// controller, step the memory in the variant's decode phase, and produce
/// logits from hidden state and fresh reads.
template <class T>
DecodeOut<T> decode_step(ModelParams<T>& params, int prev_token_id,
                         const ControllerState<T>& state,
                         const MemoryState<T>& memory,
                         const std::vector<Tensor<T>>& prev_reads, int step = 0,
                         ForwardLogs* logs = nullptr) {
  const auto& cfg = params.config;
  if (prev_token_id < 0 || prev_token_id >= cfg.vocab_out)
    throw std::invalid_argument("decode_step: token id " +
                                std::to_string(prev_token_id) +
                                " outside output vocabulary of size " +
                                std::to_string(cfg.vocab_out));
  auto emb = take_row(params.embed_out, prev_token_id);
  Tensor<T> x = emb;
  if (cfg.has_memory()) {
    std::vector<Tensor<T>> parts{emb};
    parts.insert(parts.end(), prev_reads.begin(), prev_reads.end());
    x = concat(parts);
  }
  DecodeOut<T> out;
  const auto& lstm = cfg.dual_controller() ? params.dec : params.enc;
  out.state = lstm_cell(x, state, lstm);
  Tensor<T> head_in = out.state.h;
  if (cfg.has_memory()) {
    const auto& ifw =
        cfg.dual_controller() ? params.iface_dec_W : params.iface_enc_W;
    const auto& ifb =
        cfg.dual_controller() ? params.iface_dec_b : params.iface_enc_b;
    auto raw = add(matvec(ifw, out.state.h), ifb);
    auto iface = parse_interface(raw, cfg.read_heads, cfg.word_size);
    const Phase phase =
        cfg.write_protected_decode() ? Phase::Decode : Phase::Encode;
    auto stepped = memory_step(memory, iface, phase);
    out.memory = std::move(stepped.first);
    out.reads = std::move(stepped.second);
    detail::log_memory_step(cfg, out.memory, iface, step, Phase::Decode, logs);
    std::vector<Tensor<T>> parts{out.state.h};
    parts.insert(parts.end(), out.reads.begin(), out.reads.end());
    head_in = concat(parts);
  }
  out.logits = add(matvec(params.head_W, head_in), params.head_b);
  return out;
}

template <class T>
struct ForwardResult {
  std::vector<Tensor<T>> logits;    // one per decode step
  std::vector<int> predictions;     // argmax ids per decode step
  MemoryState<T> memory_after_encode;
  MemoryState<T> memory_final;
};

/// Full sequence pass. Encoding consumes every input token; the encoder's
/// final (h, c) seeds the decoder verbatim. Train mode decodes exactly
/// |targets| steps feeding back its own argmax predictions (or the ground
/// truth under teacher forcing); Infer mode decodes greedily until the end
/// marker or the cap.
template <class T>
ForwardResult<T> forward_sequence(ModelParams<T>& params,
                                  const std::vector<int>& input_tokens,
                                  const std::vector<int>& targets, RunMode mode,
                                  ForwardLogs* logs = nullptr) {
  const auto& cfg = params.config;
  if (input_tokens.empty())
    throw std::invalid_argument("forward_sequence: empty input");
  if (mode == RunMode::Train && targets.empty())
    throw std::invalid_argument("forward_sequence: train mode needs targets");

  auto state = ControllerState<T>::zeros(cfg.hidden);
  MemoryState<T> memory;
  std::vector<Tensor<T>> reads;
  if (cfg.has_memory()) {
    memory = MemoryState<T>::fresh(cfg.mem_slots, cfg.word_size, cfg.read_heads);
    reads.assign(cfg.read_heads, Tensor<T>());
    for (auto& r : reads) r = Tensor<T>::zeros({cfg.word_size});
  }

  int step = 0;
  for (int tok : input_tokens) {
    auto enc = encode_step(params, tok, state, memory, reads, step++, logs);
    state = std::move(enc.state);
    if (cfg.has_memory()) {
      memory = std::move(enc.memory);
      reads = std::move(enc.reads);
    }
  }

  ForwardResult<T> result;
  result.memory_after_encode = memory;

  const int max_steps = mode == RunMode::Train
                            ? static_cast<int>(targets.size())
                            : cfg.decode_cap;
  int prev = kGoId;
  for (int t = 0; t < max_steps; ++t) {
    auto dec = decode_step(params, prev, state, memory, reads, step++, logs);
    state = std::move(dec.state);
    if (cfg.has_memory()) {
      memory = std::move(dec.memory);
      reads = std::move(dec.reads);
    }
    const int pred = argmax_index(dec.logits);
    result.logits.push_back(std::move(dec.logits));
    result.predictions.push_back(pred);
    if (mode == RunMode::Train) {
      prev = cfg.teacher_forcing ? targets[t] : pred;
    } else {
      if (pred == kEndId) break;
      prev = pred;
    }
  }
  result.memory_final = memory;
  return result;
}

/// Mean categorical cross-entropy over decode steps.
template <class T>
Tensor<T> sequence_loss(const std::vector<Tensor<T>>& logits,
                        const std::vector<int>& targets) {
  if (logits.size() != targets.size())
    throw std::invalid_argument(
        "sequence_loss: " + std::to_string(logits.size()) + " logits vs " +
        std::to_string(targets.size()) + " targets");
  if (logits.empty())
    throw std::invalid_argument("sequence_loss: empty sequence");
  Tensor<T> total = cross_entropy_logits(logits[0], targets[0]);
  for (size_t i = 1; i < logits.size(); ++i)
    total = add(total, cross_entropy_logits(logits[i], targets[i]));
  return scale(total, T(1) / static_cast<T>(logits.size()));
}

}  // namespace dcw
