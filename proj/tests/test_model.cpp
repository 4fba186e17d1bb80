#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "dcw/model.hpp"
#include "model_gradcheck.hpp"

using namespace dcw;
using Td = Tensor<double>;

namespace {

Td vec(std::vector<double> v, bool rg = false) {
  const int n = static_cast<int>(v.size());
  return Td::from_values({n}, std::move(v), rg);
}

ModelConfig tiny_config(Variant v) {
  ModelConfig c;
  c.variant = v;
  c.hidden = 8;
  c.embed = 7;
  c.mem_slots = 4;
  c.word_size = 5;
  c.read_heads = 1;
  c.vocab_in = 6;
  c.vocab_out = 6;
  c.decode_cap = 10;
  return c;
}

}  // namespace

TEST_CASE("lstm cell basics") {
  const int hidden = 3, in = 2;
  SUBCASE("all-zero parameters give zero state") {
    LstmParams<double> p{Td::zeros({4 * hidden, in + hidden}),
                         Td::zeros({4 * hidden})};
    auto s = lstm_cell(vec({1.0, -2.0}), ControllerState<double>::zeros(hidden), p);
    CHECK(s.h.values() == std::vector<double>(hidden, 0.0));
    CHECK(s.c.values() == std::vector<double>(hidden, 0.0));
  }
  SUBCASE("output shapes") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> d(-0.5, 0.5);
    std::vector<double> w(4 * hidden * (in + hidden));
    for (auto& v : w) v = d(rng);
    LstmParams<double> p{Td::from_values({4 * hidden, in + hidden}, w),
                         Td::zeros({4 * hidden})};
    auto s = lstm_cell(vec({0.3, 0.4}), ControllerState<double>::zeros(hidden), p);
    CHECK(s.h.shape() == Shape{hidden});
    CHECK(s.c.shape() == Shape{hidden});
  }
  SUBCASE("saturated forget gate with closed input gate preserves cell") {
    // zero weights; biases: input gate -1000, forget gate +1000
    auto b = Td::zeros({4 * hidden});
    for (int i = 0; i < hidden; ++i) {
      b.values()[i] = -1000;           // input gate
      b.values()[hidden + i] = 1000;   // forget gate
    }
    LstmParams<double> p{Td::zeros({4 * hidden, in + hidden}), b};
    ControllerState<double> st{Td::zeros({hidden}), vec({0.3, -0.7, 0.5})};
    auto s = lstm_cell(vec({1.0, 1.0}), st, p);
    CHECK(s.c.values() == st.c.values());
  }
  SUBCASE("shape mismatch rejected") {
    LstmParams<double> p{Td::zeros({4 * hidden, in + hidden}),
                         Td::zeros({4 * hidden})};
    CHECK_THROWS_AS(
        lstm_cell(vec({1.0, 2.0, 3.0}), ControllerState<double>::zeros(hidden), p),
        std::invalid_argument);
  }
}

TEST_CASE("onehot argmax") {
  CHECK(onehot_argmax(vec({0.1, 0.9, 0.3})).values() ==
        std::vector<double>{0, 1, 0});
  CHECK(onehot_argmax(vec({0.5, 0.5})).values() == std::vector<double>{1, 0});
  CHECK(onehot_argmax(vec({-5, -1, -3})).values() ==
        std::vector<double>{0, 1, 0});
  SUBCASE("never records on the tape") {
    auto logits = vec({1, 3, 2}, true);
    Tape<double> tape;
    TapeScope<double> scope(tape);
    auto oh = onehot_argmax(logits);
    CHECK_FALSE(oh.requires_grad());
    CHECK(tape.size() == 0);
  }
}

TEST_CASE("build_model variants") {
  SUBCASE("seq2seq has no interface parameters") {
    auto p = build_model<double>(tiny_config(Variant::Seq2Seq), 1);
    for (auto& n : p.named()) CHECK(n.name.find("iface") == std::string::npos);
  }
  SUBCASE("same seed same parameters") {
    auto a = build_model<double>(tiny_config(Variant::DCW_MANN), 99);
    auto b = build_model<double>(tiny_config(Variant::DCW_MANN), 99);
    auto an = a.named(), bn = b.named();
    REQUIRE(an.size() == bn.size());
    for (size_t i = 0; i < an.size(); ++i)
      CHECK(an[i].tensor.values() == bn[i].tensor.values());
  }
  SUBCASE("dual controller variants carry two disjoint LSTM weight sets") {
    auto p = build_model<double>(tiny_config(Variant::DCW_MANN), 7);
    CHECK(p.dec.W.defined());
    CHECK(p.dec.W.payload_id() != p.enc.W.payload_id());
    auto q = build_model<double>(tiny_config(Variant::DNC), 7);
    CHECK_FALSE(q.dec.W.defined());
  }
  SUBCASE("seq2seq parameter count strictly below dcw-mann") {
    auto a = build_model<double>(tiny_config(Variant::Seq2Seq), 1);
    auto b = build_model<double>(tiny_config(Variant::DCW_MANN), 1);
    CHECK(a.parameter_count() < b.parameter_count());
  }
  SUBCASE("unknown variant name rejected") {
    CHECK_THROWS_AS(variant_from_name("transformer"), std::invalid_argument);
  }
}

TEST_CASE("encode step contracts") {
  auto params = build_model<double>(tiny_config(Variant::DCW_MANN), 5);
  auto state = ControllerState<double>::zeros(8);
  auto mem = MemoryState<double>::fresh(4, 5, 1);
  std::vector<Td> reads{Td::zeros({5})};

  SUBCASE("unknown token id rejected") {
    CHECK_THROWS_AS(encode_step(params, 6, state, mem, reads),
                    std::invalid_argument);
    CHECK_THROWS_AS(encode_step(params, -1, state, mem, reads),
                    std::invalid_argument);
  }
  SUBCASE("same token, different memory, different hidden state") {
    auto a = encode_step(params, 2, state, mem, reads);
    auto b = encode_step(params, 2, a.state, a.memory, a.reads);
    // feed identical token twice; reads differ, so h must differ
    bool differs = false;
    for (int i = 0; i < 8; ++i)
      if (a.state.h.values()[i] != b.state.h.values()[i]) differs = true;
    CHECK(differs);
  }
  SUBCASE("seq2seq leaves memory untouched") {
    auto p2 = build_model<double>(tiny_config(Variant::Seq2Seq), 5);
    auto out = encode_step(p2, 2, state, mem, {});
    CHECK(out.reads.empty());
    CHECK_FALSE(out.memory.contents.defined());
  }
}

TEST_CASE("decode step per variant") {
  auto state = ControllerState<double>::zeros(8);
  std::vector<Td> reads{Td::zeros({5})};

  SUBCASE("write-protected variants keep memory bit-identical") {
    for (auto v : {Variant::DCW_MANN, Variant::DNC_WP}) {
      auto params = build_model<double>(tiny_config(v), 5);
      auto mem = MemoryState<double>::fresh(4, 5, 1);
      auto enc = encode_step(params, 1, state, mem, reads);
      auto dec = decode_step(params, kGoId, enc.state, enc.memory, enc.reads);
      CHECK(dec.memory.contents.payload_id() == enc.memory.contents.payload_id());
      CHECK(dec.memory.usage.payload_id() == enc.memory.usage.payload_id());
      CHECK(dec.memory.link.payload_id() == enc.memory.link.payload_id());
    }
  }
  SUBCASE("write-enabled variants may change memory") {
    for (auto v : {Variant::DNC, Variant::DC_MANN}) {
      auto params = build_model<double>(tiny_config(v), 5);
      auto mem = MemoryState<double>::fresh(4, 5, 1);
      auto enc = encode_step(params, 1, state, mem, reads);
      auto dec = decode_step(params, kGoId, enc.state, enc.memory, enc.reads);
      CHECK(dec.memory.contents.payload_id() != enc.memory.contents.payload_id());
      bool changed = false;
      for (int i = 0; i < 20; ++i)
        if (dec.memory.contents.values()[i] != enc.memory.contents.values()[i])
          changed = true;
      CHECK(changed);
    }
  }
  SUBCASE("logits always sized to the output vocabulary") {
    for (auto v : {Variant::Seq2Seq, Variant::DNC, Variant::DCW_MANN}) {
      auto params = build_model<double>(tiny_config(v), 5);
      auto mem = params.config.has_memory()
                     ? MemoryState<double>::fresh(4, 5, 1)
                     : MemoryState<double>();
      auto r2 = params.config.has_memory() ? reads : std::vector<Td>{};
      auto dec = decode_step(params, kGoId, state, mem, r2);
      CHECK(dec.logits.shape() == Shape{6});
    }
  }
}

TEST_CASE("forward sequence contracts") {
  auto params = build_model<double>(tiny_config(Variant::DCW_MANN), 11);
  std::vector<int> input{4, 5, 3};
  std::vector<int> targets{4, 5, kEndId};

  SUBCASE("empty input rejected") {
    CHECK_THROWS_AS(
        forward_sequence(params, {}, targets, RunMode::Train),
        std::invalid_argument);
  }
  SUBCASE("train decodes exactly target length") {
    auto r = forward_sequence(params, input, targets, RunMode::Train);
    CHECK(r.logits.size() == targets.size());
    CHECK(r.predictions.size() == targets.size());
  }
  SUBCASE("inference stops at cap without end marker") {
    // fresh random params rarely emit END; cap at 10 bounds the loop
    auto r = forward_sequence(params, input, {}, RunMode::Infer);
    CHECK(r.predictions.size() <= 10);
    if (r.predictions.size() < 10) CHECK(r.predictions.back() == kEndId);
  }
  SUBCASE("memory after inference equals memory after encoding") {
    auto r = forward_sequence(params, input, {}, RunMode::Infer);
    CHECK(r.memory_final.contents.payload_id() ==
          r.memory_after_encode.contents.payload_id());
  }
  SUBCASE("write-enabled decode mutates memory") {
    auto p2 = build_model<double>(tiny_config(Variant::DC_MANN), 11);
    auto r = forward_sequence(p2, input, {}, RunMode::Infer);
    CHECK(r.memory_final.contents.payload_id() !=
          r.memory_after_encode.contents.payload_id());
  }
  SUBCASE("teacher forcing changes decoder inputs only") {
    auto tf = tiny_config(Variant::DCW_MANN);
    tf.teacher_forcing = true;
    auto p_free = build_model<double>(tiny_config(Variant::DCW_MANN), 11);
    auto p_tf = build_model<double>(tf, 11);
    auto a = forward_sequence(p_free, input, targets, RunMode::Train);
    auto b = forward_sequence(p_tf, input, targets, RunMode::Train);
    // encode-phase memory identical
    const auto& ma = a.memory_after_encode.contents.values();
    const auto& mb = b.memory_after_encode.contents.values();
    CHECK(ma == mb);
    // first decode step sees GO under both policies
    CHECK(a.logits[0].values() == b.logits[0].values());
  }
}

TEST_CASE("decoder's initial state is the encoder's final state") {
  auto params = build_model<double>(tiny_config(Variant::DCW_MANN), 13);
  std::vector<int> input{2, 3};
  // run the encoder manually
  auto state = ControllerState<double>::zeros(8);
  auto mem = MemoryState<double>::fresh(4, 5, 1);
  std::vector<Td> reads{Td::zeros({5})};
  for (int tok : input) {
    auto enc = encode_step(params, tok, state, mem, reads);
    state = enc.state;
    mem = enc.memory;
    reads = enc.reads;
  }
  auto dec_manual = decode_step(params, kGoId, state, mem, reads);
  auto full = forward_sequence(params, input, {kEndId}, RunMode::Train);
  CHECK(full.logits[0].values() == dec_manual.logits.values());
}

TEST_CASE("sequence loss") {
  SUBCASE("strong correct logits drive loss to zero") {
    std::vector<Td> logits{vec({100, 0, 0}), vec({0, 100, 0})};
    auto loss = sequence_loss(logits, {0, 1});
    CHECK(loss.item() == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("uniform logits cost ln(vocab) per step") {
    std::vector<Td> logits{vec({1, 1, 1, 1}), vec({0, 0, 0, 0})};
    auto loss = sequence_loss(logits, {2, 0});
    CHECK(loss.item() == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  }
  SUBCASE("length mismatch rejected") {
    std::vector<Td> logits{vec({1, 1})};
    CHECK_THROWS_AS(sequence_loss(logits, {0, 1}), std::invalid_argument);
  }
  SUBCASE("per-step targets matter") {
    std::vector<Td> logits{vec({2, 0}), vec({0, 2})};
    auto a = sequence_loss(logits, {0, 1}).item();
    auto b = sequence_loss(logits, {1, 0}).item();
    CHECK(a < b);
  }
}

TEST_CASE("encoder/decoder parameter disjointness") {
  auto params = build_model<double>(tiny_config(Variant::DCW_MANN), 17);
  std::vector<int> input{1, 4, 2};
  auto before = forward_sequence(params, input, {kEndId}, RunMode::Train);
  const auto h_enc = before.memory_after_encode.contents.values();
  // zero every decoder-side weight; encode-phase activations must not move
  std::fill(params.dec.W.values().begin(), params.dec.W.values().end(), 0.0);
  std::fill(params.dec.b.values().begin(), params.dec.b.values().end(), 0.0);
  std::fill(params.iface_dec_W.values().begin(), params.iface_dec_W.values().end(), 0.0);
  std::fill(params.iface_dec_b.values().begin(), params.iface_dec_b.values().end(), 0.0);
  auto after = forward_sequence(params, input, {kEndId}, RunMode::Train);
  CHECK(after.memory_after_encode.contents.values() == h_enc);
}

TEST_CASE("no gradient reaches output embedding through the argmax path") {
  auto params = build_model<double>(tiny_config(Variant::DCW_MANN), 19);
  std::vector<int> input{1, 2};
  std::vector<int> targets{4, 5, kEndId};
  Tape<double> tape;
  TapeScope<double> scope(tape);
  auto r = forward_sequence(params, input, targets, RunMode::Train);
  auto loss = sequence_loss(r.logits, targets);
  tape.backward(loss);
  // rows of embed_out touched: GO plus the model's own fed-back predictions
  std::set<int> fed{kGoId, r.predictions[0], r.predictions[1]};
  const auto& g = params.embed_out.grad();
  for (int row = 0; row < 6; ++row) {
    double rowsum = 0;
    for (int col = 0; col < 7; ++col) rowsum += std::fabs(g[row * 7 + col]);
    if (fed.count(row))
      CHECK(rowsum > 0);
    else
      CHECK(rowsum == 0.0);
  }
}

TEST_CASE("seq2seq output is independent of memory configuration") {
  auto c1 = tiny_config(Variant::Seq2Seq);
  auto c2 = tiny_config(Variant::Seq2Seq);
  c2.mem_slots = 9;
  c2.word_size = 2;
  c2.read_heads = 3;
  auto a = build_model<double>(c1, 21);
  auto b = build_model<double>(c2, 21);
  std::vector<int> input{3, 1, 5};
  auto ra = forward_sequence(a, input, {2, 2}, RunMode::Train);
  auto rb = forward_sequence(b, input, {2, 2}, RunMode::Train);
  for (size_t i = 0; i < ra.logits.size(); ++i)
    CHECK(ra.logits[i].values() == rb.logits[i].values());
}

TEST_CASE("full model gradient check at tiny config") {
  // H=8, N=4, D=5, R=1, vocab 6, sequence length 4
  std::vector<int> input{4, 5, 3, kSepId};
  std::vector<int> targets{4, 5, 3, kEndId};
  for (auto v : {Variant::DCW_MANN, Variant::Seq2Seq, Variant::DNC,
                 Variant::DC_MANN, Variant::DNC_WP}) {
    CAPTURE(variant_name(v));
    const double err =
        testutil::model_gradient_check(tiny_config(v), 7, input, targets);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("read mode logging covers both phases") {
  auto params = build_model<double>(tiny_config(Variant::DCW_MANN), 29);
  ForwardLogs logs;
  logs.want_trace = true;
  forward_sequence(params, {1, 2, 3}, {4, kEndId}, RunMode::Train, &logs);
  int enc = 0, dec = 0;
  for (auto& e : logs.read_modes) {
    if (e.phase == Phase::Encode) ++enc;
    else ++dec;
    double s = e.pi[0] + e.pi[1] + e.pi[2];
    CHECK(std::fabs(s - 1.0) < 1e-9);
  }
  CHECK(enc == 3);
  CHECK(dec == 2);
  CHECK(logs.trace.size() == 5);
  for (auto& t : logs.trace)
    if (t.phase == Phase::Decode)
      for (double w : t.write_w) CHECK(w == 0.0);
}
