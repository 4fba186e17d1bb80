#include "dcw/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dcw/adam.hpp"
#include "dcw/checkpoint.hpp"

namespace dcw {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// RunConfig
// ---------------------------------------------------------------------------

json RunConfig::to_json() const {
  return json{
      {"task", task},
      {"model",
       {{"variant", variant_name(model.variant)},
        {"hidden", model.hidden},
        {"embed", model.embed},
        {"mem_slots", model.mem_slots},
        {"word_size", model.word_size},
        {"read_heads", model.read_heads},
        {"vocab_in", model.vocab_in},
        {"vocab_out", model.vocab_out},
        {"decode_cap", model.decode_cap},
        {"teacher_forcing", model.teacher_forcing},
        {"precision", model.precision}}},
      {"optim",
       {{"lr", optim.lr},
        {"beta1", optim.beta1},
        {"beta2", optim.beta2},
        {"eps", optim.eps},
        {"grad_clip", optim.grad_clip}}},
      {"train",
       {{"epochs", train.epochs},
        {"eval_every", train.eval_every},
        {"eval_max_examples", train.eval_max_examples},
        {"patience", train.patience}}},
      {"seeds",
       {{"data", seeds.data}, {"init", seeds.init}, {"shuffle", seeds.shuffle}}},
      {"data",
       {{"train", data.train},
        {"valid", data.valid},
        {"test", data.test},
        {"vocab_in", data.vocab_in},
        {"vocab_out", data.vocab_out}}},
      {"out_dir", out_dir},
      {"log_wallclock", log_wallclock}};
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  c.task = j.value("task", c.task);
  if (j.contains("model")) {
    const auto& m = j["model"];
    c.model.variant = variant_from_name(m.value("variant", std::string("dcw-mann")));
    c.model.hidden = m.value("hidden", c.model.hidden);
    c.model.embed = m.value("embed", c.model.embed);
    c.model.mem_slots = m.value("mem_slots", c.model.mem_slots);
    c.model.word_size = m.value("word_size", c.model.word_size);
    c.model.read_heads = m.value("read_heads", c.model.read_heads);
    c.model.vocab_in = m.value("vocab_in", 0);
    c.model.vocab_out = m.value("vocab_out", 0);
    c.model.decode_cap = m.value("decode_cap", 0);
    c.model.teacher_forcing = m.value("teacher_forcing", false);
    c.model.precision = m.value("precision", std::string("f64"));
  }
  if (j.contains("optim")) {
    const auto& o = j["optim"];
    c.optim.lr = o.value("lr", c.optim.lr);
    c.optim.beta1 = o.value("beta1", c.optim.beta1);
    c.optim.beta2 = o.value("beta2", c.optim.beta2);
    c.optim.eps = o.value("eps", c.optim.eps);
    c.optim.grad_clip = o.value("grad_clip", c.optim.grad_clip);
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    c.train.epochs = t.value("epochs", c.train.epochs);
    c.train.eval_every = t.value("eval_every", c.train.eval_every);
    c.train.eval_max_examples = t.value("eval_max_examples", c.train.eval_max_examples);
    c.train.patience = t.value("patience", c.train.patience);
  }
  if (j.contains("seeds")) {
    const auto& s = j["seeds"];
    c.seeds.data = s.value("data", c.seeds.data);
    c.seeds.init = s.value("init", c.seeds.init);
    c.seeds.shuffle = s.value("shuffle", c.seeds.shuffle);
  }
  if (j.contains("data")) {
    const auto& d = j["data"];
    c.data.train = d.value("train", std::string());
    c.data.valid = d.value("valid", std::string());
    c.data.test = d.value("test", std::string());
    c.data.vocab_in = d.value("vocab_in", std::string());
    c.data.vocab_out = d.value("vocab_out", std::string());
  }
  c.out_dir = j.value("out_dir", c.out_dir);
  c.log_wallclock = j.value("log_wallclock", false);
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot read " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error("config: " + path + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

void RunConfig::validate() const {
  if (task != "odd-even" && task != "emr-procedure" && task != "emr-drug")
    throw std::invalid_argument("config: unknown task '" + task + "'");
  if (data.train.empty() || !fs::exists(data.train))
    throw std::invalid_argument("config: training dataset not found: " + data.train);
  if (!data.valid.empty() && !fs::exists(data.valid))
    throw std::invalid_argument("config: validation dataset not found: " + data.valid);
  if (!data.test.empty() && !fs::exists(data.test))
    throw std::invalid_argument("config: test dataset not found: " + data.test);
  if (data.vocab_in.empty() || !fs::exists(data.vocab_in))
    throw std::invalid_argument("config: input vocabulary not found: " + data.vocab_in);
  if (data.vocab_out.empty() || !fs::exists(data.vocab_out))
    throw std::invalid_argument("config: output vocabulary not found: " + data.vocab_out);
  if (train.epochs <= 0 || train.eval_every <= 0)
    throw std::invalid_argument("config: epochs and eval_every must be positive");
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<int> epoch_permutation(int n, uint64_t shuffle_seed, int epoch) {
  std::mt19937_64 rng(shuffle_seed * 0x9E3779B97F4A7C15ull +
                      static_cast<uint64_t>(epoch) + 1);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<int> pick(0, i);
    std::swap(order[i], order[pick(rng)]);
  }
  return order;
}

int derive_decode_cap(const std::vector<SequencePair>& pairs) {
  size_t longest = 1;
  for (const auto& p : pairs) longest = std::max(longest, p.target.size());
  return static_cast<int>(2 * longest);
}

struct CsvWriter {
  std::ofstream out;
  bool wallclock;
  std::chrono::steady_clock::time_point start;

  CsvWriter(const std::string& path, bool wallclock_on, bool append)
      : out(path, append ? std::ios::app : std::ios::trunc),
        wallclock(wallclock_on),
        start(std::chrono::steady_clock::now()) {
    if (!out) throw std::runtime_error("metrics: cannot write " + path);
    if (!append) out << "step,split,loss,nld,precision,jaccard,wallclock_s\n";
  }

  void row(int64_t step, const std::string& split, double loss, double nld_v,
           double precision_v, double jaccard_v, bool emr) {
    out << step << ',' << split << ',' << fmt_double(loss) << ',';
    if (!emr) out << fmt_double(nld_v);
    out << ',';
    if (emr) out << fmt_double(precision_v);
    out << ',';
    if (emr) out << fmt_double(jaccard_v);
    out << ',';
    if (wallclock) {
      const double s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
              .count();
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3f", s);
      out << buf;
    }
    out << '\n';
    out.flush();
  }
};

}  // namespace

// ---------------------------------------------------------------------------
// Parameter/checkpoint glue
// ---------------------------------------------------------------------------

namespace {

template <class T>
void store_model(Checkpoint& ck, ModelParams<T>& params, Adam<T>& opt) {
  auto named = params.named();
  for (auto& n : named)
    ck.put(n.name, n.tensor.shape(), n.tensor.values());
  auto& m = opt.moment1();
  auto& v = opt.moment2();
  for (size_t i = 0; i < named.size(); ++i) {
    if (i < m.size() && !m[i].empty()) {
      ck.put("adam.m." + named[i].name, named[i].tensor.shape(), m[i]);
      ck.put("adam.v." + named[i].name, named[i].tensor.shape(), v[i]);
    }
  }
}

template <class T>
void restore_model(const Checkpoint& ck, ModelParams<T>& params, Adam<T>* opt) {
  auto named = params.named();
  for (auto& n : named) {
    auto values = ck.get<T>(n.name);
    if (values.size() != n.tensor.values().size())
      throw std::runtime_error("checkpoint: parameter '" + n.name +
                               "' has wrong size");
    n.tensor.values() = std::move(values);
  }
  if (!opt) return;
  opt->moment1().assign(named.size(), {});
  opt->moment2().assign(named.size(), {});
  for (size_t i = 0; i < named.size(); ++i) {
    if (ck.has("adam.m." + named[i].name)) {
      opt->moment1()[i] = ck.get<T>("adam.m." + named[i].name);
      opt->moment2()[i] = ck.get<T>("adam.v." + named[i].name);
    }
  }
  opt->set_steps(ck.step);
}

ModelConfig model_config_from_snapshot(const json& snapshot) {
  return RunConfig::from_json(snapshot).model;
}

}  // namespace

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace {

template <class T>
struct EvalPassResult {
  double loss = 0;
  double nld = 0;
  double precision = 0;
  double jaccard = 0;
};

/// Greedy-inference metrics plus self-fed train-mode loss over a slice of a
/// dataset. Used for both the train-subset and validation rows.
template <class T>
EvalPassResult<T> eval_pass(ModelParams<T>& params,
                            const std::vector<SequencePair>& pairs, int limit) {
  NoTapeScope<T> no_tape;
  EvalPassResult<T> r;
  const int n = std::min<int>(limit, static_cast<int>(pairs.size()));
  std::vector<std::vector<int>> preds, targets;
  for (int i = 0; i < n; ++i) {
    auto train_fwd =
        forward_sequence(params, pairs[i].input, pairs[i].target, RunMode::Train);
    r.loss += static_cast<double>(
        sequence_loss(train_fwd.logits, pairs[i].target).item());
    auto infer_fwd = forward_sequence(params, pairs[i].input, {}, RunMode::Infer);
    preds.push_back(infer_fwd.predictions);
    targets.push_back(pairs[i].target);
  }
  if (n > 0) r.loss /= n;
  auto report = build_report(preds, targets);
  r.nld = report.mean_nld;
  r.precision = report.mean_precision;
  r.jaccard = report.mean_jaccard;
  return r;
}

template <class T>
void append_read_mode_log(const std::string& path, ModelParams<T>& params,
                          const SequencePair& pair, int64_t step) {
  NoTapeScope<T> no_tape;
  ForwardLogs logs;
  forward_sequence(params, pair.input, {}, RunMode::Infer, &logs);
  std::ofstream out(path, std::ios::app);
  for (const auto& e : logs.read_modes) {
    json j{{"step", step},
           {"phase", e.phase == Phase::Encode ? "encode" : "decode"},
           {"pi", e.pi}};
    out << j.dump() << '\n';
  }
}

template <class T>
TrainOutcome train_impl(RunConfig config, const std::string& resume_from) {
  auto train_pairs = load_pairs_jsonl(config.data.train);
  if (train_pairs.empty()) throw std::runtime_error("train: empty training set");
  std::vector<SequencePair> valid_pairs;
  if (!config.data.valid.empty()) valid_pairs = load_pairs_jsonl(config.data.valid);

  auto vocab_in = Vocabulary::load(config.data.vocab_in);
  auto vocab_out = Vocabulary::load(config.data.vocab_out);
  config.model.vocab_in = vocab_in.size();
  config.model.vocab_out = vocab_out.size();
  if (config.model.decode_cap <= 0)
    config.model.decode_cap = derive_decode_cap(train_pairs);
  config.model.validate();

  fs::create_directories(config.out_dir);
  const std::string csv_path = config.out_dir + "/metrics.csv";
  const std::string latest_path = config.out_dir + "/latest.ckpt";
  const std::string best_path = config.out_dir + "/best.ckpt";
  const std::string read_mode_path = config.out_dir + "/read_modes.jsonl";

  auto params = build_model<T>(config.model, config.seeds.init);
  Adam<T> opt(config.optim.lr, config.optim.beta1, config.optim.beta2,
              config.optim.eps);
  auto named = params.named();

  int start_epoch = 0, start_pos = 0;
  bool resuming = false;
  if (!resume_from.empty()) {
    auto ck = Checkpoint::load(resume_from);
    const auto snap = model_config_from_snapshot(ck.config);
    if (variant_name(snap.variant) != variant_name(config.model.variant) ||
        snap.hidden != config.model.hidden || snap.vocab_in != config.model.vocab_in ||
        snap.vocab_out != config.model.vocab_out)
      throw std::runtime_error("resume: checkpoint model does not match the config");
    restore_model(ck, params, &opt);
    start_epoch = ck.epoch;
    start_pos = ck.pos;
    resuming = true;
  }

  json config_snapshot = config.to_json();
  config_snapshot["vocab_in_fingerprint"] = vocab_in.fingerprint();
  config_snapshot["vocab_out_fingerprint"] = vocab_out.fingerprint();

  auto save_checkpoint = [&](const std::string& path, int epoch, int pos,
                             int64_t step) {
    Checkpoint ck;
    ck.step = step;
    ck.epoch = epoch;
    ck.pos = pos;
    ck.config = config_snapshot;
    ck.rng = json{{"scheme", "per-epoch derived shuffle"},
                  {"shuffle_seed", config.seeds.shuffle}};
    store_model(ck, params, opt);
    ck.save(path + ".tmp");
    fs::rename(path + ".tmp", path);
  };

  CsvWriter csv(csv_path, config.log_wallclock, resuming);
  const bool emr = config.is_emr();
  const bool lower_is_better = !emr;  // NLD for odd-even, Jaccard for EMR

  TrainOutcome outcome;
  outcome.best_metric = lower_is_better ? 1e300 : -1e300;
  int evals_since_best = 0;
  int64_t global_step = opt.steps();
  double loss_accum = 0;
  int64_t loss_count = 0;
  bool stop = false;

  auto run_eval = [&](int epoch, int pos) {
    if (loss_count == 0) return;  // nothing trained since the last row
    const double train_loss = loss_accum / loss_count;
    loss_accum = 0;
    loss_count = 0;
    auto tr = eval_pass(params, train_pairs, config.train.eval_max_examples);
    csv.row(global_step, "train", train_loss, tr.nld, tr.precision, tr.jaccard, emr);
    outcome.final_train_loss = train_loss;
    if (!valid_pairs.empty()) {
      auto va = eval_pass(params, valid_pairs, config.train.eval_max_examples);
      csv.row(global_step, "valid", va.loss, va.nld, va.precision, va.jaccard, emr);
      const double metric = lower_is_better ? va.nld : va.jaccard;
      const bool improved = lower_is_better ? metric < outcome.best_metric
                                            : metric > outcome.best_metric;
      if (improved) {
        outcome.best_metric = metric;
        evals_since_best = 0;
        save_checkpoint(best_path, epoch, pos, global_step);
        outcome.best_checkpoint = best_path;
      } else if (++evals_since_best >= config.train.patience) {
        stop = true;
      }
    }
    if (config.model.has_memory() && !train_pairs.empty())
      append_read_mode_log(read_mode_path, params, train_pairs.front(), global_step);
    save_checkpoint(latest_path, epoch, pos, global_step);
    outcome.latest_checkpoint = latest_path;
  };

  const int n = static_cast<int>(train_pairs.size());
  for (int epoch = start_epoch; epoch < config.train.epochs && !stop; ++epoch) {
    const auto order = epoch_permutation(n, config.seeds.shuffle, epoch);
    for (int pos = (epoch == start_epoch ? start_pos : 0); pos < n && !stop; ++pos) {
      const auto& pair = train_pairs[order[pos]];
      Tape<T> tape;
      double loss_value;
      {
        TapeScope<T> scope(tape);
        auto fwd = forward_sequence(params, pair.input, pair.target, RunMode::Train);
        auto loss = sequence_loss(fwd.logits, pair.target);
        loss_value = static_cast<double>(loss.item());
        if (!std::isfinite(loss_value)) {
          outcome.aborted_non_finite = true;
          std::fprintf(stderr,
                       "train: non-finite loss at step %lld; aborting, last good "
                       "checkpoint retained at %s\n",
                       static_cast<long long>(global_step), latest_path.c_str());
          return outcome;
        }
        tape.backward(loss);
      }
      clip_grad_norm(named, config.optim.grad_clip);
      try {
        opt.step(named);
      } catch (const std::exception& e) {
        outcome.aborted_non_finite = true;
        std::fprintf(stderr, "train: %s; aborting, last good checkpoint retained\n",
                     e.what());
        return outcome;
      }
      ++global_step;
      loss_accum += loss_value;
      ++loss_count;
      if (global_step % config.train.eval_every == 0)
        run_eval(epoch, pos + 1);
    }
  }
  run_eval(config.train.epochs, 0);
  outcome.steps = global_step;
  return outcome;
}

}  // namespace

TrainOutcome cmd_train(const RunConfig& config, const std::string& resume_from) {
  config.validate();
  if (config.model.precision == "f32")
    return train_impl<float>(config, resume_from);
  return train_impl<double>(config, resume_from);
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace {

template <class T>
EvalReport eval_impl(const Checkpoint& ck, const RunConfig& snapshot,
                     const std::vector<SequencePair>& pairs,
                     const std::string& out_dir) {
  auto params = build_model<T>(snapshot.model, 0);
  restore_model<T>(ck, params, nullptr);
  NoTapeScope<T> no_tape;
  std::vector<std::vector<int>> preds, targets;
  preds.reserve(pairs.size());
  for (const auto& pair : pairs) {
    auto fwd = forward_sequence(params, pair.input, {}, RunMode::Infer);
    preds.push_back(fwd.predictions);
    targets.push_back(pair.target);
  }
  auto report = build_report(preds, targets);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream jout(out_dir + "/report.json");
    jout << report.to_json().dump(2) << '\n';
    std::ofstream cout_(out_dir + "/report.csv");
    report.write_csv(cout_);
  }
  return report;
}

}  // namespace

EvalReport cmd_eval(const std::string& checkpoint_path, const std::string& dataset_path,
                    const std::string& vocab_in_path, const std::string& vocab_out_path,
                    const std::string& out_dir) {
  auto ck = Checkpoint::load(checkpoint_path);
  auto snapshot = RunConfig::from_json(ck.config);
  const auto vocab_in = Vocabulary::load(vocab_in_path);
  const auto vocab_out = Vocabulary::load(vocab_out_path);
  if (ck.config.value("vocab_in_fingerprint", uint64_t(0)) != vocab_in.fingerprint() ||
      ck.config.value("vocab_out_fingerprint", uint64_t(0)) != vocab_out.fingerprint())
    throw std::runtime_error(
        "eval: vocabulary does not match the checkpoint's training vocabulary");
  auto pairs = load_pairs_jsonl(dataset_path);
  if (snapshot.model.precision == "f32")
    return eval_impl<float>(ck, snapshot, pairs, out_dir);
  return eval_impl<double>(ck, snapshot, pairs, out_dir);
}

// ---------------------------------------------------------------------------
// Inspection
// ---------------------------------------------------------------------------

namespace {

template <class T>
ReadModeSummary inspect_impl(const Checkpoint& ck, const RunConfig& snapshot,
                             const SequencePair& pair, const std::string& out_dir) {
  auto params = build_model<T>(snapshot.model, 0);
  restore_model<T>(ck, params, nullptr);
  NoTapeScope<T> no_tape;
  ForwardLogs logs;
  logs.want_trace = true;
  forward_sequence(params, pair.input, {}, RunMode::Infer, &logs);

  fs::create_directories(out_dir);
  std::ostringstream pi_lines;
  {
    std::ofstream out(out_dir + "/trace.jsonl");
    for (const auto& t : logs.trace) {
      json j{{"step", t.step},
             {"phase", t.phase == Phase::Encode ? "encode" : "decode"},
             {"ww", t.write_w},
             {"u", t.usage},
             {"wr", t.read_w},
             {"pi", t.pi}};
      out << j.dump() << '\n';
      for (const auto& pi : t.pi) {
        json r{{"step", t.step},
               {"phase", t.phase == Phase::Encode ? "encode" : "decode"},
               {"pi", pi}};
        pi_lines << r.dump() << '\n';
      }
    }
  }
  std::istringstream pi_stream(pi_lines.str());
  auto summary = aggregate_read_modes(pi_stream);
  std::ofstream sout(out_dir + "/read_modes_summary.json");
  sout << summary.to_json().dump(2) << '\n';
  return summary;
}

}  // namespace

ReadModeSummary cmd_inspect(const std::string& checkpoint_path,
                            const std::string& dataset_path, int example_index,
                            const std::string& out_dir) {
  auto ck = Checkpoint::load(checkpoint_path);
  auto snapshot = RunConfig::from_json(ck.config);
  if (!snapshot.model.has_memory())
    throw std::runtime_error(
        "inspect: checkpoint is a seq2seq model; there is no memory to trace");
  auto pairs = load_pairs_jsonl(dataset_path);
  if (example_index < 0 || example_index >= static_cast<int>(pairs.size()))
    throw std::runtime_error("inspect: example index " +
                             std::to_string(example_index) + " out of range (" +
                             std::to_string(pairs.size()) + " examples)");
  if (snapshot.model.precision == "f32")
    return inspect_impl<float>(ck, snapshot, pairs[example_index], out_dir);
  return inspect_impl<double>(ck, snapshot, pairs[example_index], out_dir);
}

// ---------------------------------------------------------------------------
// Data generation
// ---------------------------------------------------------------------------

void cmd_gen_data(const GenDataOptions& options) {
  if (options.out_dir.empty())
    throw std::invalid_argument("gen-data: output directory required");
  fs::create_directories(options.out_dir);
  const std::string dir = options.out_dir;

  if (options.task == "odd-even") {
    // one stream: the first train_count pairs train, the next test_count test
    const int total = options.train_count + options.test_count + options.valid_count;
    auto pairs = gen_odd_even(total, options.seed,
                              {options.len_min, options.len_max});
    std::vector<SequencePair> train(pairs.begin(), pairs.begin() + options.train_count);
    std::vector<SequencePair> test(pairs.begin() + options.train_count,
                                   pairs.begin() + options.train_count +
                                       options.test_count);
    save_pairs_jsonl(dir + "/train.jsonl", train);
    save_pairs_jsonl(dir + "/test.jsonl", test);
    if (options.valid_count > 0) {
      std::vector<SequencePair> valid(pairs.end() - options.valid_count, pairs.end());
      save_pairs_jsonl(dir + "/valid.jsonl", valid);
    }
    odd_even_input_vocab().save(dir + "/vocab_in.json");
    odd_even_output_vocab().save(dir + "/vocab_out.json");
    std::ofstream meta(dir + "/dataset.json");
    meta << json{{"task", "odd-even"},
                 {"seed", options.seed},
                 {"train", options.train_count},
                 {"test", options.test_count},
                 {"valid", options.valid_count},
                 {"len_min", options.len_min},
                 {"len_max", options.len_max}}
                .dump(2)
         << '\n';
    return;
  }

  if (options.task != "emr-procedure" && options.task != "emr-drug")
    throw std::invalid_argument("gen-data: unknown task '" + options.task + "'");

  std::vector<Patient> cohort;
  IngestReport ingest_report;
  if (!options.mimic_dir.empty()) {
    MimicColumnMap columns;
    if (!options.mimic_mapping.empty())
      columns = MimicColumnMap::from_json_file(options.mimic_mapping);
    cohort = ingest_mimic(options.mimic_dir,
                          options.task == "emr-procedure" ? TreatmentKind::Procedure
                                                          : TreatmentKind::Drug,
                          columns, &ingest_report);
    for (const auto& w : ingest_report.warnings)
      std::fprintf(stderr, "gen-data: %s\n", w.c_str());
    if (ingest_report.rows_skipped)
      std::fprintf(stderr, "gen-data: skipped %d unparseable rows\n",
                   ingest_report.rows_skipped);
  } else {
    cohort = gen_synthetic_emr(options.emr, options.seed);
  }
  if (cohort.size() < 3)
    throw std::runtime_error("gen-data: cohort too small to split");

  auto [vocab_in, vocab_out] = build_emr_vocabs(cohort);
  auto splits = split_indices(static_cast<int>(cohort.size()), {0.7, 0.1, 0.2},
                              options.seed);
  const char* names[3] = {"train", "valid", "test"};
  json counts;
  for (int b = 0; b < 3; ++b) {
    std::vector<Patient> subset;
    for (int idx : splits[b]) subset.push_back(cohort[idx]);
    auto pairs = encode_emr_pairs(subset, vocab_in, vocab_out);
    save_pairs_jsonl(dir + "/" + names[b] + ".jsonl", pairs);
    counts[names[b]] = {{"patients", subset.size()}, {"pairs", pairs.size()}};
  }
  vocab_in.save(dir + "/vocab_in.json");
  vocab_out.save(dir + "/vocab_out.json");
  std::ofstream meta(dir + "/dataset.json");
  meta << json{{"task", options.task},
               {"seed", options.seed},
               {"splits", counts},
               {"source", options.mimic_dir.empty() ? "synthetic" : options.mimic_dir}}
              .dump(2)
       << '\n';
}

}  // namespace dcw
