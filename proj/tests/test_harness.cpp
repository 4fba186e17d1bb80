#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dcw/checkpoint.hpp"
#include "dcw/harness.hpp"

using namespace dcw;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::path("/tmp") / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& s) const { return (path / s).string(); }
};

/// Small odd-even dataset shared by the training tests.
void make_tiny_dataset(const std::string& dir) {
  GenDataOptions gen;
  gen.task = "odd-even";
  gen.out_dir = dir;
  gen.seed = 3;
  gen.train_count = 30;
  gen.test_count = 10;
  gen.len_max = 6;
  cmd_gen_data(gen);
}

RunConfig tiny_run(const std::string& data_dir, const std::string& out_dir) {
  RunConfig c;
  c.task = "odd-even";
  c.model.variant = Variant::DCW_MANN;
  c.model.hidden = 8;
  c.model.embed = 7;
  c.model.mem_slots = 4;
  c.model.word_size = 5;
  c.model.read_heads = 1;
  c.model.decode_cap = 0;  // derive from data
  c.train.epochs = 2;
  c.train.eval_every = 15;
  c.train.eval_max_examples = 10;
  c.data.train = data_dir + "/train.jsonl";
  c.data.test = data_dir + "/test.jsonl";
  c.data.vocab_in = data_dir + "/vocab_in.json";
  c.data.vocab_out = data_dir + "/vocab_out.json";
  c.out_dir = out_dir;
  return c;
}

}  // namespace

TEST_CASE("checkpoint round trip is bit-exact and idempotent") {
  TempDir dir("dcw_test_ckpt");
  Checkpoint ck;
  ck.step = 17;
  ck.epoch = 2;
  ck.pos = 5;
  ck.config = {{"task", "odd-even"}};
  ck.put<double>("w", {2, 2}, {1.0, -2.5, 3.25, 1e-300});
  ck.put<double>("b", {3}, {0.0, -0.0, 2.0});
  ck.put<int64_t>("steps", {1}, {42});
  const std::string p1 = dir / "a.ckpt";
  const std::string p2 = dir / "b.ckpt";
  ck.save(p1);

  auto loaded = Checkpoint::load(p1);
  CHECK(loaded.step == 17);
  CHECK(loaded.epoch == 2);
  CHECK(loaded.get<double>("w") == std::vector<double>{1.0, -2.5, 3.25, 1e-300});
  CHECK(loaded.get<int64_t>("steps") == std::vector<int64_t>{42});
  std::vector<int> shape;
  loaded.get<double>("w", &shape);
  CHECK(shape == std::vector<int>{2, 2});

  loaded.save(p2);
  CHECK(slurp(p1) == slurp(p2));  // save(load(x)) is byte-identical
}

TEST_CASE("checkpoint rejects damage with specifics") {
  TempDir dir("dcw_test_ckpt_damage");
  Checkpoint ck;
  ck.put<double>("weights", {4}, {1, 2, 3, 4});
  const std::string path = dir / "x.ckpt";
  ck.save(path);

  SUBCASE("truncated array names the short array") {
    auto bytes = slurp(path);
    std::ofstream out(dir / "trunc.ckpt", std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 9));
    out.close();
    CHECK_THROWS_WITH_AS(Checkpoint::load(dir / "trunc.ckpt"),
                         doctest::Contains("truncated array 'weights'"),
                         std::runtime_error);
  }
  SUBCASE("version mismatch is rejected, not coerced") {
    auto bytes = slurp(path);
    auto pos = bytes.find("\"format_version\":1");
    REQUIRE(pos != std::string::npos);
    bytes[pos + 17] = '9';
    std::ofstream out(dir / "ver.ckpt", std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();
    CHECK_THROWS_WITH_AS(Checkpoint::load(dir / "ver.ckpt"),
                         doctest::Contains("format version 9 unsupported"),
                         std::runtime_error);
  }
  SUBCASE("corrupt manifest is rejected") {
    auto bytes = slurp(path);
    bytes[12] = '~';  // inside the manifest JSON
    std::ofstream out(dir / "bad.ckpt", std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();
    CHECK_THROWS_AS(Checkpoint::load(dir / "bad.ckpt"), std::runtime_error);
  }
  SUBCASE("bad magic is rejected") {
    std::ofstream out(dir / "junk.ckpt", std::ios::binary);
    out << "definitely not a checkpoint";
    out.close();
    CHECK_THROWS_AS(Checkpoint::load(dir / "junk.ckpt"), std::runtime_error);
  }
}

TEST_CASE("odd-even defaults produce the 4000/1000 benchmark counts") {
  GenDataOptions gen;
  CHECK(gen.train_count == 4000);
  CHECK(gen.test_count == 1000);
  CHECK(gen.valid_count == 0);
  TempDir dir("dcw_test_gen_default");
  gen.out_dir = dir / "";
  cmd_gen_data(gen);
  CHECK(load_pairs_jsonl(dir / "train.jsonl").size() == 4000);
  CHECK(load_pairs_jsonl(dir / "test.jsonl").size() == 1000);
  CHECK(!fs::exists(dir / "valid.jsonl"));
}

TEST_CASE("gen-data is deterministic per seed") {
  TempDir a("dcw_test_gen_a"), b("dcw_test_gen_b");
  make_tiny_dataset(a / "");
  make_tiny_dataset(b / "");
  CHECK(slurp(a / "train.jsonl") == slurp(b / "train.jsonl"));
  CHECK(slurp(a / "test.jsonl") == slurp(b / "test.jsonl"));
  CHECK(slurp(a / "vocab_in.json") == slurp(b / "vocab_in.json"));
}

TEST_CASE("emr gen-data writes three splits with disjoint patients") {
  TempDir dir("dcw_test_gen_emr");
  GenDataOptions gen;
  gen.task = "emr-procedure";
  gen.out_dir = dir / "";
  gen.seed = 5;
  gen.emr.patients = 40;
  gen.emr.diag_vocab = 300;
  gen.emr.treat_vocab = 150;
  gen.emr.latent_conditions = 6;
  cmd_gen_data(gen);
  for (const char* f : {"train.jsonl", "valid.jsonl", "test.jsonl", "vocab_in.json",
                        "vocab_out.json"})
    CHECK(fs::exists(dir / f));
  auto train = load_pairs_jsonl(dir / "train.jsonl");
  auto test = load_pairs_jsonl(dir / "test.jsonl");
  CHECK(!train.empty());
  CHECK(!test.empty());
}

TEST_CASE("training determinism, resume, and evaluation") {
  TempDir data("dcw_test_train_data");
  make_tiny_dataset(data / "");

  SUBCASE("identical seeds give byte-identical metrics CSVs") {
    TempDir ra("dcw_test_run_a"), rb("dcw_test_run_b");
    auto ca = tiny_run(data / "", ra / "");
    auto cb = tiny_run(data / "", rb / "");
    cmd_train(ca);
    cmd_train(cb);
    CHECK(slurp(ra / "metrics.csv") == slurp(rb / "metrics.csv"));
    CHECK(slurp(ra / "read_modes.jsonl") == slurp(rb / "read_modes.jsonl"));
    // loss column is finite in every row
    std::istringstream csv(slurp(ra / "metrics.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "step,split,loss,nld,precision,jaccard,wallclock_s");
    while (std::getline(csv, line)) {
      const auto c1 = line.find(',', line.find(',') + 1);
      const auto c2 = line.find(',', c1 + 1);
      const double loss = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
      CHECK(std::isfinite(loss));
    }
  }

  SUBCASE("resume reproduces the uninterrupted run bit-exactly") {
    TempDir full("dcw_test_run_full"), halves("dcw_test_run_halves");
    auto cf = tiny_run(data / "", full / "");
    cf.train.epochs = 2;
    cmd_train(cf);

    auto ch = tiny_run(data / "", halves / "");
    ch.train.epochs = 1;
    cmd_train(ch);
    ch.train.epochs = 2;
    cmd_train(ch, halves / "latest.ckpt");

    auto a = Checkpoint::load(full / "latest.ckpt");
    auto b = Checkpoint::load(halves / "latest.ckpt");
    CHECK(a.step == b.step);
    REQUIRE(a.arrays.size() == b.arrays.size());
    for (const auto& [name, arr] : a.arrays) {
      REQUIRE(b.arrays.count(name) == 1);
      CHECK(arr.bytes == b.arrays.at(name).bytes);
    }
    CHECK(slurp(full / "metrics.csv") == slurp(halves / "metrics.csv"));
  }

  SUBCASE("evaluation reports every example and rejects foreign vocabularies") {
    TempDir run("dcw_test_run_eval");
    auto c = tiny_run(data / "", run / "");
    c.train.epochs = 1;
    cmd_train(c);
    auto report = cmd_eval(run / "latest.ckpt", data / "test.jsonl",
                           data / "vocab_in.json", data / "vocab_out.json",
                           run / "eval");
    CHECK(report.count == 10);
    CHECK(fs::exists(run / "eval/report.json"));
    CHECK(fs::exists(run / "eval/report.csv"));
    // a barely-trained model cannot be near-perfect
    CHECK(report.mean_nld > 0.3);

    TempDir other("dcw_test_other_vocab");
    GenDataOptions gen;
    gen.task = "emr-procedure";
    gen.out_dir = other / "";
    gen.seed = 6;
    gen.emr.patients = 20;
    gen.emr.diag_vocab = 200;
    gen.emr.treat_vocab = 100;
    gen.emr.latent_conditions = 5;
    cmd_gen_data(gen);
    CHECK_THROWS_WITH_AS(cmd_eval(run / "latest.ckpt", data / "test.jsonl",
                                  other / "vocab_in.json", other / "vocab_out.json",
                                  run / "eval2"),
                         doctest::Contains("vocabulary does not match"),
                         std::runtime_error);
  }

  SUBCASE("inspect rejects memory-free checkpoints") {
    TempDir run("dcw_test_run_s2s");
    auto c = tiny_run(data / "", run / "");
    c.model.variant = Variant::Seq2Seq;
    c.train.epochs = 1;
    cmd_train(c);
    CHECK_FALSE(fs::exists(run / "read_modes.jsonl"));  // nothing to log
    CHECK_THROWS_WITH_AS(
        cmd_inspect(run / "latest.ckpt", data / "test.jsonl", 0, run / "trace"),
        doctest::Contains("no memory to trace"), std::runtime_error);
  }

  SUBCASE("decode cap derives from the longest training target") {
    TempDir run("dcw_test_run_cap");
    auto c = tiny_run(data / "", run / "");
    c.train.epochs = 1;
    cmd_train(c);
    auto pairs = load_pairs_jsonl(data / "train.jsonl");
    size_t longest = 0;
    for (const auto& p : pairs) longest = std::max(longest, p.target.size());
    auto ck = Checkpoint::load(run / "latest.ckpt");
    CHECK(ck.config["model"]["decode_cap"].get<int>() ==
          static_cast<int>(2 * longest));
  }

  SUBCASE("inspect trace covers every step with write-free decode") {
    TempDir run("dcw_test_run_inspect");
    auto c = tiny_run(data / "", run / "");
    c.train.epochs = 1;
    cmd_train(c);
    auto summary = cmd_inspect(run / "latest.ckpt", data / "test.jsonl", 2,
                               run / "trace");
    CHECK(summary.encode_count > 0);
    CHECK(summary.decode_count > 0);
    auto pairs = load_pairs_jsonl(data / "test.jsonl");
    std::istringstream trace(slurp(run / "trace/trace.jsonl"));
    std::string line;
    int records = 0, decode_records = 0;
    bool decode_writes_zero = true;
    double pi_sum_err = 0;
    while (std::getline(trace, line)) {
      auto j = nlohmann::json::parse(line);
      ++records;
      if (j["phase"] == "decode") {
        ++decode_records;
        for (double w : j["ww"]) decode_writes_zero &= (w == 0.0);
      }
      for (const auto& pi : j["pi"]) {
        double s = 0;
        for (double v : pi) s += v;
        pi_sum_err = std::max(pi_sum_err, std::fabs(s - 1.0));
      }
    }
    CHECK(records >= static_cast<int>(pairs[2].input.size()) + 1);
    CHECK(decode_records >= 1);
    CHECK(decode_writes_zero);
    CHECK(pi_sum_err < 1e-9);
  }

  SUBCASE("non-finite loss aborts instead of writing garbage") {
    TempDir run("dcw_test_run_nan");
    auto c = tiny_run(data / "", run / "");
    c.optim.lr = std::nan("");  // poisons the first update; loss check trips next
    auto outcome = cmd_train(c);
    CHECK(outcome.aborted_non_finite);
    CHECK(!fs::exists(run / "latest.ckpt"));  // nothing good existed yet
  }
}

TEST_CASE("float32 training runs end to end") {
  TempDir data("dcw_test_train_f32");
  make_tiny_dataset(data / "");
  TempDir run("dcw_test_run_f32");
  auto c = tiny_run(data / "", run / "");
  c.model.precision = "f32";
  c.train.epochs = 1;
  auto outcome = cmd_train(c);
  CHECK(outcome.steps == 30);
  auto ck = Checkpoint::load(run / "latest.ckpt");
  CHECK(ck.arrays.at("head.W").dtype == "f32");
  auto report = cmd_eval(run / "latest.ckpt", data / "test.jsonl",
                         data / "vocab_in.json", data / "vocab_out.json", run / "ev");
  CHECK(report.count == 10);
}
