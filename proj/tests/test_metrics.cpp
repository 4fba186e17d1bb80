#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <sstream>

#include "dcw/metrics.hpp"
#include "dcw/tokens.hpp"
#include "oracles.hpp"

using namespace dcw;

namespace {

std::vector<int> random_seq(std::mt19937_64& rng, int max_len, int alphabet) {
  std::uniform_int_distribution<int> len(0, max_len);
  std::uniform_int_distribution<int> sym(0, alphabet - 1);
  std::vector<int> s(len(rng));
  for (auto& v : s) v = sym(rng);
  return s;
}

}  // namespace

TEST_CASE("levenshtein basics") {
  CHECK(levenshtein({1, 2, 3}, {1, 2, 3}) == 0);
  CHECK(levenshtein({}, {5, 6, 7}) == 3);
  CHECK(levenshtein({1, 2, 3}, {2, 3, 4}) == 2);
  CHECK(levenshtein({1}, {}) == 1);
}

TEST_CASE("levenshtein matches the recursive reference on 1000 fuzzed pairs") {
  std::mt19937_64 rng(71);
  for (int t = 0; t < 1000; ++t) {
    auto a = random_seq(rng, 12, 5);
    auto b = random_seq(rng, 12, 5);
    CHECK(levenshtein(a, b) == oracle::lev_reference(a, b));
  }
}

TEST_CASE("levenshtein metric axioms on 500 fuzzed triples") {
  std::mt19937_64 rng(73);
  for (int t = 0; t < 500; ++t) {
    auto a = random_seq(rng, 8, 4);
    auto b = random_seq(rng, 8, 4);
    auto c = random_seq(rng, 8, 4);
    const int ab = levenshtein(a, b);
    const int ba = levenshtein(b, a);
    const int bc = levenshtein(b, c);
    const int ac = levenshtein(a, c);
    CHECK(ab == ba);                    // symmetry
    CHECK((ab == 0) == (a == b));       // identity of indiscernibles
    CHECK(ac <= ab + bc);               // triangle inequality
    CHECK(ab >= 0);
  }
}

TEST_CASE("normalized distance") {
  CHECK(nld({1, 2}, {1, 2}) == 0.0);
  CHECK(nld({22, 14}, {22, 16}) == 0.5);
  CHECK(nld({9, 9, 9}, {}) == 1.0);
  CHECK(nld({}, {}) == 0.0);
  std::mt19937_64 rng(79);
  for (int t = 0; t < 300; ++t) {
    auto a = random_seq(rng, 10, 4);
    auto b = random_seq(rng, 10, 4);
    const double v = nld(a, b);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK((v == 0.0) == (a == b));
  }
}

TEST_CASE("set precision") {
  CHECK(set_precision({1, 2}, {1, 3}) == 0.5);
  CHECK(set_precision({4, 5, 6}, {4, 5, 6}) == 1.0);
  CHECK(set_precision({9}, {1, 2}) == 0.0);
  CHECK(set_precision({}, {1}) == 0.0);       // empty prediction scores zero
  CHECK(set_precision({1, 1, 2}, {1}) == 0.5);  // duplicates collapse
}

TEST_CASE("jaccard") {
  CHECK(jaccard({1, 2}, {1, 3}) == doctest::Approx(1.0 / 3.0));
  CHECK(jaccard({7, 8}, {8, 7}) == 1.0);
  CHECK(jaccard({1}, {2}) == 0.0);
  CHECK(jaccard({}, {}) == 1.0);
}

TEST_CASE("set metrics are order-invariant and match the reference") {
  std::mt19937_64 rng(83);
  for (int t = 0; t < 1000; ++t) {
    auto a = random_seq(rng, 10, 6);
    auto b = random_seq(rng, 10, 6);
    const double p = set_precision(a, b);
    const double j = jaccard(a, b);
    CHECK(p == oracle::precision_reference(a, b));
    CHECK(j == oracle::jaccard_reference(a, b));
    auto a2 = a;
    auto b2 = b;
    std::shuffle(a2.begin(), a2.end(), rng);
    std::shuffle(b2.begin(), b2.end(), rng);
    CHECK(set_precision(a2, b2) == p);
    CHECK(jaccard(a2, b2) == j);
    // jaccard never exceeds either precision or recall (the empty-set
    // conventions jaccard=1 / precision=0 sit outside the inequality)
    if (!a.empty() && !b.empty()) {
      CHECK(j <= p + 1e-15);
      CHECK(j <= oracle::recall_reference(a, b) + 1e-15);
    }
  }
}

TEST_CASE("control tokens are stripped before scoring") {
  CHECK(strip_control_tokens({5, kEndId, 6, kPadId}) == std::vector<int>{5, 6});
  auto report = build_report({{5, kEndId}}, {{5, kEndId}});
  CHECK(report.records[0].nld == 0.0);
  CHECK(report.records[0].jaccard == 1.0);
}

TEST_CASE("report aggregates equal the mean of records") {
  std::mt19937_64 rng(89);
  std::vector<std::vector<int>> preds, targets;
  for (int i = 0; i < 40; ++i) {
    preds.push_back(random_seq(rng, 8, 5));
    targets.push_back(random_seq(rng, 8, 5));
  }
  auto report = build_report(preds, targets);
  CHECK(report.count == 40);
  double n = 0, p = 0, j = 0;
  for (const auto& r : report.records) {
    n += r.nld;
    p += r.precision;
    j += r.jaccard;
  }
  CHECK(report.mean_nld == doctest::Approx(n / 40).epsilon(1e-12));
  CHECK(report.mean_precision == doctest::Approx(p / 40).epsilon(1e-12));
  CHECK(report.mean_jaccard == doctest::Approx(j / 40).epsilon(1e-12));
}

TEST_CASE("read mode aggregation") {
  SUBCASE("single-mode stream") {
    std::istringstream in(
        R"({"step":0,"phase":"encode","pi":[0,1,0]})" "\n"
        R"({"step":1,"phase":"encode","pi":[0,1,0]})" "\n");
    auto s = aggregate_read_modes(in);
    CHECK(s.encode[1] == 1.0);
    CHECK(s.encode_count == 2);
    CHECK(s.decode_count == 0);
  }
  SUBCASE("mean of two opposing records") {
    std::istringstream in(
        R"({"step":0,"phase":"decode","pi":[1,0,0]})" "\n"
        R"({"step":1,"phase":"decode","pi":[0,0,1]})" "\n");
    auto s = aggregate_read_modes(in);
    CHECK(s.decode[0] == 0.5);
    CHECK(s.decode[1] == 0.0);
    CHECK(s.decode[2] == 0.5);
  }
  SUBCASE("malformed records are skipped and counted") {
    std::istringstream in(
        "not json\n"
        R"({"step":0,"phase":"encode","pi":[0.2,0.5,0.3]})" "\n"
        R"({"step":1,"phase":"encode"})" "\n");
    auto s = aggregate_read_modes(in);
    CHECK(s.skipped == 2);
    CHECK(s.encode_count == 1);
    double total = s.encode[0] + s.encode[1] + s.encode[2];
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("empty stream is an error") {
    std::istringstream in("");
    CHECK_THROWS_AS(aggregate_read_modes(in), std::runtime_error);
  }
}
