#include "dcw/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "dcw/tokens.hpp"

namespace dcw {

using nlohmann::json;

int levenshtein(const std::vector<int>& a, const std::vector<int>& b) {
  const size_t n = a.size(), m = b.size();
  if (n == 0) return static_cast<int>(m);
  if (m == 0) return static_cast<int>(n);
  std::vector<int> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int>(i);
    for (size_t j = 1; j <= m; ++j) {
      const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double nld(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.empty() && b.empty()) return 0.0;
  return static_cast<double>(levenshtein(a, b)) /
         static_cast<double>(std::max(a.size(), b.size()));
}

double set_precision(const std::vector<int>& pred, const std::vector<int>& truth) {
  std::set<int> sq(pred.begin(), pred.end());
  if (sq.empty()) return 0.0;
  std::set<int> sp(truth.begin(), truth.end());
  int inter = 0;
  for (int v : sq) inter += sp.count(v) ? 1 : 0;
  return static_cast<double>(inter) / static_cast<double>(sq.size());
}

double jaccard(const std::vector<int>& pred, const std::vector<int>& truth) {
  std::set<int> sq(pred.begin(), pred.end());
  std::set<int> sp(truth.begin(), truth.end());
  if (sq.empty() && sp.empty()) return 1.0;
  std::set<int> uni = sp;
  uni.insert(sq.begin(), sq.end());
  int inter = 0;
  for (int v : sq) inter += sp.count(v) ? 1 : 0;
  return static_cast<double>(inter) / static_cast<double>(uni.size());
}

std::vector<int> strip_control_tokens(const std::vector<int>& seq) {
  std::vector<int> out;
  out.reserve(seq.size());
  for (int t : seq)
    if (t != kEndId && t != kPadId) out.push_back(t);
  return out;
}

json EvalReport::to_json() const {
  json recs = json::array();
  for (const auto& r : records)
    recs.push_back({{"id", r.id},
                    {"predicted", r.predicted},
                    {"target", r.target},
                    {"nld", r.nld},
                    {"precision", r.precision},
                    {"jaccard", r.jaccard}});
  return json{{"count", count},
              {"mean_nld", mean_nld},
              {"mean_precision", mean_precision},
              {"mean_jaccard", mean_jaccard},
              {"records", recs}};
}

void EvalReport::write_csv(std::ostream& out) const {
  out << "example_id,nld,precision,jaccard\n";
  char buf[128];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", r.id, r.nld,
                  r.precision, r.jaccard);
    out << buf;
  }
}

EvalReport build_report(const std::vector<std::vector<int>>& predictions,
                        const std::vector<std::vector<int>>& targets) {
  if (predictions.size() != targets.size())
    throw std::invalid_argument("build_report: prediction/target count mismatch");
  EvalReport report;
  report.count = static_cast<int>(predictions.size());
  for (int i = 0; i < report.count; ++i) {
    EvalRecord rec;
    rec.id = i;
    rec.predicted = strip_control_tokens(predictions[i]);
    rec.target = strip_control_tokens(targets[i]);
    rec.nld = nld(rec.predicted, rec.target);
    rec.precision = set_precision(rec.predicted, rec.target);
    rec.jaccard = jaccard(rec.predicted, rec.target);
    report.mean_nld += rec.nld;
    report.mean_precision += rec.precision;
    report.mean_jaccard += rec.jaccard;
    report.records.push_back(std::move(rec));
  }
  if (report.count > 0) {
    report.mean_nld /= report.count;
    report.mean_precision /= report.count;
    report.mean_jaccard /= report.count;
  }
  return report;
}

json ReadModeSummary::to_json() const {
  return json{{"encode", encode},
              {"decode", decode},
              {"encode_count", encode_count},
              {"decode_count", decode_count},
              {"skipped", skipped}};
}

ReadModeSummary aggregate_read_modes(std::istream& jsonl) {
  ReadModeSummary s;
  std::string line;
  while (std::getline(jsonl, line)) {
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("phase") || !j.contains("pi") ||
        !j["pi"].is_array() || j["pi"].size() != 3) {
      ++s.skipped;
      continue;
    }
    const std::string phase = j["phase"].get<std::string>();
    std::array<double, 3>* acc = nullptr;
    if (phase == "encode") {
      acc = &s.encode;
      ++s.encode_count;
    } else if (phase == "decode") {
      acc = &s.decode;
      ++s.decode_count;
    } else {
      ++s.skipped;
      continue;
    }
    for (int i = 0; i < 3; ++i) (*acc)[i] += j["pi"][i].get<double>();
  }
  if (s.encode_count == 0 && s.decode_count == 0)
    throw std::runtime_error("aggregate_read_modes: no valid records");
  for (int i = 0; i < 3; ++i) {
    if (s.encode_count) s.encode[i] /= s.encode_count;
    if (s.decode_count) s.decode[i] /= s.decode_count;
  }
  return s;
}

}  // namespace dcw
