#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace dcw {

/// Unit-cost edit distance (insert / delete / substitute).
int levenshtein(const std::vector<int>& a, const std::vector<int>& b);

/// Edit distance normalized by the longer length; 0 when both are empty.
double nld(const std::vector<int>& a, const std::vector<int>& b);

/// |pred-set intersect truth-set| / |pred-set|, order and duplicates ignored;
/// 0 for an empty prediction.
double set_precision(const std::vector<int>& pred, const std::vector<int>& truth);

/// |intersection| / |union| on deduplicated sets; 1 when both are empty.
double jaccard(const std::vector<int>& pred, const std::vector<int>& truth);

/// Drops every end-marker and padding token; metrics score content only.
std::vector<int> strip_control_tokens(const std::vector<int>& seq);

struct EvalRecord {
  int id = 0;
  std::vector<int> predicted;
  std::vector<int> target;
  double nld = 0;
  double precision = 0;
  double jaccard = 0;
};

struct EvalReport {
  std::vector<EvalRecord> records;
  double mean_nld = 0;
  double mean_precision = 0;
  double mean_jaccard = 0;
  int count = 0;

  nlohmann::json to_json() const;
  void write_csv(std::ostream& out) const;
};

/// Scores already-stripped prediction/target pairs and aggregates the means.
EvalReport build_report(const std::vector<std::vector<int>>& predictions,
                        const std::vector<std::vector<int>>& targets);

struct ReadModeSummary {
  std::array<double, 3> encode{0, 0, 0};
  std::array<double, 3> decode{0, 0, 0};
  int encode_count = 0;
  int decode_count = 0;
  int skipped = 0;  // malformed records

  nlohmann::json to_json() const;
};

/// Mean read-mode distribution per phase over a JSON Lines stream of
/// {"step":..,"phase":"encode"|"decode","pi":[b,c,f]} records. Malformed
/// lines are skipped and counted; an empty stream is an error.
ReadModeSummary aggregate_read_modes(std::istream& jsonl);

}  // namespace dcw
