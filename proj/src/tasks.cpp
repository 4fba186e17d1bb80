#include "dcw/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace dcw {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

Vocabulary::Vocabulary() {
  for (const char* tok : {kPadToken, kGoToken, kEndToken, kSepToken}) {
    ids_[tok] = static_cast<int>(tokens_.size());
    tokens_.push_back(tok);
  }
}

int Vocabulary::add(const std::string& token) {
  auto it = ids_.find(token);
  if (it != ids_.end()) return it->second;
  const int id = static_cast<int>(tokens_.size());
  ids_[token] = id;
  tokens_.push_back(token);
  return id;
}

int Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  if (it == ids_.end())
    throw std::invalid_argument("vocabulary: unknown token '" + token + "'");
  return it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size())
    throw std::invalid_argument("vocabulary: id " + std::to_string(id) +
                                " out of range (size " + std::to_string(size()) + ")");
  return tokens_[id];
}

bool Vocabulary::contains(const std::string& token) const {
  return ids_.count(token) > 0;
}

json Vocabulary::to_json() const {
  json tokens = json::object();
  for (int i = 0; i < size(); ++i) tokens[tokens_[i]] = i;
  return json{{"tokens", tokens},
              {"special",
               {{kPadToken, kPadId},
                {kGoToken, kGoId},
                {kEndToken, kEndId},
                {kSepToken, kSepId}}}};
}

Vocabulary Vocabulary::from_json(const json& j) {
  if (!j.contains("tokens") || !j["tokens"].is_object())
    throw std::runtime_error("vocabulary: missing 'tokens' map");
  std::vector<std::string> by_id(j["tokens"].size());
  for (auto& [tok, id] : j["tokens"].items()) {
    const int i = id.get<int>();
    if (i < 0 || i >= static_cast<int>(by_id.size()))
      throw std::runtime_error("vocabulary: non-dense ids");
    by_id[i] = tok;
  }
  Vocabulary v;
  for (int i = 0; i < kNumReserved; ++i)
    if (by_id[i] != v.tokens_[i])
      throw std::runtime_error("vocabulary: reserved token mismatch at id " +
                               std::to_string(i));
  for (size_t i = kNumReserved; i < by_id.size(); ++i) v.add(by_id[i]);
  return v;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("vocabulary: cannot write " + path);
  out << to_json().dump(2) << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("vocabulary: cannot read " + path);
  json j;
  in >> j;
  return from_json(j);
}

uint64_t Vocabulary::fingerprint() const {
  uint64_t h = 1469598103934665603ull;
  for (const auto& tok : tokens_) {
    for (char c : tok) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
    h ^= 0xff;
    h *= 1099511628211ull;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Odd-even task
// ---------------------------------------------------------------------------

std::vector<int> odd_even_targets(const std::vector<int>& inputs) {
  const int n = static_cast<int>(inputs.size());
  std::vector<int> out(n);
  const int half = n / 2;
  for (int i = 0; i < n; ++i) {
    if (i < half || i == 0)
      out[i] = 2 * inputs[i];
    else
      out[i] = out[i - 1] + 2;
  }
  return out;
}

Vocabulary odd_even_input_vocab() {
  Vocabulary v;
  for (int x = 1; x <= 49; x += 2) v.add(std::to_string(x));
  return v;
}

Vocabulary odd_even_output_vocab() {
  // the +2 tail can climb to 2*49 + 2*10 = 118 for a length-20 sequence
  Vocabulary v;
  for (int y = 2; y <= 118; y += 2) v.add(std::to_string(y));
  return v;
}

std::vector<SequencePair> gen_odd_even(int count, uint64_t seed,
                                       std::pair<int, int> len_range) {
  if (count <= 0) throw std::invalid_argument("gen_odd_even: count must be positive");
  if (len_range.first < 1 || len_range.second < len_range.first)
    throw std::invalid_argument("gen_odd_even: bad length range");
  if (len_range.second > 25)
    throw std::invalid_argument(
        "gen_odd_even: length range exceeds the 25 available odd numbers");
  const Vocabulary in_vocab = odd_even_input_vocab();
  const Vocabulary out_vocab = odd_even_output_vocab();

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> len_dist(len_range.first, len_range.second);
  std::vector<int> odds;
  for (int x = 1; x <= 49; x += 2) odds.push_back(x);

  std::vector<SequencePair> pairs;
  pairs.reserve(count);
  std::vector<int> pool = odds;
  for (int p = 0; p < count; ++p) {
    const int len = len_dist(rng);
    // partial Fisher-Yates draws len odds without replacement
    pool = odds;
    for (int i = 0; i < len; ++i) {
      std::uniform_int_distribution<int> pick(i, static_cast<int>(pool.size()) - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    std::vector<int> xs(pool.begin(), pool.begin() + len);
    const std::vector<int> ys = odd_even_targets(xs);
    SequencePair pair;
    for (int x : xs) pair.input.push_back(in_vocab.id(std::to_string(x)));
    pair.input.push_back(kSepId);
    for (int y : ys) pair.target.push_back(out_vocab.id(std::to_string(y)));
    pair.target.push_back(kEndId);
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

// ---------------------------------------------------------------------------
// Admission-history encoding
// ---------------------------------------------------------------------------

SequencePair encode_admission_history(const std::vector<Visit>& visits, int n,
                                      const Vocabulary& input_vocab,
                                      const Vocabulary& output_vocab) {
  if (n < 2)
    throw std::invalid_argument(
        "encode_admission_history: need at least two visits, got n=" +
        std::to_string(n));
  if (n > static_cast<int>(visits.size()))
    throw std::invalid_argument("encode_admission_history: n=" + std::to_string(n) +
                                " exceeds visit count " +
                                std::to_string(visits.size()));
  if (visits[n - 1].diagnoses.empty())
    throw std::invalid_argument(
        "encode_admission_history: current admission has no diagnoses");
  SequencePair pair;
  for (int k = 0; k < n - 1; ++k) {
    for (const auto& d : visits[k].diagnoses) pair.input.push_back(input_vocab.id(d));
    pair.input.push_back(kSepId);
    for (const auto& t : visits[k].treatments) pair.input.push_back(input_vocab.id(t));
    pair.input.push_back(kEndId);
  }
  for (const auto& d : visits[n - 1].diagnoses) pair.input.push_back(input_vocab.id(d));
  pair.input.push_back(kSepId);
  for (const auto& t : visits[n - 1].treatments)
    pair.target.push_back(output_vocab.id(t));
  pair.target.push_back(kEndId);
  return pair;
}

// ---------------------------------------------------------------------------
// Synthetic EMR
// ---------------------------------------------------------------------------

void EmrGenConfig::validate() const {
  if (patients <= 0 || latent_conditions <= 0)
    throw std::invalid_argument("emr config: counts must be positive");
  if (visits_min < 1 || visits_max < visits_min || visits_mean > visits_max ||
      diag_len_max < 1 || diag_len_mean > diag_len_max || treat_len_max < 1 ||
      treat_len_mean > treat_len_max)
    throw std::invalid_argument("emr config: distribution means must not exceed maxima");
  if (diag_vocab <= 0 || treat_vocab <= 0)
    throw std::invalid_argument("emr config: vocabulary sizes must be positive");
  if (noise_rate < 0 || noise_rate > 1)
    throw std::invalid_argument("emr config: noise rate must be in [0,1]");
}

namespace {

// Geometric distribution truncated to {lo..hi}, fitted to a target mean by
// bisection on the decay ratio. Attainable means lie in (lo, (lo+hi)/2);
// targets outside are clamped to the nearest endpoint shape.
struct TruncatedGeometric {
  int lo = 0;
  std::vector<double> cdf;

  static TruncatedGeometric fit(double mean, int lo, int hi) {
    TruncatedGeometric g;
    g.lo = lo;
    const int n = hi - lo + 1;
    auto mean_for = [&](double q) {
      double num = 0, den = 0, w = 1;
      for (int k = 0; k < n; ++k) {
        num += (lo + k) * w;
        den += w;
        w *= q;
      }
      return num / den;
    };
    double lo_q = 1e-12, hi_q = 1.0 - 1e-12;
    double q;
    if (mean <= mean_for(lo_q)) {
      q = lo_q;
    } else if (mean >= mean_for(hi_q)) {
      q = hi_q;
    } else {
      for (int it = 0; it < 200; ++it) {
        q = 0.5 * (lo_q + hi_q);
        (mean_for(q) < mean ? lo_q : hi_q) = q;
      }
      q = 0.5 * (lo_q + hi_q);
    }
    double w = 1, total = 0;
    g.cdf.resize(n);
    for (int k = 0; k < n; ++k) {
      total += w;
      g.cdf[k] = total;
      w *= q;
    }
    for (auto& c : g.cdf) c /= total;
    return g;
  }

  int sample(std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double x = u(rng);
    const auto it = std::lower_bound(cdf.begin(), cdf.end(), x);
    return lo + static_cast<int>(it - cdf.begin());
  }
};

std::string diag_code(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "d%05d", i);
  return buf;
}

std::string treat_code(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "t%05d", i);
  return buf;
}

}  // namespace

std::vector<Patient> gen_synthetic_emr(const EmrGenConfig& config, uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);

  const int max_conditions_per_patient = 4;
  // block-size distributions chosen so that concatenating the blocks of an
  // average patient (2.5 conditions) lands near the configured visit means
  const double avg_conditions = (1 + max_conditions_per_patient) / 2.0;
  const int diag_block_max = std::max(1, (config.diag_len_max + 1) / 2);
  const auto diag_block_dist = TruncatedGeometric::fit(
      std::max(1.0, config.diag_len_mean / avg_conditions), 1, diag_block_max);
  const int treat_block_max = std::max(1, (config.treat_len_max + 1) / 2);
  const auto treat_block_dist = TruncatedGeometric::fit(
      std::max(0.0, config.treat_len_mean - 1.0) / avg_conditions, 0,
      treat_block_max);
  const auto visit_dist = TruncatedGeometric::fit(
      config.visits_mean, config.visits_min, config.visits_max);

  // carve fixed, disjoint code blocks per latent condition
  std::vector<std::vector<std::string>> cond_diag(config.latent_conditions);
  std::vector<std::vector<std::string>> cond_treat(config.latent_conditions);
  int next_d = 0, next_t = 0;
  for (int c = 0; c < config.latent_conditions; ++c) {
    const int nd = diag_block_dist.sample(rng);
    const int nt = treat_block_dist.sample(rng);
    if (next_d + nd > config.diag_vocab || next_t + nt > config.treat_vocab)
      throw std::invalid_argument(
          "gen_synthetic_emr: vocabulary too small for the condition blocks");
    for (int i = 0; i < nd; ++i) cond_diag[c].push_back(diag_code(next_d++));
    for (int i = 0; i < nt; ++i) cond_treat[c].push_back(treat_code(next_t++));
  }

  std::uniform_int_distribution<int> cond_count_dist(1, max_conditions_per_patient);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> any_diag(0, config.diag_vocab - 1);

  std::vector<Patient> cohort;
  cohort.reserve(config.patients);
  for (int p = 0; p < config.patients; ++p) {
    // sample a sorted condition set without replacement (priority = id order)
    const int n_cond = cond_count_dist(rng);
    std::vector<int> all(config.latent_conditions);
    std::iota(all.begin(), all.end(), 0);
    for (int i = 0; i < n_cond; ++i) {
      std::uniform_int_distribution<int> pick(i, config.latent_conditions - 1);
      std::swap(all[i], all[pick(rng)]);
    }
    std::vector<int> conds(all.begin(), all.begin() + n_cond);
    std::sort(conds.begin(), conds.end());

    const int n_visits = visit_dist.sample(rng);
    Patient patient;
    for (int v = 0; v < n_visits; ++v) {
      Visit visit;
      for (int c : conds)
        for (const auto& code : cond_diag[c]) {
          if (static_cast<int>(visit.diagnoses.size()) >= config.diag_len_max) break;
          visit.diagnoses.push_back(code);
        }
      for (auto& code : visit.diagnoses)
        if (config.noise_rate > 0 && unit(rng) < config.noise_rate)
          code = diag_code(any_diag(rng));

      // conditions still visible through the (possibly noisy) diagnoses
      std::set<std::string> present(visit.diagnoses.begin(), visit.diagnoses.end());
      if (!patient.empty() && !patient.back().treatments.empty())
        visit.treatments.push_back(patient.back().treatments.front());
      for (int c = 0; c < config.latent_conditions; ++c) {
        bool visible = false;
        for (const auto& code : cond_diag[c])
          if (present.count(code)) visible = true;
        if (!visible) continue;
        for (const auto& code : cond_treat[c]) {
          if (static_cast<int>(visit.treatments.size()) >= config.treat_len_max) break;
          visit.treatments.push_back(code);
        }
      }
      patient.push_back(std::move(visit));
    }
    cohort.push_back(std::move(patient));
  }
  return cohort;
}

std::pair<Vocabulary, Vocabulary> build_emr_vocabs(const std::vector<Patient>& cohort) {
  std::set<std::string> input_codes, output_codes;
  for (const auto& patient : cohort)
    for (const auto& visit : patient) {
      input_codes.insert(visit.diagnoses.begin(), visit.diagnoses.end());
      input_codes.insert(visit.treatments.begin(), visit.treatments.end());
      output_codes.insert(visit.treatments.begin(), visit.treatments.end());
    }
  Vocabulary in_vocab, out_vocab;
  for (const auto& c : input_codes) in_vocab.add(c);
  for (const auto& c : output_codes) out_vocab.add(c);
  return {in_vocab, out_vocab};
}

std::vector<SequencePair> encode_emr_pairs(const std::vector<Patient>& cohort,
                                           const Vocabulary& input_vocab,
                                           const Vocabulary& output_vocab,
                                           std::vector<int>* pair_patient) {
  std::vector<SequencePair> pairs;
  for (size_t p = 0; p < cohort.size(); ++p) {
    const auto& visits = cohort[p];
    for (int n = 2; n <= static_cast<int>(visits.size()); ++n) {
      if (visits[n - 1].diagnoses.empty()) continue;
      pairs.push_back(encode_admission_history(visits, n, input_vocab, output_vocab));
      if (pair_patient) pair_patient->push_back(static_cast<int>(p));
    }
  }
  return pairs;
}

// ---------------------------------------------------------------------------
// MIMIC-style ingestion
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> parse_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name, const std::string& file) const {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw std::runtime_error("ingest: file '" + file + "' is missing column '" +
                             name + "'");
  }
};

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("ingest: cannot read " + path);
  CsvTable t;
  std::string line;
  if (std::getline(in, line)) t.header = parse_csv_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    t.rows.push_back(parse_csv_line(line));
  }
  return t;
}

bool looks_like_date(const std::string& s) {
  // minimal shape check for "YYYY-MM-DD..." values; lexicographic order of
  // well-formed values matches chronological order
  if (s.size() < 10) return false;
  for (int i : {0, 1, 2, 3, 5, 6, 8, 9})
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  return s[4] == '-' && s[7] == '-';
}

}  // namespace

MimicColumnMap MimicColumnMap::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("ingest: cannot read column map " + path);
  json j;
  in >> j;
  MimicColumnMap m;
  auto get = [&](const char* key, std::string& field) {
    if (j.contains(key)) field = j[key].get<std::string>();
  };
  get("admissions_file", m.admissions_file);
  get("diagnoses_file", m.diagnoses_file);
  get("procedures_file", m.procedures_file);
  get("prescriptions_file", m.prescriptions_file);
  get("patient_col", m.patient_col);
  get("admission_col", m.admission_col);
  get("admit_time_col", m.admit_time_col);
  get("diagnosis_code_col", m.diagnosis_code_col);
  get("diagnosis_seq_col", m.diagnosis_seq_col);
  get("procedure_code_col", m.procedure_code_col);
  get("procedure_seq_col", m.procedure_seq_col);
  get("drug_col", m.drug_col);
  get("drug_date_col", m.drug_date_col);
  return m;
}

std::vector<Patient> ingest_mimic(const std::string& dir, TreatmentKind kind,
                                  const MimicColumnMap& columns,
                                  IngestReport* report) {
  namespace fs = std::filesystem;
  IngestReport local;
  IngestReport& rep = report ? *report : local;

  const auto adm_path = fs::path(dir) / columns.admissions_file;
  if (!fs::exists(adm_path)) {
    rep.warnings.push_back("no admissions table found in " + dir +
                           "; returning an empty cohort");
    return {};
  }

  // admissions: admission id -> (patient, admit time)
  auto adm = read_csv(adm_path.string());
  const int a_pat = adm.column(columns.patient_col, columns.admissions_file);
  const int a_adm = adm.column(columns.admission_col, columns.admissions_file);
  const int a_time = adm.column(columns.admit_time_col, columns.admissions_file);
  struct AdmInfo {
    std::string patient, time;
  };
  std::map<std::string, AdmInfo> admissions;
  std::map<std::string, std::vector<std::string>> patient_adms;
  for (const auto& row : adm.rows) {
    const std::string& time = row[a_time];
    if (!looks_like_date(time)) {
      ++rep.rows_skipped;
      continue;
    }
    admissions[row[a_adm]] = {row[a_pat], time};
    patient_adms[row[a_pat]].push_back(row[a_adm]);
  }

  // diagnoses: admission -> (seq, code)
  std::map<std::string, std::vector<std::pair<long, std::string>>> diagnoses;
  {
    auto t = read_csv((fs::path(dir) / columns.diagnoses_file).string());
    const int c_adm = t.column(columns.admission_col, columns.diagnoses_file);
    const int c_code = t.column(columns.diagnosis_code_col, columns.diagnoses_file);
    const int c_seq = t.column(columns.diagnosis_seq_col, columns.diagnoses_file);
    for (const auto& row : t.rows) {
      if (row[c_code].empty()) {
        ++rep.rows_skipped;
        continue;
      }
      long seq = 0;
      try {
        seq = std::stol(row[c_seq]);
      } catch (...) {
        ++rep.rows_skipped;
        continue;
      }
      diagnoses[row[c_adm]].emplace_back(seq, "d:" + row[c_code]);
    }
  }

  // treatments: admission -> ordered codes
  std::map<std::string, std::vector<std::string>> treatments;
  if (kind == TreatmentKind::Procedure) {
    auto t = read_csv((fs::path(dir) / columns.procedures_file).string());
    const int c_adm = t.column(columns.admission_col, columns.procedures_file);
    const int c_code = t.column(columns.procedure_code_col, columns.procedures_file);
    const int c_seq = t.column(columns.procedure_seq_col, columns.procedures_file);
    std::map<std::string, std::vector<std::pair<long, std::string>>> rows;
    for (const auto& row : t.rows) {
      if (row[c_code].empty()) {
        ++rep.rows_skipped;
        continue;
      }
      long seq = 0;
      try {
        seq = std::stol(row[c_seq]);
      } catch (...) {
        ++rep.rows_skipped;
        continue;
      }
      rows[row[c_adm]].emplace_back(seq, "p:" + row[c_code]);
    }
    for (auto& [admission, list] : rows) {
      std::stable_sort(list.begin(), list.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      for (auto& [seq, code] : list) treatments[admission].push_back(code);
    }
  } else {
    auto t = read_csv((fs::path(dir) / columns.prescriptions_file).string());
    const int c_adm = t.column(columns.admission_col, columns.prescriptions_file);
    const int c_drug = t.column(columns.drug_col, columns.prescriptions_file);
    const int c_date = t.column(columns.drug_date_col, columns.prescriptions_file);
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> rows;
    for (const auto& row : t.rows) {
      if (row[c_drug].empty()) {
        ++rep.rows_skipped;
        continue;
      }
      if (!looks_like_date(row[c_date])) {
        ++rep.rows_skipped;
        continue;
      }
      rows[row[c_adm]].emplace_back(row[c_date].substr(0, 10), "rx:" + row[c_drug]);
    }
    for (auto& [admission, list] : rows) {
      std::stable_sort(list.begin(), list.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      std::string last_date;
      for (auto& [date, code] : list) {
        if (date == last_date) continue;  // first drug per day only
        last_date = date;
        treatments[admission].push_back(code);
      }
    }
  }

  std::vector<Patient> cohort;
  for (auto& [patient_id, adm_ids] : patient_adms) {
    std::stable_sort(adm_ids.begin(), adm_ids.end(),
                     [&](const std::string& a, const std::string& b) {
                       return admissions[a].time < admissions[b].time;
                     });
    Patient patient;
    for (const auto& adm_id : adm_ids) {
      Visit visit;
      auto d = diagnoses.find(adm_id);
      if (d != diagnoses.end()) {
        std::stable_sort(d->second.begin(), d->second.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        for (auto& [seq, code] : d->second) visit.diagnoses.push_back(code);
      }
      auto t = treatments.find(adm_id);
      if (t != treatments.end()) visit.treatments = t->second;
      patient.push_back(std::move(visit));
    }
    if (patient.size() < 2) {
      ++rep.patients_dropped;
      continue;
    }
    ++rep.patients_kept;
    cohort.push_back(std::move(patient));
  }
  if (cohort.empty())
    rep.warnings.push_back("ingest produced an empty cohort from " + dir);
  return cohort;
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

std::array<std::vector<int>, 3> split_indices(int n, std::array<double, 3> ratios,
                                              uint64_t seed) {
  if (n < 3) throw std::invalid_argument("split: need at least 3 items");
  double total = 0;
  for (double r : ratios) {
    if (r <= 0) throw std::invalid_argument("split: ratios must be positive");
    total += r;
  }
  if (std::fabs(total - 1.0) > 1e-9)
    throw std::invalid_argument("split: ratios must sum to 1");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  for (int i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<int> pick(0, i);
    std::swap(order[i], order[pick(rng)]);
  }
  std::array<int, 3> sizes{};
  int assigned = 0;
  for (int b = 0; b < 3; ++b) {
    sizes[b] = static_cast<int>(std::floor(n * ratios[b]));
    assigned += sizes[b];
  }
  for (int b = 0; assigned < n; b = (b + 1) % 3) {
    ++sizes[b];
    ++assigned;
  }
  std::array<std::vector<int>, 3> out;
  int pos = 0;
  for (int b = 0; b < 3; ++b) {
    out[b].assign(order.begin() + pos, order.begin() + pos + sizes[b]);
    pos += sizes[b];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset files
// ---------------------------------------------------------------------------

void save_pairs_jsonl(const std::string& path, const std::vector<SequencePair>& pairs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("dataset: cannot write " + path);
  for (const auto& p : pairs) {
    json j{{"input", p.input}, {"target", p.target}};
    out << j.dump() << '\n';
  }
}

std::vector<SequencePair> load_pairs_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("dataset: cannot read " + path);
  std::vector<SequencePair> pairs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("input") || !j.contains("target"))
      throw std::runtime_error("dataset: malformed record at " + path + ":" +
                               std::to_string(line_no));
    SequencePair p;
    p.input = j["input"].get<std::vector<int>>();
    p.target = j["target"].get<std::vector<int>>();
    pairs.push_back(std::move(p));
  }
  return pairs;
}

}  // namespace dcw
