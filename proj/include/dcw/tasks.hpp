#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dcw/tokens.hpp"

namespace dcw {

/// Bidirectional token <-> id map. Ids are dense from 0; the four reserved
/// tokens (PAD, GO, end marker, separator) always occupy ids 0..3.
class Vocabulary {
 public:
  Vocabulary();

  int add(const std::string& token);        // get-or-add
  int id(const std::string& token) const;   // throws on unknown token
  const std::string& token(int id) const;   // throws on out-of-range id
  bool contains(const std::string& token) const;
  int size() const { return static_cast<int>(tokens_.size()); }

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  /// FNV-1a over the token list; used to match checkpoints to datasets.
  uint64_t fingerprint() const;

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> ids_;
};

struct SequencePair {
  std::vector<int> input;   // ends with the separator id
  std::vector<int> target;  // ends with the end-marker id
};

struct Visit {
  std::vector<std::string> diagnoses;
  std::vector<std::string> treatments;
};
using Patient = std::vector<Visit>;

// --- odd-even synthetic benchmark -------------------------------------------

/// Output values for an odd-number input sequence: double the n-th input for
/// the first half, then keep adding 2. A length-1 sequence uses the doubling
/// branch.
std::vector<int> odd_even_targets(const std::vector<int>& inputs);

/// Fixed vocabularies for the task: inputs are the odd numbers 1..49,
/// outputs the even numbers 2..118 (the increment tail can run past 2*49).
Vocabulary odd_even_input_vocab();
Vocabulary odd_even_output_vocab();

std::vector<SequencePair> gen_odd_even(int count, uint64_t seed,
                                       std::pair<int, int> len_range = {1, 20});

// --- admission-history encoding ----------------------------------------------

/// Flattens visits 1..n-1 plus visit n's diagnoses into the model input
/// (diagnoses % treatments marker per past visit, current diagnoses %), and
/// visit n's treatments into the target. Requires n >= 2.
SequencePair encode_admission_history(const std::vector<Visit>& visits, int n,
                                      const Vocabulary& input_vocab,
                                      const Vocabulary& output_vocab);

// --- synthetic EMR generator --------------------------------------------------

/// Latent-condition cohort model shaped by per-dataset statistics: each
/// patient carries 1-4 chronic conditions; a condition maps to fixed blocks
/// of diagnosis and treatment codes. Visit diagnoses concatenate the blocks
/// (priority order) with optional noise; treatments follow from the
/// conditions visible in the diagnoses plus one code carried over from the
/// previous visit.
struct EmrGenConfig {
  int patients = 1000;
  double visits_mean = 2.5;
  int visits_max = 29;
  int visits_min = 2;
  double diag_len_mean = 13.3;
  int diag_len_max = 39;
  double treat_len_mean = 4.7;
  int treat_len_max = 40;
  int diag_vocab = 4669;
  int treat_vocab = 1439;
  int latent_conditions = 16;
  double noise_rate = 0.05;

  void validate() const;
};

std::vector<Patient> gen_synthetic_emr(const EmrGenConfig& config, uint64_t seed);

/// Vocabularies over the codes that actually occur in a cohort, in sorted
/// order. The input vocabulary covers diagnoses and treatments (both appear
/// in the history); the output vocabulary covers treatments only.
std::pair<Vocabulary, Vocabulary> build_emr_vocabs(const std::vector<Patient>& cohort);

/// One pair per admission n >= 2 of every patient; also reports which patient
/// each pair came from (for patient-level splits).
std::vector<SequencePair> encode_emr_pairs(const std::vector<Patient>& cohort,
                                           const Vocabulary& input_vocab,
                                           const Vocabulary& output_vocab,
                                           std::vector<int>* pair_patient = nullptr);

// --- MIMIC-style CSV ingestion -------------------------------------------------

struct MimicColumnMap {
  std::string admissions_file = "ADMISSIONS.csv";
  std::string diagnoses_file = "DIAGNOSES_ICD.csv";
  std::string procedures_file = "PROCEDURES_ICD.csv";
  std::string prescriptions_file = "PRESCRIPTIONS.csv";
  std::string patient_col = "SUBJECT_ID";
  std::string admission_col = "HADM_ID";
  std::string admit_time_col = "ADMITTIME";
  std::string diagnosis_code_col = "ICD9_CODE";
  std::string diagnosis_seq_col = "SEQ_NUM";
  std::string procedure_code_col = "ICD9_CODE";
  std::string procedure_seq_col = "SEQ_NUM";
  std::string drug_col = "DRUG";
  std::string drug_date_col = "STARTDATE";

  static MimicColumnMap from_json_file(const std::string& path);
};

struct IngestReport {
  int patients_kept = 0;
  int patients_dropped = 0;   // fewer than two visits
  int rows_skipped = 0;       // unparseable dates etc.
  std::vector<std::string> warnings;
};

enum class TreatmentKind { Procedure, Drug };

/// Reads admissions plus diagnosis and treatment tables from a directory of
/// headered CSV files. Visits are ordered by admit time, diagnoses and
/// procedures by their sequence fields, drugs reduced to the first entry per
/// calendar date. Patients with fewer than two visits are dropped.
std::vector<Patient> ingest_mimic(const std::string& dir, TreatmentKind kind,
                                  const MimicColumnMap& columns,
                                  IngestReport* report = nullptr);

// --- splits ---------------------------------------------------------------------

/// Deterministic shuffled partition of n items. Each bucket gets
/// floor(n * ratio); remainders go to train, then valid, then test.
std::array<std::vector<int>, 3> split_indices(int n,
                                              std::array<double, 3> ratios,
                                              uint64_t seed);

// --- dataset files -------------------------------------------------------------

/// JSON Lines: one {"input": [...], "target": [...]} record per pair.
void save_pairs_jsonl(const std::string& path, const std::vector<SequencePair>& pairs);
std::vector<SequencePair> load_pairs_jsonl(const std::string& path);

}  // namespace dcw
