#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dcw/metrics.hpp"
#include "dcw/model.hpp"
#include "dcw/tasks.hpp"

namespace dcw {

struct OptimConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double grad_clip = 10.0;
};

struct TrainBudget {
  int epochs = 20;
  int eval_every = 500;        // optimizer steps between metric rows
  int eval_max_examples = 200; // cap per-split examples scored at each eval
  int patience = 5;            // early stop after this many evals without improvement
};

struct SeedConfig {
  uint64_t data = 1;
  uint64_t init = 2;
  uint64_t shuffle = 3;
};

struct DataPaths {
  std::string train;
  std::string valid;  // optional, empty when absent
  std::string test;   // optional
  std::string vocab_in;
  std::string vocab_out;
};

struct RunConfig {
  std::string task = "odd-even";  // odd-even | emr-procedure | emr-drug
  ModelConfig model;
  OptimConfig optim;
  TrainBudget train;
  SeedConfig seeds;
  DataPaths data;
  std::string out_dir = "run";
  bool log_wallclock = false;  // keep metrics CSVs byte-reproducible by default

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::string& path);
  void validate() const;

  bool is_emr() const { return task == "emr-procedure" || task == "emr-drug"; }
};

struct GenDataOptions {
  std::string task = "odd-even";
  uint64_t seed = 1;
  std::string out_dir;
  // odd-even
  int train_count = 4000;
  int test_count = 1000;
  int valid_count = 0;
  int len_min = 1;
  int len_max = 20;
  // synthetic EMR
  EmrGenConfig emr;
  // optional MIMIC-style ingestion instead of the synthetic generator
  std::string mimic_dir;
  std::string mimic_mapping;
};

struct TrainOutcome {
  int64_t steps = 0;
  double final_train_loss = 0;
  double best_metric = 0;          // validation NLD or Jaccard, when tracked
  bool aborted_non_finite = false;
  std::string latest_checkpoint;
  std::string best_checkpoint;
};

/// Writes dataset JSONL files plus the two vocabulary files into out_dir.
void cmd_gen_data(const GenDataOptions& options);

/// Sequence-at-a-time training with periodic metric rows, latest/best
/// checkpoints, and read-mode logging for memory variants. If resume_from is
/// non-empty, training state is restored and continues to the configured
/// epoch budget.
TrainOutcome cmd_train(const RunConfig& config, const std::string& resume_from = "");

/// Greedy inference over a dataset; writes report.json and report.csv.
EvalReport cmd_eval(const std::string& checkpoint_path, const std::string& dataset_path,
                    const std::string& vocab_in_path, const std::string& vocab_out_path,
                    const std::string& out_dir);

/// Per-step memory trace of one example plus the per-phase read-mode summary.
ReadModeSummary cmd_inspect(const std::string& checkpoint_path,
                            const std::string& dataset_path, int example_index,
                            const std::string& out_dir);

}  // namespace dcw
