// Command-line front end: gen-data, train, eval, inspect.
// Exit codes: 0 success, 1 usage error, 2 runtime failure.
#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "dcw/harness.hpp"

namespace {

int log_level() {
  const char* env = std::getenv("DCWMANN_LOG");
  if (!env) return 1;
  const std::string v = env;
  if (v == "quiet") return 0;
  if (v == "debug") return 2;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-controller write-protected memory network toolkit"};
  app.require_subcommand(1);

  // --- gen-data ---
  dcw::GenDataOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate dataset and vocabulary files");
  gen_cmd->add_option("--task", gen.task, "odd-even | emr-procedure | emr-drug");
  gen_cmd->add_option("--out", gen.out_dir, "Output directory")->required();
  gen_cmd->add_option("--seed", gen.seed, "Generation seed");
  gen_cmd->add_option("--train-count", gen.train_count, "Odd-even training pairs");
  gen_cmd->add_option("--test-count", gen.test_count, "Odd-even test pairs");
  gen_cmd->add_option("--valid-count", gen.valid_count, "Odd-even validation pairs");
  gen_cmd->add_option("--len-min", gen.len_min, "Minimum sequence length");
  gen_cmd->add_option("--len-max", gen.len_max, "Maximum sequence length");
  gen_cmd->add_option("--patients", gen.emr.patients, "Synthetic EMR cohort size");
  gen_cmd->add_option("--conditions", gen.emr.latent_conditions, "Latent condition count");
  gen_cmd->add_option("--noise", gen.emr.noise_rate, "Diagnosis noise rate");
  gen_cmd->add_option("--diag-vocab", gen.emr.diag_vocab, "Diagnosis code space");
  gen_cmd->add_option("--treat-vocab", gen.emr.treat_vocab, "Treatment code space");
  gen_cmd->add_option("--visits-mean", gen.emr.visits_mean, "Mean visits per patient");
  gen_cmd->add_option("--visits-max", gen.emr.visits_max, "Max visits per patient");
  gen_cmd->add_option("--diag-len-mean", gen.emr.diag_len_mean, "Mean diagnosis length");
  gen_cmd->add_option("--diag-len-max", gen.emr.diag_len_max, "Max diagnosis length");
  gen_cmd->add_option("--treat-len-mean", gen.emr.treat_len_mean, "Mean treatment length");
  gen_cmd->add_option("--treat-len-max", gen.emr.treat_len_max, "Max treatment length");
  gen_cmd->add_option("--from-mimic", gen.mimic_dir,
                      "Ingest MIMIC-style CSVs from this directory instead");
  gen_cmd->add_option("--mapping", gen.mimic_mapping, "Column mapping JSON file");

  // --- train ---
  std::string train_config_path, resume_path, train_out, variant_override,
      precision_override;
  long long seed_override = -1;
  int epochs_override = -1;
  auto* train_cmd = app.add_subcommand("train", "Train a model from a config file");
  train_cmd->add_option("--config", train_config_path, "RunConfig JSON")->required();
  train_cmd->add_option("--resume", resume_path, "Checkpoint to resume from");
  train_cmd->add_option("--out", train_out, "Override output directory");
  train_cmd->add_option("--seed", seed_override,
                        "Override all seeds (data=s, init=s+1, shuffle=s+2)");
  train_cmd->add_option("--epochs", epochs_override, "Override epoch budget");
  train_cmd->add_option("--variant", variant_override, "Override model variant");
  train_cmd->add_option("--precision", precision_override, "f64 | f32");

  // --- eval ---
  std::string eval_ckpt, eval_data, eval_vin, eval_vout, eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();
  eval_cmd->add_option("--data", eval_data, "Dataset JSONL")->required();
  eval_cmd->add_option("--vocab-in", eval_vin, "Input vocabulary JSON")->required();
  eval_cmd->add_option("--vocab-out", eval_vout, "Output vocabulary JSON")->required();
  eval_cmd->add_option("--out", eval_out, "Report output directory")->required();

  // --- inspect ---
  std::string ins_ckpt, ins_data, ins_out;
  int ins_example = 0;
  auto* ins_cmd = app.add_subcommand("inspect", "Dump a per-step memory trace");
  ins_cmd->add_option("--checkpoint", ins_ckpt, "Checkpoint file")->required();
  ins_cmd->add_option("--data", ins_data, "Dataset JSONL")->required();
  ins_cmd->add_option("--example", ins_example, "Example index");
  ins_cmd->add_option("--out", ins_out, "Trace output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 1;
  }

  const int verbosity = log_level();
  try {
    if (gen_cmd->parsed()) {
      dcw::cmd_gen_data(gen);
      if (verbosity > 0)
        std::printf("wrote dataset files to %s\n", gen.out_dir.c_str());
    } else if (train_cmd->parsed()) {
      auto config = dcw::RunConfig::load(train_config_path);
      if (!train_out.empty()) config.out_dir = train_out;
      if (seed_override >= 0) {
        config.seeds.data = static_cast<uint64_t>(seed_override);
        config.seeds.init = static_cast<uint64_t>(seed_override) + 1;
        config.seeds.shuffle = static_cast<uint64_t>(seed_override) + 2;
      }
      if (epochs_override > 0) config.train.epochs = epochs_override;
      if (!variant_override.empty())
        config.model.variant = dcw::variant_from_name(variant_override);
      if (!precision_override.empty()) config.model.precision = precision_override;
      auto outcome = dcw::cmd_train(config, resume_path);
      if (outcome.aborted_non_finite) return 2;
      if (verbosity > 0)
        std::printf("trained %lld steps; final train loss %.6f; latest %s\n",
                    static_cast<long long>(outcome.steps), outcome.final_train_loss,
                    outcome.latest_checkpoint.c_str());
    } else if (eval_cmd->parsed()) {
      auto report = dcw::cmd_eval(eval_ckpt, eval_data, eval_vin, eval_vout, eval_out);
      std::printf("examples=%d mean_nld=%.6f mean_precision=%.6f mean_jaccard=%.6f\n",
                  report.count, report.mean_nld, report.mean_precision,
                  report.mean_jaccard);
    } else if (ins_cmd->parsed()) {
      auto summary = dcw::cmd_inspect(ins_ckpt, ins_data, ins_example, ins_out);
      std::printf(
          "encode pi=[%.4f,%.4f,%.4f] (n=%d)  decode pi=[%.4f,%.4f,%.4f] (n=%d)\n",
          summary.encode[0], summary.encode[1], summary.encode[2],
          summary.encode_count, summary.decode[0], summary.decode[1],
          summary.decode[2], summary.decode_count);
    }
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
