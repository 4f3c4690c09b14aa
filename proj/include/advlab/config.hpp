#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "advlab/analysis.hpp"
#include "advlab/data.hpp"
#include "advlab/training.hpp"

namespace advlab {

inline constexpr const char* kToolVersion = "0.1.0";

struct DataConfig {
  std::string kind = "toy";  // "toy" or "csv"
  ToyConfig toy;
  // Root seed for data generation; when absent the experiment seed is used.
  std::optional<std::uint64_t> seed;
  std::string csv_train;
  std::string csv_test;

  void validate() const;
};

struct AnalysisConfig {
  BoundaryOptions boundary;
  LandscapeOptions landscape;
  std::vector<std::string> eval_attacks{"pgd"};
};

// One experiment, fully described. Every field has a default, so an empty
// JSON object is a valid config; unknown keys are rejected by name.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  bool seed_explicit = false;  // true when the config file set the seed
  std::string out_dir = "out";
  DataConfig data;
  MlpSpec model;
  AttackKind attack_kind = AttackKind::pgd;
  AttackConfig attack;
  LossConfig loss;
  int epochs = 50;
  double lr = 0.5;
  double momentum = 0.9;
  double weight_decay = 0.0;
  int batch_size = 128;
  PiatConfig piat;
  std::optional<LrSchedule> lr_schedule;
  AnalysisConfig analysis;

  TrainConfig train_config() const;
  void validate() const;
};

// Parses a config JSON document. A manifest document (as written by the
// train subcommand) is accepted too; its embedded config is used.
ExperimentConfig parse_experiment_config(const std::string& json_text, const std::string& origin);
ExperimentConfig load_experiment_config(const std::string& path);

// Effective config with every default materialized, in a stable key order.
std::string experiment_config_json(const ExperimentConfig& cfg);

// Manifest document: tool name and version plus the effective config.
std::string manifest_json(const ExperimentConfig& cfg);

std::string eval_report_json(const EvalReport& report);

// Seeds for the two dataset splits, derived from the data seed root.
std::uint64_t toy_train_seed(const ExperimentConfig& cfg);
std::uint64_t toy_test_seed(const ExperimentConfig& cfg);

// Model initialization seed, derived from the experiment seed.
std::uint64_t model_init_seed(const ExperimentConfig& cfg);

}  // namespace advlab
