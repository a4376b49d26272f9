// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "maskrate/evaluate.hpp"
#include "maskrate/model.hpp"
#include "maskrate/trainer.hpp"

namespace maskrate {

/// Raised for malformed or invalid configuration; the message starts with
/// the dotted path of the offending field.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Everything needed to start a training run from the command line.
struct RunConfig {
  std::string corpus;
  std::optional<std::string> eval_corpus;  // default: the training corpus
  std::size_t vocab_size = 205;
  ModelConfig model;  // vocab_size is filled from the built vocab
  TrainConfig train;
  EvalConfig eval;
  std::string output_dir;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Strict parse: unknown keys are rejected, missing keys take defaults and
/// every nested invariant is validated. Throws ConfigError.
RunConfig parse_run_config(const nlohmann::json& j);

/// Normalized form with every key present.
nlohmann::json to_json(const RunConfig& config);

nlohmann::json model_config_to_json(const ModelConfig& config, bool include_vocab = true);
ModelConfig model_config_from_json(const nlohmann::json& j, bool include_vocab = true);
nlohmann::json train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json eval_config_to_json(const EvalConfig& config);
EvalConfig eval_config_from_json(const nlohmann::json& j);

}  // namespace maskrate
