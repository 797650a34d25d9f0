#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "moesim/data.hpp"
#include "moesim/trainer.hpp"

namespace moesim {

inline constexpr const char* kToolVersion = "1.0.0";
// Default base directory for command outputs when --out is not given.
inline constexpr const char* kOutDirEnvVar = "MOESIM_OUT_DIR";

// How a command resolves its dataset.
struct DataConfig {
  std::string format = "csv";  // "csv" | "idx"
  std::string images;          // idx image file
  std::string labels;          // idx label file (optional)
  std::string path;            // csv file
  std::string label_column;    // csv label header (optional)
  double arcsinh_cofactor = 0.0;
  int64_t limit = 0;  // keep only the first N rows; 0 = all
};

struct RunConfig {
  TrainConfig train;
  DataConfig data;
};

// Flat dotted-key configuration surface. Keys mirror the config struct field
// names exactly; unknown keys are fatal.
RunConfig load_config_file(const std::string& path);
void apply_kv(RunConfig& config, const std::string& key, const std::string& value);
void apply_overrides(RunConfig& config,
                     const std::vector<std::string>& key_value_pairs);
// Every key with its current value, defaults materialized.
std::map<std::string, std::string> materialize(const RunConfig& config);

// Loads the dataset a DataConfig points at. When `reuse_stats` is set (from a
// checkpoint), CSV features are rescaled with the recorded statistics.
Dataset load_dataset(const DataConfig& data, const ScalingStats* reuse_stats = nullptr);

uint64_t fnv1a64_file(const std::string& path);

struct DatasetFingerprint {
  std::string path;
  uint64_t rows = 0;
  uint64_t cols = 0;
  std::string content_hash;  // fnv1a-64, hex
};

// Reproducibility record written before a command starts doing work.
struct RunManifest {
  std::string tool_version = kToolVersion;
  std::string command;
  uint64_t seed = 0;
  std::map<std::string, std::string> config;  // materialized key/values
  std::vector<DatasetFingerprint> datasets;
  std::map<std::string, std::string> outputs;  // role -> path
};

void write_manifest(const std::string& path, const RunManifest& manifest);

DatasetFingerprint fingerprint_dataset(const std::string& path, uint64_t rows,
                                       uint64_t cols);

}  // namespace moesim
