#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "moesim/autodiff.hpp"
#include "moesim/data.hpp"
#include "moesim/model.hpp"

namespace moesim {

// On-disk training state. Binary container, little-endian, 8-byte magic
// "MOESIMV1"; all tensors stored as (name, rank, dims, f32 payload).
// Round-tripping a checkpoint restores parameters bit-identically and
// continues training deterministically.
struct Checkpoint {
  uint32_t version = 1;
  ModelConfig config;
  std::vector<std::string> tensor_names;
  std::vector<Shape> tensor_shapes;
  std::vector<std::vector<float>> tensor_data;

  bool has_optimizer = false;
  float opt_lr = 0.0f, opt_beta1 = 0.0f, opt_beta2 = 0.0f, opt_epsilon = 0.0f;
  uint64_t opt_t = 0;
  std::vector<std::vector<float>> opt_m, opt_v;  // parallel to tensors

  uint64_t step = 0;
  uint64_t epoch = 0;
  std::array<uint64_t, 4> rng_state{};
  std::vector<int> empty_streak;

  std::optional<ScalingStats> scaling;
  float arcsinh_cofactor = 0.0f;

  int tensor_index(const std::string& name) const;
};

// Written atomically (temp file + rename).
void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

// Model <-> checkpoint bridges. snapshot_model captures parameters and
// cluster means; restore_model validates every tensor's shape against the
// checkpoint's own config before touching the model.
Checkpoint snapshot_model(const Model& model);
void restore_model(Model& model, const Checkpoint& checkpoint);

// Builds a model from the checkpoint's embedded config.
Model model_from_checkpoint(const Checkpoint& checkpoint);

}  // namespace moesim
