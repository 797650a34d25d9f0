#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "moesim/checkpoint.hpp"
#include "moesim/data.hpp"
#include "moesim/losses.hpp"
#include "moesim/metrics.hpp"
#include "moesim/model.hpp"
#include "moesim/similarity.hpp"

namespace moesim {

struct TrainConfig {
  int epochs = 20;
  int batch_size = 256;
  float learning_rate = 1e-3f;
  uint64_t seed = 1;
  int eval_every = 0;      // epochs between metric snapshots; 0 = final only
  int warmup_epochs = 0;   // reconstruction-only epochs before the full objective
  int patience = 0;        // early stop after this many non-improving epochs; 0 = off
  // Clamp on the global gradient norm; the covariance penalty spikes hard
  // when a near-duplicate pair lands alone in a cluster. 0 disables.
  double max_grad_norm = 5.0;
  SimilarityConfig similarity;
  ModelConfig model;

  void validate() const {
    if (epochs < 1) throw ParameterError("train: epochs must be positive");
    if (batch_size < 1) throw ParameterError("train: batch_size must be positive");
    if (!(learning_rate > 0.0f))
      throw ParameterError("train: learning_rate must be positive");
    if (eval_every < 0 || warmup_epochs < 0 || patience < 0)
      throw ParameterError("train: negative scheduling field");
    if (max_grad_norm < 0.0)
      throw ParameterError("train: max_grad_norm must be >= 0");
    model.validate();
  }
};

struct MetricSnapshot {
  int64_t n = 0;
  std::optional<double> nmi;
  std::optional<double> acc;
  std::optional<double> f_measure;
  std::vector<int64_t> cluster_sizes;
};

struct StepRecord {
  uint64_t step = 0;
  LossBreakdown loss;
  double wall_time = 0.0;  // seconds since fit() started; excluded from trace equality
};

struct EvalRecord {
  uint64_t step = 0;
  int64_t epoch = 0;
  MetricSnapshot metrics;
  double wall_time = 0.0;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  std::vector<EvalRecord> evals;
};

// Deterministic-content equality: wall-clock fields are ignored.
bool same_training_trace(const TrainLog& a, const TrainLog& b);

// Line-delimited records (one JSON object per step/eval).
void write_train_log(const std::string& path, const TrainLog& log);

struct FitOutputs {
  std::string checkpoint_path;  // also receives the last-good state on abort
  std::string log_path;
};

struct FitResult {
  std::shared_ptr<Model> model;
  TrainLog log;
  Checkpoint checkpoint;  // final training state
};

// End-to-end joint optimization: per batch, forward pass, similarity matrix,
// the four losses, backward, Adam step, then the EM-style mean update. On a
// non-finite loss the last epoch-boundary state is written to
// outputs.checkpoint_path and TrainingError is thrown.
FitResult fit(const Dataset& dataset, const TrainConfig& config,
              const FitOutputs& outputs = {}, const Checkpoint* resume = nullptr);

// Full-dataset inference pass: hard assignments plus NMI/ACC/F when labels
// exist (absent otherwise, never reported as 0).
MetricSnapshot evaluate(const Model& model, const Dataset& dataset);

// Latent codes, assignments and confidences for every dataset row.
struct EmbeddingRecord {
  std::vector<float> z;       // n x latent
  std::vector<int> assignments;
  std::vector<float> confidence;  // max responsibility per row
};
EmbeddingRecord embed_dataset(const Model& model, const Dataset& dataset);

// Per-component generation self-consistency: generate n samples from each
// expert, re-encode them, and check that the clustering network routes them
// back to the component they came from. Decoder invocations are exactly K*n:
// no rejection or posterior thresholding.
struct AblationReport {
  std::vector<double> per_cluster_accuracy;
  double mean_accuracy = 0.0;
  uint64_t decoder_invocations = 0;
};
AblationReport generation_ablation(const Model& model, int64_t n_per_cluster,
                                   uint64_t seed);

// Training-state snapshot/restore including optimizer moments and RNG state.
Checkpoint make_training_checkpoint(const Model& model, const Adam& optimizer,
                                    const Rng& rng, uint64_t step, uint64_t epoch,
                                    const Dataset& dataset);

}  // namespace moesim
