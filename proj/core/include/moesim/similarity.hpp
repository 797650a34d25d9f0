#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "moesim/errors.hpp"

namespace moesim {

enum class SimilaritySource { raw_features, precomputed_embedding };
enum class SimilarityMethod { knn, threshold };

struct SimilarityConfig {
  SimilaritySource source = SimilaritySource::raw_features;
  SimilarityMethod method = SimilarityMethod::knn;
  int k_neighbors = 10;
  double distance_threshold = 0.0;
  std::string metric = "euclidean";
  std::string embedding_path;  // required when source == precomputed_embedding
  bool use_labels = false;     // weak supervision: S_ij = 1 iff labels match

  void validate() const {
    if (k_neighbors < 1)
      throw ParameterError("similarity.k_neighbors must be positive");
    if (method == SimilarityMethod::threshold && !(distance_threshold > 0.0))
      throw ParameterError("similarity.distance_threshold must be > 0");
    if (metric != "euclidean")
      throw ParameterError("similarity.metric: only 'euclidean' is supported");
    if (source == SimilaritySource::precomputed_embedding && embedding_path.empty())
      throw ParameterError("similarity.embedding_path required for precomputed source");
  }
};

// N x N symmetric binary adjacency with unit diagonal.
struct SimilarityMatrix {
  int64_t n = 0;
  std::vector<uint8_t> values;  // row-major

  SimilarityMatrix() = default;
  explicit SimilarityMatrix(int64_t size)
      : n(size), values(static_cast<size_t>(size * size), 0) {
    for (int64_t i = 0; i < n; ++i) set(i, i, 1);
  }

  uint8_t at(int64_t i, int64_t j) const { return values[i * n + j]; }
  void set(int64_t i, int64_t j, uint8_t v) { values[i * n + j] = v; }

  void validate() const {
    for (int64_t i = 0; i < n; ++i) {
      if (at(i, i) != 1)
        throw InputError("similarity matrix: diagonal entry " + std::to_string(i) +
                         " is not 1");
      for (int64_t j = 0; j < n; ++j) {
        if (at(i, j) > 1)
          throw InputError("similarity matrix: entry (" + std::to_string(i) + "," +
                           std::to_string(j) + ") is not binary");
        if (at(i, j) != at(j, i))
          throw InputError("similarity matrix: asymmetric at (" + std::to_string(i) +
                           "," + std::to_string(j) + ")");
      }
    }
  }
};

// Union-symmetrized k-nearest-neighbor adjacency over row vectors.
// S_ij = 1 iff i is among j's k nearest or j among i's k nearest; self is
// excluded from neighbor lists; distance ties break toward the lower index.
SimilarityMatrix knn_adjacency(std::span<const float> points, int64_t n, int64_t d,
                               int k);

// S_ij = 1 iff ||p_i - p_j|| <= eps.
SimilarityMatrix threshold_adjacency(std::span<const float> points, int64_t n,
                                     int64_t d, double eps);

// Row basis a batch slices similarity inputs from: either the dataset's raw
// features or a precomputed embedding, with optional labels for the
// weak-supervision override.
struct SimilarityBasis {
  const float* data = nullptr;
  int64_t rows = 0;
  int64_t cols = 0;
  const std::vector<int>* labels = nullptr;
};

// Builds the per-batch similarity matrix by slicing the basis at the batch
// rows and applying the configured method. For batches smaller than
// k_neighbors + 1 the neighbor count is clamped to the batch size - 1, and a
// single-row batch yields [[1]].
SimilarityMatrix batch_similarity(const std::vector<int>& batch_indices,
                                  const SimilarityBasis& basis,
                                  const SimilarityConfig& config);

struct EmbeddingTable {
  int64_t rows = 0;
  int64_t cols = 0;
  std::vector<float> data;
};

// Headerless CSV, one row per dataset sample, decimal floats.
EmbeddingTable load_embedding_csv(const std::string& path);

}  // namespace moesim
