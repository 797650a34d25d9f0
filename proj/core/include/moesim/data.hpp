#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "moesim/errors.hpp"
#include "moesim/rng.hpp"
#include "moesim/tensor.hpp"

namespace moesim {

// Per-feature min-max statistics recorded at load time so that new data can
// be scaled with the training-set transform.
struct ScalingStats {
  std::vector<float> min;
  std::vector<float> range;  // max - min; 0 marks a constant column
};

struct Dataset {
  int64_t n = 0;
  int64_t d = 0;
  std::vector<float> features;  // row-major, scaled into [0,1]
  std::vector<int> labels;      // empty when absent
  std::vector<std::string> feature_names;
  std::vector<std::string> label_names;  // id -> original label string
  std::optional<ScalingStats> scaling;
  int image_rows = 0;
  int image_cols = 0;

  bool has_labels() const { return !labels.empty(); }
};

// IDX image/label pair (big-endian headers, magics 0x00000803 / 0x00000801).
// Pixels are flattened row-major and divided by 255. labels_path may be empty.
Dataset load_idx(const std::string& images_path, const std::string& labels_path = {});

struct CsvOptions {
  std::string label_column;      // header name; empty = unlabeled
  double arcsinh_cofactor = 0.0;  // > 0 enables arcsinh(x / cofactor)
};

// Header CSV with numeric feature cells. Applies the optional arcsinh
// transform and then per-feature min-max scaling into [0,1]; constant columns
// scale to 0. Label strings map to dense ids in first-appearance order.
Dataset load_csv(const std::string& path, const CsvOptions& options = {});

// Same, but reuses previously recorded statistics (values are clamped into
// [0,1] where the new data exceeds the recorded range).
Dataset load_csv(const std::string& path, const CsvOptions& options,
                 const ScalingStats& stats);

// First n rows, preserving labels and metadata.
Dataset take(const Dataset& dataset, int64_t n);

ScalingStats fit_minmax(const std::vector<float>& features, int64_t n, int64_t d);
void apply_minmax(std::vector<float>& features, int64_t n, int64_t d,
                  const ScalingStats& stats);

struct Batch {
  std::vector<int> indices;  // original dataset rows
  TensorPtr features;        // B x D
  std::vector<int> labels;   // empty when the dataset is unlabeled
};

// Epoch-wise uniform shuffling batch source. The shuffle for epoch e depends
// only on (seed, e), so iteration is reproducible and resumable at epoch
// granularity.
class BatchIterator {
 public:
  BatchIterator(const Dataset& dataset, int batch_size, uint64_t seed,
                bool drop_last);

  void start_epoch(int64_t epoch);
  bool next(Batch& out);

  int64_t batches_per_epoch() const;

 private:
  const Dataset& dataset_;
  int batch_size_;
  uint64_t seed_;
  bool drop_last_;
  std::vector<int> order_;
  int64_t cursor_ = 0;
};

// P5 grid of [0,1] image tiles, ceil(sqrt(n)) tiles per row, pixel values
// round(255 * v). Missing tiles in the last row stay black.
void write_pgm_grid(const std::string& path, const float* data, int64_t n,
                    int rows, int cols);

}  // namespace moesim
