#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "moesim/errors.hpp"

namespace moesim {

// Counts n_ck between true labels (rows) and predicted clusters (columns).
// Arbitrary label values are densified in first-appearance order.
struct ContingencyTable {
  int64_t n = 0;
  int rows = 0;
  int cols = 0;
  std::vector<int64_t> counts;  // rows x cols
  std::vector<int64_t> row_sums, col_sums;

  static ContingencyTable build(const std::vector<int>& labels_true,
                                const std::vector<int>& labels_pred);
  int64_t at(int r, int c) const { return counts[static_cast<size_t>(r) * cols + c]; }
};

// Normalized mutual information with sqrt(H_t * H_p) normalization and
// natural logs. 1.0 when both partitions are single-cluster (identical up to
// relabeling), 0.0 when exactly one of them carries no information.
double nmi(const std::vector<int>& labels_true, const std::vector<int>& labels_pred);

// Best one-to-one cluster-to-label matching accuracy, solved exactly with the
// Hungarian algorithm on the negated contingency table. Supports up to 64
// clusters/labels.
double clustering_accuracy(const std::vector<int>& labels_true,
                           const std::vector<int>& labels_pred);

// Mean over true populations of the best per-cluster F1 (many-to-one
// matching allowed).
double f_measure(const std::vector<int>& labels_true,
                 const std::vector<int>& labels_pred);

// Unbiased U-statistic estimator of squared MMD under an RBF kernel
// k(a,b) = exp(-||a-b||^2 / (2 bandwidth^2)). May be negative for close
// distributions. Requires m, n >= 2.
double mmd2_unbiased(std::span<const float> x, int64_t m, std::span<const float> y,
                     int64_t n, int64_t d, double bandwidth);

// Median of pairwise euclidean distances; rows are subsampled
// deterministically above `cap`.
double median_pairwise_distance(std::span<const float> x, int64_t n, int64_t d,
                                int64_t cap = 2048, uint64_t seed = 0);

// Standard deviation of the permutation null of mmd2_unbiased (labels
// shuffled between the pooled samples). Internal calibration helper for
// tests; not a user-facing p-value machine.
double mmd2_permutation_null_std(std::span<const float> x, int64_t m,
                                 std::span<const float> y, int64_t n, int64_t d,
                                 double bandwidth, int n_permutations, uint64_t seed);

// Pairwise MMD^2 statistics across clusters of a latent embedding. Diagonal
// entries compare two disjoint random halves of the same cluster (expected
// near 0); off-diagonal entries compare cluster pairs. Clusters with fewer
// than 4 members are skipped and listed in `skipped`.
struct MmdReport {
  std::vector<int> cluster_ids;
  std::vector<int64_t> counts;
  double bandwidth = 0.0;
  std::vector<double> stats;  // K x K row-major, K = cluster_ids.size()
  std::vector<int> skipped;

  double at(size_t i, size_t j) const { return stats[i * cluster_ids.size() + j]; }
  std::string to_csv() const;
  static MmdReport from_csv(const std::string& text);
};

MmdReport cluster_separation_report(std::span<const float> z, int64_t n, int64_t d,
                                    const std::vector<int>& assignments,
                                    double bandwidth_override = 0.0,
                                    uint64_t seed = 0);

}  // namespace moesim
