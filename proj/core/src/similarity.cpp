#include "moesim/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "moesim/kernels.hpp"

namespace moesim {

namespace {

std::vector<float> slice_rows(const float* data, int64_t cols,
                              const std::vector<int>& indices) {
  std::vector<float> out(indices.size() * static_cast<size_t>(cols));
  for (size_t i = 0; i < indices.size(); ++i)
    std::copy_n(data + static_cast<int64_t>(indices[i]) * cols, cols,
                out.data() + static_cast<int64_t>(i) * cols);
  return out;
}

}  // namespace

SimilarityMatrix knn_adjacency(std::span<const float> points, int64_t n, int64_t d,
                               int k) {
  if (k < 1 || k >= n)
    throw ParameterError("knn_adjacency: k must satisfy 1 <= k < n, got k=" +
                         std::to_string(k) + " with n=" + std::to_string(n));
  std::vector<float> dist(static_cast<size_t>(n) * n);
  detail::pairwise_sqdist(points.data(), n, d, dist.data());

  SimilarityMatrix s(n);
  std::vector<std::pair<float, int64_t>> order;
  order.reserve(n - 1);
  for (int64_t i = 0; i < n; ++i) {
    order.clear();
    for (int64_t j = 0; j < n; ++j)
      if (j != i) order.emplace_back(dist[i * n + j], j);
    std::partial_sort(order.begin(), order.begin() + k, order.end());
    for (int j = 0; j < k; ++j) {
      s.set(i, order[j].second, 1);
      s.set(order[j].second, i, 1);  // union symmetrization
    }
  }
  return s;
}

SimilarityMatrix threshold_adjacency(std::span<const float> points, int64_t n,
                                     int64_t d, double eps) {
  if (!(eps > 0.0))
    throw ParameterError("threshold_adjacency: eps must be > 0, got " +
                         std::to_string(eps));
  std::vector<float> dist(static_cast<size_t>(n) * n);
  detail::pairwise_sqdist(points.data(), n, d, dist.data());
  const double eps_sq = eps * eps;
  SimilarityMatrix s(n);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < n; ++j)
      if (static_cast<double>(dist[i * n + j]) <= eps_sq) s.set(i, j, 1);
  return s;
}

SimilarityMatrix batch_similarity(const std::vector<int>& batch_indices,
                                  const SimilarityBasis& basis,
                                  const SimilarityConfig& config) {
  config.validate();
  const int64_t nb = static_cast<int64_t>(batch_indices.size());
  if (nb == 0) throw ParameterError("batch_similarity: empty batch");

  std::vector<int> missing;
  for (int idx : batch_indices)
    if (idx < 0 || idx >= basis.rows) missing.push_back(idx);
  if (!missing.empty()) {
    std::string msg = "batch_similarity: rows missing from similarity basis:";
    for (int idx : missing) msg += " " + std::to_string(idx);
    throw DataError(msg);
  }

  if (config.use_labels && basis.labels && !basis.labels->empty()) {
    SimilarityMatrix s(nb);
    for (int64_t i = 0; i < nb; ++i)
      for (int64_t j = 0; j < nb; ++j)
        if ((*basis.labels)[batch_indices[i]] == (*basis.labels)[batch_indices[j]])
          s.set(i, j, 1);
    return s;
  }

  if (nb == 1) return SimilarityMatrix(1);

  const auto sliced = slice_rows(basis.data, basis.cols, batch_indices);
  if (config.method == SimilarityMethod::knn) {
    const int k = std::min<int>(config.k_neighbors, static_cast<int>(nb - 1));
    return knn_adjacency(sliced, nb, basis.cols, k);
  }
  return threshold_adjacency(sliced, nb, basis.cols, config.distance_threshold);
}

EmbeddingTable load_embedding_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("embedding: cannot open '" + path + "'");
  EmbeddingTable table;
  std::string line;
  int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    int64_t cols = 0;
    while (std::getline(ss, cell, ',')) {
      size_t pos = 0;
      float v = 0.0f;
      try {
        v = std::stof(cell, &pos);
      } catch (const std::exception&) {
        throw ParseError("embedding: non-numeric cell at line " +
                         std::to_string(lineno));
      }
      if (pos != cell.size() && cell.find_first_not_of(" \t\r", pos) != std::string::npos)
        throw ParseError("embedding: non-numeric cell at line " + std::to_string(lineno));
      table.data.push_back(v);
      ++cols;
    }
    if (table.cols == 0) table.cols = cols;
    if (cols != table.cols)
      throw FormatError("embedding: ragged row at line " + std::to_string(lineno));
    ++table.rows;
  }
  if (table.rows == 0) throw FormatError("embedding: empty file '" + path + "'");
  return table;
}

}  // namespace moesim
