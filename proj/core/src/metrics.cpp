#include "moesim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "moesim/kernels.hpp"
#include "moesim/rng.hpp"

namespace moesim {

namespace {

std::vector<int> densify(const std::vector<int>& labels, int& num_classes) {
  std::map<int, int> ids;
  std::vector<int> out(labels.size());
  for (size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = ids.emplace(labels[i], static_cast<int>(ids.size()));
    out[i] = it->second;
  }
  num_classes = static_cast<int>(ids.size());
  return out;
}

void check_lengths(const std::vector<int>& a, const std::vector<int>& b,
                   const char* who) {
  if (a.size() != b.size())
    throw InputError(std::string(who) + ": label vectors differ in length (" +
                     std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
                     ")");
  if (a.empty()) throw InputError(std::string(who) + ": empty label vectors");
}

// Hungarian algorithm (potentials formulation), O(rows^2 * cols) with
// rows <= cols. Returns the minimum total cost assignment row -> column.
std::vector<int> hungarian_min_cost(const std::vector<double>& cost, int rows,
                                    int cols) {
  const double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(rows + 1, 0.0), v(cols + 1, 0.0);
  std::vector<int> match(cols + 1, 0);  // column -> row (1-based)
  std::vector<int> way(cols + 1, 0);
  for (int i = 1; i <= rows; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(cols + 1, kInf);
    std::vector<char> used(cols + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= cols; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * static_cast<size_t>(cols) + (j - 1)] -
                           u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= cols; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(rows, -1);
  for (int j = 1; j <= cols; ++j)
    if (match[j] > 0) row_to_col[match[j] - 1] = j - 1;
  return row_to_col;
}

double entropy(const std::vector<int64_t>& counts, int64_t n) {
  double h = 0.0;
  for (int64_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(n);
    h -= p * std::log(p);
  }
  return h;
}

double rbf(double sqdist, double bandwidth) {
  return std::exp(-sqdist / (2.0 * bandwidth * bandwidth));
}

// Sum of off-diagonal kernel values within one sample set plus the full cross
// sum, from a precomputed squared-distance matrix slice.
double mmd2_from_sqdists(const std::vector<double>& sq, int64_t m, int64_t n,
                         double bandwidth) {
  // sq is (m+n) x (m+n) over the pooled samples: X rows first, then Y.
  const int64_t total = m + n;
  double kxx = 0.0, kyy = 0.0, kxy = 0.0;
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < m; ++j)
      if (i != j) kxx += rbf(sq[i * total + j], bandwidth);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < n; ++j)
      if (i != j) kyy += rbf(sq[(m + i) * total + (m + j)], bandwidth);
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) kxy += rbf(sq[i * total + (m + j)], bandwidth);
  return kxx / (static_cast<double>(m) * (m - 1)) +
         kyy / (static_cast<double>(n) * (n - 1)) -
         2.0 * kxy / (static_cast<double>(m) * n);
}

std::vector<double> pooled_sqdists(std::span<const float> x, int64_t m,
                                   std::span<const float> y, int64_t n, int64_t d) {
  std::vector<double> pooled(static_cast<size_t>(m + n) * d);
  for (int64_t i = 0; i < m * d; ++i) pooled[i] = static_cast<double>(x[i]);
  for (int64_t i = 0; i < n * d; ++i) pooled[m * d + i] = static_cast<double>(y[i]);
  std::vector<double> sq(static_cast<size_t>(m + n) * (m + n));
  detail::pairwise_sqdist(pooled.data(), m + n, d, sq.data());
  return sq;
}

}  // namespace

ContingencyTable ContingencyTable::build(const std::vector<int>& labels_true,
                                         const std::vector<int>& labels_pred) {
  check_lengths(labels_true, labels_pred, "contingency");
  ContingencyTable t;
  const auto lt = densify(labels_true, t.rows);
  const auto lp = densify(labels_pred, t.cols);
  t.n = static_cast<int64_t>(lt.size());
  t.counts.assign(static_cast<size_t>(t.rows) * t.cols, 0);
  t.row_sums.assign(t.rows, 0);
  t.col_sums.assign(t.cols, 0);
  for (size_t i = 0; i < lt.size(); ++i) {
    ++t.counts[static_cast<size_t>(lt[i]) * t.cols + lp[i]];
    ++t.row_sums[lt[i]];
    ++t.col_sums[lp[i]];
  }
  return t;
}

double nmi(const std::vector<int>& labels_true, const std::vector<int>& labels_pred) {
  const auto t = ContingencyTable::build(labels_true, labels_pred);
  const double ht = entropy(t.row_sums, t.n);
  const double hp = entropy(t.col_sums, t.n);
  if (ht == 0.0 && hp == 0.0) return 1.0;  // both trivial partitions: identical
  if (ht == 0.0 || hp == 0.0) return 0.0;
  double mi = 0.0;
  const double n = static_cast<double>(t.n);
  for (int r = 0; r < t.rows; ++r) {
    for (int c = 0; c < t.cols; ++c) {
      const int64_t cnt = t.at(r, c);
      if (cnt == 0) continue;
      const double pij = static_cast<double>(cnt) / n;
      mi += pij * std::log(n * static_cast<double>(cnt) /
                           (static_cast<double>(t.row_sums[r]) *
                            static_cast<double>(t.col_sums[c])));
    }
  }
  return mi / std::sqrt(ht * hp);
}

double clustering_accuracy(const std::vector<int>& labels_true,
                           const std::vector<int>& labels_pred) {
  const auto t = ContingencyTable::build(labels_true, labels_pred);
  if (t.rows > 64 || t.cols > 64)
    throw ParameterError("clustering_accuracy: more than 64 clusters (" +
                         std::to_string(std::max(t.rows, t.cols)) + ")");
  // Pad to a square problem; costs are negated counts so the minimum-cost
  // assignment maximizes matched samples.
  const int side = std::max(t.rows, t.cols);
  std::vector<double> cost(static_cast<size_t>(side) * side, 0.0);
  for (int r = 0; r < t.rows; ++r)
    for (int c = 0; c < t.cols; ++c)
      cost[static_cast<size_t>(r) * side + c] = -static_cast<double>(t.at(r, c));
  const auto row_to_col = hungarian_min_cost(cost, side, side);
  int64_t matched = 0;
  for (int r = 0; r < t.rows; ++r)
    if (row_to_col[r] >= 0 && row_to_col[r] < t.cols) matched += t.at(r, row_to_col[r]);
  return static_cast<double>(matched) / static_cast<double>(t.n);
}

double f_measure(const std::vector<int>& labels_true,
                 const std::vector<int>& labels_pred) {
  const auto t = ContingencyTable::build(labels_true, labels_pred);
  double sum_f = 0.0;
  for (int r = 0; r < t.rows; ++r) {
    double best = 0.0;
    for (int c = 0; c < t.cols; ++c) {
      const int64_t cnt = t.at(r, c);
      if (cnt == 0) continue;
      const double precision = static_cast<double>(cnt) / t.col_sums[c];
      const double recall = static_cast<double>(cnt) / t.row_sums[r];
      best = std::max(best, 2.0 * precision * recall / (precision + recall));
    }
    sum_f += best;
  }
  return sum_f / t.rows;
}

double mmd2_unbiased(std::span<const float> x, int64_t m, std::span<const float> y,
                     int64_t n, int64_t d, double bandwidth) {
  if (m < 2 || n < 2)
    throw SampleSizeError("mmd2_unbiased: both samples need >= 2 points, got " +
                          std::to_string(m) + " and " + std::to_string(n));
  if (!(bandwidth > 0.0))
    throw ParameterError("mmd2_unbiased: bandwidth must be positive");
  const auto sq = pooled_sqdists(x, m, y, n, d);
  return mmd2_from_sqdists(sq, m, n, bandwidth);
}

double median_pairwise_distance(std::span<const float> x, int64_t n, int64_t d,
                                int64_t cap, uint64_t seed) {
  if (n < 2) throw SampleSizeError("median_pairwise_distance: need >= 2 points");
  std::vector<int> rows(static_cast<size_t>(n));
  std::iota(rows.begin(), rows.end(), 0);
  if (n > cap) {
    Rng rng(mix_seed(seed, 0x6d656469));
    rng.shuffle(rows);
    rows.resize(static_cast<size_t>(cap));
  }
  const int64_t m = static_cast<int64_t>(rows.size());
  std::vector<double> pts(static_cast<size_t>(m) * d);
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < d; ++j)
      pts[i * d + j] = static_cast<double>(x[static_cast<int64_t>(rows[i]) * d + j]);
  std::vector<double> sq(static_cast<size_t>(m) * m);
  detail::pairwise_sqdist(pts.data(), m, d, sq.data());
  std::vector<double> dists;
  dists.reserve(static_cast<size_t>(m) * (m - 1) / 2);
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = i + 1; j < m; ++j) dists.push_back(std::sqrt(sq[i * m + j]));
  const size_t mid = dists.size() / 2;
  std::nth_element(dists.begin(), dists.begin() + mid, dists.end());
  return dists[mid];
}

double mmd2_permutation_null_std(std::span<const float> x, int64_t m,
                                 std::span<const float> y, int64_t n, int64_t d,
                                 double bandwidth, int n_permutations,
                                 uint64_t seed) {
  if (m < 2 || n < 2)
    throw SampleSizeError("mmd2_permutation_null_std: both samples need >= 2 points");
  const auto sq = pooled_sqdists(x, m, y, n, d);
  const int64_t total = m + n;
  // Kernel matrix once; permutations only relabel indices.
  std::vector<double> kmat(static_cast<size_t>(total) * total);
  for (int64_t i = 0; i < total; ++i)
    for (int64_t j = 0; j < total; ++j)
      kmat[i * total + j] = rbf(sq[i * total + j], bandwidth);

  Rng rng(mix_seed(seed, 0x7065726d));
  std::vector<int> perm(static_cast<size_t>(total));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<double> stats(static_cast<size_t>(n_permutations));
  for (int p = 0; p < n_permutations; ++p) {
    rng.shuffle(perm);
    double kxx = 0.0, kyy = 0.0, kxy = 0.0;
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < m; ++j)
        if (i != j) kxx += kmat[perm[i] * total + perm[j]];
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < n; ++j)
        if (i != j) kyy += kmat[perm[m + i] * total + perm[m + j]];
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j) kxy += kmat[perm[i] * total + perm[m + j]];
    stats[p] = kxx / (static_cast<double>(m) * (m - 1)) +
               kyy / (static_cast<double>(n) * (n - 1)) -
               2.0 * kxy / (static_cast<double>(m) * n);
  }
  double mean = 0.0;
  for (double s : stats) mean += s;
  mean /= stats.size();
  double var = 0.0;
  for (double s : stats) var += (s - mean) * (s - mean);
  var /= stats.size();
  return std::sqrt(var);
}

MmdReport cluster_separation_report(std::span<const float> z, int64_t n, int64_t d,
                                    const std::vector<int>& assignments,
                                    double bandwidth_override, uint64_t seed) {
  if (static_cast<int64_t>(assignments.size()) != n)
    throw InputError("cluster_separation_report: assignment count mismatch");
  std::map<int, std::vector<int64_t>> members;
  for (int64_t i = 0; i < n; ++i) members[assignments[i]].push_back(i);

  MmdReport report;
  std::vector<std::vector<int64_t>> kept;
  for (auto& [id, rows] : members) {
    if (rows.size() < 4) {
      report.skipped.push_back(id);
      continue;
    }
    report.cluster_ids.push_back(id);
    report.counts.push_back(static_cast<int64_t>(rows.size()));
    kept.push_back(rows);
  }
  const size_t k = report.cluster_ids.size();
  report.stats.assign(k * k, 0.0);

  auto slice = [&](const std::vector<int64_t>& rows) {
    std::vector<float> out(rows.size() * static_cast<size_t>(d));
    for (size_t i = 0; i < rows.size(); ++i)
      std::copy_n(z.data() + rows[i] * d, d, out.data() + static_cast<int64_t>(i) * d);
    return out;
  };

  // Bandwidth: median pairwise distance over the reported points.
  if (bandwidth_override > 0.0) {
    report.bandwidth = bandwidth_override;
  } else {
    std::vector<int64_t> all_rows;
    for (const auto& rows : kept) all_rows.insert(all_rows.end(), rows.begin(), rows.end());
    const auto pts = slice(all_rows);
    report.bandwidth = median_pairwise_distance(
        pts, static_cast<int64_t>(all_rows.size()), d, 2048, seed);
    if (report.bandwidth <= 0.0) report.bandwidth = 1.0;
  }

  for (size_t a = 0; a < k; ++a) {
    for (size_t b = a; b < k; ++b) {
      double stat;
      if (a == b) {
        // Two disjoint random halves of the same cluster.
        auto rows = kept[a];
        Rng rng(mix_seed(seed, 0x64696167 + static_cast<uint64_t>(a)));
        rng.shuffle(rows);
        const int64_t half = static_cast<int64_t>(rows.size()) / 2;
        std::vector<int64_t> first(rows.begin(), rows.begin() + half);
        std::vector<int64_t> second(rows.begin() + half, rows.end());
        const auto xs = slice(first);
        const auto ys = slice(second);
        stat = mmd2_unbiased(xs, half, ys, static_cast<int64_t>(second.size()), d,
                             report.bandwidth);
      } else {
        const auto xs = slice(kept[a]);
        const auto ys = slice(kept[b]);
        stat = mmd2_unbiased(xs, static_cast<int64_t>(kept[a].size()), ys,
                             static_cast<int64_t>(kept[b].size()), d,
                             report.bandwidth);
      }
      report.stats[a * k + b] = stat;
      report.stats[b * k + a] = stat;
    }
  }
  return report;
}

std::string MmdReport::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "# bandwidth=" << bandwidth << "\n";
  if (!skipped.empty()) {
    out << "# skipped=";
    for (size_t i = 0; i < skipped.size(); ++i)
      out << (i ? ";" : "") << skipped[i];
    out << "\n";
  }
  out << "# counts=";
  for (size_t i = 0; i < counts.size(); ++i) out << (i ? ";" : "") << counts[i];
  out << "\n";
  out << "cluster";
  for (int id : cluster_ids) out << "," << id;
  out << "\n";
  for (size_t i = 0; i < cluster_ids.size(); ++i) {
    out << cluster_ids[i];
    for (size_t j = 0; j < cluster_ids.size(); ++j) out << "," << at(i, j);
    out << "\n";
  }
  return out.str();
}

MmdReport MmdReport::from_csv(const std::string& text) {
  MmdReport report;
  std::istringstream in(text);
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("# bandwidth=", 0) == 0)
        report.bandwidth = std::stod(line.substr(12));
      else if (line.rfind("# skipped=", 0) == 0) {
        std::stringstream ss(line.substr(10));
        std::string tok;
        while (std::getline(ss, tok, ';'))
          if (!tok.empty()) report.skipped.push_back(std::stoi(tok));
      } else if (line.rfind("# counts=", 0) == 0) {
        std::stringstream ss(line.substr(9));
        std::string tok;
        while (std::getline(ss, tok, ';'))
          if (!tok.empty()) report.counts.push_back(std::stoll(tok));
      }
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!header_seen) {
      if (cells.empty() || cells[0] != "cluster")
        throw FormatError("mmd report: missing header row");
      for (size_t i = 1; i < cells.size(); ++i)
        report.cluster_ids.push_back(std::stoi(cells[i]));
      header_seen = true;
      continue;
    }
    for (size_t i = 1; i < cells.size(); ++i)
      report.stats.push_back(std::stod(cells[i]));
  }
  if (!header_seen) throw FormatError("mmd report: empty document");
  if (report.stats.size() != report.cluster_ids.size() * report.cluster_ids.size())
    throw FormatError("mmd report: matrix size does not match header");
  return report;
}

}  // namespace moesim
