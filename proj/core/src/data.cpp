#include "moesim/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace moesim {

namespace {

constexpr uint32_t kIdxImagesMagic = 0x00000803;
constexpr uint32_t kIdxLabelsMagic = 0x00000801;

std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return bytes;
}

uint32_t read_be32(const std::vector<uint8_t>& bytes, size_t offset,
                   const std::string& path) {
  if (offset + 4 > bytes.size())
    throw FormatError("idx: truncated header in '" + path + "'");
  return (static_cast<uint32_t>(bytes[offset]) << 24) |
         (static_cast<uint32_t>(bytes[offset + 1]) << 16) |
         (static_cast<uint32_t>(bytes[offset + 2]) << 8) |
         static_cast<uint32_t>(bytes[offset + 3]);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    // strip surrounding whitespace / CR
    const auto first = cell.find_first_not_of(" \t\r");
    const auto last = cell.find_last_not_of(" \t\r");
    cells.push_back(first == std::string::npos ? std::string()
                                               : cell.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  const auto bytes = read_file(images_path);
  const uint32_t magic = read_be32(bytes, 0, images_path);
  if (magic != kIdxImagesMagic) {
    std::ostringstream msg;
    msg << "idx: bad image magic 0x" << std::hex << magic << " in '" << images_path
        << "'";
    throw FormatError(msg.str());
  }
  const uint32_t count = read_be32(bytes, 4, images_path);
  const uint32_t rows = read_be32(bytes, 8, images_path);
  const uint32_t cols = read_be32(bytes, 12, images_path);
  const size_t expected = 16 + static_cast<size_t>(count) * rows * cols;
  if (bytes.size() != expected)
    throw FormatError("idx: '" + images_path + "' has " +
                      std::to_string(bytes.size()) + " bytes, expected " +
                      std::to_string(expected));

  Dataset ds;
  ds.n = count;
  ds.d = static_cast<int64_t>(rows) * cols;
  ds.image_rows = static_cast<int>(rows);
  ds.image_cols = static_cast<int>(cols);
  ds.features.resize(static_cast<size_t>(ds.n) * ds.d);
  for (size_t i = 0; i < ds.features.size(); ++i)
    ds.features[i] = static_cast<float>(bytes[16 + i]) / 255.0f;
  ds.scaling = ScalingStats{std::vector<float>(ds.d, 0.0f),
                            std::vector<float>(ds.d, 255.0f)};

  if (!labels_path.empty()) {
    const auto lbytes = read_file(labels_path);
    const uint32_t lmagic = read_be32(lbytes, 0, labels_path);
    if (lmagic != kIdxLabelsMagic) {
      std::ostringstream msg;
      msg << "idx: bad label magic 0x" << std::hex << lmagic << " in '" << labels_path
          << "'";
      throw FormatError(msg.str());
    }
    const uint32_t lcount = read_be32(lbytes, 4, labels_path);
    if (lbytes.size() != 8 + static_cast<size_t>(lcount))
      throw FormatError("idx: truncated label payload in '" + labels_path + "'");
    if (lcount != count)
      throw ConsistencyError("idx: " + std::to_string(count) + " images but " +
                             std::to_string(lcount) + " labels");
    ds.labels.resize(lcount);
    for (uint32_t i = 0; i < lcount; ++i) ds.labels[i] = lbytes[8 + i];
  }
  return ds;
}

ScalingStats fit_minmax(const std::vector<float>& features, int64_t n, int64_t d) {
  ScalingStats stats;
  stats.min.assign(d, 0.0f);
  stats.range.assign(d, 0.0f);
  for (int64_t j = 0; j < d; ++j) {
    float lo = features[j], hi = features[j];
    for (int64_t i = 1; i < n; ++i) {
      lo = std::min(lo, features[i * d + j]);
      hi = std::max(hi, features[i * d + j]);
    }
    stats.min[j] = lo;
    stats.range[j] = hi - lo;
  }
  return stats;
}

void apply_minmax(std::vector<float>& features, int64_t n, int64_t d,
                  const ScalingStats& stats) {
  if (static_cast<int64_t>(stats.min.size()) != d)
    throw ConfigError("scaling stats cover " + std::to_string(stats.min.size()) +
                      " features, data has " + std::to_string(d));
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < d; ++j) {
      float& v = features[i * d + j];
      v = stats.range[j] == 0.0f ? 0.0f : (v - stats.min[j]) / stats.range[j];
      v = std::min(1.0f, std::max(0.0f, v));
    }
  }
}

namespace {

Dataset load_csv_impl(const std::string& path, const CsvOptions& options,
                      const ScalingStats* stats) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw FormatError("csv: empty file '" + path + "'");
  const auto header = split_csv_line(line);
  if (header.empty()) throw FormatError("csv: empty header in '" + path + "'");

  int label_col = -1;
  if (!options.label_column.empty()) {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i] == options.label_column) label_col = static_cast<int>(i);
    if (label_col < 0)
      throw ConfigError("csv: label column '" + options.label_column +
                        "' not found in '" + path + "'");
  }

  Dataset ds;
  for (size_t i = 0; i < header.size(); ++i)
    if (static_cast<int>(i) != label_col) ds.feature_names.push_back(header[i]);
  ds.d = static_cast<int64_t>(ds.feature_names.size());
  if (ds.d == 0) throw FormatError("csv: no feature columns in '" + path + "'");

  std::map<std::string, int> label_ids;
  int64_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw FormatError("csv: ragged row at line " + std::to_string(lineno) + " (" +
                        std::to_string(cells.size()) + " cells, header has " +
                        std::to_string(header.size()) + ")");
    for (size_t c = 0; c < cells.size(); ++c) {
      if (static_cast<int>(c) == label_col) {
        auto [it, inserted] =
            label_ids.emplace(cells[c], static_cast<int>(label_ids.size()));
        if (inserted) ds.label_names.push_back(cells[c]);
        ds.labels.push_back(it->second);
        continue;
      }
      size_t pos = 0;
      float v = 0.0f;
      try {
        v = std::stof(cells[c], &pos);
      } catch (const std::exception&) {
        throw ParseError("csv: non-numeric feature '" + cells[c] + "' at line " +
                         std::to_string(lineno));
      }
      if (pos != cells[c].size())
        throw ParseError("csv: non-numeric feature '" + cells[c] + "' at line " +
                         std::to_string(lineno));
      ds.features.push_back(v);
    }
    ++ds.n;
  }
  if (ds.n == 0) throw FormatError("csv: no data rows in '" + path + "'");

  if (options.arcsinh_cofactor > 0.0) {
    const float cf = static_cast<float>(options.arcsinh_cofactor);
    for (auto& v : ds.features) v = std::asinh(v / cf);
  }
  if (stats) {
    apply_minmax(ds.features, ds.n, ds.d, *stats);
    ds.scaling = *stats;
  } else {
    ds.scaling = fit_minmax(ds.features, ds.n, ds.d);
    apply_minmax(ds.features, ds.n, ds.d, *ds.scaling);
  }
  return ds;
}

}  // namespace

Dataset load_csv(const std::string& path, const CsvOptions& options) {
  return load_csv_impl(path, options, nullptr);
}

Dataset load_csv(const std::string& path, const CsvOptions& options,
                 const ScalingStats& stats) {
  return load_csv_impl(path, options, &stats);
}

Dataset take(const Dataset& dataset, int64_t n) {
  if (n <= 0 || n >= dataset.n) return dataset;
  Dataset out = dataset;
  out.n = n;
  out.features.resize(static_cast<size_t>(n) * dataset.d);
  if (!out.labels.empty()) out.labels.resize(static_cast<size_t>(n));
  return out;
}

BatchIterator::BatchIterator(const Dataset& dataset, int batch_size, uint64_t seed,
                             bool drop_last)
    : dataset_(dataset), batch_size_(batch_size), seed_(seed), drop_last_(drop_last) {
  if (batch_size < 1 || static_cast<int64_t>(batch_size) > dataset.n)
    throw ParameterError("batch_iterator: batch_size " + std::to_string(batch_size) +
                         " out of range [1," + std::to_string(dataset.n) + "]");
  order_.resize(static_cast<size_t>(dataset.n));
  std::iota(order_.begin(), order_.end(), 0);
  start_epoch(0);
}

void BatchIterator::start_epoch(int64_t epoch) {
  std::iota(order_.begin(), order_.end(), 0);
  Rng rng(mix_seed(seed_, static_cast<uint64_t>(epoch)));
  rng.shuffle(order_);
  cursor_ = 0;
}

int64_t BatchIterator::batches_per_epoch() const {
  const int64_t n = dataset_.n;
  return drop_last_ ? n / batch_size_ : (n + batch_size_ - 1) / batch_size_;
}

bool BatchIterator::next(Batch& out) {
  const int64_t n = dataset_.n;
  if (cursor_ >= n) return false;
  int64_t end = std::min<int64_t>(cursor_ + batch_size_, n);
  if (drop_last_ && end - cursor_ < batch_size_) return false;

  const int64_t b = end - cursor_;
  out.indices.assign(order_.begin() + cursor_, order_.begin() + end);
  std::vector<float> rows(static_cast<size_t>(b) * dataset_.d);
  for (int64_t i = 0; i < b; ++i)
    std::copy_n(&dataset_.features[static_cast<int64_t>(out.indices[i]) * dataset_.d],
                dataset_.d, &rows[i * dataset_.d]);
  out.features = make_tensor<float>({b, dataset_.d}, std::move(rows));
  out.labels.clear();
  if (dataset_.has_labels())
    for (int idx : out.indices) out.labels.push_back(dataset_.labels[idx]);
  cursor_ = end;
  return true;
}

void write_pgm_grid(const std::string& path, const float* data, int64_t n, int rows,
                    int cols) {
  if (n < 0 || rows < 1 || cols < 1)
    throw ParameterError("write_pgm_grid: bad tile geometry");
  const int per_row =
      std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n)))));
  const int grid_rows =
      n == 0 ? 1 : static_cast<int>((n + per_row - 1) / per_row);
  const int width = per_row * cols;
  const int height = grid_rows * rows;
  std::vector<uint8_t> canvas(static_cast<size_t>(width) * height, 0);
  for (int64_t i = 0; i < n; ++i) {
    const int tr = static_cast<int>(i) / per_row;
    const int tc = static_cast<int>(i) % per_row;
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        const float v = data[i * rows * cols + r * cols + c];
        const int px = static_cast<int>(std::lround(255.0 * std::min(1.0f, std::max(0.0f, v))));
        canvas[static_cast<size_t>(tr * rows + r) * width + (tc * cols + c)] =
            static_cast<uint8_t>(px);
      }
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out << "P5\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(canvas.data()),
            static_cast<std::streamsize>(canvas.size()));
  if (!out) throw FormatError("failed writing '" + path + "'");
}

}  // namespace moesim
