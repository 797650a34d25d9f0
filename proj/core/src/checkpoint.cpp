#include "moesim/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

namespace moesim {

namespace {

constexpr char kMagic[8] = {'M', 'O', 'E', 'S', 'I', 'M', 'V', '1'};
constexpr uint32_t kVersion = 1;

class Writer {
 public:
  void u8(uint8_t v) { raw(&v, 1); }
  void u32(uint32_t v) { raw(&v, 4); }
  void u64(uint64_t v) { raw(&v, 8); }
  void i32(int32_t v) { raw(&v, 4); }
  void f32(float v) { raw(&v, 4); }
  void str(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void f32_vec(const std::vector<float>& v) {
    u64(v.size());
    raw(v.data(), v.size() * sizeof(float));
  }
  void i32_vec(const std::vector<int>& v) {
    u64(v.size());
    raw(v.data(), v.size() * sizeof(int32_t));
  }
  const std::string& buffer() const { return buf_; }

 private:
  void raw(const void* p, size_t n) {
    buf_.append(reinterpret_cast<const char*>(p), n);
  }
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::vector<uint8_t> bytes) : bytes_(std::move(bytes)) {}

  uint8_t u8() { return read<uint8_t>(); }
  uint32_t u32() { return read<uint32_t>(); }
  uint64_t u64() { return read<uint64_t>(); }
  int32_t i32() { return read<int32_t>(); }
  float f32() { return read<float>(); }
  std::string str() {
    const uint32_t len = u32();
    need(len);
    std::string s(reinterpret_cast<const char*>(&bytes_[pos_]), len);
    pos_ += len;
    return s;
  }
  std::vector<float> f32_vec() {
    const uint64_t len = u64();
    need(len * sizeof(float));
    std::vector<float> v(len);
    std::memcpy(v.data(), &bytes_[pos_], len * sizeof(float));
    pos_ += len * sizeof(float);
    return v;
  }
  std::vector<int> i32_vec() {
    const uint64_t len = u64();
    need(len * sizeof(int32_t));
    std::vector<int> v(len);
    std::memcpy(v.data(), &bytes_[pos_], len * sizeof(int32_t));
    pos_ += len * sizeof(int32_t);
    return v;
  }
  bool exhausted() const { return pos_ == bytes_.size(); }

 private:
  template <typename T>
  T read() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, &bytes_[pos_], sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void need(size_t n) {
    if (pos_ + n > bytes_.size())
      throw IncompatibilityError("checkpoint: truncated payload (needed " +
                                 std::to_string(n) + " bytes at offset " +
                                 std::to_string(pos_) + ")");
  }
  std::vector<uint8_t> bytes_;
  size_t pos_ = 0;
};

void write_config(Writer& w, const ModelConfig& c) {
  w.i32(c.input_dim);
  w.i32(c.latent_dim);
  w.i32(c.num_experts);
  w.i32_vec(c.encoder_hidden);
  w.i32_vec(c.expert_hidden);
  w.i32_vec(c.clustering_hidden);
  w.f32(c.depict_dropout_rate);
  w.f32(c.pi1);
  w.f32(c.pi2);
  w.u8(c.soft_routing);
  w.u8(c.kl_soft_variance);
  w.u8(c.similarity_exclude_diagonal);
  w.i32(c.image_rows);
  w.i32(c.image_cols);
}

ModelConfig read_config(Reader& r) {
  ModelConfig c;
  c.input_dim = r.i32();
  c.latent_dim = r.i32();
  c.num_experts = r.i32();
  c.encoder_hidden = r.i32_vec();
  c.expert_hidden = r.i32_vec();
  c.clustering_hidden = r.i32_vec();
  c.depict_dropout_rate = r.f32();
  c.pi1 = r.f32();
  c.pi2 = r.f32();
  c.soft_routing = r.u8();
  c.kl_soft_variance = r.u8();
  c.similarity_exclude_diagonal = r.u8();
  c.image_rows = r.i32();
  c.image_cols = r.i32();
  return c;
}

// Shapes every named tensor must have under a given config.
std::vector<std::pair<std::string, Shape>> expected_layout(const ModelConfig& c) {
  std::vector<std::pair<std::string, Shape>> out;
  auto mlp = [&out](const std::string& name, int in, const std::vector<int>& hidden,
                    int head) {
    std::vector<int> widths;
    widths.push_back(in);
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(head);
    for (size_t l = 0; l + 1 < widths.size(); ++l) {
      const std::string tag = name + "." + std::to_string(l);
      out.emplace_back(tag + ".w", Shape{widths[l], widths[l + 1]});
      out.emplace_back(tag + ".b", Shape{1, widths[l + 1]});
    }
  };
  mlp("encoder", c.input_dim, c.encoder_hidden, c.latent_dim);
  mlp("clustering", c.latent_dim, c.clustering_hidden, c.num_experts);
  for (int k = 0; k < c.num_experts; ++k)
    mlp("expert" + std::to_string(k), c.latent_dim, c.expert_hidden, c.input_dim);
  out.emplace_back("cluster_means", Shape{c.num_experts, c.latent_dim});
  return out;
}

void validate_layout(const Checkpoint& ckpt) {
  const auto layout = expected_layout(ckpt.config);
  if (layout.size() != ckpt.tensor_names.size())
    throw ConfigError("checkpoint: expected " + std::to_string(layout.size()) +
                      " tensors for this config, found " +
                      std::to_string(ckpt.tensor_names.size()));
  for (size_t i = 0; i < layout.size(); ++i) {
    if (ckpt.tensor_names[i] != layout[i].first)
      throw ConfigError("checkpoint: tensor '" + ckpt.tensor_names[i] +
                        "' where '" + layout[i].first + "' was expected");
    if (ckpt.tensor_shapes[i] != layout[i].second)
      throw ConfigError("checkpoint: tensor '" + ckpt.tensor_names[i] + "' has shape " +
                        shape_str(ckpt.tensor_shapes[i]) + ", config implies " +
                        shape_str(layout[i].second));
    if (shape_numel(ckpt.tensor_shapes[i]) !=
        static_cast<int64_t>(ckpt.tensor_data[i].size()))
      throw IncompatibilityError("checkpoint: tensor '" + ckpt.tensor_names[i] +
                                 "' payload does not match its dims");
  }
}

}  // namespace

int Checkpoint::tensor_index(const std::string& name) const {
  for (size_t i = 0; i < tensor_names.size(); ++i)
    if (tensor_names[i] == name) return static_cast<int>(i);
  return -1;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  Writer w;
  w.u32(ckpt.version);
  write_config(w, ckpt.config);

  w.u32(static_cast<uint32_t>(ckpt.tensor_names.size()));
  for (size_t i = 0; i < ckpt.tensor_names.size(); ++i) {
    w.str(ckpt.tensor_names[i]);
    w.u32(static_cast<uint32_t>(ckpt.tensor_shapes[i].size()));
    for (int64_t dim : ckpt.tensor_shapes[i]) w.u64(static_cast<uint64_t>(dim));
    w.f32_vec(ckpt.tensor_data[i]);
  }

  w.u8(ckpt.has_optimizer);
  if (ckpt.has_optimizer) {
    w.f32(ckpt.opt_lr);
    w.f32(ckpt.opt_beta1);
    w.f32(ckpt.opt_beta2);
    w.f32(ckpt.opt_epsilon);
    w.u64(ckpt.opt_t);
    w.u32(static_cast<uint32_t>(ckpt.opt_m.size()));
    for (size_t i = 0; i < ckpt.opt_m.size(); ++i) {
      w.f32_vec(ckpt.opt_m[i]);
      w.f32_vec(ckpt.opt_v[i]);
    }
  }

  w.u64(ckpt.step);
  w.u64(ckpt.epoch);
  for (uint64_t s : ckpt.rng_state) w.u64(s);
  w.i32_vec(ckpt.empty_streak);

  w.u8(ckpt.scaling.has_value());
  if (ckpt.scaling) {
    w.f32_vec(ckpt.scaling->min);
    w.f32_vec(ckpt.scaling->range);
  }
  w.f32(ckpt.arcsinh_cofactor);

  // Atomic write: temp file in the same directory, then rename.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + tmp + "' for writing");
    out.write(kMagic, sizeof(kMagic));
    out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
    if (!out) throw FormatError("failed writing '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw FormatError("cannot move '" + tmp + "' to '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  if (bytes.size() < sizeof(kMagic) ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw IncompatibilityError("checkpoint: bad magic in '" + path + "'");

  Reader r(std::vector<uint8_t>(bytes.begin() + sizeof(kMagic), bytes.end()));
  Checkpoint ckpt;
  ckpt.version = r.u32();
  if (ckpt.version != kVersion)
    throw IncompatibilityError("checkpoint: unsupported version " +
                               std::to_string(ckpt.version));
  ckpt.config = read_config(r);

  const uint32_t n_tensors = r.u32();
  for (uint32_t i = 0; i < n_tensors; ++i) {
    ckpt.tensor_names.push_back(r.str());
    const uint32_t rank = r.u32();
    Shape shape;
    for (uint32_t j = 0; j < rank; ++j) shape.push_back(static_cast<int64_t>(r.u64()));
    ckpt.tensor_shapes.push_back(std::move(shape));
    ckpt.tensor_data.push_back(r.f32_vec());
  }

  ckpt.has_optimizer = r.u8();
  if (ckpt.has_optimizer) {
    ckpt.opt_lr = r.f32();
    ckpt.opt_beta1 = r.f32();
    ckpt.opt_beta2 = r.f32();
    ckpt.opt_epsilon = r.f32();
    ckpt.opt_t = r.u64();
    const uint32_t n_moments = r.u32();
    for (uint32_t i = 0; i < n_moments; ++i) {
      ckpt.opt_m.push_back(r.f32_vec());
      ckpt.opt_v.push_back(r.f32_vec());
    }
  }

  ckpt.step = r.u64();
  ckpt.epoch = r.u64();
  for (auto& s : ckpt.rng_state) s = r.u64();
  ckpt.empty_streak = r.i32_vec();

  if (r.u8()) {
    ScalingStats stats;
    stats.min = r.f32_vec();
    stats.range = r.f32_vec();
    ckpt.scaling = std::move(stats);
  }
  ckpt.arcsinh_cofactor = r.f32();

  if (!r.exhausted())
    throw IncompatibilityError("checkpoint: trailing bytes in '" + path + "'");
  validate_layout(ckpt);
  return ckpt;
}

Checkpoint snapshot_model(const Model& model) {
  Checkpoint ckpt;
  ckpt.config = model.config();
  for (const auto& p : model.parameters()) {
    ckpt.tensor_names.push_back(p->name);
    ckpt.tensor_shapes.push_back(p->shape);
    ckpt.tensor_data.push_back(p->data);
  }
  ckpt.tensor_names.push_back("cluster_means");
  ckpt.tensor_shapes.push_back(
      Shape{model.config().num_experts, model.config().latent_dim});
  ckpt.tensor_data.push_back(model.cluster_means());
  ckpt.empty_streak = model.empty_streaks();
  return ckpt;
}

void restore_model(Model& model, const Checkpoint& ckpt) {
  validate_layout(ckpt);
  const auto params = model.parameters();
  const auto layout = expected_layout(model.config());
  if (layout.size() != ckpt.tensor_names.size())
    throw ConfigError("checkpoint: tensor count does not match target model");
  for (size_t i = 0; i + 1 < ckpt.tensor_names.size(); ++i) {
    if (params[i]->name != ckpt.tensor_names[i] ||
        params[i]->shape != ckpt.tensor_shapes[i])
      throw ConfigError("checkpoint: tensor '" + ckpt.tensor_names[i] +
                        "' is incompatible with the target model (shape " +
                        shape_str(ckpt.tensor_shapes[i]) + " vs " +
                        shape_str(params[i]->shape) + ")");
    params[i]->data = ckpt.tensor_data[i];
  }
  model.cluster_means() = ckpt.tensor_data.back();
  if (!ckpt.empty_streak.empty()) model.empty_streaks() = ckpt.empty_streak;
}

Model model_from_checkpoint(const Checkpoint& ckpt) {
  Rng scratch(0);
  Model model(ckpt.config, scratch);
  restore_model(model, ckpt);
  return model;
}

}  // namespace moesim
