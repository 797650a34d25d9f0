#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "moesim/autodiff.hpp"

namespace moesim {

struct ModelConfig {
  int input_dim = 0;  // 0 = infer from the dataset at training time
  int latent_dim = 10;
  int num_experts = 1;
  std::vector<int> encoder_hidden{512, 256};
  std::vector<int> expert_hidden{256, 512};
  std::vector<int> clustering_hidden{128};
  float depict_dropout_rate = 0.2f;
  float pi1 = 1.0f;
  float pi2 = 1.0f;
  bool soft_routing = false;               // ablation: blend experts by p_ik
  bool kl_soft_variance = false;           // responsibility-weighted variances
  bool similarity_exclude_diagonal = false;
  int image_rows = 0;  // set for image datasets so generators can tile output
  int image_cols = 0;

  void validate() const {
    if (input_dim < 0) throw ConfigError("model.input_dim must be >= 0");
    if (latent_dim < 1) throw ConfigError("model.latent_dim must be positive");
    if (num_experts < 1) throw ConfigError("model.num_experts must be >= 1");
    for (int w : encoder_hidden)
      if (w < 1) throw ConfigError("model.encoder_hidden widths must be positive");
    for (int w : expert_hidden)
      if (w < 1) throw ConfigError("model.expert_hidden widths must be positive");
    for (int w : clustering_hidden)
      if (w < 1) throw ConfigError("model.clustering_hidden widths must be positive");
    if (!(depict_dropout_rate >= 0.0f && depict_dropout_rate < 1.0f))
      throw ConfigError("model.depict_dropout_rate must be in [0,1)");
  }
};

template <typename T>
struct DenseT {
  TensorPtrT<T> w, b;
};

// Number of consecutive batches a cluster may stay empty before its mean is
// re-seeded from the least confident sample in the current batch.
inline constexpr int kEmptyClusterResetBatches = 50;

template <typename T>
struct ForwardOutputT {
  TensorPtrT<T> z;          // N x latent
  TensorPtrT<T> P;          // clean responsibilities, N x K
  TensorPtrT<T> P_noisy;    // dropout path; equals P at inference
  TensorPtrT<T> x_reconst;  // N x D in (0,1)
  std::vector<int> assignments;
};

// Decoder outputs are pinned strictly inside (0,1); sigmoid alone can round
// to exactly 0 or 1 in f32 once logits saturate.
inline constexpr double kDecoderOutputMargin = 1e-6;

// The network graph: shared encoder, clustering (gating) network, K expert
// decoders, and the per-cluster latent means used for generation.
template <typename T>
class ModelT {
 public:
  ModelT(const ModelConfig& config, Rng& rng) : cfg_(config) {
    cfg_.validate();
    if (cfg_.input_dim < 1)
      throw ConfigError("model: input_dim must be resolved before construction");
    build_mlp(encoder_, "encoder", cfg_.input_dim, cfg_.encoder_hidden,
              cfg_.latent_dim, rng);
    build_mlp(clustering_, "clustering", cfg_.latent_dim, cfg_.clustering_hidden,
              cfg_.num_experts, rng);
    experts_.resize(cfg_.num_experts);
    for (int k = 0; k < cfg_.num_experts; ++k)
      build_mlp(experts_[k], "expert" + std::to_string(k), cfg_.latent_dim,
                cfg_.expert_hidden, cfg_.input_dim, rng);
    cluster_means_.assign(static_cast<size_t>(cfg_.num_experts) * cfg_.latent_dim,
                          T(0));
    for (auto& m : cluster_means_) m = static_cast<T>(rng.normal());
    empty_streak_.assign(cfg_.num_experts, 0);
  }

  const ModelConfig& config() const { return cfg_; }

  TensorPtrT<T> encode(TapeT<T>* tape, const TensorPtrT<T>& x) const {
    if (x->cols() != cfg_.input_dim)
      throw ShapeError("encode: input width " + std::to_string(x->cols()) +
                       " does not match model input_dim " +
                       std::to_string(cfg_.input_dim));
    return run_mlp(tape, encoder_, x, nullptr, 0.0);
  }

  TensorPtrT<T> cluster_probs(TapeT<T>* tape, const TensorPtrT<T>& z, bool noisy,
                              Rng* rng = nullptr) const {
    auto logits = run_mlp(tape, clustering_, z, noisy ? rng : nullptr,
                          noisy ? cfg_.depict_dropout_rate : 0.0);
    return softmax(tape, logits);
  }

  // argmax per row; ties break toward the lower index.
  static std::vector<int> gate(const TensorPtrT<T>& P) {
    const int64_t n = P->rows(), k = P->cols();
    std::vector<int> out(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
      int best = 0;
      for (int64_t j = 1; j < k; ++j)
        if (P->data[i * k + j] > P->data[i * k + best]) best = static_cast<int>(j);
      out[i] = best;
    }
    return out;
  }

  // Hard routing: each sample is decoded only by its assigned expert, so
  // reconstruction gradients reach that expert and (through z) the encoder,
  // never the clustering network.
  TensorPtrT<T> decode(TapeT<T>* tape, const TensorPtrT<T>& z,
                       const std::vector<int>& assignments) const {
    const int64_t n = z->rows();
    if (static_cast<int64_t>(assignments.size()) != n)
      throw RoutingError("decode: assignment count does not match batch size");
    std::vector<std::vector<int>> groups(static_cast<size_t>(cfg_.num_experts));
    for (int64_t i = 0; i < n; ++i) {
      const int a = assignments[i];
      if (a < 0 || a >= cfg_.num_experts)
        throw RoutingError("decode: assignment " + std::to_string(a) +
                           " out of range [0," + std::to_string(cfg_.num_experts) +
                           ")");
      groups[a].push_back(static_cast<int>(i));
    }
    std::vector<TensorPtrT<T>> pieces;
    std::vector<std::vector<int>> index_lists;
    for (int k = 0; k < cfg_.num_experts; ++k) {
      if (groups[k].empty()) continue;
      auto zk = gather_rows(tape, z, groups[k]);
      pieces.push_back(run_expert(tape, k, zk));
      index_lists.push_back(std::move(groups[k]));
    }
    return assemble_rows(tape, pieces, index_lists, n);
  }

  // Ablation path: mixes every expert's output weighted by its responsibility
  // column, which makes the reconstruction differentiable w.r.t. P.
  TensorPtrT<T> decode_soft(TapeT<T>* tape, const TensorPtrT<T>& z,
                            const TensorPtrT<T>& P) const {
    TensorPtrT<T> acc;
    for (int k = 0; k < cfg_.num_experts; ++k) {
      auto weighted = mul(tape, run_expert(tape, k, z), slice_col(tape, P, k));
      acc = acc ? add(tape, acc, weighted) : weighted;
    }
    return acc;
  }

  ForwardOutputT<T> forward(TapeT<T>* tape, const TensorPtrT<T>& x, bool training,
                            Rng* rng = nullptr) const {
    ForwardOutputT<T> out;
    out.z = encode(tape, x);
    out.P = cluster_probs(tape, out.z, /*noisy=*/false);
    out.P_noisy = training ? cluster_probs(tape, out.z, /*noisy=*/true, rng) : out.P;
    out.assignments = gate(out.P);
    out.x_reconst = cfg_.soft_routing ? decode_soft(tape, out.z, out.P)
                                      : decode(tape, out.z, out.assignments);
    return out;
  }

  // EM-style mean update: mu_k = (1/N_k) sum_i p_ik z_i with N_k the hard
  // assignment count. Pure statistic, no gradient flow. Empty clusters keep
  // their previous mean; after kEmptyClusterResetBatches consecutive empty
  // batches the mean is re-seeded from the least confident sample.
  void update_cluster_means(const TensorPtrT<T>& P, const TensorPtrT<T>& z) {
    const int64_t n = z->rows(), k = cfg_.num_experts, d = cfg_.latent_dim;
    if (P->rows() != n || P->cols() != k || z->cols() != d)
      throw ShapeError("update_cluster_means: P/z shapes do not match model");
    const auto assignments = gate(P);
    std::vector<int64_t> counts(static_cast<size_t>(k), 0);
    for (int a : assignments) ++counts[a];

    for (int64_t c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        if (++empty_streak_[c] >= kEmptyClusterResetBatches) {
          int64_t weakest = 0;
          T weakest_conf = std::numeric_limits<T>::max();
          for (int64_t i = 0; i < n; ++i) {
            T conf = P->data[i * k];
            for (int64_t j = 1; j < k; ++j)
              conf = std::max(conf, P->data[i * k + j]);
            if (conf < weakest_conf) {
              weakest_conf = conf;
              weakest = i;
            }
          }
          for (int64_t j = 0; j < d; ++j)
            cluster_means_[c * d + j] = z->data[weakest * d + j];
          empty_streak_[c] = 0;
        }
        continue;
      }
      empty_streak_[c] = 0;
      for (int64_t j = 0; j < d; ++j) {
        T acc = T(0);
        for (int64_t i = 0; i < n; ++i) acc += P->data[i * k + c] * z->data[i * d + j];
        cluster_means_[c * d + j] = acc / static_cast<T>(counts[c]);
      }
    }
  }

  // Draws n latent codes from a unit Gaussian around cluster k's mean and
  // decodes all of them through expert k, unconditionally.
  TensorPtrT<T> generate(int k, int64_t n, uint64_t seed) const {
    if (k < 0 || k >= cfg_.num_experts)
      throw ParameterError("generate: cluster " + std::to_string(k) +
                           " out of range [0," + std::to_string(cfg_.num_experts) +
                           ")");
    if (n < 0) throw ParameterError("generate: negative sample count");
    auto z = sample_latent(k, n, seed);
    if (n == 0) return zeros<T>({0, cfg_.input_dim});
    return run_expert(nullptr, k, z);
  }

  TensorPtrT<T> sample_latent(int k, int64_t n, uint64_t seed) const {
    if (k < 0 || k >= cfg_.num_experts)
      throw ParameterError("sample_latent: cluster out of range");
    Rng rng(seed);
    const int64_t d = cfg_.latent_dim;
    std::vector<T> z(static_cast<size_t>(n) * d);
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < d; ++j)
        z[i * d + j] = cluster_means_[k * d + j] + static_cast<T>(rng.normal());
    return make_tensor<T>({n, d}, std::move(z));
  }

  // All trainable tensors, in a fixed named order (the checkpoint layout).
  std::vector<TensorPtrT<T>> parameters() const {
    std::vector<TensorPtrT<T>> out;
    auto push = [&out](const std::vector<DenseT<T>>& mlp) {
      for (const auto& layer : mlp) {
        out.push_back(layer.w);
        out.push_back(layer.b);
      }
    };
    push(encoder_);
    push(clustering_);
    for (const auto& expert : experts_) push(expert);
    return out;
  }

  const std::vector<T>& cluster_means() const { return cluster_means_; }
  std::vector<T>& cluster_means() { return cluster_means_; }
  const std::vector<int>& empty_streaks() const { return empty_streak_; }
  std::vector<int>& empty_streaks() { return empty_streak_; }

 private:
  static void build_mlp(std::vector<DenseT<T>>& mlp, const std::string& name,
                        int in_dim, const std::vector<int>& hidden, int out_dim,
                        Rng& rng) {
    std::vector<int> widths;
    widths.push_back(in_dim);
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(out_dim);
    for (size_t l = 0; l + 1 < widths.size(); ++l) {
      const int fan_in = widths[l], fan_out = widths[l + 1];
      const bool is_hidden = l + 2 < widths.size();
      // He init for relu hidden layers, Xavier-ish for the head.
      const double std_dev = std::sqrt((is_hidden ? 2.0 : 1.0) / fan_in);
      std::vector<T> w(static_cast<size_t>(fan_in) * fan_out);
      for (auto& v : w) v = static_cast<T>(rng.normal() * std_dev);
      const std::string tag = name + "." + std::to_string(l);
      mlp.push_back(DenseT<T>{
          make_tensor<T>({fan_in, fan_out}, std::move(w), true, tag + ".w"),
          zeros<T>({1, fan_out}, true, tag + ".b")});
    }
  }

  // Hidden layers are relu-activated; `dropout_rate > 0` adds a dropout after
  // each hidden activation (the noisy clustering path). The head stays linear;
  // callers apply softmax/sigmoid as needed.
  TensorPtrT<T> run_mlp(TapeT<T>* tape, const std::vector<DenseT<T>>& mlp,
                        const TensorPtrT<T>& x, Rng* rng, double dropout_rate) const {
    auto h = x;
    for (size_t l = 0; l < mlp.size(); ++l) {
      h = add(tape, matmul(tape, h, mlp[l].w), mlp[l].b);
      if (l + 1 < mlp.size()) {
        h = relu(tape, h);
        if (dropout_rate > 0.0) h = dropout(tape, h, dropout_rate, true, rng);
      }
    }
    return h;
  }

  TensorPtrT<T> run_expert(TapeT<T>* tape, int k, const TensorPtrT<T>& z) const {
    auto logits = run_mlp(tape, experts_[k], z, nullptr, 0.0);
    return clamp(tape, sigmoid(tape, logits), T(kDecoderOutputMargin),
                 T(1.0 - kDecoderOutputMargin));
  }

  ModelConfig cfg_;
  std::vector<DenseT<T>> encoder_;
  std::vector<DenseT<T>> clustering_;
  std::vector<std::vector<DenseT<T>>> experts_;
  std::vector<T> cluster_means_;  // K x latent_dim
  std::vector<int> empty_streak_;
};

using Model = ModelT<float>;
using ForwardOutput = ForwardOutputT<float>;

}  // namespace moesim
