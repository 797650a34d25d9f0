#include "moesim/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace moesim {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

SimilarityBasis make_basis(const Dataset& dataset, const SimilarityConfig& config,
                           EmbeddingTable& embedding_storage) {
  SimilarityBasis basis;
  basis.labels = dataset.has_labels() ? &dataset.labels : nullptr;
  if (config.source == SimilaritySource::precomputed_embedding) {
    embedding_storage = load_embedding_csv(config.embedding_path);
    if (embedding_storage.rows < dataset.n)
      throw DataError("similarity embedding covers " +
                      std::to_string(embedding_storage.rows) + " rows, dataset has " +
                      std::to_string(dataset.n));
    basis.data = embedding_storage.data.data();
    basis.rows = embedding_storage.rows;
    basis.cols = embedding_storage.cols;
  } else {
    basis.data = dataset.features.data();
    basis.rows = dataset.n;
    basis.cols = dataset.d;
  }
  return basis;
}

// Inference forward over the whole dataset in fixed-size chunks.
void full_forward(const Model& model, const Dataset& dataset,
                  std::vector<float>* z_out, std::vector<int>* assign_out,
                  std::vector<float>* conf_out) {
  const int64_t chunk = 1024;
  const int latent = model.config().latent_dim;
  const int k = model.config().num_experts;
  if (z_out) z_out->resize(static_cast<size_t>(dataset.n) * latent);
  if (assign_out) assign_out->resize(static_cast<size_t>(dataset.n));
  if (conf_out) conf_out->resize(static_cast<size_t>(dataset.n));
  for (int64_t begin = 0; begin < dataset.n; begin += chunk) {
    const int64_t b = std::min(chunk, dataset.n - begin);
    std::vector<float> rows(static_cast<size_t>(b) * dataset.d);
    std::copy_n(&dataset.features[begin * dataset.d], b * dataset.d, rows.data());
    auto x = make_tensor<float>({b, dataset.d}, std::move(rows));
    auto z = model.encode(nullptr, x);
    auto p = model.cluster_probs(nullptr, z, /*noisy=*/false);
    const auto assignments = Model::gate(p);
    if (z_out)
      std::copy_n(z->data.data(), b * latent, z_out->data() + begin * latent);
    for (int64_t i = 0; i < b; ++i) {
      if (assign_out) (*assign_out)[begin + i] = assignments[i];
      if (conf_out) {
        float best = p->data[i * k];
        for (int j = 1; j < k; ++j) best = std::max(best, p->data[i * k + j]);
        (*conf_out)[begin + i] = best;
      }
    }
  }
}

nlohmann::json snapshot_json(const MetricSnapshot& m) {
  nlohmann::json j;
  j["n"] = m.n;
  j["nmi"] = m.nmi ? nlohmann::json(*m.nmi) : nlohmann::json(nullptr);
  j["acc"] = m.acc ? nlohmann::json(*m.acc) : nlohmann::json(nullptr);
  j["f_measure"] = m.f_measure ? nlohmann::json(*m.f_measure) : nlohmann::json(nullptr);
  j["cluster_sizes"] = m.cluster_sizes;
  return j;
}

}  // namespace

bool same_training_trace(const TrainLog& a, const TrainLog& b) {
  if (a.steps.size() != b.steps.size() || a.evals.size() != b.evals.size())
    return false;
  for (size_t i = 0; i < a.steps.size(); ++i) {
    const auto& x = a.steps[i];
    const auto& y = b.steps[i];
    if (x.step != y.step || x.loss.reconst != y.loss.reconst ||
        x.loss.kl != y.loss.kl || x.loss.similarity != y.loss.similarity ||
        x.loss.depict != y.loss.depict || x.loss.total != y.loss.total)
      return false;
  }
  for (size_t i = 0; i < a.evals.size(); ++i) {
    const auto& x = a.evals[i];
    const auto& y = b.evals[i];
    if (x.step != y.step || x.epoch != y.epoch || x.metrics.n != y.metrics.n ||
        x.metrics.nmi != y.metrics.nmi || x.metrics.acc != y.metrics.acc ||
        x.metrics.f_measure != y.metrics.f_measure ||
        x.metrics.cluster_sizes != y.metrics.cluster_sizes)
      return false;
  }
  return true;
}

void write_train_log(const std::string& path, const TrainLog& log) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  for (const auto& s : log.steps) {
    nlohmann::json j;
    j["type"] = "step";
    j["step"] = s.step;
    j["reconst"] = s.loss.reconst;
    j["kl"] = s.loss.kl;
    j["similarity"] = s.loss.similarity;
    j["depict"] = s.loss.depict;
    j["total"] = s.loss.total;
    j["t"] = s.wall_time;
    out << j.dump() << "\n";
  }
  for (const auto& e : log.evals) {
    nlohmann::json j = snapshot_json(e.metrics);
    j["type"] = "eval";
    j["step"] = e.step;
    j["epoch"] = e.epoch;
    j["t"] = e.wall_time;
    out << j.dump() << "\n";
  }
  if (!out) throw FormatError("failed writing '" + path + "'");
}

Checkpoint make_training_checkpoint(const Model& model, const Adam& optimizer,
                                    const Rng& rng, uint64_t step, uint64_t epoch,
                                    const Dataset& dataset) {
  Checkpoint ckpt = snapshot_model(model);
  ckpt.has_optimizer = true;
  ckpt.opt_lr = optimizer.learning_rate();
  ckpt.opt_beta1 = optimizer.beta1();
  ckpt.opt_beta2 = optimizer.beta2();
  ckpt.opt_epsilon = optimizer.epsilon();
  ckpt.opt_t = optimizer.step_count();
  ckpt.opt_m = optimizer.first_moments();
  ckpt.opt_v = optimizer.second_moments();
  ckpt.step = step;
  ckpt.epoch = epoch;
  ckpt.rng_state = rng.state();
  if (dataset.scaling) ckpt.scaling = dataset.scaling;
  return ckpt;
}

FitResult fit(const Dataset& dataset, const TrainConfig& config,
              const FitOutputs& outputs, const Checkpoint* resume) {
  const auto start = std::chrono::steady_clock::now();
  TrainConfig cfg = config;
  if (cfg.model.input_dim == 0) cfg.model.input_dim = static_cast<int>(dataset.d);
  if (cfg.model.input_dim != dataset.d)
    throw ConfigError("fit: model.input_dim " + std::to_string(cfg.model.input_dim) +
                      " does not match dataset width " + std::to_string(dataset.d));
  if (cfg.model.image_rows == 0 && dataset.image_rows > 0) {
    cfg.model.image_rows = dataset.image_rows;
    cfg.model.image_cols = dataset.image_cols;
  }
  if (cfg.batch_size > dataset.n) cfg.batch_size = static_cast<int>(dataset.n);
  cfg.validate();
  cfg.similarity.validate();

  Rng rng(cfg.seed);
  auto model = std::make_shared<Model>(cfg.model, rng);
  Adam optimizer(model->parameters(), cfg.learning_rate);
  uint64_t step = 0;
  int64_t start_epoch = 0;
  if (resume) {
    restore_model(*model, *resume);
    if (resume->has_optimizer)
      optimizer.set_state(resume->opt_t, resume->opt_m, resume->opt_v);
    rng.set_state(resume->rng_state);
    step = resume->step;
    start_epoch = static_cast<int64_t>(resume->epoch);
  }

  EmbeddingTable embedding_storage;
  const SimilarityBasis basis = make_basis(dataset, cfg.similarity, embedding_storage);

  // Trailing short batches are dropped during training: a handful of rows
  // makes a degenerate similarity matrix and a noisy covariance estimate.
  const bool drop_last = dataset.n > cfg.batch_size;
  BatchIterator batches(dataset, cfg.batch_size, cfg.seed, drop_last);
  TrainLog log;
  Checkpoint last_good = make_training_checkpoint(*model, optimizer, rng, step,
                                                  static_cast<uint64_t>(start_epoch),
                                                  dataset);
  double best_epoch_loss = std::numeric_limits<double>::infinity();
  int stale_epochs = 0;

  const auto params = model->parameters();
  for (int64_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    batches.start_epoch(epoch);
    Batch batch;
    double epoch_loss = 0.0;
    int64_t epoch_steps = 0;
    while (batches.next(batch)) {
      Tape tape;
      LossBreakdown breakdown;
      try {
        const auto out = model->forward(&tape, batch.features, /*training=*/true, &rng);
        if (!all_finite(*out.z) || !all_finite(*out.P) || !all_finite(*out.x_reconst))
          throw TrainingError("non-finite activations in forward pass at step " +
                              std::to_string(step + 1));
        const bool warmup = epoch < cfg.warmup_epochs;
        LossTerms<float> terms;
        terms.reconst = reconstruction_bce(&tape, batch.features, out.x_reconst);
        if (warmup) {
          terms.kl = scalar_tensor<float>(0.0f);
          terms.similarity = scalar_tensor<float>(0.0f);
          terms.depict = scalar_tensor<float>(0.0f);
        } else {
          const auto s = batch_similarity(batch.indices, basis, cfg.similarity);
          terms.kl = kl_mixture(&tape, out.z, out.P, out.assignments,
                                cfg.model.kl_soft_variance);
          terms.similarity = similarity_bce(&tape, s, out.P,
                                            cfg.model.similarity_exclude_diagonal);
          terms.depict = depict_loss(&tape, depict_targets(out.P), out.P_noisy);
        }
        auto [total, b] = total_loss(&tape, terms, cfg.model.pi1, cfg.model.pi2);
        breakdown = b;

        tape.backward(total);
        // experts that received no samples this batch keep an all-zero grad
        for (const auto& p : params) p->ensure_grad();
        if (cfg.max_grad_norm > 0.0) clip_grad_norm(params, cfg.max_grad_norm);
        optimizer.step();
        zero_grad(params);
        model->update_cluster_means(out.P, out.z);
      } catch (const TrainingError&) {
        if (!outputs.checkpoint_path.empty())
          save_checkpoint(outputs.checkpoint_path, last_good);
        if (!outputs.log_path.empty()) write_train_log(outputs.log_path, log);
        throw;
      } catch (const DomainError& e) {
        // numeric blowup surfacing inside an op rather than in the totals
        if (!outputs.checkpoint_path.empty())
          save_checkpoint(outputs.checkpoint_path, last_good);
        if (!outputs.log_path.empty()) write_train_log(outputs.log_path, log);
        throw TrainingError("training aborted at step " + std::to_string(step + 1) +
                            ": " + e.what());
      }

      ++step;
      log.steps.push_back({step, breakdown, seconds_since(start)});
      epoch_loss += breakdown.total;
      ++epoch_steps;
    }

    last_good = make_training_checkpoint(*model, optimizer, rng, step,
                                         static_cast<uint64_t>(epoch + 1), dataset);

    const bool final_epoch = epoch + 1 == cfg.epochs;
    if ((cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0) || final_epoch) {
      EvalRecord rec;
      rec.step = step;
      rec.epoch = epoch + 1;
      rec.metrics = evaluate(*model, dataset);
      rec.wall_time = seconds_since(start);
      log.evals.push_back(std::move(rec));
    }

    if (cfg.patience > 0 && epoch_steps > 0) {
      const double mean_loss = epoch_loss / static_cast<double>(epoch_steps);
      if (mean_loss < best_epoch_loss - 1e-9) {
        best_epoch_loss = mean_loss;
        stale_epochs = 0;
      } else if (++stale_epochs >= cfg.patience) {
        break;
      }
    }
  }

  FitResult result;
  result.model = model;
  result.log = std::move(log);
  result.checkpoint = last_good;
  if (!outputs.checkpoint_path.empty())
    save_checkpoint(outputs.checkpoint_path, result.checkpoint);
  if (!outputs.log_path.empty()) write_train_log(outputs.log_path, result.log);
  return result;
}

MetricSnapshot evaluate(const Model& model, const Dataset& dataset) {
  if (dataset.d != model.config().input_dim)
    throw ConfigError("evaluate: dataset width " + std::to_string(dataset.d) +
                      " does not match model input_dim " +
                      std::to_string(model.config().input_dim));
  std::vector<int> assignments;
  full_forward(model, dataset, nullptr, &assignments, nullptr);

  MetricSnapshot snap;
  snap.n = dataset.n;
  snap.cluster_sizes.assign(model.config().num_experts, 0);
  for (int a : assignments) ++snap.cluster_sizes[a];
  if (dataset.has_labels()) {
    snap.nmi = nmi(dataset.labels, assignments);
    snap.acc = clustering_accuracy(dataset.labels, assignments);
    snap.f_measure = f_measure(dataset.labels, assignments);
  }
  return snap;
}

EmbeddingRecord embed_dataset(const Model& model, const Dataset& dataset) {
  if (dataset.d != model.config().input_dim)
    throw ConfigError("embed: dataset width does not match model input_dim");
  EmbeddingRecord rec;
  full_forward(model, dataset, &rec.z, &rec.assignments, &rec.confidence);
  return rec;
}

AblationReport generation_ablation(const Model& model, int64_t n_per_cluster,
                                   uint64_t seed) {
  const int k = model.config().num_experts;
  AblationReport report;
  report.per_cluster_accuracy.resize(k, 0.0);
  double acc_sum = 0.0;
  for (int c = 0; c < k; ++c) {
    auto generated = model.generate(c, n_per_cluster, mix_seed(seed, c));
    report.decoder_invocations += static_cast<uint64_t>(n_per_cluster);
    auto z = model.encode(nullptr, generated);
    auto p = model.cluster_probs(nullptr, z, /*noisy=*/false);
    const auto routed = Model::gate(p);
    int64_t hits = 0;
    for (int a : routed)
      if (a == c) ++hits;
    report.per_cluster_accuracy[c] =
        n_per_cluster > 0 ? static_cast<double>(hits) / n_per_cluster : 0.0;
    acc_sum += report.per_cluster_accuracy[c];
  }
  report.mean_accuracy = k > 0 ? acc_sum / k : 0.0;
  return report;
}

}  // namespace moesim
