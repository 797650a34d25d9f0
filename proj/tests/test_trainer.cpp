#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "moesim/synthetic.hpp"
#include "moesim/trainer.hpp"
#include "support/testutil.hpp"

using namespace moesim;

namespace {

TrainConfig blobs_config() {
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.batch_size = 100;
  cfg.learning_rate = 1e-3f;
  cfg.seed = 5;
  cfg.similarity.k_neighbors = 8;
  cfg.model.latent_dim = 4;
  cfg.model.num_experts = 3;
  cfg.model.encoder_hidden = {32};
  cfg.model.expert_hidden = {32};
  cfg.model.clustering_hidden = {16};
  return cfg;
}

Dataset blobs_dataset() { return make_blobs(360, 8, 3, 10.0, 17); }

}  // namespace

TEST_CASE("fit learns well-separated blobs") {
  const auto ds = blobs_dataset();
  const auto result = fit(ds, blobs_config());

  REQUIRE_FALSE(result.log.evals.empty());
  const auto& final_metrics = result.log.evals.back().metrics;
  REQUIRE(final_metrics.nmi.has_value());
  CHECK(*final_metrics.nmi > 0.85);

  // descent sanity: epoch-end moving average does not exceed the first epoch's
  const auto& steps = result.log.steps;
  REQUIRE(steps.size() > 8);
  const size_t per_epoch = steps.size() / 50;
  double first = 0, last = 0;
  for (size_t i = 0; i < per_epoch; ++i) first += steps[i].loss.total;
  for (size_t i = steps.size() - per_epoch; i < steps.size(); ++i)
    last += steps[i].loss.total;
  CHECK(last <= first);

  // every logged breakdown obeys the identity
  for (const auto& s : steps)
    CHECK(std::abs(s.loss.total - (s.loss.reconst + 1.0 * s.loss.kl +
                                   s.loss.similarity + 1.0 * s.loss.depict)) < 1e-5);
  // steps strictly increasing
  for (size_t i = 1; i < steps.size(); ++i) CHECK(steps[i].step == steps[i - 1].step + 1);
}

TEST_CASE("same seed, same trace") {
  const auto ds = blobs_dataset();
  auto cfg = blobs_config();
  cfg.epochs = 3;
  const auto a = fit(ds, cfg);
  const auto b = fit(ds, cfg);
  CHECK(same_training_trace(a.log, b.log));
  const auto pa = a.model->parameters();
  const auto pb = b.model->parameters();
  for (size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->data == pb[i]->data);

  auto different = cfg;
  different.seed = 123;
  const auto c = fit(ds, different);
  CHECK_FALSE(same_training_trace(a.log, c.log));
}

TEST_CASE("checkpoint resume continues bit-identically") {
  testutil::TempDir dir("resume");
  const auto ds = blobs_dataset();
  auto cfg = blobs_config();
  cfg.epochs = 4;

  const auto full = fit(ds, cfg);

  auto half_cfg = cfg;
  half_cfg.epochs = 2;
  const auto half = fit(ds, half_cfg);
  const auto resumed = fit(ds, cfg, {}, &half.checkpoint);

  const auto pa = full.model->parameters();
  const auto pb = resumed.model->parameters();
  for (size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->data == pb[i]->data);
  CHECK(full.model->cluster_means() == resumed.model->cluster_means());
  CHECK(full.checkpoint.opt_m == resumed.checkpoint.opt_m);
  CHECK(full.checkpoint.rng_state == resumed.checkpoint.rng_state);

  // the resumed log holds exactly the remaining steps, matching the tail
  const size_t skip = half.log.steps.size();
  REQUIRE(resumed.log.steps.size() == full.log.steps.size() - skip);
  for (size_t i = 0; i < resumed.log.steps.size(); ++i) {
    CHECK(resumed.log.steps[i].step == full.log.steps[skip + i].step);
    CHECK(resumed.log.steps[i].loss.total == full.log.steps[skip + i].loss.total);
  }

  // round trip through disk too
  const auto path = (dir / "half.bin").string();
  save_checkpoint(path, half.checkpoint);
  const auto reloaded = load_checkpoint(path);
  const auto resumed2 = fit(ds, cfg, {}, &reloaded);
  CHECK(same_training_trace(resumed.log, resumed2.log));
}

TEST_CASE("evaluate") {
  const auto ds = blobs_dataset();
  auto cfg = blobs_config();
  cfg.epochs = 3;
  const auto result = fit(ds, cfg);

  SUBCASE("deterministic") {
    const auto a = evaluate(*result.model, ds);
    const auto b = evaluate(*result.model, ds);
    CHECK(a.nmi == b.nmi);
    CHECK(a.acc == b.acc);
    CHECK(a.cluster_sizes == b.cluster_sizes);
  }
  SUBCASE("unlabeled data reports metrics as absent") {
    Dataset unlabeled = ds;
    unlabeled.labels.clear();
    const auto snap = evaluate(*result.model, unlabeled);
    CHECK_FALSE(snap.nmi.has_value());
    CHECK_FALSE(snap.acc.has_value());
    CHECK_FALSE(snap.f_measure.has_value());
    CHECK(snap.cluster_sizes.size() == 3);
    int64_t total = 0;
    for (int64_t c : snap.cluster_sizes) total += c;
    CHECK(total == ds.n);
  }
  SUBCASE("width mismatch rejected") {
    Dataset narrow;
    narrow.n = 4;
    narrow.d = 3;
    narrow.features.assign(12, 0.5f);
    CHECK_THROWS_AS(evaluate(*result.model, narrow), ConfigError);
  }
}

TEST_CASE("perfect synthetic assignments give perfect scores") {
  // oracle upper bound: when predictions equal labels, all metrics are 1
  const auto ds = blobs_dataset();
  CHECK(nmi(ds.labels, ds.labels) == doctest::Approx(1.0));
  CHECK(clustering_accuracy(ds.labels, ds.labels) == doctest::Approx(1.0));
  CHECK(f_measure(ds.labels, ds.labels) == doctest::Approx(1.0));
}

TEST_CASE("generation ablation") {
  const auto ds = blobs_dataset();
  const auto result = fit(ds, blobs_config());

  const auto report = generation_ablation(*result.model, 200, 3);
  CHECK(report.decoder_invocations == 3 * 200);
  CHECK(report.per_cluster_accuracy.size() == 3);
  CHECK(report.mean_accuracy > 0.9);

  // deterministic given the seed
  const auto again = generation_ablation(*result.model, 200, 3);
  CHECK(again.per_cluster_accuracy == report.per_cluster_accuracy);
}

TEST_CASE("non-finite loss aborts with diagnostics and a last-good checkpoint") {
  testutil::TempDir dir("abort");
  const auto ds = blobs_dataset();
  auto cfg = blobs_config();
  cfg.epochs = 3;
  cfg.model.pi2 = std::numeric_limits<float>::infinity();

  FitOutputs outputs;
  outputs.checkpoint_path = (dir / "ckpt.bin").string();
  CHECK_THROWS_WITH_AS(fit(ds, cfg, outputs), doctest::Contains("total"),
                       TrainingError);
  // the last-good state landed on disk and is loadable
  const auto ckpt = load_checkpoint(outputs.checkpoint_path);
  CHECK(ckpt.config.num_experts == 3);
}

TEST_CASE("warmup epochs train reconstruction only") {
  const auto ds = blobs_dataset();
  auto cfg = blobs_config();
  cfg.epochs = 2;
  cfg.warmup_epochs = 1;
  const auto result = fit(ds, cfg);
  const size_t per_epoch = result.log.steps.size() / 2;
  for (size_t i = 0; i < per_epoch; ++i) {
    CHECK(result.log.steps[i].loss.similarity == 0.0);
    CHECK(result.log.steps[i].loss.depict == 0.0);
    CHECK(result.log.steps[i].loss.kl == 0.0);
    CHECK(result.log.steps[i].loss.total ==
          doctest::Approx(result.log.steps[i].loss.reconst));
  }
  bool full_objective_seen = false;
  for (size_t i = per_epoch; i < result.log.steps.size(); ++i)
    full_objective_seen =
        full_objective_seen || result.log.steps[i].loss.similarity != 0.0;
  CHECK(full_objective_seen);
}

TEST_CASE("train log file is line-delimited and complete") {
  testutil::TempDir dir("log");
  const auto ds = blobs_dataset();
  auto cfg = blobs_config();
  cfg.epochs = 2;
  cfg.eval_every = 1;
  FitOutputs outputs;
  outputs.log_path = (dir / "log.jsonl").string();
  const auto result = fit(ds, cfg, outputs);

  const auto text = testutil::read_file_text(outputs.log_path);
  size_t lines = 0;
  for (char c : text)
    if (c == '\n') ++lines;
  CHECK(lines == result.log.steps.size() + result.log.evals.size());
  CHECK(text.find("\"type\":\"step\"") != std::string::npos);
  CHECK(text.find("\"type\":\"eval\"") != std::string::npos);
}

TEST_CASE("cluster means drift is tiny on a converged model") {
  const auto ds = blobs_dataset();
  auto cfg = blobs_config();
  const auto result = fit(ds, cfg);

  auto x = make_tensor<float>({ds.n, ds.d}, ds.features);
  auto z = result.model->encode(nullptr, x);
  auto p = result.model->cluster_probs(nullptr, z, false);

  // last-batch means vs full-data means: small at convergence
  const auto stored = result.model->cluster_means();
  result.model->update_cluster_means(p, z);
  const auto full_data = result.model->cluster_means();
  double batch_drift = 0;
  for (size_t i = 0; i < stored.size(); ++i)
    batch_drift += (stored[i] - full_data[i]) * (stored[i] - full_data[i]);
  // within-cluster latent variance is pinned near 1, so a 100-sample batch
  // mean wobbles by ~1/sqrt(members) per dimension
  CHECK(std::sqrt(batch_drift) < 1.0);

  // with stationary z and P, one further update moves the means below 1e-3
  result.model->update_cluster_means(p, z);
  const auto again = result.model->cluster_means();
  double drift = 0;
  for (size_t i = 0; i < full_data.size(); ++i)
    drift += (full_data[i] - again[i]) * (full_data[i] - again[i]);
  CHECK(std::sqrt(drift) < 1e-3);
}
