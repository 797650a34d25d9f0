#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "moesim/losses.hpp"
#include "moesim/model.hpp"
#include "support/testutil.hpp"

using namespace moesim;

namespace {

ModelConfig tiny_config(int input_dim, int latent, int experts) {
  ModelConfig cfg;
  cfg.input_dim = input_dim;
  cfg.latent_dim = latent;
  cfg.num_experts = experts;
  cfg.encoder_hidden = {8};
  cfg.expert_hidden = {8};
  cfg.clustering_hidden = {6};
  return cfg;
}

TensorPtr random_batch(int64_t n, int64_t d, uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(static_cast<size_t>(n) * d);
  for (auto& x : v) x = static_cast<float>(rng.uniform());
  return make_tensor<float>({n, d}, std::move(v));
}

TensorPtr find_param(const Model& model, const std::string& name) {
  for (const auto& p : model.parameters())
    if (p->name == name) return p;
  REQUIRE(false);
  return nullptr;
}

}  // namespace

TEST_CASE("encode") {
  Rng rng(1);
  ModelConfig cfg = tiny_config(5, 3, 2);
  cfg.encoder_hidden = {};  // single affine layer
  Model model(cfg, rng);

  SUBCASE("zero weights reproduce the bias on every row") {
    auto w = find_param(model, "encoder.0.w");
    auto b = find_param(model, "encoder.0.b");
    std::fill(w->data.begin(), w->data.end(), 0.0f);
    b->data = {1.5f, -2.0f, 0.25f};
    auto z = model.encode(nullptr, random_batch(4, 5, 2));
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 3; ++j) CHECK(z->at(i, j) == b->data[j]);
  }
  SUBCASE("output shape is N x latent") {
    for (int64_t n : {1, 2, 7}) {
      auto z = model.encode(nullptr, random_batch(n, 5, 3));
      CHECK(z->shape == Shape{n, 3});
    }
  }
  SUBCASE("identical rows encode identically") {
    auto one = random_batch(1, 5, 4);
    std::vector<float> twice = one->data;
    twice.insert(twice.end(), one->data.begin(), one->data.end());
    auto z = model.encode(nullptr, make_tensor<float>({2, 5}, twice));
    for (int j = 0; j < 3; ++j) CHECK(z->at(0, j) == z->at(1, j));
  }
  SUBCASE("wrong width is rejected") {
    CHECK_THROWS_AS(model.encode(nullptr, random_batch(2, 4, 5)), ShapeError);
  }
}

TEST_CASE("cluster_probs") {
  Rng rng(2);
  Model model(tiny_config(6, 4, 3), rng);
  auto z = model.encode(nullptr, random_batch(16, 6, 7));

  SUBCASE("rows sum to one") {
    auto p = model.cluster_probs(nullptr, z, false);
    for (int i = 0; i < 16; ++i) {
      float sum = 0;
      for (int j = 0; j < 3; ++j) sum += p->at(i, j);
      CHECK(sum == doctest::Approx(1.0f).epsilon(1e-6));
    }
  }
  SUBCASE("clean path is deterministic") {
    auto p1 = model.cluster_probs(nullptr, z, false);
    auto p2 = model.cluster_probs(nullptr, z, false);
    CHECK(p1->data == p2->data);
  }
  SUBCASE("noisy path differs from clean with overwhelming probability") {
    Rng noise(11);
    auto clean = model.cluster_probs(nullptr, z, false);
    auto noisy = model.cluster_probs(nullptr, z, true, &noise);
    CHECK(clean->data != noisy->data);
  }
}

TEST_CASE("gate") {
  SUBCASE("clear argmax") {
    auto p = make_tensor<float>({1, 3}, {0.1f, 0.7f, 0.2f});
    CHECK(Model::gate(p) == std::vector<int>{1});
  }
  SUBCASE("ties break toward the lower index") {
    auto p = make_tensor<float>({1, 2}, {0.5f, 0.5f});
    CHECK(Model::gate(p) == std::vector<int>{0});
  }
  SUBCASE("column permutation permutes assignments") {
    Rng rng(3);
    std::vector<float> vals(5 * 4);
    for (auto& v : vals) v = static_cast<float>(rng.uniform());
    auto p = make_tensor<float>({5, 4}, vals);
    const auto base = Model::gate(p);
    const std::vector<int> perm = {2, 0, 3, 1};  // new column c holds old perm[c]
    std::vector<float> permuted(vals.size());
    for (int i = 0; i < 5; ++i)
      for (int c = 0; c < 4; ++c) permuted[i * 4 + c] = p->at(i, perm[c]);
    auto assign = Model::gate(make_tensor<float>({5, 4}, permuted));
    for (int i = 0; i < 5; ++i) CHECK(perm[assign[i]] == base[i]);
  }
}

TEST_CASE("decode") {
  Rng rng(4);
  Model model(tiny_config(5, 3, 3), rng);
  auto z = model.encode(nullptr, random_batch(6, 5, 9));

  SUBCASE("outputs strictly inside (0,1)") {
    auto x = model.decode(nullptr, z, {0, 1, 2, 0, 1, 2});
    for (float v : x->data) {
      CHECK(v > 0.0f);
      CHECK(v < 1.0f);
    }
  }
  SUBCASE("equal latent and assignment give equal reconstructions") {
    std::vector<float> doubled = z->data;
    auto z2 = make_tensor<float>({6, 3}, z->data);
    auto x = model.decode(nullptr, z2, {1, 1, 1, 1, 1, 1});
    std::vector<float> row0(x->data.begin(), x->data.begin() + 5);
    // rows 0 and 3 use the same expert; make their z equal first
    std::copy_n(z->data.begin(), 3, z2->data.begin() + 3 * 3);
    auto x2 = model.decode(nullptr, z2, {1, 1, 1, 1, 1, 1});
    for (int j = 0; j < 5; ++j) CHECK(x2->at(0, j) == x2->at(3, j));
  }
  SUBCASE("assignment out of range") {
    CHECK_THROWS_AS(model.decode(nullptr, z, {0, 1, 3, 0, 1, 2}), RoutingError);
    CHECK_THROWS_AS(model.decode(nullptr, z, {0, 1, -1, 0, 1, 2}), RoutingError);
  }
}

TEST_CASE("routing isolation: unused experts get exactly zero gradient") {
  Rng rng(5);
  Model model(tiny_config(4, 2, 3), rng);
  const auto params = model.parameters();
  zero_grad(params);

  Tape tape;
  auto x = random_batch(5, 4, 13);
  auto z = model.encode(&tape, x);
  // everything routed to expert 0
  auto xr = model.decode(&tape, z, {0, 0, 0, 0, 0});
  auto loss = reconstruction_bce(&tape, x, xr);
  tape.backward(loss);

  bool expert0_touched = false;
  for (const auto& p : params) {
    if (p->name.rfind("expert0.", 0) == 0) {
      for (float g : p->grad) expert0_touched = expert0_touched || g != 0.0f;
    } else if (p->name.rfind("expert", 0) == 0) {
      // experts 1 and 2 never ran: grads must be absent or all-zero
      for (float g : p->grad) CHECK(g == 0.0f);
    }
  }
  CHECK(expert0_touched);
  // encoder received gradient through z
  bool encoder_touched = false;
  for (float g : find_param(model, "encoder.0.w")->grad)
    encoder_touched = encoder_touched || g != 0.0f;
  CHECK(encoder_touched);
  // clustering network is not on the reconstruction path at all
  for (const auto& p : params)
    if (p->name.rfind("clustering.", 0) == 0) CHECK(p->grad.empty());
}

TEST_CASE("cluster means update") {
  Rng rng(6);
  ModelConfig cfg = tiny_config(4, 1, 2);
  Model model(cfg, rng);

  SUBCASE("hand case: soft numerator, hard-count denominator") {
    auto p = make_tensor<float>({2, 2}, {0.8f, 0.2f, 0.4f, 0.6f});
    auto z = make_tensor<float>({2, 1}, {1.0f, 3.0f});
    model.update_cluster_means(p, z);
    CHECK(model.cluster_means()[0] == doctest::Approx(0.8 * 1 + 0.4 * 3));  // 2.0
    CHECK(model.cluster_means()[1] == doctest::Approx(0.2 * 1 + 0.6 * 3));  // 2.0
  }
  SUBCASE("one-hot responsibilities give the arithmetic mean") {
    auto p = make_tensor<float>({4, 2}, {1, 0, 1, 0, 0, 1, 0, 1});
    auto z = make_tensor<float>({4, 1}, {1.0f, 3.0f, 10.0f, 20.0f});
    model.update_cluster_means(p, z);
    CHECK(model.cluster_means()[0] == doctest::Approx(2.0));
    CHECK(model.cluster_means()[1] == doctest::Approx(15.0));
  }
  SUBCASE("one-hot P with stationary z is a fixed point") {
    auto p = make_tensor<float>({4, 2}, {1, 0, 1, 0, 0, 1, 0, 1});
    auto z = make_tensor<float>({4, 1}, {1.0f, 3.0f, 10.0f, 20.0f});
    model.update_cluster_means(p, z);
    const auto once = model.cluster_means();
    model.update_cluster_means(p, z);
    CHECK(model.cluster_means() == once);
  }
  SUBCASE("single sample, single cluster") {
    Rng r2(7);
    Model m1(tiny_config(4, 1, 1), r2);
    auto p = make_tensor<float>({1, 1}, {1.0f});
    auto z = make_tensor<float>({1, 1}, {42.0f});
    m1.update_cluster_means(p, z);
    CHECK(m1.cluster_means()[0] == doctest::Approx(42.0));
  }
  SUBCASE("empty cluster keeps its mean, then reseeds after the streak limit") {
    const float before = model.cluster_means()[1];
    auto p = make_tensor<float>({2, 2}, {0.9f, 0.1f, 0.8f, 0.2f});  // cluster 1 empty
    auto z = make_tensor<float>({2, 1}, {5.0f, 7.0f});
    for (int i = 0; i < kEmptyClusterResetBatches - 1; ++i) {
      model.update_cluster_means(p, z);
      CHECK(model.cluster_means()[1] == before);
    }
    model.update_cluster_means(p, z);
    // sample 1 has the lowest max-probability (0.8)
    CHECK(model.cluster_means()[1] == 7.0f);
    CHECK(model.empty_streaks()[1] == 0);
  }
}

TEST_CASE("generate") {
  Rng rng(8);
  Model model(tiny_config(5, 2, 3), rng);

  SUBCASE("empty request") {
    auto out = model.generate(0, 0, 1);
    CHECK(out->rows() == 0);
    CHECK(out->cols() == 5);
  }
  SUBCASE("seeded determinism") {
    auto a = model.generate(1, 8, 77);
    auto b = model.generate(1, 8, 77);
    CHECK(a->data == b->data);
    auto c = model.generate(1, 8, 78);
    CHECK(a->data != c->data);
  }
  SUBCASE("cluster index validated") {
    CHECK_THROWS_AS(model.generate(3, 4, 1), ParameterError);
    CHECK_THROWS_AS(model.generate(-1, 4, 1), ParameterError);
  }
  SUBCASE("outputs in (0,1)") {
    auto out = model.generate(2, 16, 5);
    for (float v : out->data) {
      CHECK(v > 0.0f);
      CHECK(v < 1.0f);
    }
  }
}

TEST_CASE("forward bundle") {
  Rng rng(9);
  Model model(tiny_config(6, 3, 4), rng);

  SUBCASE("invariants hold") {
    Rng noise(3);
    auto x = random_batch(9, 6, 21);
    auto out = model.forward(nullptr, x, true, &noise);
    for (int i = 0; i < 9; ++i) {
      float sum = 0, nsum = 0;
      for (int j = 0; j < 4; ++j) {
        sum += out.P->at(i, j);
        nsum += out.P_noisy->at(i, j);
      }
      CHECK(sum == doctest::Approx(1.0f).epsilon(1e-6));
      CHECK(nsum == doctest::Approx(1.0f).epsilon(1e-6));
      int best = 0;
      for (int j = 1; j < 4; ++j)
        if (out.P->at(i, j) > out.P->at(i, best)) best = j;
      CHECK(out.assignments[i] == best);
    }
    for (float v : out.x_reconst->data) {
      CHECK(v > 0.0f);
      CHECK(v < 1.0f);
    }
  }
  SUBCASE("inference mode reuses the clean responsibilities") {
    auto out = model.forward(nullptr, random_batch(4, 6, 22), false);
    CHECK(out.P.get() == out.P_noisy.get());
  }
  SUBCASE("single-sample batch works end to end") {
    auto out = model.forward(nullptr, random_batch(1, 6, 23), false);
    CHECK(out.x_reconst->rows() == 1);
  }
}

TEST_CASE("relabeling experts, clustering columns and means leaves the loss alone") {
  Rng rng(10);
  ModelConfig cfg = tiny_config(5, 3, 3);
  Model model(cfg, rng);
  auto x = random_batch(12, 5, 31);

  SimilarityMatrix s(12);
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 12; ++j)
      if ((i % 3) == (j % 3)) s.set(i, j, 1);

  auto compute_loss = [&](const Model& m) {
    Tape tape;
    auto out = m.forward(&tape, x, false);
    LossTerms<float> terms;
    terms.reconst = reconstruction_bce(&tape, x, out.x_reconst);
    terms.kl = kl_mixture(&tape, out.z, out.P, out.assignments);
    terms.similarity = similarity_bce(&tape, s, out.P);
    terms.depict = depict_loss(&tape, depict_targets(out.P), out.P_noisy);
    auto [total, b] = total_loss(&tape, terms, 1.0, 1.0);
    return b;
  };
  const auto base = compute_loss(model);
  const auto base_recon = model.forward(nullptr, x, false).x_reconst->data;

  // permutation: new index c takes old index perm[c]
  const std::vector<int> perm = {2, 0, 1};
  auto w = find_param(model, "clustering.1.w");
  auto b = find_param(model, "clustering.1.b");
  const auto old_w = w->data;
  const auto old_b = b->data;
  const int64_t rows = w->rows();
  for (int64_t r = 0; r < rows; ++r)
    for (int c = 0; c < 3; ++c) w->data[r * 3 + c] = old_w[r * 3 + perm[c]];
  for (int c = 0; c < 3; ++c) b->data[c] = old_b[perm[c]];

  // swap expert parameter data along the same permutation
  std::vector<std::vector<float>> expert_data;
  for (int k = 0; k < 3; ++k)
    for (int l = 0; l < 2; ++l) {
      expert_data.push_back(
          find_param(model, "expert" + std::to_string(k) + "." + std::to_string(l) + ".w")->data);
      expert_data.push_back(
          find_param(model, "expert" + std::to_string(k) + "." + std::to_string(l) + ".b")->data);
    }
  for (int k = 0; k < 3; ++k)
    for (int l = 0; l < 2; ++l) {
      find_param(model, "expert" + std::to_string(k) + "." + std::to_string(l) + ".w")->data =
          expert_data[perm[k] * 4 + l * 2];
      find_param(model, "expert" + std::to_string(k) + "." + std::to_string(l) + ".b")->data =
          expert_data[perm[k] * 4 + l * 2 + 1];
    }
  // and the stored means
  auto means = model.cluster_means();
  auto old_means = means;
  for (int k = 0; k < 3; ++k)
    for (int j = 0; j < 3; ++j) means[k * 3 + j] = old_means[perm[k] * 3 + j];
  model.cluster_means() = means;

  const auto relabeled = compute_loss(model);
  CHECK(relabeled.total == doctest::Approx(base.total).epsilon(1e-5));
  CHECK(relabeled.reconst == doctest::Approx(base.reconst).epsilon(1e-5));
  CHECK(relabeled.similarity == doctest::Approx(base.similarity).epsilon(1e-5));
  const auto relabeled_recon = model.forward(nullptr, x, false).x_reconst->data;
  for (size_t i = 0; i < base_recon.size(); ++i)
    CHECK(relabeled_recon[i] == doctest::Approx(base_recon[i]).epsilon(1e-5));
}

TEST_CASE("soft routing blends expert outputs") {
  Rng rng(11);
  ModelConfig cfg = tiny_config(5, 3, 2);
  cfg.soft_routing = true;
  Model model(cfg, rng);
  auto out = model.forward(nullptr, random_batch(6, 5, 41), false);
  for (float v : out.x_reconst->data) {
    CHECK(v > 0.0f);
    CHECK(v < 1.0f);
  }
  // gradient flows into P through the mixture (and thus into the clustering net)
  Tape tape;
  auto x = random_batch(6, 5, 42);
  auto fwd = model.forward(&tape, x, false);
  auto loss = reconstruction_bce(&tape, x, fwd.x_reconst);
  tape.backward(loss);
  bool clustering_touched = false;
  for (const auto& p : model.parameters())
    if (p->name.rfind("clustering.", 0) == 0 && p->has_grad())
      for (float g : p->grad) clustering_touched = clustering_touched || g != 0.0f;
  CHECK(clustering_touched);
}

TEST_CASE("expert routing gradient check through gather/assemble") {
  Rng rng(12);
  // f64 replica of a routed decode: two experts, fixed assignments
  auto zvar = testutil::random_tensor_f64({6, 3}, rng, 1.0, true, "z");
  auto w0 = testutil::random_tensor_f64({3, 4}, rng, 0.7, true, "w0");
  auto w1 = testutil::random_tensor_f64({3, 4}, rng, 0.7, true, "w1");
  const std::vector<int> idx0 = {0, 2, 4};
  const std::vector<int> idx1 = {1, 3, 5};
  auto build = [&](TapeT<double>* tape) {
    auto z0 = gather_rows(tape, zvar, idx0);
    auto z1 = gather_rows(tape, zvar, idx1);
    auto y0 = sigmoid(tape, matmul(tape, z0, w0));
    auto y1 = sigmoid(tape, matmul(tape, z1, w1));
    auto full = assemble_rows(tape, {y0, y1}, {idx0, idx1}, 6);
    return mean_all(tape, square(tape, full));
  };
  CHECK(testutil::check_gradients({zvar, w0, w1}, build).failed == 0);
}
