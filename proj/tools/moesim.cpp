// moesim: train / evaluate / generate / embed for the mixture-of-experts
// similarity VAE. See README.md for the config file surface.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "moesim/checkpoint.hpp"
#include "moesim/metrics.hpp"
#include "moesim/runconfig.hpp"
#include "moesim/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out;
  int64_t seed = -1;  // -1 = keep config seed
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required) {
  auto* opt = cmd->add_option("--config", args.config_path,
                              "Key-value config file (see README)");
  if (config_required) opt->required();
  cmd->add_option("--set", args.overrides,
                  "Override a config key, e.g. --set model.num_experts=10")
      ->take_all();
  cmd->add_option("--out", args.out, "Output path (defaults under $MOESIM_OUT_DIR)");
  cmd->add_option("--seed", args.seed, "Override the config seed");
}

moesim::RunConfig resolve_config(const CommonArgs& args) {
  moesim::RunConfig config;
  if (!args.config_path.empty()) config = moesim::load_config_file(args.config_path);
  moesim::apply_overrides(config, args.overrides);
  if (args.seed >= 0) config.train.seed = static_cast<uint64_t>(args.seed);
  return config;
}

fs::path resolve_out_dir(const std::string& out) {
  if (!out.empty()) return fs::path(out);
  if (const char* env = std::getenv(moesim::kOutDirEnvVar)) return fs::path(env);
  return fs::path(".");
}

std::vector<moesim::DatasetFingerprint> dataset_fingerprints(
    const moesim::DataConfig& data, const moesim::Dataset& ds) {
  std::vector<moesim::DatasetFingerprint> out;
  if (data.format == "idx") {
    out.push_back(moesim::fingerprint_dataset(data.images, ds.n, ds.d));
    if (!data.labels.empty())
      out.push_back(moesim::fingerprint_dataset(data.labels, ds.n, 1));
  } else {
    out.push_back(moesim::fingerprint_dataset(data.path, ds.n, ds.d));
  }
  return out;
}

int cmd_train(const CommonArgs& args) {
  const auto config = resolve_config(args);
  const fs::path out_dir = resolve_out_dir(args.out);
  fs::create_directories(out_dir);

  const auto dataset = moesim::load_dataset(config.data);

  moesim::RunManifest manifest;
  manifest.command = "train";
  manifest.seed = config.train.seed;
  manifest.config = moesim::materialize(config);
  manifest.datasets = dataset_fingerprints(config.data, dataset);
  const auto checkpoint_path = out_dir / "checkpoint.bin";
  const auto log_path = out_dir / "train_log.jsonl";
  const auto manifest_path = out_dir / "manifest.json";
  manifest.outputs = {{"checkpoint", checkpoint_path.string()},
                      {"train_log", log_path.string()},
                      {"manifest", manifest_path.string()}};
  moesim::write_manifest(manifest_path.string(), manifest);

  moesim::FitOutputs outputs;
  outputs.checkpoint_path = checkpoint_path.string();
  outputs.log_path = log_path.string();
  const auto result = moesim::fit(dataset, config.train, outputs);

  const auto& final_eval = result.log.evals.empty()
                               ? moesim::MetricSnapshot{}
                               : result.log.evals.back().metrics;
  std::cout << "train: " << dataset.n << " samples, "
            << result.log.steps.size() << " steps";
  if (final_eval.nmi) std::cout << ", nmi=" << *final_eval.nmi;
  if (final_eval.acc) std::cout << ", acc=" << *final_eval.acc;
  std::cout << "\ncheckpoint: " << checkpoint_path.string() << std::endl;
  return 0;
}

int cmd_evaluate(const CommonArgs& args, const std::string& checkpoint_path) {
  const auto config = resolve_config(args);
  const auto ckpt = moesim::load_checkpoint(checkpoint_path);
  const auto model = moesim::model_from_checkpoint(ckpt);

  const moesim::ScalingStats* reuse =
      (config.data.format == "csv" && ckpt.scaling) ? &*ckpt.scaling : nullptr;
  const auto dataset = moesim::load_dataset(config.data, reuse);

  fs::path out_path = args.out.empty()
                          ? resolve_out_dir("") / "metrics.json"
                          : fs::path(args.out);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());

  moesim::RunManifest manifest;
  manifest.command = "evaluate";
  manifest.seed = config.train.seed;
  manifest.config = moesim::materialize(config);
  manifest.datasets = dataset_fingerprints(config.data, dataset);
  const auto manifest_path = out_path.string() + ".manifest.json";
  const auto mmd_path = out_path.string() + ".mmd.csv";
  manifest.outputs = {{"metrics", out_path.string()},
                      {"mmd_report", mmd_path},
                      {"checkpoint", checkpoint_path}};
  moesim::write_manifest(manifest_path, manifest);

  const auto snapshot = moesim::evaluate(model, dataset);
  const auto embedding = moesim::embed_dataset(model, dataset);
  const auto report = moesim::cluster_separation_report(
      embedding.z, dataset.n, model.config().latent_dim, embedding.assignments,
      /*bandwidth_override=*/0.0, config.train.seed);

  json j;
  j["n"] = snapshot.n;
  j["nmi"] = snapshot.nmi ? json(*snapshot.nmi) : json(nullptr);
  j["acc"] = snapshot.acc ? json(*snapshot.acc) : json(nullptr);
  j["f_measure"] = snapshot.f_measure ? json(*snapshot.f_measure) : json(nullptr);
  j["cluster_sizes"] = snapshot.cluster_sizes;
  j["mmd_bandwidth"] = report.bandwidth;
  j["mmd_cluster_ids"] = report.cluster_ids;
  j["mmd_stats"] = report.stats;
  j["mmd_skipped"] = report.skipped;
  {
    std::ofstream out(out_path);
    if (!out) throw moesim::FormatError("cannot open '" + out_path.string() + "'");
    out << j.dump(2) << "\n";
  }
  {
    std::ofstream out(mmd_path);
    if (!out) throw moesim::FormatError("cannot open '" + mmd_path + "'");
    out << report.to_csv();
  }

  std::cout << "evaluate: n=" << snapshot.n;
  if (snapshot.nmi) std::cout << " nmi=" << *snapshot.nmi;
  if (snapshot.acc) std::cout << " acc=" << *snapshot.acc;
  if (snapshot.f_measure) std::cout << " f=" << *snapshot.f_measure;
  std::cout << " -> " << out_path.string() << std::endl;
  return 0;
}

int cmd_generate(const std::string& checkpoint_path, const std::string& cluster_arg,
                 int64_t n, const CommonArgs& args) {
  if (n < 1) throw moesim::ParameterError("generate: --n must be >= 1");
  const auto ckpt = moesim::load_checkpoint(checkpoint_path);
  const auto model = moesim::model_from_checkpoint(ckpt);
  const int k = model.config().num_experts;
  const uint64_t seed = args.seed >= 0 ? static_cast<uint64_t>(args.seed) : 0;

  std::vector<int> clusters;
  if (cluster_arg == "all") {
    for (int c = 0; c < k; ++c) clusters.push_back(c);
  } else {
    size_t pos = 0;
    int c = -1;
    try {
      c = std::stoi(cluster_arg, &pos);
    } catch (const std::exception&) {
      pos = std::string::npos;
    }
    if (pos != cluster_arg.size())
      throw moesim::ParameterError("generate: --cluster expects an index or 'all'");
    if (c < 0 || c >= k)
      throw moesim::ParameterError("generate: cluster " + std::to_string(c) +
                                   " out of range [0," + std::to_string(k) + ")");
    clusters.push_back(c);
  }

  const bool image_data = model.config().image_rows > 0 && model.config().image_cols > 0;
  const fs::path out_base = args.out.empty()
                                ? resolve_out_dir("") / "generated"
                                : fs::path(args.out);
  const fs::path out_dir =
      clusters.size() > 1 ? out_base : out_base.parent_path().empty()
                                           ? fs::path(".")
                                           : out_base.parent_path();
  fs::create_directories(clusters.size() > 1 ? out_base : out_dir);

  json summary;
  summary["per_cluster"] = json::array();
  double acc_sum = 0.0;
  std::vector<std::string> written;
  for (int c : clusters) {
    const auto samples = model.generate(c, n, moesim::mix_seed(seed, c));
    // self-classification of the generated batch
    auto z = model.encode(nullptr, samples);
    auto p = model.cluster_probs(nullptr, z, false);
    const auto routed = moesim::Model::gate(p);
    int64_t hits = 0;
    for (int a : routed)
      if (a == c) ++hits;
    const double acc = static_cast<double>(hits) / static_cast<double>(n);
    acc_sum += acc;

    fs::path sample_path;
    if (clusters.size() > 1) {
      sample_path = out_base / ("gen_k" + std::to_string(c) +
                                (image_data ? ".pgm" : ".csv"));
    } else {
      sample_path = out_base;
      if (!sample_path.has_extension())
        sample_path += image_data ? ".pgm" : ".csv";
    }
    if (image_data) {
      moesim::write_pgm_grid(sample_path.string(), samples->data.data(), n,
                             model.config().image_rows, model.config().image_cols);
    } else {
      std::ofstream out(sample_path);
      if (!out)
        throw moesim::FormatError("cannot open '" + sample_path.string() + "'");
      out.precision(9);
      for (int64_t i = 0; i < samples->rows(); ++i) {
        for (int64_t j = 0; j < samples->cols(); ++j)
          out << (j ? "," : "") << samples->data[i * samples->cols() + j];
        out << "\n";
      }
    }
    written.push_back(sample_path.string());
    summary["per_cluster"].push_back({{"cluster", c},
                                      {"n", n},
                                      {"self_classification_accuracy", acc},
                                      {"output", sample_path.string()}});
  }
  summary["mean_self_classification_accuracy"] = acc_sum / clusters.size();
  summary["seed"] = seed;

  const fs::path summary_path =
      (clusters.size() > 1 ? out_base / "summary.json"
                           : fs::path(written.front() + ".summary.json"));
  {
    std::ofstream out(summary_path);
    if (!out) throw moesim::FormatError("cannot open '" + summary_path.string() + "'");
    out << summary.dump(2) << "\n";
  }
  std::cout << "generate: mean self-classification accuracy "
            << summary["mean_self_classification_accuracy"] << " -> "
            << (clusters.size() > 1 ? out_base.string() : written.front())
            << std::endl;
  return 0;
}

int cmd_embed(const CommonArgs& args, const std::string& checkpoint_path) {
  const auto config = resolve_config(args);
  const auto ckpt = moesim::load_checkpoint(checkpoint_path);
  const auto model = moesim::model_from_checkpoint(ckpt);
  const moesim::ScalingStats* reuse =
      (config.data.format == "csv" && ckpt.scaling) ? &*ckpt.scaling : nullptr;
  const auto dataset = moesim::load_dataset(config.data, reuse);

  fs::path out_path = args.out.empty() ? resolve_out_dir("") / "embedding.csv"
                                       : fs::path(args.out);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());

  const auto rec = moesim::embed_dataset(model, dataset);
  const int latent = model.config().latent_dim;
  std::ofstream out(out_path);
  if (!out) throw moesim::FormatError("cannot open '" + out_path.string() + "'");
  out << "index";
  for (int j = 0; j < latent; ++j) out << ",z" << j;
  out << ",cluster,max_probability\n";
  out.precision(9);
  for (int64_t i = 0; i < dataset.n; ++i) {
    out << i;
    for (int j = 0; j < latent; ++j) out << "," << rec.z[i * latent + j];
    out << "," << rec.assignments[i] << "," << rec.confidence[i] << "\n";
  }
  std::cout << "embed: " << dataset.n << " rows -> " << out_path.string() << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Similarity-guided deep clustering and per-mode generation"};
  app.require_subcommand(1);

  CommonArgs train_args, eval_args, gen_args, embed_args;
  std::string eval_checkpoint, gen_checkpoint, embed_checkpoint;
  std::string gen_cluster = "all";
  int64_t gen_n = 16;

  auto* train = app.add_subcommand("train", "Train a model from a config file");
  add_common(train, train_args, /*config_required=*/true);

  auto* evaluate = app.add_subcommand("evaluate", "Compute metrics for a checkpoint");
  add_common(evaluate, eval_args, /*config_required=*/true);
  evaluate->add_option("--checkpoint", eval_checkpoint)->required();

  auto* generate = app.add_subcommand("generate", "Sample data from trained experts");
  add_common(generate, gen_args, /*config_required=*/false);
  generate->add_option("--checkpoint", gen_checkpoint)->required();
  generate->add_option("--cluster", gen_cluster, "Cluster index or 'all'");
  generate->add_option("--n", gen_n, "Samples per cluster");

  auto* embed = app.add_subcommand("embed", "Export latent codes as CSV");
  add_common(embed, embed_args, /*config_required=*/true);
  embed->add_option("--checkpoint", embed_checkpoint)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(train_args);
    if (evaluate->parsed()) return cmd_evaluate(eval_args, eval_checkpoint);
    if (generate->parsed())
      return cmd_generate(gen_checkpoint, gen_cluster, gen_n, gen_args);
    if (embed->parsed()) return cmd_embed(embed_args, embed_checkpoint);
  } catch (const moesim::Error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
  return 0;
}
