#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "moesim/synthetic.hpp"
#include "support/testutil.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
  int exit_code = 0;
  std::string output;
};

RunResult run(const std::string& cmd, const fs::path& capture) {
  const std::string full = cmd + " > " + capture.string() + " 2>&1";
  const int raw = std::system(full.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.output = testutil::read_file_text(capture.string());
  return r;
}

const std::string kCli = MOESIM_CLI_PATH;
const std::string kDatagen = MOESIM_DATAGEN_PATH;

}  // namespace

TEST_CASE("cli end to end on tabular data") {
  testutil::TempDir dir("cli_tab");
  const auto capture = dir / "out.txt";
  const auto data_path = (dir / "blobs.csv").string();

  // datagen writes a labeled CSV
  auto gen = run(kDatagen + " blobs --n 300 --d 8 --k 3 --seed 4 --out " + data_path,
                 capture);
  REQUIRE(gen.exit_code == 0);
  REQUIRE(fs::exists(data_path));

  const auto cfg_path = (dir / "run.cfg").string();
  testutil::write_file_text(cfg_path,
                            "epochs = 80\n"
                            "batch_size = 100\n"
                            "seed = 11\n"
                            "model.latent_dim = 4\n"
                            "model.num_experts = 3\n"
                            "model.encoder_hidden = 24\n"
                            "model.expert_hidden = 24\n"
                            "model.clustering_hidden = 12\n"
                            "similarity.k_neighbors = 8\n"
                            "data.format = csv\n"
                            "data.path = " + data_path + "\n"
                            "data.label_column = label\n");
  const auto out_dir = (dir / "run1").string();

  SUBCASE("train then evaluate, generate, embed") {
    auto train = run(kCli + " train --config " + cfg_path + " --out " + out_dir,
                     capture);
    CHECK(train.exit_code == 0);
    const auto ckpt = out_dir + "/checkpoint.bin";
    CHECK(fs::exists(ckpt));
    CHECK(fs::exists(out_dir + "/train_log.jsonl"));
    REQUIRE(fs::exists(out_dir + "/manifest.json"));

    const auto manifest = json::parse(testutil::read_file_text(out_dir + "/manifest.json"));
    CHECK(manifest["command"] == "train");
    CHECK(manifest["config"]["model.num_experts"] == "3");
    CHECK(manifest["datasets"][0]["rows"] == 300);

    // evaluate writes a parseable record
    const auto metrics_path = (dir / "metrics.json").string();
    auto eval = run(kCli + " evaluate --config " + cfg_path + " --checkpoint " + ckpt +
                        " --out " + metrics_path,
                    capture);
    CHECK(eval.exit_code == 0);
    const auto record = json::parse(testutil::read_file_text(metrics_path));
    CHECK(record["n"] == 300);
    CHECK(record["nmi"].is_number());
    CHECK(record["nmi"].get<double>() > 0.5);
    CHECK(record["cluster_sizes"].size() == 3);
    CHECK(fs::exists(metrics_path + ".mmd.csv"));

    // unlabeled evaluation reports absent metrics, not zeros
    const auto unlabeled_csv = (dir / "unlabeled.csv").string();
    {
      std::stringstream in(testutil::read_file_text(data_path));
      std::ofstream out(unlabeled_csv);
      std::string line;
      while (std::getline(in, line)) out << line.substr(0, line.rfind(',')) << "\n";
    }
    const auto metrics2 = (dir / "metrics2.json").string();
    auto eval2 = run(kCli + " evaluate --config " + cfg_path + " --checkpoint " + ckpt +
                         " --set data.path=" + unlabeled_csv +
                         " --set data.label_column= --out " + metrics2,
                     capture);
    CHECK(eval2.exit_code == 0);
    const auto record2 = json::parse(testutil::read_file_text(metrics2));
    CHECK(record2["nmi"].is_null());

    // generate tabular CSV plus self-classification summary
    const auto gen_path = (dir / "gen.csv").string();
    auto gen_run = run(kCli + " generate --checkpoint " + ckpt +
                           " --cluster 1 --n 20 --seed 5 --out " + gen_path,
                       capture);
    CHECK(gen_run.exit_code == 0);
    CHECK(fs::exists(gen_path));
    const auto summary = json::parse(testutil::read_file_text(gen_path + ".summary.json"));
    CHECK(summary["per_cluster"][0]["cluster"] == 1);
    CHECK(summary["per_cluster"][0]["n"] == 20);

    // embed: one row per sample, cluster in range, confidence in (1/K, 1]
    const auto embed_path = (dir / "embedding.csv").string();
    auto embed = run(kCli + " embed --config " + cfg_path + " --checkpoint " + ckpt +
                         " --out " + embed_path,
                     capture);
    CHECK(embed.exit_code == 0);
    const auto text = testutil::read_file_text(embed_path);
    size_t lines = 0;
    for (char c : text)
      if (c == '\n') ++lines;
    CHECK(lines == 301);  // header + 300 rows
    std::stringstream ss(text);
    std::string line;
    std::getline(ss, line);
    CHECK(line == "index,z0,z1,z2,z3,cluster,max_probability");
    while (std::getline(ss, line)) {
      const auto last_comma = line.rfind(',');
      const auto prev_comma = line.rfind(',', last_comma - 1);
      const int cluster = std::stoi(line.substr(prev_comma + 1, last_comma - prev_comma - 1));
      const double conf = std::stod(line.substr(last_comma + 1));
      CHECK(cluster >= 0);
      CHECK(cluster < 3);
      CHECK(conf > 1.0 / 3.0);
      CHECK(conf <= 1.0);
    }
  }

  SUBCASE("config typo is a named fatal error") {
    const auto bad_cfg = (dir / "bad.cfg").string();
    testutil::write_file_text(bad_cfg, "model.latent_dmi = 10\n");
    auto r = run(kCli + " train --config " + bad_cfg + " --out " + out_dir, capture);
    CHECK(r.exit_code != 0);
    CHECK(r.output.find("latent_dmi") != std::string::npos);
  }
  SUBCASE("missing dataset is a fatal I/O error") {
    const auto bad_cfg = (dir / "bad2.cfg").string();
    testutil::write_file_text(bad_cfg, "data.format = csv\ndata.path = /nope.csv\n");
    auto r = run(kCli + " train --config " + bad_cfg + " --out " + out_dir, capture);
    CHECK(r.exit_code != 0);
  }
  SUBCASE("--set override lands in the manifest") {
    auto r = run(kCli + " train --config " + cfg_path +
                     " --set model.num_experts=4 --set epochs=1 --out " + out_dir,
                 capture);
    CHECK(r.exit_code == 0);
    const auto manifest = json::parse(testutil::read_file_text(out_dir + "/manifest.json"));
    CHECK(manifest["config"]["model.num_experts"] == "4");
    CHECK(manifest["config"]["epochs"] == "1");
  }
}

TEST_CASE("cli image pathway produces deterministic pgm grids") {
  testutil::TempDir dir("cli_img");
  const auto capture = dir / "out.txt";
  const auto images = (dir / "img-idx3-ubyte").string();
  const auto labels = (dir / "lbl-idx1-ubyte").string();
  moesim::write_digit_idx(images, labels, 300, 21);

  const auto cfg_path = (dir / "run.cfg").string();
  testutil::write_file_text(cfg_path,
                            "epochs = 2\n"
                            "batch_size = 100\n"
                            "seed = 2\n"
                            "model.latent_dim = 6\n"
                            "model.num_experts = 4\n"
                            "model.encoder_hidden = 32\n"
                            "model.expert_hidden = 32\n"
                            "model.clustering_hidden = 16\n"
                            "similarity.k_neighbors = 8\n"
                            "data.format = idx\n"
                            "data.images = " + images + "\n"
                            "data.labels = " + labels + "\n");
  const auto out_dir = (dir / "run").string();
  auto train = run(kCli + " train --config " + cfg_path + " --out " + out_dir, capture);
  REQUIRE(train.exit_code == 0);
  const auto ckpt = out_dir + "/checkpoint.bin";

  // n=16 -> 4x4 tiles of 28x28
  const auto grid = (dir / "grid.pgm").string();
  auto gen = run(kCli + " generate --checkpoint " + ckpt +
                     " --cluster 0 --n 16 --seed 9 --out " + grid,
                 capture);
  CHECK(gen.exit_code == 0);
  const auto pgm = testutil::read_file_text(grid);
  CHECK(pgm.rfind("P5\n112 112\n255\n", 0) == 0);

  // byte-identical across same-seed runs
  const auto grid2 = (dir / "grid2.pgm").string();
  run(kCli + " generate --checkpoint " + ckpt +
          " --cluster 0 --n 16 --seed 9 --out " + grid2,
      capture);
  CHECK(pgm == testutil::read_file_text(grid2));

  // cluster fan-out writes one grid per expert plus a summary
  const auto all_dir = (dir / "all").string();
  auto all = run(kCli + " generate --checkpoint " + ckpt +
                     " --cluster all --n 4 --seed 1 --out " + all_dir,
                 capture);
  CHECK(all.exit_code == 0);
  for (int c = 0; c < 4; ++c)
    CHECK(fs::exists(all_dir + "/gen_k" + std::to_string(c) + ".pgm"));
  CHECK(fs::exists(all_dir + "/summary.json"));

  // out-of-range cluster index fails
  auto bad = run(kCli + " generate --checkpoint " + ckpt + " --cluster 9 --n 4 --out " +
                     (dir / "x.pgm").string(),
                 capture);
  CHECK(bad.exit_code != 0);

  SUBCASE("env var provides the default output directory") {
    const auto env_dir = (dir / "envout").string();
    auto r = run("MOESIM_OUT_DIR=" + env_dir + " " + kCli + " generate --checkpoint " +
                     ckpt + " --cluster 0 --n 4 --seed 3",
                 capture);
    CHECK(r.exit_code == 0);
    CHECK(fs::exists(env_dir + "/generated.pgm"));
  }
}
