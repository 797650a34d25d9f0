// moesim-datagen: deterministic synthetic datasets for demos and tests.

#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "moesim/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Synthetic dataset generator"};
  app.require_subcommand(1);

  int64_t n = 2000;
  uint64_t seed = 1;
  std::string out = "blobs.csv";
  int64_t dims = 20;
  int k = 4;
  double separation = 10.0;

  auto* blobs = app.add_subcommand("blobs", "Gaussian blobs as labeled CSV");
  blobs->add_option("--n", n);
  blobs->add_option("--d", dims);
  blobs->add_option("--k", k);
  blobs->add_option("--separation", separation);
  blobs->add_option("--seed", seed);
  blobs->add_option("--out", out);

  std::string images = "digits-images-idx3-ubyte";
  std::string labels = "digits-labels-idx1-ubyte";
  auto* digits = app.add_subcommand("digits", "28x28 glyph corpus as IDX pair");
  digits->add_option("--n", n);
  digits->add_option("--seed", seed);
  digits->add_option("--images", images);
  digits->add_option("--labels", labels);

  auto* cytof = app.add_subcommand("cytof", "15-marker cytometry panel as CSV");
  cytof->add_option("--n", n);
  cytof->add_option("--seed", seed);
  cytof->add_option("--out", out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (blobs->parsed()) {
      const auto ds = moesim::make_blobs(n, dims, k, separation, seed);
      std::ofstream f(out, std::ios::trunc);
      if (!f) throw moesim::FormatError("cannot open '" + out + "'");
      for (int64_t j = 0; j < ds.d; ++j) f << "f" << j << ",";
      f << "label\n";
      f.precision(9);
      for (int64_t i = 0; i < ds.n; ++i) {
        for (int64_t j = 0; j < ds.d; ++j) f << ds.features[i * ds.d + j] << ",";
        f << "c" << ds.labels[i] << "\n";
      }
      std::cout << "wrote " << ds.n << "x" << ds.d << " blobs to " << out << std::endl;
    } else if (digits->parsed()) {
      moesim::write_digit_idx(images, labels, n, seed);
      std::cout << "wrote " << n << " glyphs to " << images << " / " << labels
                << std::endl;
    } else if (cytof->parsed()) {
      moesim::write_cytof_csv(out, n, seed);
      std::cout << "wrote " << n << " cells to " << out << std::endl;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
