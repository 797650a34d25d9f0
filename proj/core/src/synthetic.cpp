#include "moesim/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace moesim {

Dataset make_blobs(int64_t n, int64_t d, int k, double separation, uint64_t seed) {
  if (d < k)
    throw ParameterError("make_blobs: need d >= k to place axis-aligned centers");
  if (n < k) throw ParameterError("make_blobs: need at least one sample per blob");
  Rng rng(seed);
  Dataset ds;
  ds.n = n;
  ds.d = d;
  ds.features.resize(static_cast<size_t>(n) * d);
  ds.labels.resize(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const int blob = static_cast<int>(rng.below(static_cast<uint64_t>(k)));
    ds.labels[i] = blob;
    for (int64_t j = 0; j < d; ++j) {
      const double center = (j == blob) ? separation : 0.0;
      ds.features[i * d + j] = static_cast<float>(center + rng.normal());
    }
  }
  ds.scaling = fit_minmax(ds.features, n, d);
  apply_minmax(ds.features, n, d, *ds.scaling);
  return ds;
}

namespace {

struct Stroke {
  float x0, y0, x1, y1;
};

// Seven-segment endpoints on a unit box: (0,0) top-left .. (1,1) bottom-right.
const Stroke kSegments[7] = {
    {0.1f, 0.0f, 0.9f, 0.0f},  // top
    {0.0f, 0.1f, 0.0f, 0.45f},  // top-left
    {1.0f, 0.1f, 1.0f, 0.45f},  // top-right
    {0.1f, 0.5f, 0.9f, 0.5f},  // middle
    {0.0f, 0.55f, 0.0f, 0.9f},  // bottom-left
    {1.0f, 0.55f, 1.0f, 0.9f},  // bottom-right
    {0.1f, 1.0f, 0.9f, 1.0f},  // bottom
};

const uint8_t kDigitSegments[10] = {
    0b1110111,  // 0: top tl tr bl br bottom
    0b0100100,  // 1: tr br
    0b1101011,  // 2
    0b1101101,  // 3
    0b0111100,  // 4
    0b1011101,  // 5
    0b1011111,  // 6
    0b1100100,  // 7
    0b1111111,  // 8
    0b1111101,  // 9
};

float point_segment_dist(float px, float py, const Stroke& s) {
  const float vx = s.x1 - s.x0, vy = s.y1 - s.y0;
  const float wx = px - s.x0, wy = py - s.y0;
  const float len_sq = vx * vx + vy * vy;
  float t = len_sq > 0.0f ? (wx * vx + wy * vy) / len_sq : 0.0f;
  t = std::min(1.0f, std::max(0.0f, t));
  const float dx = px - (s.x0 + t * vx), dy = py - (s.y0 + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

// Rasterizes one glyph into a 28x28 [0,1] patch. Jitter is kept small
// relative to the stroke width so raw-pixel nearest neighbors stay
// class-pure, as they are for handwritten digit scans.
void render_digit(int digit, Rng& rng, float* out) {
  const float box = 15.0f;  // glyph box in pixels
  const float ox = 6.5f + static_cast<float>(rng.uniform() * 1.2 - 0.6);
  const float oy = 6.0f + static_cast<float>(rng.uniform() * 1.2 - 0.6);
  const float sx = box * (1.0f + static_cast<float>(rng.uniform() * 0.08 - 0.04));
  const float sy = box * (1.0f + static_cast<float>(rng.uniform() * 0.08 - 0.04));
  const float stroke_w = 2.4f + static_cast<float>(rng.uniform() * 0.3);
  const float intensity = 0.85f + static_cast<float>(rng.uniform() * 0.15);

  Stroke strokes[7];
  int n_strokes = 0;
  for (int s = 0; s < 7; ++s) {
    if (!(kDigitSegments[digit] & (1 << s))) continue;
    Stroke st = kSegments[s];
    // per-segment endpoint jitter
    st.x0 = ox + sx * st.x0 + static_cast<float>(rng.uniform() * 0.5 - 0.25);
    st.y0 = oy + sy * st.y0 + static_cast<float>(rng.uniform() * 0.5 - 0.25);
    st.x1 = ox + sx * st.x1 + static_cast<float>(rng.uniform() * 0.5 - 0.25);
    st.y1 = oy + sy * st.y1 + static_cast<float>(rng.uniform() * 0.5 - 0.25);
    strokes[n_strokes++] = st;
  }

  for (int r = 0; r < 28; ++r) {
    for (int c = 0; c < 28; ++c) {
      float best = 1e9f;
      for (int s = 0; s < n_strokes; ++s)
        best = std::min(best, point_segment_dist(static_cast<float>(c),
                                                 static_cast<float>(r), strokes[s]));
      // soft-edged stroke
      float v = 0.0f;
      if (best < stroke_w)
        v = intensity * std::min(1.0f, (stroke_w - best) / 1.1f);
      v += static_cast<float>(rng.normal() * 0.015);
      out[r * 28 + c] = std::min(1.0f, std::max(0.0f, v));
    }
  }
}

void put_be32(std::ofstream& out, uint32_t v) {
  const uint8_t bytes[4] = {static_cast<uint8_t>(v >> 24), static_cast<uint8_t>(v >> 16),
                            static_cast<uint8_t>(v >> 8), static_cast<uint8_t>(v)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

}  // namespace

void write_digit_idx(const std::string& images_path, const std::string& labels_path,
                     int64_t n, uint64_t seed) {
  Rng rng(seed);
  std::ofstream images(images_path, std::ios::binary | std::ios::trunc);
  std::ofstream labels(labels_path, std::ios::binary | std::ios::trunc);
  if (!images || !labels)
    throw FormatError("cannot open digit corpus outputs for writing");
  put_be32(images, 0x00000803);
  put_be32(images, static_cast<uint32_t>(n));
  put_be32(images, 28);
  put_be32(images, 28);
  put_be32(labels, 0x00000801);
  put_be32(labels, static_cast<uint32_t>(n));

  std::vector<float> patch(28 * 28);
  std::vector<uint8_t> bytes(28 * 28);
  for (int64_t i = 0; i < n; ++i) {
    const int digit = static_cast<int>(rng.below(10));
    render_digit(digit, rng, patch.data());
    for (size_t p = 0; p < patch.size(); ++p)
      bytes[p] = static_cast<uint8_t>(std::lround(255.0f * patch[p]));
    images.write(reinterpret_cast<const char*>(bytes.data()),
                 static_cast<std::streamsize>(bytes.size()));
    const uint8_t lbl = static_cast<uint8_t>(digit);
    labels.write(reinterpret_cast<const char*>(&lbl), 1);
  }
  if (!images || !labels) throw FormatError("failed writing digit corpus");
}

Dataset make_digits(int64_t n, uint64_t seed) {
  Rng rng(seed);
  Dataset ds;
  ds.n = n;
  ds.d = 28 * 28;
  ds.image_rows = ds.image_cols = 28;
  ds.features.resize(static_cast<size_t>(n) * ds.d);
  ds.labels.resize(static_cast<size_t>(n));
  std::vector<float> patch(28 * 28);
  for (int64_t i = 0; i < n; ++i) {
    const int digit = static_cast<int>(rng.below(10));
    ds.labels[i] = digit;
    render_digit(digit, rng, patch.data());
    // quantize exactly like the IDX round trip would
    for (int64_t p = 0; p < ds.d; ++p)
      ds.features[i * ds.d + p] =
          static_cast<float>(std::lround(255.0f * patch[p])) / 255.0f;
  }
  ds.scaling = ScalingStats{std::vector<float>(ds.d, 0.0f),
                            std::vector<float>(ds.d, 255.0f)};
  return ds;
}

void write_cytof_csv(const std::string& path, int64_t n, uint64_t seed) {
  constexpr int kMarkers = 15;
  constexpr int kPopulations = 8;
  Rng rng(seed);

  // Population profiles in arcsinh space: a distinct subset of markers sits
  // high for each population, the rest stay near baseline.
  float profiles[kPopulations][kMarkers];
  Rng profile_rng(mix_seed(seed, 0xC170F));
  for (int p = 0; p < kPopulations; ++p) {
    for (int m = 0; m < kMarkers; ++m) {
      const bool high = ((m + p) % kPopulations) < 3 || ((m * 7 + p * 3) % 11) == 0;
      profiles[p][m] = high ? 4.5f + static_cast<float>(profile_rng.uniform() * 1.5)
                            : 0.4f + static_cast<float>(profile_rng.uniform() * 0.5);
    }
  }
  const double weights[kPopulations] = {0.26, 0.20, 0.15, 0.12, 0.10, 0.08, 0.05, 0.04};

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  for (int m = 0; m < kMarkers; ++m) out << "marker" << (m + 1) << ",";
  out << "population\n";
  out.precision(6);
  for (int64_t i = 0; i < n; ++i) {
    double u = rng.uniform();
    int pop = 0;
    for (; pop < kPopulations - 1; ++pop) {
      u -= weights[pop];
      if (u < 0) break;
    }
    for (int m = 0; m < kMarkers; ++m) {
      const double latent = profiles[pop][m] + rng.normal() * 0.35;
      const double raw = std::sinh(latent) * 5.0;  // arcsinh(raw/5) == latent
      out << raw << ",";
    }
    out << "pop" << pop << "\n";
  }
  if (!out) throw FormatError("failed writing '" + path + "'");
}

}  // namespace moesim
