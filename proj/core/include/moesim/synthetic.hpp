#pragma once

#include <cstdint>
#include <string>

#include "moesim/data.hpp"

namespace moesim {

// k isotropic unit-variance Gaussian blobs in d dimensions, centers placed
// `separation` apart along distinct axes (requires d >= k), features min-max
// scaled into [0,1]. Labels are the blob ids.
Dataset make_blobs(int64_t n, int64_t d, int k, double separation, uint64_t seed);

// Procedural 28x28 digit-like glyphs (seven-segment strokes with positional
// jitter, intensity variation, and pixel noise), written as an IDX image /
// label file pair. Deterministic for a fixed seed.
void write_digit_idx(const std::string& images_path, const std::string& labels_path,
                     int64_t n, uint64_t seed);

// Same corpus, loaded directly.
Dataset make_digits(int64_t n, uint64_t seed);

// Synthetic cytometry panel: `n` cells from 8 populations over 15 markers
// with uneven abundances, stored as raw (pre-arcsinh) positive intensities in
// a header CSV with a trailing "population" label column. Load with
// arcsinh_cofactor = 5.
void write_cytof_csv(const std::string& path, int64_t n, uint64_t seed);

}  // namespace moesim
