#pragma once

#include <string>
#include <vector>

#include "ffsv/waveform.hpp"

namespace ffsv {

/// Row-major frames x coefficients matrix.
struct FeatureMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  FeatureMatrix() = default;
  FeatureMatrix(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {}
  double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
};

struct MfccConfig {
  double frame_ms = 25.0;
  double hop_ms = 10.0;
  int num_filters = 30;
  int num_coeffs = 30;
  double preemphasis = 0.97;
  double low_freq = 20.0;
  double high_freq_offset = 100.0;  // mel bank upper edge = nyquist - offset
  double log_floor = 1e-10;
};

int frame_length_samples(double ms, int sample_rate);
int frame_count(std::size_t num_samples, int frame_length, int hop_length);

// Mel filterbank cepstra: pre-emphasis, periodic Hamming window, power
// spectrum, triangular mel bank, floored log, orthonormal DCT-II.
FeatureMatrix mfcc(const Waveform& w, const MfccConfig& cfg);

// Binary feature container: magic "FFSV", u32 rows, u32 cols, then row-major
// float32 little-endian data.
void write_features(const FeatureMatrix& f, const std::string& path);
FeatureMatrix read_features(const std::string& path);

}  // namespace ffsv
