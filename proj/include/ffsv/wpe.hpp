#pragma once

#include <vector>

#include "ffsv/stft.hpp"

namespace ffsv {

struct WpeConfig {
  int taps = 10;       // prediction filter length K
  int delay = 3;       // prediction delay D in frames
  int iterations = 3;
  double variance_floor = 1e-8;  // relative to mean bin power

  void validate() const;
};

struct WpeResult {
  ComplexSpectrogram spectrogram;
  // objective[bin][iteration]: weighted prediction-error objective, evaluated
  // after each variance/filter update pair; non-increasing per bin.
  std::vector<std::vector<double>> objective;
  // Frobenius norm of the final prediction filter per bin.
  std::vector<double> filter_norm;
};

// Multichannel offline WPE: per frequency bin, alternate between the
// per-frame variance estimate and the variance-weighted linear-prediction
// solve, subtracting the predicted late reverberation. Shape-preserving.
WpeResult wpe(const ComplexSpectrogram& s, const WpeConfig& cfg);

}  // namespace ffsv
