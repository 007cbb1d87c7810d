#pragma once

#include <complex>
#include <vector>

#include "ffsv/waveform.hpp"

namespace ffsv {

enum class WindowType { hann, hamming };

struct StftConfig {
  int window_length = 512;
  int hop_length = 128;
  WindowType window = WindowType::hann;
  int fft_size = 512;

  // hop <= window, fft a power of two >= window, window COLA at this hop.
  void validate() const;
};

// Periodic (DFT-even) window of the given length.
std::vector<double> make_window(WindowType type, int length);

// Constant-overlap-add check: the shifted window sum over the interior must
// be constant within a relative tolerance.
bool is_cola(const StftConfig& cfg, double tol = 1e-6);

/// Per-channel complex time-frequency grid, bin-major storage:
/// channels[c][f * frames + t]. Bin 0 is DC, bin bins-1 is Nyquist.
struct ComplexSpectrogram {
  std::vector<std::vector<std::complex<double>>> channels;
  int bins = 0;
  int frames = 0;
  StftConfig config;
  int sample_rate = 0;

  int num_channels() const { return static_cast<int>(channels.size()); }
  std::complex<double>& at(int c, int f, int t) {
    return channels[static_cast<std::size_t>(c)]
                   [static_cast<std::size_t>(f) * frames + t];
  }
  const std::complex<double>& at(int c, int f, int t) const {
    return channels[static_cast<std::size_t>(c)]
                   [static_cast<std::size_t>(f) * frames + t];
  }
};

// T = 1 + floor((len - window_length) / hop_length); no padding.
ComplexSpectrogram stft(const Waveform& w, const StftConfig& cfg);

// Overlap-add synthesis normalized by the per-sample shifted window sum.
// Output length is window_length + (frames - 1) * hop_length.
Waveform istft(const ComplexSpectrogram& s);

}  // namespace ffsv
