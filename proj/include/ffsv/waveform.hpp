#pragma once

#include <cstddef>
#include <vector>

namespace ffsv {

/// Time-domain multichannel audio. Samples are in [-1, 1] by convention
/// (enforced only at the PCM encoding boundary).
struct Waveform {
  std::vector<std::vector<double>> channels;
  int sample_rate = 0;

  int num_channels() const { return static_cast<int>(channels.size()); }
  std::size_t num_samples() const {
    return channels.empty() ? 0 : channels.front().size();
  }

  // Throws Error unless all channels have equal length, sample_rate > 0 and
  // every sample is finite.
  void validate() const;
};

Waveform make_mono(std::vector<double> samples, int sample_rate);

// Select one channel. Throws on out-of-range index.
Waveform to_mono(const Waveform& w, int channel_index);

}  // namespace ffsv
