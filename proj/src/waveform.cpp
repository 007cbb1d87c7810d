#include "ffsv/waveform.hpp"

#include <cmath>

#include "ffsv/error.hpp"

namespace ffsv {

void Waveform::validate() const {
  if (sample_rate <= 0) throw Error("waveform: sample_rate must be positive");
  if (channels.empty()) throw Error("waveform: no channels");
  const std::size_t len = channels.front().size();
  for (const auto& ch : channels) {
    if (ch.size() != len) throw Error("waveform: channel lengths differ");
    for (double s : ch) {
      if (!std::isfinite(s)) throw Error("waveform: non-finite sample");
    }
  }
}

Waveform make_mono(std::vector<double> samples, int sample_rate) {
  Waveform w;
  w.sample_rate = sample_rate;
  w.channels.push_back(std::move(samples));
  return w;
}

Waveform to_mono(const Waveform& w, int channel_index) {
  if (channel_index < 0 || channel_index >= w.num_channels()) {
    throw Error("to_mono: channel index " + std::to_string(channel_index) +
                " out of range for " + std::to_string(w.num_channels()) +
                " channels");
  }
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.channels.push_back(w.channels[channel_index]);
  return out;
}

}  // namespace ffsv
