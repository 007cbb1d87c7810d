#include "ffsv/vad.hpp"

#include <cmath>

#include "ffsv/error.hpp"

namespace ffsv {

int VadMask::popcount() const {
  int n = 0;
  for (bool b : speech) n += b ? 1 : 0;
  return n;
}

VadMask energy_vad(const Waveform& w, const VadConfig& cfg) {
  w.validate();
  if (w.num_channels() != 1) throw Error("energy_vad: input must be mono");

  const int frame_len = frame_length_samples(cfg.frame_ms, w.sample_rate);
  const int hop = frame_length_samples(cfg.hop_ms, w.sample_rate);
  const int frames = frame_count(w.num_samples(), frame_len, hop);
  if (frames == 0) throw Error("energy_vad: input shorter than one frame");

  const auto& x = w.channels[0];
  std::vector<double> log_energy(static_cast<std::size_t>(frames));
  double mean = 0.0;
  for (int t = 0; t < frames; ++t) {
    double e = 0.0;
    for (int n = 0; n < frame_len; ++n) {
      double s = x[static_cast<std::size_t>(t * hop + n)];
      e += s * s;
    }
    log_energy[static_cast<std::size_t>(t)] = std::log(std::max(e, cfg.energy_floor));
    mean += log_energy[static_cast<std::size_t>(t)];
  }
  mean /= frames;

  VadMask m;
  m.speech.resize(static_cast<std::size_t>(frames));
  const double threshold = mean + cfg.offset;
  for (int t = 0; t < frames; ++t)
    m.speech[static_cast<std::size_t>(t)] = log_energy[static_cast<std::size_t>(t)] >= threshold;
  return m;
}

FeatureMatrix apply_vad(const FeatureMatrix& f, const VadMask& m) {
  if (f.rows != m.size())
    throw Error("apply_vad: mask length " + std::to_string(m.size()) +
                " does not match frame count " + std::to_string(f.rows));
  const int kept = m.popcount();
  if (kept == 0) throw Error("apply_vad: no speech frames");
  FeatureMatrix out(kept, f.cols);
  int r = 0;
  for (int t = 0; t < f.rows; ++t) {
    if (!m.speech[static_cast<std::size_t>(t)]) continue;
    for (int c = 0; c < f.cols; ++c) out.at(r, c) = f.at(t, c);
    ++r;
  }
  return out;
}

}  // namespace ffsv
