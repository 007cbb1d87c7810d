#pragma once

#include <vector>

#include "ffsv/features.hpp"
#include "ffsv/waveform.hpp"

namespace ffsv {

struct VadConfig {
  double frame_ms = 25.0;  // must match the feature framing
  double hop_ms = 10.0;
  double offset = -1.0;  // relative to utterance mean log-energy
  double energy_floor = 1e-10;
};

/// Per-frame speech flags; length equals the frame count of the matching
/// feature matrix.
struct VadMask {
  std::vector<bool> speech;

  int size() const { return static_cast<int>(speech.size()); }
  int popcount() const;
};

// Frame is speech iff log-energy >= utterance mean log-energy + offset
// (ties kept as speech).
VadMask energy_vad(const Waveform& w, const VadConfig& cfg);

// Drop rows where the mask is false; throws if nothing is left.
FeatureMatrix apply_vad(const FeatureMatrix& f, const VadMask& m);

}  // namespace ffsv
