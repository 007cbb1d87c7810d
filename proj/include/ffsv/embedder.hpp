#pragma once

#include <vector>

#include "ffsv/features.hpp"
#include "ffsv/network.hpp"
#include "ffsv/vad.hpp"
#include "ffsv/waveform.hpp"

namespace ffsv {

struct EmbedderConfig {
  MfccConfig mfcc;
  VadConfig vad;
};

// MFCC -> energy VAD -> center crop to the net's input frames -> forward in
// inference mode. Throws when no speech frames survive the VAD.
std::vector<double> extract_embedding(const Waveform& mono, MicroNet& net,
                                      const EmbedderConfig& cfg);

// Speech features for one utterance (the training-side preparation).
FeatureMatrix speech_features(const Waveform& mono, const EmbedderConfig& cfg);

}  // namespace ffsv
