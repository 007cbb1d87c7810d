#include "ffsv/embedder.hpp"

#include "ffsv/error.hpp"
#include "ffsv/train.hpp"

namespace ffsv {

FeatureMatrix speech_features(const Waveform& mono, const EmbedderConfig& cfg) {
  mono.validate();
  if (mono.num_channels() != 1) throw Error("speech_features: input must be mono");
  double power = 0.0;
  for (double s : mono.channels[0]) power += s * s;
  // digital silence keeps every frame under the VAD tie rule; report it here
  if (power <= 0.0) throw Error("no speech detected: silent input");
  FeatureMatrix feats = mfcc(mono, cfg.mfcc);
  VadMask mask = energy_vad(mono, cfg.vad);
  return apply_vad(feats, mask);
}

std::vector<double> extract_embedding(const Waveform& mono, MicroNet& net,
                                      const EmbedderConfig& cfg) {
  FeatureMatrix feats = speech_features(mono, cfg);
  if (feats.cols != net.config().input_coeffs)
    throw Error("extract_embedding: feature dimension mismatch");
  FeatureMatrix crop = center_crop(feats, net.config().input_frames);

  Tensor x(1, 1, crop.rows, crop.cols);
  for (int r = 0; r < crop.rows; ++r)
    for (int c = 0; c < crop.cols; ++c) x.at(0, 0, r, c) = crop.at(r, c);

  auto out = net.forward(x, /*training=*/false);
  std::vector<double> embedding(static_cast<std::size_t>(out.embedding.c));
  for (int i = 0; i < out.embedding.c; ++i) embedding[static_cast<std::size_t>(i)] = out.embedding.at(0, i);
  return embedding;
}

}  // namespace ffsv
