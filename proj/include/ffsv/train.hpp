#pragma once

#include <cstdint>
#include <vector>

#include "ffsv/features.hpp"
#include "ffsv/network.hpp"

namespace ffsv {

struct TrainConfig {
  int batch_size = 64;
  double learning_rate = 0.1;
  double lr_decay = 0.1;  // multiplied in every decay_every epochs
  int decay_every = 5;
  int epochs = 20;
  int crop_frames = 256;
  double dat_lambda = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainExample {
  FeatureMatrix features;
  int speaker = 0;
  int domain = 0;
};

struct EpochStats {
  double speaker_loss = 0.0;
  double domain_loss = 0.0;
  double speaker_accuracy = 0.0;
};

// Random temporal crop of crop_frames rows; short utterances tile cyclically.
FeatureMatrix random_crop(const FeatureMatrix& f, int crop_frames, Rng& rng);

// Center crop; short utterances tile cyclically from the start.
FeatureMatrix center_crop(const FeatureMatrix& f, int crop_frames);

// Plain SGD with the step schedule. dat_stage adds the domain head loss with
// gradient reversal at dat_lambda; the speaker-only stage is dat_stage=false.
std::vector<EpochStats> train(MicroNet& net, const std::vector<TrainExample>& data,
                              const TrainConfig& cfg, bool dat_stage);

}  // namespace ffsv
