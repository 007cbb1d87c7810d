#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ffsv/cgmm_mvdr.hpp"
#include "ffsv/network.hpp"
#include "ffsv/room_sim.hpp"
#include "ffsv/scoring.hpp"
#include "ffsv/stft.hpp"
#include "ffsv/train.hpp"
#include "ffsv/vad.hpp"
#include "ffsv/wpe.hpp"

namespace ffsv {

/// Synthetic devset knobs for the ablation experiment.
struct AblateConfig {
  int speakers = 5;
  int train_utts = 6;    // per speaker, close-talk; far-field copies added
  int enroll_utts = 2;   // per speaker
  int test_utts = 3;     // per speaker, far-field
  double utt_seconds = 1.1;
  double snr_db = 0.0;        // test-side far-field mixtures
  double train_snr_db = 10.0; // far-field copies used for training
  int sample_rate = 8000;
};

struct TuneConfig {
  std::vector<double> thetas{0.5, 0.6, 0.7, 0.8};
  int rir_candidates = 3;
  int speakers = 4;
  int pairs_per_speaker = 2;
};

struct PipelineConfig {
  // paths
  std::string checkpoint;
  std::string trials;
  std::string wav_map;
  std::string manifest;
  std::string out_dir = ".";

  // stage toggles (the ablation grid axes)
  bool wpe_enabled = false;
  bool beamformer_enabled = false;
  bool selection_enabled = false;
  bool dat_enabled = false;

  StftConfig stft;
  WpeConfig wpe;
  CgmmConfig cgmm;
  MicroNetConfig net;
  TrainConfig train;
  int dat_epochs = 10;
  double dat_learning_rate = 0.02;  // fine-tune step for the DAT stage
  SelectionPolicy selection;
  DcfParams dcf;
  VadConfig vad;
  RoomRanges room;
  int simulate_rooms = 40;
  int rirs_per_room = 5;
  AblateConfig ablate;
  TuneConfig tune;

  std::uint64_t seed = 0;
  int workers = 1;
};

// Line-oriented "section.key = value" text; '#' comments; unknown keys are
// errors. Missing file is an error; empty path yields defaults.
PipelineConfig load_config(const std::string& path);
void apply_config_line(PipelineConfig& cfg, const std::string& line, int lineno);

}  // namespace ffsv
