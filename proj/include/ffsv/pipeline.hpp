#pragma once

#include <string>
#include <vector>

#include "ffsv/config.hpp"
#include "ffsv/scoring.hpp"
#include "ffsv/train.hpp"
#include "ffsv/waveform.hpp"

namespace ffsv {

// Front-end chain for one utterance per the stage toggles: STFT -> optional
// WPE -> optional CGMM-MVDR -> iSTFT. With both stages off this is an exact
// channel-0 passthrough (no transform round trip).
Waveform enhance_waveform(const Waveform& w, const PipelineConfig& cfg);

struct EnhanceResult {
  int processed = 0;
  int failed = 0;
  std::vector<std::string> log_lines;  // "<id>\t<score>\t<decision>"
};

EnhanceResult cmd_enhance(const PipelineConfig& cfg,
                          const std::vector<std::string>& wav_paths);

// Writes RIR wavs plus room-config text files into out_dir.
void cmd_simulate(const PipelineConfig& cfg);

struct TrainCmdResult {
  std::string checkpoint_path;
  std::vector<EpochStats> stage1;
  std::vector<EpochStats> stage2;
};

TrainCmdResult cmd_train(const PipelineConfig& cfg);

struct ScoreCmdResult {
  std::vector<ScoredTrial> scored;
  int excluded = 0;
  bool labeled = false;
  EerResult eer;
  DcfResult dcf;
  std::string report;
};

ScoreCmdResult cmd_score(const PipelineConfig& cfg);

struct AblateRow {
  bool wpe = false, beamformer = false, dat = false, selection = false;
  double eer = 0.0, min_dcf = 0.0;
};

struct AblateResult {
  std::vector<AblateRow> rows;  // 16, all toggle combinations
  std::string table;
};

AblateResult cmd_ablate(const PipelineConfig& cfg);

struct TuneCmdResult {
  TuneResult tuned;
  std::string report;
};

TuneCmdResult cmd_tune_theta(const PipelineConfig& cfg);

// Deterministic synthetic speaker utterance (harmonic source with a
// speaker-specific envelope, amplitude-modulated, plus a small noise floor).
Waveform synth_utterance(int speaker, Rng& rng, int sample_rate, double seconds);

}  // namespace ffsv
