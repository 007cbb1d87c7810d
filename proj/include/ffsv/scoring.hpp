#pragma once

#include <string>
#include <vector>

namespace ffsv {

using Embedding = std::vector<double>;

struct Trial {
  std::string enroll_id;
  std::string test_id;
  int label = -1;  // 1 target, 0 nontarget, -1 unlabeled
};

struct ScoredTrial {
  Trial trial;
  double score = 0.0;
};

// Cosine similarity in [-1, 1]; throws on zero vectors or dim mismatch.
double cosine_score(const Embedding& a, const Embedding& b);

// L2-normalize each input, then take the arithmetic mean. A degenerate
// all-cancelling input yields the zero vector, reported downstream.
Embedding average_embeddings(const std::vector<Embedding>& embeddings);

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

// Threshold sweep over all distinct scores (accept iff score >= t), linear
// interpolation between adjacent sweep points at the miss/false-alarm
// crossing.
EerResult eer(const std::vector<ScoredTrial>& scored);

struct DcfParams {
  double p_target = 0.01;
  double c_miss = 1.0;
  double c_fa = 1.0;
};

struct DcfResult {
  double min_dcf = 0.0;
  double threshold = 0.0;
};

// Normalized detection cost minimized over the sweep including the
// accept-all and reject-all endpoints.
DcfResult min_dcf(const std::vector<ScoredTrial>& scored, const DcfParams& params);

struct SelectionPolicy {
  double theta = 0.7;
};

enum class SelectionDecision { keep_enhanced, keep_original };

// Keep the enhanced version iff cosine(original, enhanced) >= theta; ties
// kept ("lower than" discards strictly).
SelectionDecision select_enhanced(const Embedding& original, const Embedding& enhanced,
                                  const SelectionPolicy& policy);

struct DevPair {
  Embedding original_enroll;
  Embedding simulated_enroll;
  Embedding test;
  std::string speaker;
};

struct TuneResult {
  double theta = 0.0;
  int rir_set_index = 0;
  double dev_eer = 1.0;
};

// Grid search over (RIR candidate, theta): apply the selection rule to each
// dev pair, score all enroll x test trials, minimize dev EER. Ties prefer
// larger theta, then the earlier RIR candidate.
TuneResult tune_theta(const std::vector<std::vector<DevPair>>& dev_sets_per_rir,
                      const std::vector<double>& thetas);

// --- text interfaces -------------------------------------------------------

// One trial per line: enroll-id test-id [label 0|1].
std::vector<Trial> read_trial_list(const std::string& path);
void write_trial_list(const std::vector<Trial>& trials, const std::string& path);

// Tab-separated enroll-id, test-id, score with 9 significant digits.
void write_scores(const std::vector<ScoredTrial>& scored, const std::string& path);

// "EER=<percent>% minDCF=<value> at p_target=<p>"
std::string format_metrics_report(const EerResult& e, const DcfResult& d,
                                  const DcfParams& params);

}  // namespace ffsv
