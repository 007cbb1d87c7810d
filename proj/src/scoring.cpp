#include "ffsv/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "ffsv/error.hpp"

namespace ffsv {

double cosine_score(const Embedding& a, const Embedding& b) {
  if (a.size() != b.size()) throw Error("cosine_score: dimension mismatch");
  if (a.empty()) throw Error("cosine_score: empty embedding");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na <= 0.0 || nb <= 0.0) throw Error("cosine_score: zero embedding");
  const double s = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::min(1.0, std::max(-1.0, s));
}

Embedding average_embeddings(const std::vector<Embedding>& embeddings) {
  if (embeddings.empty()) throw Error("average_embeddings: empty list");
  const std::size_t dim = embeddings.front().size();
  Embedding mean(dim, 0.0);
  for (const auto& e : embeddings) {
    if (e.size() != dim) throw Error("average_embeddings: dimension mismatch");
    double norm = 0.0;
    for (double v : e) norm += v * v;
    if (norm <= 0.0) throw Error("average_embeddings: zero embedding");
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < dim; ++i) mean[i] += e[i] / norm;
  }
  for (auto& v : mean) v /= static_cast<double>(embeddings.size());
  return mean;
}

namespace {

struct RocPoint {
  double threshold;  // may be +-infinity
  double miss;
  double fa;
};

// Sweep points ordered by ascending threshold. Always ends with the
// reject-all sentinel; with_accept_all prepends the accept-all endpoint.
std::vector<RocPoint> roc_sweep(const std::vector<ScoredTrial>& scored,
                                bool with_accept_all) {
  std::vector<double> targets, nontargets;
  for (const auto& s : scored) {
    if (!std::isfinite(s.score)) throw Error("metrics: non-finite score");
    if (s.trial.label == 1)
      targets.push_back(s.score);
    else if (s.trial.label == 0)
      nontargets.push_back(s.score);
    else
      throw Error("metrics: trial without label");
  }
  if (targets.empty() || nontargets.empty())
    throw Error("metrics: need at least one target and one nontarget");

  std::sort(targets.begin(), targets.end());
  std::sort(nontargets.begin(), nontargets.end());
  std::vector<double> thresholds;
  thresholds.reserve(targets.size() + nontargets.size());
  thresholds.insert(thresholds.end(), targets.begin(), targets.end());
  thresholds.insert(thresholds.end(), nontargets.begin(), nontargets.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());

  const double nt = static_cast<double>(targets.size());
  const double nn = static_cast<double>(nontargets.size());
  std::vector<RocPoint> points;
  if (with_accept_all)
    points.push_back({-std::numeric_limits<double>::infinity(), 0.0, 1.0});
  for (double u : thresholds) {
    const auto below_t = std::lower_bound(targets.begin(), targets.end(), u) -
                         targets.begin();
    const auto below_n =
        std::lower_bound(nontargets.begin(), nontargets.end(), u) -
        nontargets.begin();
    points.push_back({u, static_cast<double>(below_t) / nt,
                      (nn - static_cast<double>(below_n)) / nn});
  }
  points.push_back({std::numeric_limits<double>::infinity(), 1.0, 0.0});
  return points;
}

}  // namespace

EerResult eer(const std::vector<ScoredTrial>& scored) {
  const auto points = roc_sweep(scored, /*with_accept_all=*/false);
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    const auto& p = points[i];
    const auto& q = points[i + 1];
    if (q.miss - q.fa < 0.0) continue;  // crossing not reached yet
    const double dm = q.miss - p.miss;
    const double df = q.fa - p.fa;
    const double denom = dm - df;
    const double alpha = denom > 0.0 ? (p.fa - p.miss) / denom : 0.0;
    EerResult r;
    r.eer = p.miss + alpha * dm;
    r.threshold = std::isfinite(q.threshold)
                      ? p.threshold + alpha * (q.threshold - p.threshold)
                      : p.threshold;
    return r;
  }
  throw Error("eer: no rate crossing found");  // unreachable by construction
}

DcfResult min_dcf(const std::vector<ScoredTrial>& scored, const DcfParams& params) {
  if (!(params.p_target > 0.0 && params.p_target < 1.0))
    throw Error("min_dcf: p_target must lie in (0, 1)");
  if (!(params.c_miss > 0.0 && params.c_fa > 0.0))
    throw Error("min_dcf: costs must be positive");

  const auto points = roc_sweep(scored, /*with_accept_all=*/true);
  const double norm = std::min(params.c_miss * params.p_target,
                               params.c_fa * (1.0 - params.p_target));
  DcfResult best;
  best.min_dcf = std::numeric_limits<double>::infinity();
  for (const auto& p : points) {
    const double dcf = (params.c_miss * p.miss * params.p_target +
                        params.c_fa * p.fa * (1.0 - params.p_target)) /
                       norm;
    if (dcf < best.min_dcf) {
      best.min_dcf = dcf;
      best.threshold = p.threshold;
    }
  }
  return best;
}

SelectionDecision select_enhanced(const Embedding& original, const Embedding& enhanced,
                                  const SelectionPolicy& policy) {
  if (!std::isfinite(policy.theta)) throw Error("select_enhanced: non-finite theta");
  return cosine_score(original, enhanced) >= policy.theta
             ? SelectionDecision::keep_enhanced
             : SelectionDecision::keep_original;
}

TuneResult tune_theta(const std::vector<std::vector<DevPair>>& dev_sets_per_rir,
                      const std::vector<double>& thetas) {
  if (dev_sets_per_rir.empty() || thetas.empty())
    throw Error("tune_theta: empty candidate grid");

  TuneResult best;
  best.dev_eer = std::numeric_limits<double>::infinity();
  for (int r = 0; r < static_cast<int>(dev_sets_per_rir.size()); ++r) {
    const auto& pairs = dev_sets_per_rir[static_cast<std::size_t>(r)];
    std::set<std::string> speakers;
    for (const auto& p : pairs) speakers.insert(p.speaker);
    if (speakers.size() < 2)
      throw Error("tune_theta: dev pairs must span at least two speakers");

    for (double theta : thetas) {
      SelectionPolicy policy{theta};
      std::vector<ScoredTrial> trials;
      trials.reserve(pairs.size() * pairs.size());
      for (const auto& enroll : pairs) {
        const Embedding& selected =
            select_enhanced(enroll.original_enroll, enroll.simulated_enroll,
                            policy) == SelectionDecision::keep_enhanced
                ? enroll.simulated_enroll
                : enroll.original_enroll;
        for (const auto& test : pairs) {
          ScoredTrial st;
          st.trial.enroll_id = enroll.speaker;
          st.trial.test_id = test.speaker;
          st.trial.label = enroll.speaker == test.speaker ? 1 : 0;
          st.score = cosine_score(selected, test.test);
          trials.push_back(std::move(st));
        }
      }
      const double dev_eer = eer(trials).eer;
      const bool better =
          dev_eer < best.dev_eer ||
          (dev_eer == best.dev_eer && r == best.rir_set_index && theta > best.theta);
      if (better) {
        best.dev_eer = dev_eer;
        best.theta = theta;
        best.rir_set_index = r;
      }
    }
  }
  return best;
}

std::vector<Trial> read_trial_list(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("read_trial_list: cannot open: " + path);
  std::vector<Trial> trials;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    Trial t;
    std::string label;
    ss >> t.enroll_id >> t.test_id;
    if (t.enroll_id.empty() || t.test_id.empty())
      throw Error("read_trial_list: malformed line " + std::to_string(lineno));
    if (ss >> label) {
      if (label == "0")
        t.label = 0;
      else if (label == "1")
        t.label = 1;
      else
        throw Error("read_trial_list: bad label on line " + std::to_string(lineno));
    }
    trials.push_back(std::move(t));
  }
  return trials;
}

void write_trial_list(const std::vector<Trial>& trials, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("write_trial_list: cannot open: " + path);
  for (const auto& t : trials) {
    os << t.enroll_id << ' ' << t.test_id;
    if (t.label >= 0) os << ' ' << t.label;
    os << '\n';
  }
}

void write_scores(const std::vector<ScoredTrial>& scored, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("write_scores: cannot open: " + path);
  char buf[64];
  for (const auto& s : scored) {
    std::snprintf(buf, sizeof(buf), "%.9g", s.score);
    os << s.trial.enroll_id << '\t' << s.trial.test_id << '\t' << buf << '\n';
  }
  if (!os) throw Error("write_scores: write failed: " + path);
}

std::string format_metrics_report(const EerResult& e, const DcfResult& d,
                                  const DcfParams& params) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "EER=%.6g%% minDCF=%.6g at p_target=%g",
                e.eer * 100.0, d.min_dcf, params.p_target);
  return buf;
}

}  // namespace ffsv
