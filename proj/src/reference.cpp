#include "ffsv/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ffsv/error.hpp"
#include "ffsv/rng.hpp"

namespace ffsv::ref {

namespace {

using cd = std::complex<double>;

// Dense Hermitian positive-definite solver: in-place Cholesky then two
// substitutions. Matrices are row-major n x n.
std::vector<cd> cholesky(std::vector<cd> a, int n) {
  for (int j = 0; j < n; ++j) {
    double d = std::real(a[static_cast<std::size_t>(j) * n + j]);
    for (int k = 0; k < j; ++k)
      d -= std::norm(a[static_cast<std::size_t>(j) * n + k]);
    if (d <= 0.0) throw Error("ref::cholesky: matrix not positive definite");
    const double root = std::sqrt(d);
    a[static_cast<std::size_t>(j) * n + j] = root;
    for (int i = j + 1; i < n; ++i) {
      cd s = a[static_cast<std::size_t>(i) * n + j];
      for (int k = 0; k < j; ++k)
        s -= a[static_cast<std::size_t>(i) * n + k] *
             std::conj(a[static_cast<std::size_t>(j) * n + k]);
      a[static_cast<std::size_t>(i) * n + j] = s / root;
    }
  }
  return a;  // lower triangle holds L
}

std::vector<cd> chol_solve(const std::vector<cd>& l, int n, std::vector<cd> b) {
  for (int i = 0; i < n; ++i) {  // L y = b
    cd s = b[static_cast<std::size_t>(i)];
    for (int k = 0; k < i; ++k) s -= l[static_cast<std::size_t>(i) * n + k] * b[static_cast<std::size_t>(k)];
    b[static_cast<std::size_t>(i)] = s / l[static_cast<std::size_t>(i) * n + i];
  }
  for (int i = n - 1; i >= 0; --i) {  // L^H x = y
    cd s = b[static_cast<std::size_t>(i)];
    for (int k = i + 1; k < n; ++k)
      s -= std::conj(l[static_cast<std::size_t>(k) * n + i]) * b[static_cast<std::size_t>(k)];
    b[static_cast<std::size_t>(i)] = s / l[static_cast<std::size_t>(i) * n + i];
  }
  return b;
}

double chol_logdet(const std::vector<cd>& l, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i)
    acc += 2.0 * std::log(std::real(l[static_cast<std::size_t>(i) * n + i]));
  return acc;
}

}  // namespace

std::vector<std::complex<double>> naive_dft(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<cd> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    cd acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double ang = -2.0 * M_PI * static_cast<double>(k) * static_cast<double>(j) /
                         static_cast<double>(n);
      acc += x[j] * cd(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

std::vector<double> convolve(const std::vector<double>& x, const std::vector<double>& h) {
  std::vector<double> y(x.size() + h.size() - 1, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < h.size(); ++j) y[i + j] += x[i] * h[j];
  return y;
}

FeatureMatrix mfcc(const Waveform& w, const MfccConfig& cfg) {
  const auto& x = w.channels.at(0);
  const int sr = w.sample_rate;
  const int frame_len = static_cast<int>(std::lround(cfg.frame_ms * 1e-3 * sr));
  const int hop = static_cast<int>(std::lround(cfg.hop_ms * 1e-3 * sr));
  int nfft = 1;
  while (nfft < frame_len) nfft *= 2;
  const int frames =
      1 + static_cast<int>((x.size() - static_cast<std::size_t>(frame_len)) /
                           static_cast<std::size_t>(hop));

  std::vector<double> pre(x.size());
  pre[0] = x[0] - cfg.preemphasis * x[0];
  for (std::size_t i = 1; i < x.size(); ++i) pre[i] = x[i] - cfg.preemphasis * x[i - 1];

  std::vector<double> window(static_cast<std::size_t>(frame_len));
  for (int i = 0; i < frame_len; ++i)
    window[static_cast<std::size_t>(i)] =
        0.54 - 0.46 * std::cos(2.0 * M_PI * i / frame_len);

  auto mel = [](double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); };
  auto hz = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
  const double lo = mel(cfg.low_freq);
  const double hi = mel(0.5 * sr - cfg.high_freq_offset);
  std::vector<double> edge(static_cast<std::size_t>(cfg.num_filters) + 2);
  for (int i = 0; i < cfg.num_filters + 2; ++i)
    edge[static_cast<std::size_t>(i)] = hz(lo + (hi - lo) * i / (cfg.num_filters + 1));

  FeatureMatrix out(frames, cfg.num_coeffs);
  for (int t = 0; t < frames; ++t) {
    std::vector<double> frame(static_cast<std::size_t>(nfft), 0.0);
    for (int i = 0; i < frame_len; ++i)
      frame[static_cast<std::size_t>(i)] =
          pre[static_cast<std::size_t>(t * hop + i)] * window[static_cast<std::size_t>(i)];
    auto spec = naive_dft(frame);

    std::vector<double> logmel(static_cast<std::size_t>(cfg.num_filters));
    for (int j = 0; j < cfg.num_filters; ++j) {
      double e = 0.0;
      for (int k = 0; k <= nfft / 2; ++k) {
        const double f = static_cast<double>(k) * sr / nfft;
        const double l = edge[static_cast<std::size_t>(j)];
        const double c = edge[static_cast<std::size_t>(j) + 1];
        const double r = edge[static_cast<std::size_t>(j) + 2];
        double weight = 0.0;
        if (f > l && f < c)
          weight = (f - l) / (c - l);
        else if (f >= c && f < r)
          weight = (r - f) / (r - c);
        e += weight * std::norm(spec[static_cast<std::size_t>(k)]);
      }
      logmel[static_cast<std::size_t>(j)] = std::log(std::max(e, cfg.log_floor));
    }

    for (int k = 0; k < cfg.num_coeffs; ++k) {
      double acc = 0.0;
      for (int j = 0; j < cfg.num_filters; ++j)
        acc += logmel[static_cast<std::size_t>(j)] *
               std::cos(M_PI * k * (2.0 * j + 1.0) / (2.0 * cfg.num_filters));
      out.at(t, k) = acc * (k == 0 ? std::sqrt(1.0 / cfg.num_filters)
                                   : std::sqrt(2.0 / cfg.num_filters));
    }
  }
  return out;
}

namespace {

struct Rates {
  double miss;
  double fa;
};

Rates rates_at(const std::vector<ScoredTrial>& scored, double threshold) {
  int nt = 0, nn = 0, missed = 0, accepted_nt = 0;
  for (const auto& s : scored) {
    if (s.trial.label == 1) {
      ++nt;
      if (s.score < threshold) ++missed;
    } else if (s.trial.label == 0) {
      ++nn;
      if (s.score >= threshold) ++accepted_nt;
    } else {
      throw Error("ref::metrics: trial without label");
    }
  }
  if (nt == 0 || nn == 0)
    throw Error("ref::metrics: need both target and nontarget trials");
  return {static_cast<double>(missed) / nt, static_cast<double>(accepted_nt) / nn};
}

std::vector<double> distinct_scores(const std::vector<ScoredTrial>& scored) {
  std::vector<double> u;
  for (const auto& s : scored) u.push_back(s.score);
  std::sort(u.begin(), u.end());
  u.erase(std::unique(u.begin(), u.end()), u.end());
  return u;
}

}  // namespace

EerResult eer(const std::vector<ScoredTrial>& scored) {
  const auto thresholds = distinct_scores(scored);
  std::vector<Rates> pts;
  for (double u : thresholds) pts.push_back(rates_at(scored, u));
  pts.push_back({1.0, 0.0});  // reject-all sentinel

  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    if (pts[i + 1].miss - pts[i + 1].fa < 0.0) continue;
    const double dm = pts[i + 1].miss - pts[i].miss;
    const double df = pts[i + 1].fa - pts[i].fa;
    const double denom = dm - df;
    const double alpha = denom > 0.0 ? (pts[i].fa - pts[i].miss) / denom : 0.0;
    EerResult r;
    r.eer = pts[i].miss + alpha * dm;
    r.threshold = i + 1 < thresholds.size()
                      ? thresholds[i] + alpha * (thresholds[i + 1] - thresholds[i])
                      : thresholds[i];
    return r;
  }
  throw Error("ref::eer: no crossing");
}

DcfResult min_dcf(const std::vector<ScoredTrial>& scored, const DcfParams& params) {
  const double norm = std::min(params.c_miss * params.p_target,
                               params.c_fa * (1.0 - params.p_target));
  std::vector<double> thresholds{-std::numeric_limits<double>::infinity()};
  for (double u : distinct_scores(scored)) thresholds.push_back(u);
  thresholds.push_back(std::numeric_limits<double>::infinity());

  DcfResult best;
  best.min_dcf = std::numeric_limits<double>::infinity();
  for (double u : thresholds) {
    Rates r = std::isinf(u) ? (u < 0 ? Rates{0.0, 1.0} : Rates{1.0, 0.0})
                            : rates_at(scored, u);
    const double dcf = (params.c_miss * r.miss * params.p_target +
                        params.c_fa * r.fa * (1.0 - params.p_target)) /
                       norm;
    if (dcf < best.min_dcf) {
      best.min_dcf = dcf;
      best.threshold = u;
    }
  }
  return best;
}

ComplexSpectrogram wpe(const ComplexSpectrogram& s, const WpeConfig& cfg) {
  const int channels = s.num_channels();
  const int frames = s.frames;
  const int stacked = cfg.taps * channels;
  ComplexSpectrogram out = s;

  for (int f = 0; f < s.bins; ++f) {
    double mean_power = 0.0;
    for (int c = 0; c < channels; ++c)
      for (int t = 0; t < frames; ++t) mean_power += std::norm(s.at(c, f, t));
    mean_power /= channels * frames;
    if (mean_power <= 0.0) continue;
    const double floor = cfg.variance_floor * mean_power;

    auto delayed_at = [&](int row, int t) -> cd {
      const int k = row / channels, c = row % channels;
      const int src = t - cfg.delay - k;
      return src >= 0 ? s.at(c, f, src) : cd(0.0, 0.0);
    };

    std::vector<cd> estimate(static_cast<std::size_t>(channels) * frames);
    for (int c = 0; c < channels; ++c)
      for (int t = 0; t < frames; ++t)
        estimate[static_cast<std::size_t>(c) * frames + t] = s.at(c, f, t);

    for (int it = 0; it < cfg.iterations; ++it) {
      std::vector<double> variance(static_cast<std::size_t>(frames));
      for (int t = 0; t < frames; ++t) {
        double p = 0.0;
        for (int c = 0; c < channels; ++c)
          p += std::norm(estimate[static_cast<std::size_t>(c) * frames + t]);
        variance[static_cast<std::size_t>(t)] = std::max(p / channels, floor);
      }

      std::vector<cd> normal(static_cast<std::size_t>(stacked) * stacked, cd(0, 0));
      std::vector<cd> cross(static_cast<std::size_t>(stacked) * channels, cd(0, 0));
      for (int t = 0; t < frames; ++t) {
        const double w = 1.0 / variance[static_cast<std::size_t>(t)];
        for (int i = 0; i < stacked; ++i) {
          const cd di = delayed_at(i, t);
          if (di == cd(0.0, 0.0)) continue;
          for (int j = 0; j < stacked; ++j)
            normal[static_cast<std::size_t>(i) * stacked + j] +=
                w * di * std::conj(delayed_at(j, t));
          for (int c = 0; c < channels; ++c)
            cross[static_cast<std::size_t>(i) * channels + c] +=
                w * di * std::conj(s.at(c, f, t));
        }
      }
      double trace = 0.0;
      for (int i = 0; i < stacked; ++i)
        trace += std::real(normal[static_cast<std::size_t>(i) * stacked + i]);
      for (int i = 0; i < stacked; ++i)
        normal[static_cast<std::size_t>(i) * stacked + i] += 1e-10 * trace;

      const auto l = cholesky(normal, stacked);
      std::vector<cd> filter(static_cast<std::size_t>(stacked) * channels);
      for (int c = 0; c < channels; ++c) {
        std::vector<cd> b(static_cast<std::size_t>(stacked));
        for (int i = 0; i < stacked; ++i)
          b[static_cast<std::size_t>(i)] = cross[static_cast<std::size_t>(i) * channels + c];
        auto g = chol_solve(l, stacked, std::move(b));
        for (int i = 0; i < stacked; ++i)
          filter[static_cast<std::size_t>(i) * channels + c] = g[static_cast<std::size_t>(i)];
      }

      for (int t = 0; t < frames; ++t)
        for (int c = 0; c < channels; ++c) {
          cd pred = 0.0;
          for (int i = 0; i < stacked; ++i)
            pred += std::conj(filter[static_cast<std::size_t>(i) * channels + c]) *
                    delayed_at(i, t);
          estimate[static_cast<std::size_t>(c) * frames + t] = s.at(c, f, t) - pred;
        }
    }

    for (int c = 0; c < channels; ++c)
      for (int t = 0; t < frames; ++t)
        out.at(c, f, t) = estimate[static_cast<std::size_t>(c) * frames + t];
  }
  return out;
}

CgmmResult cgmm_masks(const ComplexSpectrogram& s, const CgmmConfig& cfg,
                      const TfMask& init_speech) {
  const int channels = s.num_channels();
  const int frames = s.frames;
  CgmmResult result;
  result.speech = TfMask(s.bins, frames);
  result.noise = TfMask(s.bins, frames);
  result.loglik.assign(static_cast<std::size_t>(s.bins),
                       std::vector<double>(static_cast<std::size_t>(cfg.iterations), 0.0));

  for (int f = 0; f < s.bins; ++f) {
    double mean_power = 0.0;
    for (int c = 0; c < channels; ++c)
      for (int t = 0; t < frames; ++t) mean_power += std::norm(s.at(c, f, t));
    mean_power /= channels * frames;
    if (mean_power <= 0.0) {
      for (int t = 0; t < frames; ++t) {
        result.speech.at(f, t) = 0.5;
        result.noise.at(f, t) = 0.5;
      }
      continue;
    }
    const double phi_floor = 1e-10 * mean_power;

    std::vector<double> gamma(2 * static_cast<std::size_t>(frames));
    for (int t = 0; t < frames; ++t) {
      gamma[static_cast<std::size_t>(t)] = init_speech.at(f, t);
      gamma[static_cast<std::size_t>(frames) + t] = 1.0 - init_speech.at(f, t);
    }

    std::vector<cd> cov[2];
    double log_weight[2] = {0.0, 0.0};
    std::vector<double> phi(2 * static_cast<std::size_t>(frames), 1.0);

    auto m_step = [&](bool use_phi) {
      for (int k = 0; k < 2; ++k) {
        std::vector<cd> acc(static_cast<std::size_t>(channels) * channels, cd(0, 0));
        double total = 0.0;
        for (int t = 0; t < frames; ++t) {
          const double g = gamma[static_cast<std::size_t>(k) * frames + t];
          total += g;
          const double scale =
              use_phi ? g / phi[static_cast<std::size_t>(k) * frames + t] : g;
          for (int i = 0; i < channels; ++i)
            for (int j = 0; j < channels; ++j)
              acc[static_cast<std::size_t>(i) * channels + j] +=
                  scale * s.at(i, f, t) * std::conj(s.at(j, f, t));
        }
        if (total > 1e-12) {
          for (auto& v : acc) v /= total;
          double trace = 0.0;
          for (int i = 0; i < channels; ++i)
            trace += std::real(acc[static_cast<std::size_t>(i) * channels + i]);
          const double ridge = cfg.reg_scale * trace / channels;
          for (int i = 0; i < channels; ++i)
            acc[static_cast<std::size_t>(i) * channels + i] += ridge;
          cov[k] = std::move(acc);
        }
        log_weight[k] = std::log(std::max(total / frames, 1e-300));
      }
    };
    m_step(false);

    for (int it = 0; it < cfg.iterations; ++it) {
      double loglik = 0.0;
      std::vector<double> logp(2 * static_cast<std::size_t>(frames));
      for (int k = 0; k < 2; ++k) {
        const auto l = cholesky(cov[k], channels);
        const double logdet = chol_logdet(l, channels);
        for (int t = 0; t < frames; ++t) {
          std::vector<cd> y(static_cast<std::size_t>(channels));
          for (int c = 0; c < channels; ++c) y[static_cast<std::size_t>(c)] = s.at(c, f, t);
          auto solved = chol_solve(l, channels, y);
          double quad = 0.0;
          for (int c = 0; c < channels; ++c)
            quad += std::real(std::conj(s.at(c, f, t)) * solved[static_cast<std::size_t>(c)]);
          quad = std::max(quad, 0.0);
          const double p = std::max(quad / channels, phi_floor);
          phi[static_cast<std::size_t>(k) * frames + t] = p;
          logp[static_cast<std::size_t>(k) * frames + t] =
              -channels * std::log(M_PI) - channels * std::log(p) - logdet - quad / p;
        }
      }
      for (int t = 0; t < frames; ++t) {
        const double a = log_weight[0] + logp[static_cast<std::size_t>(t)];
        const double b = log_weight[1] + logp[static_cast<std::size_t>(frames) + t];
        const double hi = std::max(a, b);
        const double lse = hi + std::log(std::exp(a - hi) + std::exp(b - hi));
        gamma[static_cast<std::size_t>(t)] = std::exp(a - lse);
        gamma[static_cast<std::size_t>(frames) + t] = std::exp(b - lse);
        loglik += lse;
      }
      result.loglik[static_cast<std::size_t>(f)][static_cast<std::size_t>(it)] = loglik;
      m_step(true);
    }

    // directionality via power iteration on each covariance
    double ratio[2];
    for (int k = 0; k < 2; ++k) {
      std::vector<cd> v(static_cast<std::size_t>(channels), cd(1.0, 0.0));
      for (int it = 0; it < 50; ++it) {
        std::vector<cd> nv(static_cast<std::size_t>(channels), cd(0, 0));
        for (int i = 0; i < channels; ++i)
          for (int j = 0; j < channels; ++j)
            nv[static_cast<std::size_t>(i)] +=
                cov[k][static_cast<std::size_t>(i) * channels + j] * v[static_cast<std::size_t>(j)];
        double norm = 0.0;
        for (const auto& x : nv) norm += std::norm(x);
        norm = std::sqrt(norm);
        for (auto& x : nv) x /= norm;
        v = std::move(nv);
      }
      double quad = 0.0, trace = 0.0;
      for (int i = 0; i < channels; ++i) {
        trace += std::real(cov[k][static_cast<std::size_t>(i) * channels + i]);
        for (int j = 0; j < channels; ++j)
          quad += std::real(std::conj(v[static_cast<std::size_t>(i)]) *
                            cov[k][static_cast<std::size_t>(i) * channels + j] *
                            v[static_cast<std::size_t>(j)]);
      }
      ratio[k] = quad / trace;
    }
    const int speech_k = ratio[1] > ratio[0] ? 1 : 0;
    for (int t = 0; t < frames; ++t) {
      result.speech.at(f, t) = gamma[static_cast<std::size_t>(speech_k) * frames + t];
      result.noise.at(f, t) = 1.0 - result.speech.at(f, t);
    }
  }
  return result;
}

std::vector<double> conv2d(const std::vector<double>& x, int in_ch, int in_t, int in_f,
                           const std::vector<double>& weight, const std::vector<double>& bias,
                           int out_ch, int kt, int kf, int st, int sf, int pt, int pf,
                           int dt, int df) {
  const int ot = (in_t + 2 * pt - dt * (kt - 1) - 1) / st + 1;
  const int of = (in_f + 2 * pf - df * (kf - 1) - 1) / sf + 1;
  std::vector<double> y(static_cast<std::size_t>(out_ch) * ot * of, 0.0);
  for (int co = 0; co < out_ch; ++co)
    for (int to = 0; to < ot; ++to)
      for (int fo = 0; fo < of; ++fo) {
        double acc = bias.empty() ? 0.0 : bias[static_cast<std::size_t>(co)];
        for (int ci = 0; ci < in_ch; ++ci)
          for (int i = 0; i < kt; ++i)
            for (int j = 0; j < kf; ++j) {
              const int ti = to * st - pt + i * dt;
              const int fi = fo * sf - pf + j * df;
              if (ti < 0 || ti >= in_t || fi < 0 || fi >= in_f) continue;
              acc += weight[((static_cast<std::size_t>(co) * in_ch + ci) * kt + i) * kf + j] *
                     x[(static_cast<std::size_t>(ci) * in_t + ti) * in_f + fi];
            }
        y[(static_cast<std::size_t>(co) * ot + to) * of + fo] = acc;
      }
  return y;
}

std::vector<double> batchnorm_eval(const std::vector<double>& x, int channels,
                                   int per_channel, const std::vector<double>& gamma,
                                   const std::vector<double>& beta,
                                   const std::vector<double>& mean,
                                   const std::vector<double>& var, double eps) {
  std::vector<double> y(x.size());
  for (int c = 0; c < channels; ++c) {
    const double inv = 1.0 / std::sqrt(var[static_cast<std::size_t>(c)] + eps);
    for (int i = 0; i < per_channel; ++i) {
      const std::size_t idx = static_cast<std::size_t>(c) * per_channel + i;
      y[idx] = gamma[static_cast<std::size_t>(c)] * (x[idx] - mean[static_cast<std::size_t>(c)]) * inv +
               beta[static_cast<std::size_t>(c)];
    }
  }
  return y;
}

}  // namespace ffsv::ref
