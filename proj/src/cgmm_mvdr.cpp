#include "ffsv/cgmm_mvdr.hpp"

#include <cmath>
#include <cstdio>

#include "ffsv/error.hpp"
#include "ffsv/rng.hpp"

namespace ffsv {

namespace {

constexpr double kPhiFloorScale = 1e-10;

struct BinModel {
  Eigen::MatrixXcd cov[2];
  double log_weight[2];
};

double add_ridge(Eigen::MatrixXcd& m, double reg_scale) {
  const double ridge = reg_scale * m.trace().real() / m.rows();
  if (ridge > 0.0)
    m += ridge * Eigen::MatrixXcd::Identity(m.rows(), m.cols());
  return ridge;
}

}  // namespace

void CgmmConfig::validate() const {
  if (iterations < 1) throw Error("cgmm: iterations must be >= 1");
  if (!(reg_scale > 0.0)) throw Error("cgmm: reg_scale must be positive");
}

CgmmResult cgmm_masks_with_init(const ComplexSpectrogram& s, const CgmmConfig& cfg,
                                const TfMask& init_speech) {
  cfg.validate();
  const int channels = s.num_channels();
  const int frames = s.frames;
  if (channels < 2) throw Error("cgmm: needs at least two channels");
  if (frames < 2 * channels)
    throw Error("cgmm: too few frames (need at least 2x channel count)");
  if (init_speech.bins != s.bins || init_speech.frames != frames)
    throw Error("cgmm: init mask shape mismatch");

  CgmmResult result;
  result.speech = TfMask(s.bins, frames);
  result.noise = TfMask(s.bins, frames);
  result.loglik.assign(static_cast<std::size_t>(s.bins),
                       std::vector<double>(static_cast<std::size_t>(cfg.iterations), 0.0));

#pragma omp parallel for schedule(static)
  for (int f = 0; f < s.bins; ++f) {
    Eigen::MatrixXcd obs(channels, frames);
    for (int c = 0; c < channels; ++c)
      for (int t = 0; t < frames; ++t) obs(c, t) = s.at(c, f, t);

    const double mean_power = obs.squaredNorm() / (channels * frames);
    if (mean_power <= 0.0) {
      for (int t = 0; t < frames; ++t) {
        result.speech.at(f, t) = 0.5;
        result.noise.at(f, t) = 0.5;
      }
      continue;
    }
    const double phi_floor = kPhiFloorScale * mean_power;

    // gamma(k, t): responsibilities, initialised from the caller's mask.
    Eigen::MatrixXd gamma(2, frames);
    for (int t = 0; t < frames; ++t) {
      const double g = std::min(std::max(init_speech.at(f, t), 0.0), 1.0);
      gamma(0, t) = g;
      gamma(1, t) = 1.0 - g;
    }

    BinModel model;
    auto m_step = [&](const Eigen::MatrixXd& resp,
                      const Eigen::MatrixXd* phi) {
      for (int k = 0; k < 2; ++k) {
        double total = 0.0;
        Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(channels, channels);
        for (int t = 0; t < frames; ++t) {
          const double r = resp(k, t);
          total += r;
          const double scale = phi ? r / (*phi)(k, t) : r;
          acc.noalias() += scale * obs.col(t) * obs.col(t).adjoint();
        }
        if (total > 1e-12) {
          model.cov[k] = acc / total;
          add_ridge(model.cov[k], cfg.reg_scale);
        }
        model.log_weight[k] = std::log(std::max(total / frames, 1e-300));
      }
    };
    m_step(gamma, nullptr);

    Eigen::MatrixXd phi(2, frames);
    for (int it = 0; it < cfg.iterations; ++it) {
      // E step: closed-form per-frame scale, then responsibilities.
      Eigen::MatrixXd logp(2, frames);
      for (int k = 0; k < 2; ++k) {
        Eigen::LLT<Eigen::MatrixXcd> llt(model.cov[k]);
        Eigen::MatrixXcd solved = llt.solve(obs);
        double logdet = 0.0;
        for (int c = 0; c < channels; ++c)
          logdet += 2.0 * std::log(std::real(llt.matrixL()(c, c)));
        for (int t = 0; t < frames; ++t) {
          const double quad =
              std::max(std::real(obs.col(t).dot(solved.col(t))), 0.0);
          const double p = std::max(quad / channels, phi_floor);
          phi(k, t) = p;
          logp(k, t) = -channels * std::log(M_PI) - channels * std::log(p) -
                       logdet - quad / p;
        }
      }
      double loglik = 0.0;
      for (int t = 0; t < frames; ++t) {
        const double a = model.log_weight[0] + logp(0, t);
        const double b = model.log_weight[1] + logp(1, t);
        const double hi = std::max(a, b);
        const double lse = hi + std::log(std::exp(a - hi) + std::exp(b - hi));
        gamma(0, t) = std::exp(a - lse);
        gamma(1, t) = std::exp(b - lse);
        loglik += lse;
      }
      result.loglik[static_cast<std::size_t>(f)][static_cast<std::size_t>(it)] = loglik;

      m_step(gamma, &phi);
    }

    // The more directional component is speech.
    double ratio[2];
    for (int k = 0; k < 2; ++k) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(model.cov[k]);
      ratio[k] = eig.eigenvalues()(channels - 1) /
                 std::max(model.cov[k].trace().real(), 1e-300);
    }
    const int speech_k = ratio[1] > ratio[0] ? 1 : 0;
    for (int t = 0; t < frames; ++t) {
      result.speech.at(f, t) = gamma(speech_k, t);
      result.noise.at(f, t) = 1.0 - gamma(speech_k, t);
    }
  }
  return result;
}

CgmmResult cgmm_masks(const ComplexSpectrogram& s, const CgmmConfig& cfg) {
  cfg.validate();
  if (s.num_channels() < 2) throw Error("cgmm: needs at least two channels");
  if (s.frames < 2 * s.num_channels())
    throw Error("cgmm: too few frames (need at least 2x channel count)");

  TfMask init(s.bins, s.frames);
  if (cfg.init == CgmmConfig::Init::power_split) {
    // Soft split against the median frame power of each bin.
    for (int f = 0; f < s.bins; ++f) {
      std::vector<double> power(static_cast<std::size_t>(s.frames), 0.0);
      for (int t = 0; t < s.frames; ++t)
        for (int c = 0; c < s.num_channels(); ++c)
          power[static_cast<std::size_t>(t)] += std::norm(s.at(c, f, t));
      auto sorted = power;
      std::nth_element(sorted.begin(), sorted.begin() + s.frames / 2, sorted.end());
      const double median = sorted[static_cast<std::size_t>(s.frames / 2)];
      for (int t = 0; t < s.frames; ++t)
        init.at(f, t) = median > 0.0
                            ? power[static_cast<std::size_t>(t)] /
                                  (power[static_cast<std::size_t>(t)] + median)
                            : 0.5;
    }
  } else {
    for (int f = 0; f < s.bins; ++f) {
      Rng rng(cfg.seed + 0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(f + 1));
      for (int t = 0; t < s.frames; ++t) init.at(f, t) = rng.uniform();
    }
  }
  return cgmm_masks_with_init(s, cfg, init);
}

SpatialCovariance estimate_covariances(const ComplexSpectrogram& s, const TfMask& mask,
                                       double reg_scale) {
  const int channels = s.num_channels();
  if (mask.bins != s.bins || mask.frames != s.frames)
    throw Error("estimate_covariances: mask shape mismatch");

  SpatialCovariance cov;
  cov.bins.assign(static_cast<std::size_t>(s.bins),
                  Eigen::MatrixXcd::Zero(channels, channels));
  int fallbacks = 0;

#pragma omp parallel for schedule(static) reduction(+ : fallbacks)
  for (int f = 0; f < s.bins; ++f) {
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(channels, channels);
    double total = 0.0;
    for (int t = 0; t < s.frames; ++t) {
      Eigen::VectorXcd x(channels);
      for (int c = 0; c < channels; ++c) x(c) = s.at(c, f, t);
      acc.noalias() += mask.at(f, t) * x * x.adjoint();
      total += mask.at(f, t);
    }
    if (total <= 0.0) {
      ++fallbacks;
      acc.setZero();
      for (int t = 0; t < s.frames; ++t) {
        Eigen::VectorXcd x(channels);
        for (int c = 0; c < channels; ++c) x(c) = s.at(c, f, t);
        acc.noalias() += x * x.adjoint();
      }
      total = s.frames;
    }
    Eigen::MatrixXcd r = acc / total;
    if (reg_scale > 0.0) add_ridge(r, reg_scale);
    cov.bins[static_cast<std::size_t>(f)] = std::move(r);
  }
  if (fallbacks > 0)
    std::fprintf(stderr,
                 "estimate_covariances: %d bins had an all-zero mask, used "
                 "unmasked average\n",
                 fallbacks);
  return cov;
}

Eigen::VectorXcd principal_eigenvector(const Eigen::MatrixXcd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(m);
  Eigen::VectorXcd v = eig.eigenvectors().col(m.rows() - 1);
  v.normalize();
  // Deterministic phase: first component of usable magnitude made real >= 0.
  for (int i = 0; i < v.size(); ++i) {
    const double mag = std::abs(v(i));
    if (mag > 1e-12) {
      v *= std::conj(v(i)) / mag;
      break;
    }
  }
  return v;
}

BeamformerWeights mvdr_weights(const SpatialCovariance& noise_cov,
                               const SpatialCovariance& speech_cov) {
  if (noise_cov.bins.size() != speech_cov.bins.size())
    throw Error("mvdr: covariance bin counts differ");
  const int bins = static_cast<int>(noise_cov.bins.size());
  if (bins == 0) throw Error("mvdr: empty covariances");
  const int channels = static_cast<int>(noise_cov.bins[0].rows());

  BeamformerWeights weights;
  weights.bins.assign(static_cast<std::size_t>(bins), Eigen::VectorXcd());
  bool singular = false;

#pragma omp parallel for schedule(static)
  for (int f = 0; f < bins; ++f) {
    if (noise_cov.bins[static_cast<std::size_t>(f)].rows() != channels ||
        speech_cov.bins[static_cast<std::size_t>(f)].rows() != channels)
      continue;
    Eigen::VectorXcd d = principal_eigenvector(speech_cov.bins[static_cast<std::size_t>(f)]);
    Eigen::MatrixXcd rn = noise_cov.bins[static_cast<std::size_t>(f)];
    add_ridge(rn, 1e-10);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(rn);
    const double lo = eig.eigenvalues()(0);
    const double hi = eig.eigenvalues()(channels - 1);
    if (!(lo > 0.0) || hi / lo > 1e12) {
      singular = true;
      continue;
    }
    Eigen::VectorXcd rn_inv_d = rn.ldlt().solve(d);
    const double denom = std::real(d.dot(rn_inv_d));
    weights.bins[static_cast<std::size_t>(f)] = rn_inv_d / denom;
  }
  if (singular) throw Error("mvdr: noise covariance numerically singular");
  for (const auto& w : weights.bins)
    if (w.size() != channels) throw Error("mvdr: covariance channel mismatch");
  return weights;
}

ComplexSpectrogram apply_beamformer(const ComplexSpectrogram& s,
                                    const BeamformerWeights& w) {
  if (static_cast<int>(w.bins.size()) != s.bins)
    throw Error("apply_beamformer: bin count mismatch");
  for (const auto& wf : w.bins)
    if (wf.size() != s.num_channels())
      throw Error("apply_beamformer: channel count mismatch");

  ComplexSpectrogram out;
  out.bins = s.bins;
  out.frames = s.frames;
  out.config = s.config;
  out.sample_rate = s.sample_rate;
  out.channels.assign(1, std::vector<std::complex<double>>(
                             static_cast<std::size_t>(s.bins) * s.frames));
  for (int f = 0; f < s.bins; ++f) {
    const auto& wf = w.bins[static_cast<std::size_t>(f)];
    for (int t = 0; t < s.frames; ++t) {
      std::complex<double> y = 0.0;
      for (int c = 0; c < s.num_channels(); ++c)
        y += std::conj(wf(c)) * s.at(c, f, t);
      out.at(0, f, t) = y;
    }
  }
  return out;
}

}  // namespace ffsv
