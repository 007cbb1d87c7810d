#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "ffsv/stft.hpp"

namespace ffsv {

/// F x T grid of mask values in [0, 1].
struct TfMask {
  int bins = 0;
  int frames = 0;
  std::vector<double> m;

  TfMask() = default;
  TfMask(int f, int t) : bins(f), frames(t), m(static_cast<std::size_t>(f) * t, 0.0) {}
  double& at(int f, int t) { return m[static_cast<std::size_t>(f) * frames + t]; }
  double at(int f, int t) const { return m[static_cast<std::size_t>(f) * frames + t]; }
};

struct CgmmConfig {
  enum class Init { random_responsibility, power_split };

  int iterations = 20;
  double reg_scale = 1e-6;  // covariance ridge = reg_scale * trace / channels
  Init init = Init::power_split;
  std::uint64_t seed = 0;

  void validate() const;
};

struct CgmmResult {
  TfMask speech;
  TfMask noise;
  // loglik[bin][iteration]: per-bin data log-likelihood, non-decreasing.
  std::vector<std::vector<double>> loglik;
};

// Two-component zero-mean complex GMM with per-frame scale variances, run
// independently per frequency bin; responsibilities become the masks. The
// more directional component (larger principal-eigenvalue/trace ratio of its
// covariance) is labeled speech.
CgmmResult cgmm_masks(const ComplexSpectrogram& s, const CgmmConfig& cfg);

// Same EM but with explicit initial speech responsibilities.
CgmmResult cgmm_masks_with_init(const ComplexSpectrogram& s, const CgmmConfig& cfg,
                                const TfMask& init_speech);

/// One C x C Hermitian PSD matrix per frequency bin.
struct SpatialCovariance {
  std::vector<Eigen::MatrixXcd> bins;
};

// Mask-weighted average of outer products; an all-zero mask at a bin falls
// back to the unmasked average. Optional ridge reg_scale * trace/C * I.
SpatialCovariance estimate_covariances(const ComplexSpectrogram& s, const TfMask& mask,
                                       double reg_scale = 0.0);

/// One complex weight vector per frequency bin.
struct BeamformerWeights {
  std::vector<Eigen::VectorXcd> bins;
};

// Unit-norm principal eigenvector with the first nonzero component anchored
// to be real nonnegative.
Eigen::VectorXcd principal_eigenvector(const Eigen::MatrixXcd& m);

// w_f = R_n^{-1} d / (d^H R_n^{-1} d) with d the principal eigenvector of
// the speech covariance. Throws if R_n stays numerically singular.
BeamformerWeights mvdr_weights(const SpatialCovariance& noise_cov,
                               const SpatialCovariance& speech_cov);

// y(f, t) = w_f^H x(f, t); single-channel output.
ComplexSpectrogram apply_beamformer(const ComplexSpectrogram& s,
                                    const BeamformerWeights& w);

}  // namespace ffsv
