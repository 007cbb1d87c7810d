#include "ffsv/wpe.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "ffsv/error.hpp"

namespace ffsv {

void WpeConfig::validate() const {
  if (taps < 1) throw Error("wpe: taps must be >= 1");
  if (delay < 1) throw Error("wpe: delay must be >= 1");
  if (iterations < 1) throw Error("wpe: iterations must be >= 1");
  if (!(variance_floor > 0.0)) throw Error("wpe: variance_floor must be positive");
}

WpeResult wpe(const ComplexSpectrogram& s, const WpeConfig& cfg) {
  cfg.validate();
  const int channels = s.num_channels();
  const int frames = s.frames;
  if (channels < 1) throw Error("wpe: need at least one channel");
  if (frames <= cfg.delay + cfg.taps)
    throw Error("wpe: too few frames (need more than delay + taps)");

  WpeResult result;
  result.spectrogram = s;
  result.objective.assign(static_cast<std::size_t>(s.bins),
                          std::vector<double>(static_cast<std::size_t>(cfg.iterations), 0.0));
  result.filter_norm.assign(static_cast<std::size_t>(s.bins), 0.0);

  const int stacked = cfg.taps * channels;

#pragma omp parallel for schedule(static)
  for (int f = 0; f < s.bins; ++f) {
    // Gather observations for this bin: Y is channels x frames.
    Eigen::MatrixXcd obs(channels, frames);
    for (int c = 0; c < channels; ++c)
      for (int t = 0; t < frames; ++t) obs(c, t) = s.at(c, f, t);

    const double mean_power = obs.squaredNorm() / (channels * frames);
    if (mean_power <= 0.0) continue;  // silent bin stays as-is
    const double floor = cfg.variance_floor * mean_power;

    // Delayed stacked regressors: column t holds y(t-D), ..., y(t-D-K+1),
    // zero-padded at the start.
    Eigen::MatrixXcd delayed = Eigen::MatrixXcd::Zero(stacked, frames);
    for (int k = 0; k < cfg.taps; ++k)
      for (int t = 0; t < frames; ++t) {
        const int src = t - cfg.delay - k;
        if (src >= 0) delayed.block(k * channels, t, channels, 1) = obs.col(src);
      }

    Eigen::MatrixXcd estimate = obs;
    Eigen::VectorXd variance(frames);
    for (int it = 0; it < cfg.iterations; ++it) {
      for (int t = 0; t < frames; ++t)
        variance(t) = std::max(estimate.col(t).squaredNorm() / channels, floor);

      Eigen::MatrixXcd normal = Eigen::MatrixXcd::Zero(stacked, stacked);
      Eigen::MatrixXcd cross = Eigen::MatrixXcd::Zero(stacked, channels);
      for (int t = 0; t < frames; ++t) {
        const double w = 1.0 / variance(t);
        normal.noalias() += w * delayed.col(t) * delayed.col(t).adjoint();
        cross.noalias() += w * delayed.col(t) * obs.col(t).adjoint();
      }
      const double ridge = 1e-10 * normal.trace().real();
      normal += ridge * Eigen::MatrixXcd::Identity(stacked, stacked);

      Eigen::MatrixXcd filter = normal.ldlt().solve(cross);
      estimate = obs - (filter.adjoint() * delayed);
      result.filter_norm[static_cast<std::size_t>(f)] = filter.norm();

      double objective = 0.0;
      for (int t = 0; t < frames; ++t)
        objective += channels * std::log(variance(t)) +
                     estimate.col(t).squaredNorm() / variance(t);
      result.objective[static_cast<std::size_t>(f)][static_cast<std::size_t>(it)] = objective;
    }

    for (int c = 0; c < channels; ++c)
      for (int t = 0; t < frames; ++t) result.spectrogram.at(c, f, t) = estimate(c, t);
  }
  return result;
}

}  // namespace ffsv
