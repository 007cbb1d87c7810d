#include <cmath>

#include "ffsv/error.hpp"
#include "ffsv/features.hpp"
#include "ffsv/fft.hpp"
#include "ffsv/stft.hpp"

namespace ffsv {

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace

int frame_length_samples(double ms, int sample_rate) {
  return static_cast<int>(std::lround(ms * 1e-3 * sample_rate));
}

int frame_count(std::size_t num_samples, int frame_length, int hop_length) {
  if (num_samples < static_cast<std::size_t>(frame_length)) return 0;
  return 1 + static_cast<int>((num_samples - static_cast<std::size_t>(frame_length)) /
                              static_cast<std::size_t>(hop_length));
}

FeatureMatrix mfcc(const Waveform& w, const MfccConfig& cfg) {
  w.validate();
  if (w.num_channels() != 1) throw Error("mfcc: input must be mono");
  if (w.sample_rate < 8000) throw Error("mfcc: sample rate must be >= 8 kHz");

  const int frame_len = frame_length_samples(cfg.frame_ms, w.sample_rate);
  const int hop = frame_length_samples(cfg.hop_ms, w.sample_rate);
  const int frames = frame_count(w.num_samples(), frame_len, hop);
  if (frames == 0) throw Error("mfcc: input shorter than one frame");

  const int nfft = next_power_of_two(frame_len);
  const int bins = nfft / 2 + 1;
  const double nyquist = 0.5 * w.sample_rate;
  const double high_freq = nyquist - cfg.high_freq_offset;
  if (cfg.low_freq >= high_freq) throw Error("mfcc: empty mel range");

  // Pre-emphasis over the whole signal; x[-1] treated as x[0].
  const auto& x = w.channels[0];
  std::vector<double> pre(x.size());
  pre[0] = x[0] - cfg.preemphasis * x[0];
  for (std::size_t n = 1; n < x.size(); ++n)
    pre[n] = x[n] - cfg.preemphasis * x[n - 1];

  const auto win = make_window(WindowType::hamming, frame_len);

  // Triangular mel filters evaluated at bin center frequencies, height 1.
  const int m = cfg.num_filters;
  std::vector<double> edges(static_cast<std::size_t>(m) + 2);
  const double mel_lo = hz_to_mel(cfg.low_freq);
  const double mel_hi = hz_to_mel(high_freq);
  for (int i = 0; i < m + 2; ++i)
    edges[static_cast<std::size_t>(i)] =
        mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (m + 1));
  std::vector<std::vector<double>> bank(static_cast<std::size_t>(m),
                                        std::vector<double>(static_cast<std::size_t>(bins), 0.0));
  for (int j = 0; j < m; ++j) {
    const double left = edges[static_cast<std::size_t>(j)];
    const double center = edges[static_cast<std::size_t>(j) + 1];
    const double right = edges[static_cast<std::size_t>(j) + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * w.sample_rate / nfft;
      double weight = 0.0;
      if (f > left && f < center)
        weight = (f - left) / (center - left);
      else if (f >= center && f < right)
        weight = (right - f) / (right - center);
      bank[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] = weight;
    }
  }

  FeatureMatrix out(frames, cfg.num_coeffs);
#pragma omp parallel for schedule(static)
  for (int t = 0; t < frames; ++t) {
    std::vector<double> frame(static_cast<std::size_t>(frame_len));
    for (int n = 0; n < frame_len; ++n)
      frame[static_cast<std::size_t>(n)] =
          pre[static_cast<std::size_t>(t * hop + n)] * win[static_cast<std::size_t>(n)];
    auto spec = rfft(frame, nfft);
    std::vector<double> power(static_cast<std::size_t>(bins));
    for (int k = 0; k < bins; ++k) power[static_cast<std::size_t>(k)] = std::norm(spec[static_cast<std::size_t>(k)]);

    std::vector<double> logmel(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) {
      double e = 0.0;
      const auto& fw = bank[static_cast<std::size_t>(j)];
      for (int k = 0; k < bins; ++k) e += fw[static_cast<std::size_t>(k)] * power[static_cast<std::size_t>(k)];
      logmel[static_cast<std::size_t>(j)] = std::log(std::max(e, cfg.log_floor));
    }

    // Orthonormal DCT-II.
    for (int k = 0; k < cfg.num_coeffs; ++k) {
      double acc = 0.0;
      for (int j = 0; j < m; ++j)
        acc += logmel[static_cast<std::size_t>(j)] *
               std::cos(M_PI * k * (2.0 * j + 1.0) / (2.0 * m));
      const double scale = k == 0 ? std::sqrt(1.0 / m) : std::sqrt(2.0 / m);
      out.at(t, k) = scale * acc;
    }
  }
  return out;
}

}  // namespace ffsv
