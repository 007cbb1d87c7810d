#include "ffsv/stft.hpp"

#include <cmath>

#include "ffsv/error.hpp"
#include "ffsv/fft.hpp"

namespace ffsv {

std::vector<double> make_window(WindowType type, int length) {
  std::vector<double> w(static_cast<std::size_t>(length));
  for (int n = 0; n < length; ++n) {
    double c = std::cos(2.0 * M_PI * n / length);
    w[static_cast<std::size_t>(n)] =
        type == WindowType::hann ? 0.5 - 0.5 * c : 0.54 - 0.46 * c;
  }
  return w;
}

void StftConfig::validate() const {
  if (window_length <= 0 || hop_length <= 0)
    throw Error("stft: window and hop must be positive");
  if (hop_length > window_length)
    throw Error("stft: hop_length must not exceed window_length");
  if (!is_power_of_two(fft_size) || fft_size < window_length)
    throw Error("stft: fft_size must be a power of two >= window_length");
  if (!is_cola(*this))
    throw Error("stft: window/hop pair does not satisfy constant overlap-add");
}

bool is_cola(const StftConfig& cfg, double tol) {
  auto w = make_window(cfg.window, cfg.window_length);
  // Interior sample positions repeat with period hop; tile enough shifts.
  std::vector<double> sum(static_cast<std::size_t>(cfg.hop_length), 0.0);
  for (int start = 0; start < cfg.window_length; start += cfg.hop_length) {
    for (int n = 0; n < cfg.hop_length; ++n) {
      int idx = start + n;
      if (idx < cfg.window_length)
        sum[static_cast<std::size_t>(n)] += w[static_cast<std::size_t>(idx)];
    }
  }
  double lo = sum[0], hi = sum[0];
  for (double s : sum) {
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  return hi > 0 && (hi - lo) <= tol * hi;
}

ComplexSpectrogram stft(const Waveform& w, const StftConfig& cfg) {
  cfg.validate();
  w.validate();
  const int len = static_cast<int>(w.num_samples());
  if (len < cfg.window_length)
    throw Error("stft: waveform shorter than one window");

  const int frames = 1 + (len - cfg.window_length) / cfg.hop_length;
  const int bins = cfg.fft_size / 2 + 1;
  const auto win = make_window(cfg.window, cfg.window_length);

  ComplexSpectrogram s;
  s.bins = bins;
  s.frames = frames;
  s.config = cfg;
  s.sample_rate = w.sample_rate;
  s.channels.assign(static_cast<std::size_t>(w.num_channels()),
                    std::vector<std::complex<double>>(
                        static_cast<std::size_t>(bins) * frames));

  for (int c = 0; c < w.num_channels(); ++c) {
    const auto& x = w.channels[static_cast<std::size_t>(c)];
#pragma omp parallel for schedule(static)
    for (int t = 0; t < frames; ++t) {
      std::vector<double> frame(static_cast<std::size_t>(cfg.window_length));
      const int off = t * cfg.hop_length;
      for (int n = 0; n < cfg.window_length; ++n)
        frame[static_cast<std::size_t>(n)] =
            x[static_cast<std::size_t>(off + n)] * win[static_cast<std::size_t>(n)];
      auto spec = rfft(frame, cfg.fft_size);
      for (int f = 0; f < bins; ++f) s.at(c, f, t) = spec[static_cast<std::size_t>(f)];
    }
  }
  return s;
}

Waveform istft(const ComplexSpectrogram& s) {
  s.config.validate();
  if (s.num_channels() == 0 || s.frames <= 0)
    throw Error("istft: empty spectrogram");
  const StftConfig& cfg = s.config;
  const int len = cfg.window_length + (s.frames - 1) * cfg.hop_length;
  const auto win = make_window(cfg.window, cfg.window_length);

  // Per-sample shifted window sum; zero where no frame covers a sample.
  std::vector<double> norm(static_cast<std::size_t>(len), 0.0);
  for (int t = 0; t < s.frames; ++t)
    for (int n = 0; n < cfg.window_length; ++n)
      norm[static_cast<std::size_t>(t * cfg.hop_length + n)] +=
          win[static_cast<std::size_t>(n)];
  double norm_max = 0.0;
  for (double v : norm) norm_max = std::max(norm_max, v);
  const double norm_floor = 1e-8 * norm_max;

  Waveform out;
  out.sample_rate = s.sample_rate;
  out.channels.assign(static_cast<std::size_t>(s.num_channels()),
                      std::vector<double>(static_cast<std::size_t>(len), 0.0));

  for (int c = 0; c < s.num_channels(); ++c) {
    std::vector<double> acc(static_cast<std::size_t>(len), 0.0);
    for (int t = 0; t < s.frames; ++t) {
      std::vector<std::complex<double>> bins(static_cast<std::size_t>(s.bins));
      for (int f = 0; f < s.bins; ++f) bins[static_cast<std::size_t>(f)] = s.at(c, f, t);
      auto frame = irfft(bins, cfg.fft_size);
      const int off = t * cfg.hop_length;
      for (int n = 0; n < cfg.window_length; ++n)
        acc[static_cast<std::size_t>(off + n)] += frame[static_cast<std::size_t>(n)];
    }
    auto& y = out.channels[static_cast<std::size_t>(c)];
    for (int i = 0; i < len; ++i) {
      y[static_cast<std::size_t>(i)] =
          norm[static_cast<std::size_t>(i)] > norm_floor
              ? acc[static_cast<std::size_t>(i)] / norm[static_cast<std::size_t>(i)]
              : 0.0;
    }
  }
  return out;
}

}  // namespace ffsv
