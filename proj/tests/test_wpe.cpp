#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "ffsv/error.hpp"
#include "ffsv/reference.hpp"
#include "ffsv/rng.hpp"
#include "ffsv/room_sim.hpp"
#include "ffsv/stft.hpp"
#include "ffsv/wpe.hpp"

using namespace ffsv;

namespace {

StftConfig small_stft() {
  StftConfig cfg;
  cfg.window_length = 256;
  cfg.hop_length = 64;
  cfg.fft_size = 256;
  return cfg;
}

// amplitude-modulated white noise: variance structure like speech
Waveform modulated_noise(std::size_t samples, int fs, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(samples);
  const std::size_t seg = static_cast<std::size_t>(0.1 * fs);
  double level = 1.0;
  for (std::size_t i = 0; i < samples; ++i) {
    if (i % seg == 0) level = 0.15 + rng.uniform();
    x[i] = 0.3 * level * rng.normal();
  }
  return make_mono(std::move(x), fs);
}

double relative_l2(const ComplexSpectrogram& a, const ComplexSpectrogram& b) {
  double num = 0.0, den = 0.0;
  for (int c = 0; c < a.num_channels(); ++c)
    for (int f = 0; f < a.bins; ++f)
      for (int t = 0; t < a.frames; ++t) {
        num += std::norm(a.at(c, f, t) - b.at(c, f, t));
        den += std::norm(b.at(c, f, t));
      }
  return std::sqrt(num / den);
}

// best-scale projection of y onto the direct-path image
double drr_db(const std::vector<double>& y, const std::vector<double>& direct) {
  const std::size_t n = std::min(y.size(), direct.size());
  double dot = 0.0, dd = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    dot += y[i] * direct[i];
    dd += direct[i] * direct[i];
  }
  const double alpha = dot / dd;
  double sig = 0.0, res = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = alpha * direct[i];
    sig += d * d;
    const double r = y[i] - d;
    res += r * r;
  }
  return 10.0 * std::log10(sig / res);
}

}  // namespace

TEST_CASE("all-zero spectrogram passes through as zeros") {
  auto s = stft(make_mono(std::vector<double>(4000, 0.0), 8000), small_stft());
  auto result = wpe(s, WpeConfig{});
  for (const auto& ch : result.spectrogram.channels)
    for (const auto& v : ch) CHECK(std::abs(v) == 0.0);
}

TEST_CASE("wpe preserves shape") {
  Rng rng(3);
  Waveform w;
  w.sample_rate = 8000;
  w.channels.resize(3);
  for (auto& ch : w.channels) {
    ch.resize(4000);
    for (auto& v : ch) v = 0.3 * rng.normal();
  }
  auto s = stft(w, small_stft());
  auto y = wpe(s, WpeConfig{}).spectrogram;
  CHECK(y.num_channels() == s.num_channels());
  CHECK(y.bins == s.bins);
  CHECK(y.frames == s.frames);
}

TEST_CASE("anechoic input is nearly untouched") {
  // white source through a fully absorptive room: delay and scaling only, so
  // the prediction of the innovation from its own past stays near zero
  RoomConfig room;
  room.dimensions = {6.0, 5.0, 3.0};
  room.reflection.fill(0.0);
  room.source = {2.0, 2.5, 1.5};
  room.mics = {{3.5, 2.4, 1.5}};
  room.sample_rate = 8000;
  room.max_order = 0;

  Rng rng(9);
  std::vector<double> x(400000);
  for (auto& v : x) v = 0.3 * rng.normal();
  auto observed = convolve_rir(make_mono(std::move(x), 8000), simulate_rir(room));

  StftConfig scfg = small_stft();
  scfg.hop_length = 128;  // delay * hop spans the window: frames decorrelate
  auto s = stft(observed, scfg);
  WpeConfig cfg;
  cfg.taps = 6;
  cfg.delay = 3;
  auto result = wpe(s, cfg);

  CHECK(relative_l2(result.spectrogram, s) < 0.05);
  double norm_sq = 0.0;
  for (double n : result.filter_norm) norm_sq += n * n;
  CHECK(std::sqrt(norm_sq / static_cast<double>(result.filter_norm.size())) < 0.1);
}

TEST_CASE("strong reverberation: DRR improves by at least 3 dB") {
  const int fs = 8000;
  RoomConfig room;
  room.dimensions = {6.0, 5.0, 3.0};
  room.reflection.fill(0.9);  // T60 around half a second
  room.source = {1.5, 2.0, 1.5};
  room.mics = {{3.6, 3.0, 1.4}, {3.65, 3.05, 1.4}, {3.6, 3.1, 1.4}, {3.55, 3.05, 1.4}};
  room.sample_rate = fs;
  room.max_order = 30;

  const Rir rir = simulate_rir(room);
  // split each mic response at direct arrival + 4 ms
  double d0 = 0.0;
  {
    const double dx = room.source[0] - room.mics[0][0];
    const double dy = room.source[1] - room.mics[0][1];
    const double dz = room.source[2] - room.mics[0][2];
    d0 = std::sqrt(dx * dx + dy * dy + dz * dz);
  }
  const std::size_t split =
      static_cast<std::size_t>(d0 / 343.0 * fs + 0.004 * fs);

  Rir direct = rir, tail = rir;
  for (int m = 0; m < rir.num_mics(); ++m) {
    auto& dch = direct.channels[static_cast<std::size_t>(m)];
    auto& tch = tail.channels[static_cast<std::size_t>(m)];
    for (std::size_t i = 0; i < dch.size(); ++i) {
      if (i < split)
        tch[i] = 0.0;
      else
        dch[i] = 0.0;
    }
  }

  auto clean = modulated_noise(12000, fs, 11);
  auto x_direct = convolve_rir(clean, direct);
  auto x_tail = convolve_rir(clean, tail);
  Waveform observed = x_direct;
  for (int c = 0; c < observed.num_channels(); ++c)
    for (std::size_t i = 0; i < observed.num_samples(); ++i)
      observed.channels[static_cast<std::size_t>(c)][i] +=
          x_tail.channels[static_cast<std::size_t>(c)][i];

  auto s = stft(observed, small_stft());
  WpeConfig cfg;
  cfg.taps = 10;
  cfg.delay = 2;
  cfg.iterations = 3;
  auto dereverbed = istft(wpe(s, cfg).spectrogram);

  const double before = drr_db(observed.channels[0], x_direct.channels[0]);
  std::vector<double> ref_direct(x_direct.channels[0].begin(),
                                 x_direct.channels[0].begin() +
                                     static_cast<long>(dereverbed.num_samples()));
  const double after = drr_db(dereverbed.channels[0], ref_direct);
  CAPTURE(before);
  CAPTURE(after);
  CHECK(after - before >= 3.0);
}

TEST_CASE("scale equivariance") {
  Rng rng(13);
  Waveform w;
  w.sample_rate = 8000;
  w.channels.resize(2);
  for (auto& ch : w.channels) {
    ch.resize(3000);
    for (auto& v : ch) v = 0.2 * rng.normal();
  }
  auto s = stft(w, small_stft());
  ComplexSpectrogram scaled = s;
  for (auto& ch : scaled.channels)
    for (auto& v : ch) v *= 37.5;

  WpeConfig cfg;
  cfg.taps = 6;
  auto a = wpe(s, cfg).spectrogram;
  auto b = wpe(scaled, cfg).spectrogram;
  double num = 0.0, den = 0.0;
  for (int c = 0; c < a.num_channels(); ++c)
    for (int f = 0; f < a.bins; ++f)
      for (int t = 0; t < a.frames; ++t) {
        num += std::norm(37.5 * a.at(c, f, t) - b.at(c, f, t));
        den += std::norm(b.at(c, f, t));
      }
  CHECK(std::sqrt(num / den) < 1e-6);
}

TEST_CASE("per-bin objective never increases") {
  Rng rng(17);
  Waveform w;
  w.sample_rate = 8000;
  w.channels.resize(2);
  for (auto& ch : w.channels) {
    ch.resize(3000);
    for (auto& v : ch) v = 0.2 * rng.normal();
  }
  auto s = stft(w, small_stft());
  WpeConfig cfg;
  cfg.taps = 6;
  cfg.iterations = 5;
  auto result = wpe(s, cfg);
  for (const auto& bin : result.objective)
    for (std::size_t it = 1; it < bin.size(); ++it)
      CHECK(bin[it] <= bin[it - 1] + 1e-9 * std::abs(bin[it - 1]));
}

TEST_CASE("parallel kernel matches the serial reference") {
  Rng rng(19);
  Waveform w;
  w.sample_rate = 8000;
  w.channels.resize(3);
  for (auto& ch : w.channels) {
    ch.resize(2500);
    for (auto& v : ch) v = 0.3 * rng.normal();
  }
  auto s = stft(w, small_stft());
  WpeConfig cfg;
  cfg.taps = 5;
  cfg.iterations = 2;
  auto fast = wpe(s, cfg).spectrogram;
  auto slow = ref::wpe(s, cfg);
  CHECK(relative_l2(fast, slow) < 1e-6);
}

TEST_CASE("too few frames is an error") {
  auto s = stft(make_mono(std::vector<double>(400, 0.1), 8000), small_stft());
  REQUIRE(s.frames <= 13);
  CHECK_THROWS_AS(wpe(s, WpeConfig{}), Error);  // delay 3 + taps 10 >= frames
}

TEST_CASE("config validation") {
  WpeConfig cfg;
  cfg.taps = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = WpeConfig{};
  cfg.variance_floor = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}
