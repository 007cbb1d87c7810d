#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <complex>

#include "doctest.h"
#include "ffsv/cgmm_mvdr.hpp"
#include "ffsv/error.hpp"
#include "ffsv/reference.hpp"
#include "ffsv/rng.hpp"
#include "ffsv/room_sim.hpp"
#include "ffsv/stft.hpp"

using namespace ffsv;

namespace {

std::complex<double> complex_normal(Rng& rng) {
  return {rng.normal() * M_SQRT1_2, rng.normal() * M_SQRT1_2};
}

ComplexSpectrogram empty_spec(int channels, int bins, int frames) {
  ComplexSpectrogram s;
  s.bins = bins;
  s.frames = frames;
  s.sample_rate = 8000;
  s.channels.assign(static_cast<std::size_t>(channels),
                    std::vector<std::complex<double>>(
                        static_cast<std::size_t>(bins) * frames));
  return s;
}

ComplexSpectrogram random_spec(int channels, int bins, int frames, std::uint64_t seed) {
  auto s = empty_spec(channels, bins, frames);
  Rng rng(seed);
  for (auto& ch : s.channels)
    for (auto& v : ch) v = complex_normal(rng);
  return s;
}

}  // namespace

TEST_CASE("responsibilities recover well-separated synthetic components") {
  const int channels = 3, bins = 6, frames = 160;
  auto s = empty_spec(channels, bins, frames);
  Rng rng(5);
  std::vector<std::vector<bool>> is_speech(static_cast<std::size_t>(bins),
                                           std::vector<bool>(static_cast<std::size_t>(frames)));
  for (int f = 0; f < bins; ++f) {
    // fixed direction per bin
    Eigen::VectorXcd d(channels);
    for (int c = 0; c < channels; ++c) d(c) = complex_normal(rng);
    d.normalize();
    for (int t = 0; t < frames; ++t) {
      const bool speech = rng.uniform() < 0.5;
      is_speech[static_cast<std::size_t>(f)][static_cast<std::size_t>(t)] = speech;
      const std::complex<double> src = std::polar(3.0, rng.uniform(0.0, 2.0 * M_PI));
      for (int c = 0; c < channels; ++c)
        s.at(c, f, t) =
            speech ? d(c) * src + 0.2 * complex_normal(rng) : complex_normal(rng);
    }
  }

  CgmmConfig cfg;
  auto result = cgmm_masks(s, cfg);
  int agree = 0, total = 0;
  for (int f = 0; f < bins; ++f)
    for (int t = 0; t < frames; ++t) {
      const bool predicted = result.speech.at(f, t) > 0.5;
      agree += predicted == is_speech[static_cast<std::size_t>(f)][static_cast<std::size_t>(t)];
      ++total;
    }
  CHECK(static_cast<double>(agree) / total > 0.9);
}

TEST_CASE("identical initialization on white data stays at one half") {
  auto s = random_spec(2, 5, 40, 7);
  TfMask init(5, 40);
  for (auto& v : init.m) v = 0.5;
  CgmmConfig cfg;
  cfg.iterations = 10;
  auto result = cgmm_masks_with_init(s, cfg, init);
  for (int f = 0; f < 5; ++f)
    for (int t = 0; t < 40; ++t)
      CHECK(std::abs(result.speech.at(f, t) - 0.5) < 1e-3);
}

TEST_CASE("masks are complementary") {
  auto s = random_spec(3, 8, 50, 11);
  auto result = cgmm_masks(s, CgmmConfig{});
  for (int f = 0; f < 8; ++f)
    for (int t = 0; t < 50; ++t) {
      CHECK(result.speech.at(f, t) >= 0.0);
      CHECK(result.speech.at(f, t) <= 1.0);
      CHECK(std::abs(result.speech.at(f, t) + result.noise.at(f, t) - 1.0) < 1e-9);
    }
}

TEST_CASE("per-bin log-likelihood never decreases") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull}) {
    auto s = random_spec(2, 6, 48, 100 + seed);
    CgmmConfig cfg;
    cfg.iterations = 15;
    cfg.init = CgmmConfig::Init::random_responsibility;
    cfg.seed = seed;
    auto result = cgmm_masks(s, cfg);
    for (const auto& bin : result.loglik)
      for (std::size_t it = 1; it < bin.size(); ++it)
        CHECK(bin[it] >= bin[it - 1] - 1e-8 * std::abs(bin[it - 1]));
  }
}

TEST_CASE("cgmm input validation") {
  auto mono = random_spec(1, 4, 40, 13);
  CHECK_THROWS_AS(cgmm_masks(mono, CgmmConfig{}), Error);
  auto short_spec = random_spec(3, 4, 5, 17);
  CHECK_THROWS_AS(cgmm_masks(short_spec, CgmmConfig{}), Error);
}

TEST_CASE("parallel EM matches the serial reference") {
  auto s = random_spec(3, 10, 60, 19);
  TfMask init(10, 60);
  Rng rng(23);
  for (auto& v : init.m) v = rng.uniform();
  CgmmConfig cfg;
  cfg.iterations = 8;
  auto fast = cgmm_masks_with_init(s, cfg, init);
  auto slow = ref::cgmm_masks(s, cfg, init);
  double max_diff = 0.0;
  for (std::size_t i = 0; i < fast.speech.m.size(); ++i)
    max_diff = std::max(max_diff, std::abs(fast.speech.m[i] - slow.speech.m[i]));
  CHECK(max_diff < 1e-6);
}

// -------------------------------------------------------------- covariances

TEST_CASE("all-ones mask gives the plain average outer product") {
  auto s = random_spec(2, 3, 20, 29);
  TfMask ones(3, 20);
  for (auto& v : ones.m) v = 1.0;
  auto cov = estimate_covariances(s, ones);
  for (int f = 0; f < 3; ++f) {
    Eigen::MatrixXcd manual = Eigen::MatrixXcd::Zero(2, 2);
    for (int t = 0; t < 20; ++t) {
      Eigen::VectorXcd x(2);
      x << s.at(0, f, t), s.at(1, f, t);
      manual += x * x.adjoint();
    }
    manual /= 20.0;
    CHECK((cov.bins[static_cast<std::size_t>(f)] - manual).norm() < 1e-12);
  }
}

TEST_CASE("all-zero mask falls back to the unmasked average") {
  auto s = random_spec(2, 3, 20, 31);
  TfMask zeros(3, 20);
  TfMask ones(3, 20);
  for (auto& v : ones.m) v = 1.0;
  auto fallback = estimate_covariances(s, zeros);
  auto plain = estimate_covariances(s, ones);
  for (int f = 0; f < 3; ++f)
    CHECK((fallback.bins[static_cast<std::size_t>(f)] -
           plain.bins[static_cast<std::size_t>(f)]).norm() < 1e-12);
}

TEST_CASE("hand-built two-channel three-frame covariance") {
  auto s = empty_spec(2, 1, 3);
  s.at(0, 0, 0) = {1.0, 0.0};
  s.at(1, 0, 0) = {0.0, 1.0};
  s.at(0, 0, 1) = {2.0, 0.0};
  s.at(1, 0, 1) = {0.0, 0.0};
  s.at(0, 0, 2) = {0.0, -1.0};
  s.at(1, 0, 2) = {1.0, 1.0};
  TfMask mask(1, 3);
  mask.at(0, 0) = 0.5;
  mask.at(0, 1) = 1.0;
  mask.at(0, 2) = 0.25;

  auto cov = estimate_covariances(s, mask);
  // manual: sum_t m_t x_t x_t^H / sum_t m_t
  Eigen::MatrixXcd expect = Eigen::MatrixXcd::Zero(2, 2);
  Eigen::VectorXcd x0(2), x1(2), x2(2);
  x0 << std::complex<double>(1, 0), std::complex<double>(0, 1);
  x1 << std::complex<double>(2, 0), std::complex<double>(0, 0);
  x2 << std::complex<double>(0, -1), std::complex<double>(1, 1);
  expect = (0.5 * x0 * x0.adjoint() + 1.0 * x1 * x1.adjoint() +
            0.25 * x2 * x2.adjoint()) /
           1.75;
  CHECK((cov.bins[0] - expect).norm() < 1e-12);
}

// --------------------------------------------------------------------- mvdr

TEST_CASE("identity noise with a canonical steering vector selects channel 0") {
  SpatialCovariance noise, speech;
  noise.bins = {Eigen::MatrixXcd::Identity(3, 3)};
  Eigen::VectorXcd d(3);
  d << 1.0, 0.0, 0.0;
  speech.bins = {d * d.adjoint()};
  auto w = mvdr_weights(noise, speech);
  CHECK((w.bins[0] - d).norm() < 1e-9);
}

TEST_CASE("identity noise returns the steering vector itself") {
  Rng rng(37);
  Eigen::VectorXcd d(4);
  for (int c = 0; c < 4; ++c) d(c) = complex_normal(rng);
  d.normalize();
  d *= std::conj(d(0)) / std::abs(d(0));  // anchored like the implementation

  SpatialCovariance noise, speech;
  noise.bins = {Eigen::MatrixXcd::Identity(4, 4)};
  speech.bins = {d * d.adjoint()};
  auto w = mvdr_weights(noise, speech);
  CHECK((w.bins[0] - d).norm() < 1e-9);
  CHECK(std::abs(w.bins[0].dot(d) - 1.0) < 1e-10);
}

TEST_CASE("mvdr is distortionless and beats random distortionless perturbations") {
  Rng rng(41);
  const int c = 4;
  Eigen::MatrixXcd a(c, c);
  for (int i = 0; i < c; ++i)
    for (int j = 0; j < c; ++j) a(i, j) = complex_normal(rng);
  Eigen::MatrixXcd rn = a * a.adjoint() + 0.1 * Eigen::MatrixXcd::Identity(c, c);
  Eigen::VectorXcd d(c);
  for (int i = 0; i < c; ++i) d(i) = complex_normal(rng);
  d.normalize();

  SpatialCovariance noise, speech;
  noise.bins = {rn};
  speech.bins = {d * d.adjoint()};
  auto weights = mvdr_weights(noise, speech);
  const Eigen::VectorXcd& w = weights.bins[0];

  // principal_eigenvector re-anchors the phase; check against its d
  Eigen::VectorXcd d_used = principal_eigenvector(speech.bins[0]);
  CHECK(std::abs(w.dot(d_used) - 1.0) < 1e-10);

  const double base = std::real(w.dot(rn * w));
  for (int trial = 0; trial < 1000; ++trial) {
    Eigen::VectorXcd u(c);
    for (int i = 0; i < c; ++i) u(i) = 0.3 * complex_normal(rng);
    u -= d_used * d_used.dot(u);  // keep w + u distortionless
    Eigen::VectorXcd w2 = w + u;
    CHECK(std::real(w2.dot(rn * w2)) >= base - 1e-12);
  }
}

TEST_CASE("singular noise covariance is reported") {
  SpatialCovariance noise, speech;
  noise.bins = {Eigen::MatrixXcd::Zero(2, 2)};
  Eigen::VectorXcd d(2);
  d << 1.0, 0.0;
  speech.bins = {d * d.adjoint()};
  CHECK_THROWS_AS(mvdr_weights(noise, speech), Error);
}

// ---------------------------------------------------------------- beamform

TEST_CASE("selector weights pick one channel and zero input stays zero") {
  auto s = random_spec(3, 4, 10, 43);
  BeamformerWeights w;
  Eigen::VectorXcd e0(3);
  e0 << 1.0, 0.0, 0.0;
  w.bins.assign(4, e0);
  auto y = apply_beamformer(s, w);
  REQUIRE(y.num_channels() == 1);
  for (int f = 0; f < 4; ++f)
    for (int t = 0; t < 10; ++t) CHECK(std::abs(y.at(0, f, t) - s.at(0, f, t)) < 1e-12);

  auto zeros = empty_spec(3, 4, 10);
  auto yz = apply_beamformer(zeros, w);
  for (const auto& v : yz.channels[0]) CHECK(std::abs(v) == 0.0);
}

TEST_CASE("full mask-based MVDR gains at least 5 dB on a point source in white noise") {
  // equidistant circular array under the source: equal direct-path gains
  const int fs = 8000;
  RoomConfig room;
  room.dimensions = {6.0, 5.0, 3.0};
  room.reflection.fill(0.0);
  room.max_order = 0;
  room.sample_rate = fs;
  const double cx = 3.0, cy = 2.5;
  for (int m = 0; m < 4; ++m) {
    const double phi = 2.0 * M_PI * m / 4.0;
    room.mics.push_back({cx + 0.05 * std::cos(phi), cy + 0.05 * std::sin(phi), 1.2});
  }
  room.source = {cx, cy, 2.4};

  // bursty source so noise-only frames exist
  Rng rng(47);
  std::vector<double> src(24000);
  const std::size_t seg = 800;
  bool on = true;
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (i % seg == 0) on = rng.uniform() < 0.55;
    src[i] = on ? 0.4 * rng.normal() : 0.0;
  }
  auto image = convolve_rir(make_mono(std::move(src), fs), simulate_rir(room));

  Waveform noise;
  noise.sample_rate = fs;
  noise.channels.resize(4);
  for (auto& ch : noise.channels) {
    ch.resize(image.num_samples());
    for (auto& v : ch) v = rng.normal();
  }
  // scale noise for 0 dB overall
  double p_sig = 0.0, p_noise = 0.0;
  for (int c = 0; c < 4; ++c)
    for (std::size_t i = 0; i < image.num_samples(); ++i) {
      p_sig += image.channels[static_cast<std::size_t>(c)][i] *
               image.channels[static_cast<std::size_t>(c)][i];
      p_noise += noise.channels[static_cast<std::size_t>(c)][i] *
                 noise.channels[static_cast<std::size_t>(c)][i];
    }
  const double scale = std::sqrt(p_sig / p_noise);
  for (auto& ch : noise.channels)
    for (auto& v : ch) v *= scale;

  Waveform mixture = image;
  for (int c = 0; c < 4; ++c)
    for (std::size_t i = 0; i < mixture.num_samples(); ++i)
      mixture.channels[static_cast<std::size_t>(c)][i] +=
          noise.channels[static_cast<std::size_t>(c)][i];

  StftConfig scfg;
  scfg.window_length = 256;
  scfg.hop_length = 64;
  scfg.fft_size = 256;
  auto spec_mix = stft(mixture, scfg);
  auto spec_sig = stft(image, scfg);
  auto spec_noise = stft(noise, scfg);

  auto masks = cgmm_masks(spec_mix, CgmmConfig{});
  auto rn = estimate_covariances(spec_mix, masks.noise, 1e-6);
  auto rs = estimate_covariances(spec_mix, masks.speech, 1e-6);
  auto w = mvdr_weights(rn, rs);

  auto out_sig = apply_beamformer(spec_sig, w);
  auto out_noise = apply_beamformer(spec_noise, w);

  auto power = [](const ComplexSpectrogram& s, int channel) {
    double p = 0.0;
    for (const auto& v : s.channels[static_cast<std::size_t>(channel)]) p += std::norm(v);
    return p;
  };
  const double snr_in =
      10.0 * std::log10(power(spec_sig, 0) / power(spec_noise, 0));
  const double snr_out =
      10.0 * std::log10(power(out_sig, 0) / power(out_noise, 0));
  CAPTURE(snr_in);
  CAPTURE(snr_out);
  CHECK(snr_out - snr_in >= 5.0);

  // MVDR no worse than any distortionless-scaled single-channel selector
  // against its own noise covariance (white noise makes the unscaled selector
  // an equality, so the scaled bound is the meaningful one)
  for (int f = 0; f < spec_mix.bins; ++f) {
    const auto& wf = w.bins[static_cast<std::size_t>(f)];
    const auto& rnf = rn.bins[static_cast<std::size_t>(f)];
    const Eigen::VectorXcd df =
        principal_eigenvector(rs.bins[static_cast<std::size_t>(f)]);
    const double beamformed = std::real(wf.dot(rnf * wf));
    for (int c = 0; c < 4; ++c) {
      const double response = std::norm(df(c));
      if (response < 1e-6) continue;
      CHECK(beamformed <= std::real(rnf(c, c)) / response + 1e-9);
    }
  }
}

TEST_CASE("apply_beamformer validates shapes") {
  auto s = random_spec(3, 4, 10, 53);
  BeamformerWeights w;
  w.bins.assign(3, Eigen::VectorXcd::Ones(3));  // wrong bin count
  CHECK_THROWS_AS(apply_beamformer(s, w), Error);
  w.bins.assign(4, Eigen::VectorXcd::Ones(2));  // wrong channel count
  CHECK_THROWS_AS(apply_beamformer(s, w), Error);
}
