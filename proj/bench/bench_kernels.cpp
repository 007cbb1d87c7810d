// Times the OpenMP kernels against the serial reference implementations.
#include <chrono>
#include <cstdio>
#include <functional>

#include "ffsv/cgmm_mvdr.hpp"
#include "ffsv/fft.hpp"
#include "ffsv/reference.hpp"
#include "ffsv/rng.hpp"
#include "ffsv/room_sim.hpp"
#include "ffsv/stft.hpp"
#include "ffsv/wpe.hpp"

using namespace ffsv;

namespace {

double time_ms(const std::function<void()>& fn, int repeats) {
  fn();  // warm-up
  auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < repeats; ++i) fn();
  auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(stop - start).count() / repeats;
}

void report(const char* name, double parallel_ms, double serial_ms) {
  std::printf("%-18s parallel %9.2f ms   serial %9.2f ms   speedup %.2fx\n", name,
              parallel_ms, serial_ms, serial_ms / parallel_ms);
}

ComplexSpectrogram random_spectrogram(int channels, int bins_pow2, int frames,
                                      std::uint64_t seed) {
  Rng rng(seed);
  Waveform w;
  w.sample_rate = 16000;
  const int fft = 2 * (bins_pow2 - 1);
  StftConfig cfg;
  cfg.window_length = fft;
  cfg.hop_length = fft / 4;
  cfg.fft_size = fft;
  const std::size_t samples =
      static_cast<std::size_t>(cfg.window_length) + (frames - 1) * cfg.hop_length;
  w.channels.resize(static_cast<std::size_t>(channels));
  for (auto& ch : w.channels) {
    ch.resize(samples);
    for (auto& s : ch) s = 0.3 * rng.normal();
  }
  return stft(w, cfg);
}

}  // namespace

int main() {
  // STFT frame transform vs naive DFT
  {
    Rng rng(1);
    std::vector<double> frame(512);
    for (auto& s : frame) s = rng.normal();
    const double fast = time_ms([&] { (void)rfft(frame, 512); }, 200);
    const double slow = time_ms([&] { (void)ref::naive_dft(frame); }, 5);
    report("dft-512", fast, slow);
  }

  // convolution: FFT overlap vs direct
  {
    Rng rng(2);
    std::vector<double> x(16000), h(2048);
    for (auto& s : x) s = rng.normal();
    for (auto& s : h) s = rng.normal();
    Waveform w = make_mono(x, 16000);
    Rir rir;
    rir.sample_rate = 16000;
    rir.channels = {h};
    const double fast = time_ms([&] { (void)convolve_rir(w, rir); }, 20);
    const double slow = time_ms([&] { (void)ref::convolve(x, h); }, 3);
    report("convolve-16k/2k", fast, slow);
  }

  // WPE per-bin solve
  {
    auto spec = random_spectrogram(4, 129, 80, 3);
    WpeConfig cfg;
    cfg.taps = 8;
    cfg.iterations = 2;
    const double fast = time_ms([&] { (void)wpe(spec, cfg); }, 3);
    const double slow = time_ms([&] { (void)ref::wpe(spec, cfg); }, 3);
    report("wpe-129x80x4", fast, slow);
  }

  // CGMM EM
  {
    auto spec = random_spectrogram(4, 129, 80, 4);
    CgmmConfig cfg;
    cfg.iterations = 10;
    TfMask init(spec.bins, spec.frames);
    for (auto& v : init.m) v = 0.6;
    const double fast =
        time_ms([&] { (void)cgmm_masks_with_init(spec, cfg, init); }, 3);
    const double slow = time_ms([&] { (void)ref::cgmm_masks(spec, cfg, init); }, 3);
    report("cgmm-129x80x4", fast, slow);
  }
  return 0;
}
