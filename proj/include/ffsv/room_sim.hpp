#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ffsv/waveform.hpp"

namespace ffsv {

/// Shoebox room for the image-source method. Reflection coefficients are
/// amplitude coefficients per wall, ordered x0, x1, y0, y1, z0, z1.
struct RoomConfig {
  std::array<double, 3> dimensions{6.0, 5.0, 3.0};
  std::array<double, 6> reflection{0.9, 0.9, 0.9, 0.9, 0.9, 0.9};
  std::array<double, 3> source{1.0, 1.0, 1.5};
  std::vector<std::array<double, 3>> mics;
  int sample_rate = 16000;
  double sound_speed = 343.0;
  int max_order = 10;

  void validate() const;
};

/// One image-source contribution at a microphone, before interpolation.
struct Arrival {
  double delay_samples;
  double amplitude;  // product of wall coefficients / (4 pi d)
  int order;
};

struct Rir {
  std::vector<std::vector<double>> channels;  // one impulse response per mic
  int sample_rate = 0;

  int num_mics() const { return static_cast<int>(channels.size()); }
};

// All image arrivals for one microphone, up to max_order reflections,
// enumerated in a fixed deterministic order.
std::vector<Arrival> image_arrivals(const RoomConfig& room, int mic_index);

// Render arrivals with an 8-tap Hann-windowed sinc fractional-delay kernel.
Rir simulate_rir(const RoomConfig& room);

// Per-mic linear convolution of a mono source; output has one channel per
// mic and length len(w) + len(rir) - 1.
Waveform convolve_rir(const Waveform& w, const Rir& rir);

// Scale noise so the mixture hits snr_db exactly, then add. Shorter noise is
// tiled; mono noise is broadcast across signal channels.
Waveform mix_noise(const Waveform& w, const Waveform& noise, double snr_db);

// Resample by 1/factor with a 16-tap Hann-windowed sinc: duration becomes
// round(len/factor) and spectral content shifts by factor.
Waveform speed_perturb(const Waveform& w, double factor);

struct RoomRanges {
  double lx_min = 3.0, lx_max = 8.0;
  double ly_min = 3.0, ly_max = 8.0;
  double lz_min = 2.5, lz_max = 4.0;
  double reflection_min = 0.2, reflection_max = 0.9;
  double distance_min = 1.0, distance_max = 5.0;  // source to array center
  double azimuth_min = 0.0, azimuth_max = 2.0 * 3.14159265358979323846;
  double mic_radius = 0.05;
  int num_mics = 4;
  int sample_rate = 16000;
  int max_order = 10;

  void validate() const;
};

// Deterministic given seed; uniform over the ranges. The mics form a
// horizontal circle around a randomly placed array center.
std::vector<RoomConfig> sample_room_configs(int n_rooms, std::uint64_t seed,
                                            const RoomRanges& ranges);

// Line-oriented key=value text round trip.
void write_room_config(const RoomConfig& room, const std::string& path);
RoomConfig read_room_config(const std::string& path);

}  // namespace ffsv
