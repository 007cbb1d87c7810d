#include "ffsv/room_sim.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "ffsv/error.hpp"
#include "ffsv/fft.hpp"
#include "ffsv/rng.hpp"

namespace ffsv {

namespace {

double sinc(double x) {
  if (x == 0.0) return 1.0;
  return std::sin(M_PI * x) / (M_PI * x);
}

// Hann-windowed sinc with the given half-width (in samples).
double frac_delay_kernel(double x, double half_width) {
  if (std::abs(x) >= half_width) return 0.0;
  return sinc(x) * 0.5 * (1.0 + std::cos(M_PI * x / half_width));
}

double dist(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

}  // namespace

void RoomConfig::validate() const {
  for (double d : dimensions)
    if (!(d > 0.0)) throw Error("room: dimensions must be positive");
  for (double b : reflection)
    if (!(b >= 0.0 && b < 1.0))
      throw Error("room: reflection coefficients must lie in [0, 1)");
  for (int a = 0; a < 3; ++a)
    if (!(source[static_cast<std::size_t>(a)] > 0.0 &&
          source[static_cast<std::size_t>(a)] < dimensions[static_cast<std::size_t>(a)]))
      throw Error("room: source must be strictly inside the room");
  if (mics.empty()) throw Error("room: at least one microphone required");
  for (const auto& m : mics) {
    for (int a = 0; a < 3; ++a)
      if (!(m[static_cast<std::size_t>(a)] > 0.0 &&
            m[static_cast<std::size_t>(a)] < dimensions[static_cast<std::size_t>(a)]))
        throw Error("room: microphone outside the room");
    if (dist(m, source) <= 0.0)
      throw Error("room: source coincides with a microphone");
  }
  if (sample_rate <= 0) throw Error("room: sample rate must be positive");
  if (max_order < 0) throw Error("room: max reflection order must be >= 0");
}

std::vector<Arrival> image_arrivals(const RoomConfig& room, int mic_index) {
  room.validate();
  if (mic_index < 0 || mic_index >= static_cast<int>(room.mics.size()))
    throw Error("image_arrivals: mic index out of range");
  const auto& mic = room.mics[static_cast<std::size_t>(mic_index)];

  // |n - q| + |n| >= 2|n| - 1, so per-axis indices are bounded by the order.
  const int span = room.max_order / 2 + 1;
  std::vector<Arrival> arrivals;
  for (int nx = -span; nx <= span; ++nx)
    for (int ny = -span; ny <= span; ++ny)
      for (int nz = -span; nz <= span; ++nz)
        for (int q = 0; q < 8; ++q) {
          const int qx = q & 1, qy = (q >> 1) & 1, qz = (q >> 2) & 1;
          const int n3[3] = {nx, ny, nz};
          const int q3[3] = {qx, qy, qz};
          int order = 0;
          double weight = 1.0;
          std::array<double, 3> img;
          for (int a = 0; a < 3; ++a) {
            const int n = n3[a], qa = q3[a];
            const int lo = std::abs(n - qa), hi = std::abs(n);
            order += lo + hi;
            weight *= std::pow(room.reflection[static_cast<std::size_t>(2 * a)], lo) *
                      std::pow(room.reflection[static_cast<std::size_t>(2 * a + 1)], hi);
            img[static_cast<std::size_t>(a)] =
                (1.0 - 2.0 * qa) * room.source[static_cast<std::size_t>(a)] +
                2.0 * n * room.dimensions[static_cast<std::size_t>(a)];
          }
          if (order > room.max_order) continue;
          const double d = dist(img, mic);
          arrivals.push_back(Arrival{d / room.sound_speed * room.sample_rate,
                                     weight / (4.0 * M_PI * d), order});
        }
  return arrivals;
}

Rir simulate_rir(const RoomConfig& room) {
  room.validate();
  const int n_mics = static_cast<int>(room.mics.size());
  Rir rir;
  rir.sample_rate = room.sample_rate;
  rir.channels.resize(static_cast<std::size_t>(n_mics));

#pragma omp parallel for schedule(static)
  for (int m = 0; m < n_mics; ++m) {
    auto arrivals = image_arrivals(room, m);
    double max_delay = 0.0;
    for (const auto& a : arrivals) max_delay = std::max(max_delay, a.delay_samples);
    const int len = static_cast<int>(std::ceil(max_delay)) + 6;
    std::vector<double> h(static_cast<std::size_t>(len), 0.0);
    for (const auto& a : arrivals) {
      const int base = static_cast<int>(std::floor(a.delay_samples));
      for (int j = base - 3; j <= base + 4; ++j) {
        if (j < 0 || j >= len) continue;
        h[static_cast<std::size_t>(j)] +=
            a.amplitude * frac_delay_kernel(j - a.delay_samples, 4.0);
      }
    }
    rir.channels[static_cast<std::size_t>(m)] = std::move(h);
  }
  std::size_t longest = 0;
  for (const auto& ch : rir.channels) longest = std::max(longest, ch.size());
  for (auto& ch : rir.channels) ch.resize(longest, 0.0);
  return rir;
}

Waveform convolve_rir(const Waveform& w, const Rir& rir) {
  w.validate();
  if (w.num_channels() != 1) throw Error("convolve_rir: source must be mono");
  if (rir.channels.empty()) throw Error("convolve_rir: empty RIR");
  if (rir.sample_rate != w.sample_rate)
    throw Error("convolve_rir: sample rate mismatch");

  const auto& x = w.channels[0];
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.channels.resize(rir.channels.size());

  std::size_t max_taps = 0;
  for (const auto& h : rir.channels) max_taps = std::max(max_taps, h.size());
  const std::size_t full_len = x.size() + max_taps - 1;
  const int n_mics = rir.num_mics();
#pragma omp parallel for schedule(static)
  for (int m = 0; m < n_mics; ++m) {
    const auto& h = rir.channels[static_cast<std::size_t>(m)];
    const std::size_t out_len = x.size() + h.size() - 1;
    const int nfft = next_power_of_two(static_cast<int>(out_len));
    auto fx = rfft(x, nfft);
    auto fh = rfft(h, nfft);
    for (std::size_t k = 0; k < fx.size(); ++k) fx[k] *= fh[k];
    auto y = irfft(fx, nfft);
    y.resize(out_len);
    y.resize(full_len, 0.0);
    out.channels[static_cast<std::size_t>(m)] = std::move(y);
  }
  return out;
}

Waveform mix_noise(const Waveform& w, const Waveform& noise, double snr_db) {
  w.validate();
  noise.validate();
  if (!std::isfinite(snr_db)) throw Error("mix_noise: snr_db must be finite");
  if (noise.sample_rate != w.sample_rate)
    throw Error("mix_noise: sample rate mismatch");
  if (noise.num_channels() != w.num_channels() && noise.num_channels() != 1)
    throw Error("mix_noise: noise must be mono or match the signal channel count");

  const std::size_t len = w.num_samples();
  auto noise_channel = [&](int c) -> const std::vector<double>& {
    return noise.channels[noise.num_channels() == 1 ? 0 : static_cast<std::size_t>(c)];
  };

  double p_signal = 0.0, p_noise = 0.0;
  for (int c = 0; c < w.num_channels(); ++c) {
    const auto& n = noise_channel(c);
    for (std::size_t i = 0; i < len; ++i) {
      p_signal += w.channels[static_cast<std::size_t>(c)][i] *
                  w.channels[static_cast<std::size_t>(c)][i];
      const double nv = n[i % n.size()];  // tile short noise
      p_noise += nv * nv;
    }
  }
  if (p_signal <= 0.0) throw Error("mix_noise: zero-power signal");
  if (p_noise <= 0.0) throw Error("mix_noise: zero-power noise");

  const double scale = std::sqrt(p_signal / (p_noise * std::pow(10.0, snr_db / 10.0)));
  Waveform out = w;
  for (int c = 0; c < w.num_channels(); ++c) {
    const auto& n = noise_channel(c);
    auto& y = out.channels[static_cast<std::size_t>(c)];
    for (std::size_t i = 0; i < len; ++i) y[i] += scale * n[i % n.size()];
  }
  return out;
}

Waveform speed_perturb(const Waveform& w, double factor) {
  w.validate();
  if (!(factor > 0.0) || !std::isfinite(factor))
    throw Error("speed_perturb: factor must be positive and finite");
  const std::size_t in_len = w.num_samples();
  const long out_len = std::lround(static_cast<double>(in_len) / factor);
  if (out_len < 1) throw Error("speed_perturb: output would be empty");

  Waveform out;
  out.sample_rate = w.sample_rate;
  out.channels.assign(static_cast<std::size_t>(w.num_channels()),
                      std::vector<double>(static_cast<std::size_t>(out_len), 0.0));
  for (int c = 0; c < w.num_channels(); ++c) {
    const auto& x = w.channels[static_cast<std::size_t>(c)];
    auto& y = out.channels[static_cast<std::size_t>(c)];
#pragma omp parallel for schedule(static)
    for (long i = 0; i < out_len; ++i) {
      const double pos = static_cast<double>(i) * factor;
      const int base = static_cast<int>(std::floor(pos));
      double acc = 0.0;
      for (int j = base - 7; j <= base + 8; ++j) {
        if (j < 0 || j >= static_cast<int>(in_len)) continue;
        acc += x[static_cast<std::size_t>(j)] * frac_delay_kernel(j - pos, 8.0);
      }
      y[static_cast<std::size_t>(i)] = acc;
    }
  }
  return out;
}

void RoomRanges::validate() const {
  auto ordered = [](double lo, double hi) { return lo <= hi; };
  if (!ordered(lx_min, lx_max) || !ordered(ly_min, ly_max) ||
      !ordered(lz_min, lz_max) || !ordered(reflection_min, reflection_max) ||
      !ordered(distance_min, distance_max) || !ordered(azimuth_min, azimuth_max))
    throw Error("room ranges: min exceeds max");
  if (!(lx_min > 0 && ly_min > 0 && lz_min > 0))
    throw Error("room ranges: dimensions must be positive");
  if (!(reflection_min >= 0.0 && reflection_max < 1.0))
    throw Error("room ranges: reflections must lie in [0, 1)");
  if (!(distance_min > 0.0)) throw Error("room ranges: distance must be positive");
  if (num_mics < 1) throw Error("room ranges: need at least one microphone");
  if (!(mic_radius >= 0.0)) throw Error("room ranges: negative mic radius");
  if (sample_rate <= 0) throw Error("room ranges: sample rate must be positive");
}

std::vector<RoomConfig> sample_room_configs(int n_rooms, std::uint64_t seed,
                                            const RoomRanges& ranges) {
  if (n_rooms < 1) throw Error("sample_room_configs: n_rooms must be >= 1");
  ranges.validate();

  Rng rng(seed);
  std::vector<RoomConfig> rooms;
  rooms.reserve(static_cast<std::size_t>(n_rooms));
  const double margin = 0.1;

  for (int i = 0; i < n_rooms; ++i) {
    RoomConfig room;
    room.sample_rate = ranges.sample_rate;
    room.max_order = ranges.max_order;
    room.dimensions = {rng.uniform(ranges.lx_min, ranges.lx_max),
                       rng.uniform(ranges.ly_min, ranges.ly_max),
                       rng.uniform(ranges.lz_min, ranges.lz_max)};
    const double beta = rng.uniform(ranges.reflection_min, ranges.reflection_max);
    room.reflection.fill(beta);

    const std::array<double, 3> center{room.dimensions[0] / 2.0,
                                       room.dimensions[1] / 2.0,
                                       room.dimensions[2] / 2.0};
    room.mics.resize(static_cast<std::size_t>(ranges.num_mics));
    for (int m = 0; m < ranges.num_mics; ++m) {
      const double phi = 2.0 * M_PI * m / ranges.num_mics;
      room.mics[static_cast<std::size_t>(m)] = {
          center[0] + ranges.mic_radius * std::cos(phi),
          center[1] + ranges.mic_radius * std::sin(phi), center[2]};
    }

    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      const double d = rng.uniform(ranges.distance_min, ranges.distance_max);
      const double phi = rng.uniform(ranges.azimuth_min, ranges.azimuth_max);
      std::array<double, 3> src{center[0] + d * std::cos(phi),
                                center[1] + d * std::sin(phi), center[2]};
      bool inside = true;
      for (int a = 0; a < 3; ++a)
        inside = inside && src[static_cast<std::size_t>(a)] > margin &&
                 src[static_cast<std::size_t>(a)] <
                     room.dimensions[static_cast<std::size_t>(a)] - margin;
      if (inside) {
        room.source = src;
        placed = true;
      }
    }
    if (!placed)
      throw Error("sample_room_configs: cannot place source inside room "
                  "(degenerate ranges)");
    room.validate();
    rooms.push_back(std::move(room));
  }
  return rooms;
}

void write_room_config(const RoomConfig& room, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("write_room_config: cannot open: " + path);
  os.precision(17);
  os << "lx=" << room.dimensions[0] << "\nly=" << room.dimensions[1]
     << "\nlz=" << room.dimensions[2] << "\n";
  static const char* kWall[6] = {"x0", "x1", "y0", "y1", "z0", "z1"};
  for (int i = 0; i < 6; ++i)
    os << "beta_" << kWall[i] << "=" << room.reflection[static_cast<std::size_t>(i)] << "\n";
  os << "src_x=" << room.source[0] << "\nsrc_y=" << room.source[1]
     << "\nsrc_z=" << room.source[2] << "\n";
  os << "sample_rate=" << room.sample_rate << "\n";
  os << "sound_speed=" << room.sound_speed << "\n";
  os << "max_order=" << room.max_order << "\n";
  os << "num_mics=" << room.mics.size() << "\n";
  for (std::size_t m = 0; m < room.mics.size(); ++m)
    os << "mic" << m << "=" << room.mics[m][0] << ' ' << room.mics[m][1] << ' '
       << room.mics[m][2] << "\n";
  if (!os) throw Error("write_room_config: write failed: " + path);
}

RoomConfig read_room_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("read_room_config: cannot open: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error("read_room_config: malformed line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto need = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw Error("read_room_config: missing key: " + key);
    return it->second;
  };
  RoomConfig room;
  room.dimensions = {std::stod(need("lx")), std::stod(need("ly")),
                     std::stod(need("lz"))};
  static const char* kWall[6] = {"x0", "x1", "y0", "y1", "z0", "z1"};
  for (int i = 0; i < 6; ++i)
    room.reflection[static_cast<std::size_t>(i)] =
        std::stod(need(std::string("beta_") + kWall[i]));
  room.source = {std::stod(need("src_x")), std::stod(need("src_y")),
                 std::stod(need("src_z"))};
  room.sample_rate = std::stoi(need("sample_rate"));
  room.sound_speed = std::stod(need("sound_speed"));
  room.max_order = std::stoi(need("max_order"));
  const int n_mics = std::stoi(need("num_mics"));
  room.mics.resize(static_cast<std::size_t>(n_mics));
  for (int m = 0; m < n_mics; ++m) {
    std::istringstream ss(need("mic" + std::to_string(m)));
    ss >> room.mics[static_cast<std::size_t>(m)][0] >>
        room.mics[static_cast<std::size_t>(m)][1] >>
        room.mics[static_cast<std::size_t>(m)][2];
    if (!ss) throw Error("read_room_config: malformed mic position");
  }
  room.validate();
  return room;
}

}  // namespace ffsv
