#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "ffsv/error.hpp"
#include "ffsv/fft.hpp"
#include "ffsv/reference.hpp"
#include "ffsv/rng.hpp"
#include "ffsv/room_sim.hpp"

using namespace ffsv;

namespace {

RoomConfig free_field_room(double distance) {
  RoomConfig room;
  room.dimensions = {10.0, 8.0, 4.0};
  room.reflection.fill(0.0);
  room.source = {3.0, 3.0, 1.5};
  room.mics = {{3.0 + distance, 3.0, 1.5}};
  room.max_order = 0;
  return room;
}

}  // namespace

TEST_CASE("free-field pulse lands at d/c*fs with amplitude 1/(4 pi d)") {
  // distance chosen so the delay is an integer number of samples
  const double d = 343.0 * 32.0 / 16000.0;  // 0.686 m -> exactly 32 samples
  auto rir = simulate_rir(free_field_room(d));
  REQUIRE(rir.num_mics() == 1);
  const auto& h = rir.channels[0];

  std::size_t peak = 0;
  for (std::size_t i = 0; i < h.size(); ++i)
    if (std::abs(h[i]) > std::abs(h[peak])) peak = i;
  CHECK(peak == 32);
  const double expected = 1.0 / (4.0 * M_PI * d);
  CHECK(std::abs(h[peak] - expected) / expected < 0.01);
}

TEST_CASE("doubling the distance halves the direct-path amplitude") {
  const double d = 343.0 * 16.0 / 16000.0;
  auto near = simulate_rir(free_field_room(d));
  auto far = simulate_rir(free_field_room(2.0 * d));
  const double a_near = *std::max_element(near.channels[0].begin(), near.channels[0].end());
  const double a_far = *std::max_element(far.channels[0].begin(), far.channels[0].end());
  CHECK(std::abs(a_near / a_far - 2.0) < 0.02);
}

TEST_CASE("order-1 arrivals match the hand enumeration") {
  RoomConfig room;
  room.dimensions = {5.0, 4.0, 3.0};
  room.reflection = {0.9, 0.8, 0.7, 0.6, 0.5, 0.4};
  room.source = {1.0, 1.5, 1.2};
  room.mics = {{3.5, 2.5, 1.8}};
  room.max_order = 1;
  room.sample_rate = 16000;

  auto arrivals = image_arrivals(room, 0);
  REQUIRE(arrivals.size() == 7);

  // direct + 6 single reflections, mirrored across each wall
  struct Expect {
    std::array<double, 3> img;
    double beta;
  };
  const std::vector<Expect> expected = {
      {{1.0, 1.5, 1.2}, 1.0},          // direct
      {{-1.0, 1.5, 1.2}, 0.9},         // x = 0 wall
      {{9.0, 1.5, 1.2}, 0.8},          // x = Lx wall
      {{1.0, -1.5, 1.2}, 0.7},         // y = 0
      {{1.0, 6.5, 1.2}, 0.6},          // y = Ly
      {{1.0, 1.5, -1.2}, 0.5},         // z = 0
      {{1.0, 1.5, 4.8}, 0.4},          // z = Lz
  };

  auto key = [](const Arrival& a) { return a.delay_samples; };
  auto sorted = arrivals;
  std::sort(sorted.begin(), sorted.end(),
            [&](const Arrival& a, const Arrival& b) { return key(a) < key(b); });

  std::vector<Arrival> manual;
  for (const auto& e : expected) {
    const double dx = e.img[0] - room.mics[0][0];
    const double dy = e.img[1] - room.mics[0][1];
    const double dz = e.img[2] - room.mics[0][2];
    const double dist = std::sqrt(dx * dx + dy * dy + dz * dz);
    manual.push_back({dist / 343.0 * 16000.0, e.beta / (4.0 * M_PI * dist), 0});
  }
  std::sort(manual.begin(), manual.end(),
            [&](const Arrival& a, const Arrival& b) { return a.delay_samples < b.delay_samples; });

  for (std::size_t i = 0; i < 7; ++i) {
    CHECK(std::abs(sorted[i].delay_samples - manual[i].delay_samples) < 1e-9);
    CHECK(std::abs(sorted[i].amplitude - manual[i].amplitude) < 1e-9);
  }
}

TEST_CASE("per-order energy decays in a symmetric room") {
  RoomConfig room;
  room.dimensions = {4.0, 4.0, 3.0};
  room.reflection.fill(0.5);
  room.source = {2.0, 2.0, 1.5};
  room.mics = {{2.8, 2.4, 1.5}};
  room.max_order = 6;

  auto arrivals = image_arrivals(room, 0);
  std::vector<double> energy_by_order(7, 0.0);
  double total = 0.0;
  for (const auto& a : arrivals) {
    energy_by_order[static_cast<std::size_t>(a.order)] += a.amplitude * a.amplitude;
    total += a.amplitude * a.amplitude;
  }
  CHECK(std::isfinite(total));
  for (int k = 0; k + 1 <= 6; ++k)
    CHECK(energy_by_order[static_cast<std::size_t>(k + 1)] <
          energy_by_order[static_cast<std::size_t>(k)]);
}

TEST_CASE("room validation rejects bad geometry") {
  RoomConfig room = free_field_room(1.0);
  room.mics[0] = {11.0, 3.0, 1.5};  // outside
  CHECK_THROWS_AS(simulate_rir(room), Error);
  room = free_field_room(1.0);
  room.mics[0] = room.source;
  CHECK_THROWS_AS(simulate_rir(room), Error);
}

// -------------------------------------------------------------- convolution

TEST_CASE("convolving with a unit impulse is the identity") {
  auto w = make_mono({0.1, -0.2, 0.3, 0.4}, 16000);
  Rir rir;
  rir.sample_rate = 16000;
  rir.channels = {{1.0}};
  auto y = convolve_rir(w, rir);
  REQUIRE(y.num_samples() == 4);
  for (int i = 0; i < 4; ++i)
    CHECK(y.channels[0][static_cast<std::size_t>(i)] ==
          doctest::Approx(w.channels[0][static_cast<std::size_t>(i)]).epsilon(1e-12));
}

TEST_CASE("a delayed impulse shifts the input") {
  auto w = make_mono({1.0, 2.0, 3.0}, 16000);
  Rir rir;
  rir.sample_rate = 16000;
  rir.channels = {{0.0, 0.0, 1.0}};
  auto y = convolve_rir(w, rir);
  REQUIRE(y.num_samples() == 5);
  CHECK(std::abs(y.channels[0][0]) < 1e-12);
  CHECK(std::abs(y.channels[0][1]) < 1e-12);
  CHECK(y.channels[0][2] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(y.channels[0][4] == doctest::Approx(3.0).epsilon(1e-10));
}

TEST_CASE("fft convolution matches the direct reference") {
  Rng rng(41);
  std::vector<double> x(1000), h(64);
  for (auto& v : x) v = rng.normal();
  for (auto& v : h) v = rng.normal();
  Rir rir;
  rir.sample_rate = 16000;
  rir.channels = {h};
  auto fast = convolve_rir(make_mono(x, 16000), rir);
  auto slow = ref::convolve(x, h);
  REQUIRE(fast.num_samples() == slow.size());
  for (std::size_t i = 0; i < slow.size(); ++i)
    CHECK(std::abs(fast.channels[0][i] - slow[i]) < 1e-9);
}

TEST_CASE("convolution is linear") {
  Rng rng(43);
  std::vector<double> x(400), y(400), h(32);
  for (auto& v : x) v = rng.normal();
  for (auto& v : y) v = rng.normal();
  for (auto& v : h) v = rng.normal();
  Rir rir;
  rir.sample_rate = 16000;
  rir.channels = {h};

  std::vector<double> mix(400);
  for (int i = 0; i < 400; ++i)
    mix[static_cast<std::size_t>(i)] = 2.0 * x[static_cast<std::size_t>(i)] -
                                       0.5 * y[static_cast<std::size_t>(i)];
  auto a = convolve_rir(make_mono(x, 16000), rir);
  auto b = convolve_rir(make_mono(y, 16000), rir);
  auto c = convolve_rir(make_mono(mix, 16000), rir);
  for (std::size_t i = 0; i < c.num_samples(); ++i)
    CHECK(std::abs(c.channels[0][i] - (2.0 * a.channels[0][i] - 0.5 * b.channels[0][i])) <
          1e-9);
}

TEST_CASE("convolution validates inputs") {
  Rir rir;
  rir.sample_rate = 8000;
  rir.channels = {{1.0}};
  CHECK_THROWS_AS(convolve_rir(make_mono({0.1}, 16000), rir), Error);  // rate mismatch
  Waveform two;
  two.sample_rate = 8000;
  two.channels = {{0.1}, {0.2}};
  CHECK_THROWS_AS(convolve_rir(two, rir), Error);  // not mono
}

// -------------------------------------------------------------------- noise

TEST_CASE("equal-power noise at 0 dB gets scale factor 1") {
  auto w = make_mono({0.5, -0.5, 0.5, -0.5}, 16000);
  auto n = make_mono({-0.5, 0.5, -0.5, 0.5}, 16000);
  auto y = mix_noise(w, n, 0.0);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(y.channels[0][i] ==
          doctest::Approx(w.channels[0][i] + n.channels[0][i]).epsilon(1e-12));
}

TEST_CASE("non-finite snr is rejected") {
  auto w = make_mono({0.5, -0.5}, 16000);
  CHECK_THROWS_AS(mix_noise(w, w, std::numeric_limits<double>::infinity()), Error);
  CHECK_THROWS_AS(mix_noise(w, w, std::numeric_limits<double>::quiet_NaN()), Error);
}

TEST_CASE("mixture hits the requested snr within 0.01 dB") {
  Rng rng(47);
  for (double target : {-5.0, 0.0, 10.0, 23.0}) {
    std::vector<double> x(3000), n(1000);  // short noise gets tiled
    for (auto& v : x) v = 0.4 * rng.normal();
    for (auto& v : n) v = 0.9 * rng.normal();
    auto w = make_mono(x, 16000);
    auto y = mix_noise(w, make_mono(n, 16000), target);

    double p_sig = 0.0, p_noise = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      p_sig += x[i] * x[i];
      const double added = y.channels[0][i] - x[i];
      p_noise += added * added;
    }
    const double measured = 10.0 * std::log10(p_sig / p_noise);
    CHECK(std::abs(measured - target) < 0.01);
  }
}

TEST_CASE("zero-power inputs are rejected") {
  auto zero = make_mono({0.0, 0.0}, 16000);
  auto sig = make_mono({0.5, -0.5}, 16000);
  CHECK_THROWS_AS(mix_noise(zero, sig, 0.0), Error);
  CHECK_THROWS_AS(mix_noise(sig, zero, 0.0), Error);
}

// ------------------------------------------------------------- speed change

TEST_CASE("speed factor 1.0 is the identity") {
  Rng rng(53);
  std::vector<double> x(500);
  for (auto& v : x) v = rng.normal();
  auto y = speed_perturb(make_mono(x, 16000), 1.0);
  REQUIRE(y.num_samples() == 500);
  for (std::size_t i = 0; i < 500; ++i)
    CHECK(std::abs(y.channels[0][i] - x[i]) < 1e-9);
}

TEST_CASE("speed factor changes the length by round(len/factor)") {
  auto w = make_mono(std::vector<double>(16000, 0.1), 16000);
  CHECK(speed_perturb(w, 0.9).num_samples() == 17778);
  CHECK(speed_perturb(w, 1.1).num_samples() == 14545);
}

TEST_CASE("speeding up a 1 kHz sine moves the peak to 1100 Hz") {
  std::vector<double> x(16000);
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = std::sin(2.0 * M_PI * 1000.0 * static_cast<double>(i) / 16000.0);
  auto y = speed_perturb(make_mono(x, 16000), 1.1);

  auto spec = rfft(y.channels[0], 16384);
  std::size_t peak = 0;
  for (std::size_t k = 1; k < spec.size(); ++k)
    if (std::abs(spec[k]) > std::abs(spec[peak])) peak = k;
  const double freq = static_cast<double>(peak) * 16000.0 / 16384.0;
  CHECK(std::abs(freq - 1100.0) < 5.0);
}

TEST_CASE("absurd speed factors are rejected") {
  auto w = make_mono({0.1, 0.2}, 16000);
  CHECK_THROWS_AS(speed_perturb(w, 0.0), Error);
  CHECK_THROWS_AS(speed_perturb(w, 1e9), Error);
}

// ---------------------------------------------------------- config sampling

TEST_CASE("sampled rooms are reproducible and valid") {
  RoomRanges ranges;
  auto a = sample_room_configs(200, 99, ranges);
  auto b = sample_room_configs(200, 99, ranges);
  REQUIRE(a.size() == 200);
  int distinct = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].dimensions == b[i].dimensions);
    CHECK(a[i].source == b[i].source);
    a[i].validate();
    if (i > 0 && a[i].dimensions != a[i - 1].dimensions) ++distinct;
  }
  CHECK(distinct == 199);
}

TEST_CASE("collapsed ranges produce identical rooms") {
  RoomRanges r;
  r.lx_min = r.lx_max = 5.0;
  r.ly_min = r.ly_max = 4.0;
  r.lz_min = r.lz_max = 3.0;
  r.reflection_min = r.reflection_max = 0.5;
  r.distance_min = r.distance_max = 1.5;
  r.azimuth_min = r.azimuth_max = 0.8;
  auto rooms = sample_room_configs(5, 7, r);
  for (const auto& room : rooms) {
    CHECK(room.dimensions == rooms[0].dimensions);
    CHECK(room.source == rooms[0].source);
    CHECK(room.reflection == rooms[0].reflection);
  }
}

TEST_CASE("degenerate ranges are rejected") {
  RoomRanges r;
  r.lx_min = 8.0;
  r.lx_max = 3.0;
  CHECK_THROWS_AS(sample_room_configs(1, 0, r), Error);

  RoomRanges impossible;  // source cannot fit in the room at this distance
  impossible.lx_min = impossible.lx_max = 3.0;
  impossible.ly_min = impossible.ly_max = 3.0;
  impossible.lz_min = impossible.lz_max = 2.5;
  impossible.distance_min = impossible.distance_max = 10.0;
  CHECK_THROWS_AS(sample_room_configs(1, 0, impossible), Error);
}

TEST_CASE("room config text round trips") {
  auto rooms = sample_room_configs(1, 3, RoomRanges{});
  const auto path =
      (std::filesystem::temp_directory_path() / "ffsv_room.txt").string();
  write_room_config(rooms[0], path);
  auto r = read_room_config(path);
  CHECK(r.dimensions == rooms[0].dimensions);
  CHECK(r.reflection == rooms[0].reflection);
  CHECK(r.source == rooms[0].source);
  REQUIRE(r.mics.size() == rooms[0].mics.size());
  for (std::size_t m = 0; m < r.mics.size(); ++m) CHECK(r.mics[m] == rooms[0].mics[m]);
  CHECK(r.sample_rate == rooms[0].sample_rate);
}
