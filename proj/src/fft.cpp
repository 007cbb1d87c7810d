#include "ffsv/fft.hpp"

#include <cmath>

#include "ffsv/error.hpp"

namespace ffsv {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

int next_power_of_two(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

void fft(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  if (!is_power_of_two(static_cast<int>(n)))
    throw Error("fft: size must be a power of two");

  // bit-reversal permutation
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  for (std::size_t len = 2; len <= n; len <<= 1) {
    double ang = 2.0 * M_PI / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }

  if (inverse) {
    double inv_n = 1.0 / static_cast<double>(n);
    for (auto& x : a) x *= inv_n;
  }
}

std::vector<std::complex<double>> rfft(const std::vector<double>& x, int fft_size) {
  std::vector<std::complex<double>> a(static_cast<std::size_t>(fft_size));
  const std::size_t n = std::min(x.size(), static_cast<std::size_t>(fft_size));
  for (std::size_t i = 0; i < n; ++i) a[i] = x[i];
  fft(a, false);
  a.resize(static_cast<std::size_t>(fft_size / 2 + 1));
  return a;
}

std::vector<double> irfft(const std::vector<std::complex<double>>& bins, int fft_size) {
  if (static_cast<int>(bins.size()) != fft_size / 2 + 1)
    throw Error("irfft: bin count does not match fft size");
  std::vector<std::complex<double>> a(static_cast<std::size_t>(fft_size));
  for (int k = 0; k <= fft_size / 2; ++k) a[static_cast<std::size_t>(k)] = bins[static_cast<std::size_t>(k)];
  for (int k = fft_size / 2 + 1; k < fft_size; ++k)
    a[static_cast<std::size_t>(k)] = std::conj(bins[static_cast<std::size_t>(fft_size - k)]);
  fft(a, true);
  std::vector<double> out(static_cast<std::size_t>(fft_size));
  for (int i = 0; i < fft_size; ++i) out[static_cast<std::size_t>(i)] = a[static_cast<std::size_t>(i)].real();
  return out;
}

}  // namespace ffsv
