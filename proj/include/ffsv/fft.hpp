#pragma once

#include <complex>
#include <vector>

namespace ffsv {

bool is_power_of_two(int n);

// In-place iterative radix-2 transform; size must be a power of two.
// The inverse includes the 1/N scaling.
void fft(std::vector<std::complex<double>>& a, bool inverse);

// Real-input forward transform, returns fft_size/2 + 1 bins (DC..Nyquist).
// Input shorter than fft_size is zero-padded.
std::vector<std::complex<double>> rfft(const std::vector<double>& x, int fft_size);

// Inverse of rfft assuming Hermitian symmetry; returns fft_size real samples.
std::vector<double> irfft(const std::vector<std::complex<double>>& bins, int fft_size);

int next_power_of_two(int n);

}  // namespace ffsv
