#pragma once

#include <complex>
#include <vector>

#include "ffsv/cgmm_mvdr.hpp"
#include "ffsv/features.hpp"
#include "ffsv/scoring.hpp"
#include "ffsv/stft.hpp"
#include "ffsv/waveform.hpp"
#include "ffsv/wpe.hpp"

// Straightforward serial implementations, independent of the optimized
// library paths. Tests compare against these; the benchmark times them.
namespace ffsv::ref {

// O(N^2) discrete Fourier transform.
std::vector<std::complex<double>> naive_dft(const std::vector<double>& x);

// Direct O(N*K) linear convolution.
std::vector<double> convolve(const std::vector<double>& x, const std::vector<double>& h);

// Step-by-step cepstra computation on plain loops and the naive DFT.
FeatureMatrix mfcc(const Waveform& w, const MfccConfig& cfg);

// Brute-force metric oracles: recount miss/false-alarm rates from scratch at
// every candidate threshold.
EerResult eer(const std::vector<ScoredTrial>& scored);
DcfResult min_dcf(const std::vector<ScoredTrial>& scored, const DcfParams& params);

// Serial WPE with a hand-rolled Cholesky solve, one bin after another.
ComplexSpectrogram wpe(const ComplexSpectrogram& s, const WpeConfig& cfg);

// Serial CGMM masks with the same update equations on plain loops.
CgmmResult cgmm_masks(const ComplexSpectrogram& s, const CgmmConfig& cfg,
                      const TfMask& init_speech);

// Scalar layer references for composing tiny forward passes in tests.
// conv2d weight layout matches the library: [out][in][kt][kf].
std::vector<double> conv2d(const std::vector<double>& x, int in_ch, int in_t, int in_f,
                           const std::vector<double>& weight, const std::vector<double>& bias,
                           int out_ch, int kt, int kf, int st, int sf, int pt, int pf,
                           int dt, int df);
std::vector<double> batchnorm_eval(const std::vector<double>& x, int channels,
                                   int per_channel, const std::vector<double>& gamma,
                                   const std::vector<double>& beta,
                                   const std::vector<double>& mean,
                                   const std::vector<double>& var, double eps = 1e-5);

}  // namespace ffsv::ref
