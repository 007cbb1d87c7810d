#pragma once

#include <string>
#include <vector>

#include "ffsv/rng.hpp"
#include "ffsv/tensor.hpp"

namespace ffsv {

/// Named view of one parameter array and its gradient. Non-trainable refs
/// (batch-norm running statistics) are serialized but skipped by SGD.
struct ParamRef {
  std::string name;
  std::vector<double>* value;
  std::vector<double>* grad;
  std::vector<int> shape;
  bool trainable;
};

class Conv2d {
 public:
  Conv2d(int in_ch, int out_ch, int kernel_t, int kernel_f, int stride_t = 1,
         int stride_f = 1, int pad_t = 0, int pad_f = 0, int dilation_t = 1,
         int dilation_f = 1, bool bias = true);

  void init_params(Rng& rng);
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out);
  void collect(const std::string& prefix, std::vector<ParamRef>& out);

  int out_time(int in_t) const;
  int out_freq(int in_f) const;

 private:
  int in_ch_, out_ch_, kt_, kf_, st_, sf_, pt_, pf_, dt_, df_;
  bool has_bias_;
  std::vector<double> weight_, bias_;        // weight: [out][in][kt][kf]
  std::vector<double> grad_weight_, grad_bias_;
  Tensor cached_input_;
};

class BatchNorm {
 public:
  explicit BatchNorm(int channels, double momentum = 0.1, double eps = 1e-5);

  Tensor forward(const Tensor& x, bool training);
  Tensor backward(const Tensor& grad_out);
  void collect(const std::string& prefix, std::vector<ParamRef>& out);

 private:
  int channels_;
  double momentum_, eps_;
  std::vector<double> gamma_, beta_, running_mean_, running_var_;
  std::vector<double> grad_gamma_, grad_beta_;
  // backward caches
  bool cached_training_ = false;
  Tensor cached_xhat_;
  std::vector<double> cached_inv_std_;
};

class Relu {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out) const;

 private:
  std::vector<bool> mask_;
};

class Sigmoid {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out) const;

 private:
  Tensor cached_out_;
};

class Linear {
 public:
  Linear(int in_dim, int out_dim);

  void init_params(Rng& rng);
  // x is (N, in_dim); output (N, out_dim).
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out);
  void collect(const std::string& prefix, std::vector<ParamRef>& out);

 private:
  int in_dim_, out_dim_;
  std::vector<double> weight_, bias_;  // weight: [out][in]
  std::vector<double> grad_weight_, grad_bias_;
  Tensor cached_input_;
};

/// Per-(channel, freq) temporal mean and population standard deviation,
/// concatenated as [means; stds]; std floored at 1e-9.
class StatPool {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out) const;

 private:
  Tensor cached_input_;
  Tensor cached_mean_, cached_std_;  // (N, C*F)
  std::vector<bool> floored_;
};

struct CeLoss {
  double mean_loss;
  std::vector<double> per_sample;
  Tensor grad;  // d(mean loss)/d(logits)
  int correct;  // argmax hits, for accuracy reporting
};

// Softmax cross-entropy on (N, K) logits.
CeLoss softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// Gradient reversal layer as a standalone pair: identity forward, -lambda
// scaling backward.
std::vector<double> grl_forward(const std::vector<double>& x);
std::vector<double> grl_backward(const std::vector<double>& grad, double lambda);

// L = mean(speaker) - lambda * mean(domain); lengths must match.
double dat_loss(const std::vector<double>& speaker_losses,
                const std::vector<double>& domain_losses, double lambda);

}  // namespace ffsv
