#include "ffsv/layers.hpp"

#include <cmath>
#include <limits>

#include "ffsv/error.hpp"

namespace ffsv {

// ---------------------------------------------------------------- Conv2d --

Conv2d::Conv2d(int in_ch, int out_ch, int kernel_t, int kernel_f, int stride_t,
               int stride_f, int pad_t, int pad_f, int dilation_t, int dilation_f,
               bool bias)
    : in_ch_(in_ch), out_ch_(out_ch), kt_(kernel_t), kf_(kernel_f), st_(stride_t),
      sf_(stride_f), pt_(pad_t), pf_(pad_f), dt_(dilation_t), df_(dilation_f),
      has_bias_(bias) {
  const std::size_t wsize =
      static_cast<std::size_t>(out_ch) * in_ch * kernel_t * kernel_f;
  weight_.assign(wsize, 0.0);
  grad_weight_.assign(wsize, 0.0);
  bias_.assign(has_bias_ ? static_cast<std::size_t>(out_ch) : 0, 0.0);
  grad_bias_.assign(bias_.size(), 0.0);
}

void Conv2d::init_params(Rng& rng) {
  const double fan_in = static_cast<double>(in_ch_) * kt_ * kf_;
  const double stddev = std::sqrt(2.0 / fan_in);
  for (auto& w : weight_) w = stddev * rng.normal();
  for (auto& b : bias_) b = 0.0;
}

int Conv2d::out_time(int in_t) const {
  return (in_t + 2 * pt_ - dt_ * (kt_ - 1) - 1) / st_ + 1;
}
int Conv2d::out_freq(int in_f) const {
  return (in_f + 2 * pf_ - df_ * (kf_ - 1) - 1) / sf_ + 1;
}

Tensor Conv2d::forward(const Tensor& x) {
  if (x.c != in_ch_) throw Error("conv2d: channel mismatch");
  cached_input_ = x;
  const int ot = out_time(x.t), of = out_freq(x.f);
  if (ot <= 0 || of <= 0) throw Error("conv2d: output would be empty");
  Tensor y(x.n, out_ch_, ot, of);

#pragma omp parallel for schedule(static) collapse(2)
  for (int nn = 0; nn < x.n; ++nn)
    for (int co = 0; co < out_ch_; ++co) {
      for (int to = 0; to < ot; ++to)
        for (int fo = 0; fo < of; ++fo) {
          double acc = has_bias_ ? bias_[static_cast<std::size_t>(co)] : 0.0;
          for (int ci = 0; ci < in_ch_; ++ci)
            for (int i = 0; i < kt_; ++i) {
              const int ti = to * st_ - pt_ + i * dt_;
              if (ti < 0 || ti >= x.t) continue;
              for (int j = 0; j < kf_; ++j) {
                const int fi = fo * sf_ - pf_ + j * df_;
                if (fi < 0 || fi >= x.f) continue;
                acc += weight_[((static_cast<std::size_t>(co) * in_ch_ + ci) * kt_ + i) * kf_ + j] *
                       x.at(nn, ci, ti, fi);
              }
            }
          y.at(nn, co, to, fo) = acc;
        }
    }
  return y;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
  const Tensor& x = cached_input_;
  Tensor gx(x.n, x.c, x.t, x.f);

  // weight/bias gradients: each thread owns one output channel
#pragma omp parallel for schedule(static)
  for (int co = 0; co < out_ch_; ++co) {
    for (int ci = 0; ci < in_ch_; ++ci)
      for (int i = 0; i < kt_; ++i)
        for (int j = 0; j < kf_; ++j) {
          double acc = 0.0;
          for (int nn = 0; nn < x.n; ++nn)
            for (int to = 0; to < grad_out.t; ++to) {
              const int ti = to * st_ - pt_ + i * dt_;
              if (ti < 0 || ti >= x.t) continue;
              for (int fo = 0; fo < grad_out.f; ++fo) {
                const int fi = fo * sf_ - pf_ + j * df_;
                if (fi < 0 || fi >= x.f) continue;
                acc += grad_out.at(nn, co, to, fo) * x.at(nn, ci, ti, fi);
              }
            }
          grad_weight_[((static_cast<std::size_t>(co) * in_ch_ + ci) * kt_ + i) * kf_ + j] += acc;
        }
    if (has_bias_) {
      double acc = 0.0;
      for (int nn = 0; nn < x.n; ++nn)
        for (int to = 0; to < grad_out.t; ++to)
          for (int fo = 0; fo < grad_out.f; ++fo)
            acc += grad_out.at(nn, co, to, fo);
      grad_bias_[static_cast<std::size_t>(co)] += acc;
    }
  }

  // input gradient: each thread owns one batch element
#pragma omp parallel for schedule(static)
  for (int nn = 0; nn < x.n; ++nn)
    for (int co = 0; co < out_ch_; ++co)
      for (int to = 0; to < grad_out.t; ++to)
        for (int fo = 0; fo < grad_out.f; ++fo) {
          const double g = grad_out.at(nn, co, to, fo);
          if (g == 0.0) continue;
          for (int ci = 0; ci < in_ch_; ++ci)
            for (int i = 0; i < kt_; ++i) {
              const int ti = to * st_ - pt_ + i * dt_;
              if (ti < 0 || ti >= x.t) continue;
              for (int j = 0; j < kf_; ++j) {
                const int fi = fo * sf_ - pf_ + j * df_;
                if (fi < 0 || fi >= x.f) continue;
                gx.at(nn, ci, ti, fi) +=
                    g * weight_[((static_cast<std::size_t>(co) * in_ch_ + ci) * kt_ + i) * kf_ + j];
              }
            }
        }
  return gx;
}

void Conv2d::collect(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".weight", &weight_, &grad_weight_,
                 {out_ch_, in_ch_, kt_, kf_}, true});
  if (has_bias_)
    out.push_back({prefix + ".bias", &bias_, &grad_bias_, {out_ch_}, true});
}

// ------------------------------------------------------------- BatchNorm --

BatchNorm::BatchNorm(int channels, double momentum, double eps)
    : channels_(channels), momentum_(momentum), eps_(eps),
      gamma_(static_cast<std::size_t>(channels), 1.0),
      beta_(static_cast<std::size_t>(channels), 0.0),
      running_mean_(static_cast<std::size_t>(channels), 0.0),
      running_var_(static_cast<std::size_t>(channels), 1.0),
      grad_gamma_(static_cast<std::size_t>(channels), 0.0),
      grad_beta_(static_cast<std::size_t>(channels), 0.0) {}

Tensor BatchNorm::forward(const Tensor& x, bool training) {
  if (x.c != channels_) throw Error("batchnorm: channel mismatch");
  cached_training_ = training;
  const int m = x.n * x.t * x.f;
  Tensor y(x.n, x.c, x.t, x.f);
  cached_xhat_ = Tensor(x.n, x.c, x.t, x.f);
  cached_inv_std_.assign(static_cast<std::size_t>(channels_), 0.0);

  for (int c = 0; c < channels_; ++c) {
    double mean, var;
    if (training) {
      double sum = 0.0, sq = 0.0;
      for (int nn = 0; nn < x.n; ++nn)
        for (int tt = 0; tt < x.t; ++tt)
          for (int ff = 0; ff < x.f; ++ff) {
            const double v = x.at(nn, c, tt, ff);
            sum += v;
            sq += v * v;
          }
      mean = sum / m;
      var = std::max(sq / m - mean * mean, 0.0);
      running_mean_[static_cast<std::size_t>(c)] =
          (1.0 - momentum_) * running_mean_[static_cast<std::size_t>(c)] + momentum_ * mean;
      running_var_[static_cast<std::size_t>(c)] =
          (1.0 - momentum_) * running_var_[static_cast<std::size_t>(c)] + momentum_ * var;
    } else {
      mean = running_mean_[static_cast<std::size_t>(c)];
      var = running_var_[static_cast<std::size_t>(c)];
    }
    const double inv_std = 1.0 / std::sqrt(var + eps_);
    cached_inv_std_[static_cast<std::size_t>(c)] = inv_std;
    for (int nn = 0; nn < x.n; ++nn)
      for (int tt = 0; tt < x.t; ++tt)
        for (int ff = 0; ff < x.f; ++ff) {
          const double xhat = (x.at(nn, c, tt, ff) - mean) * inv_std;
          cached_xhat_.at(nn, c, tt, ff) = xhat;
          y.at(nn, c, tt, ff) = gamma_[static_cast<std::size_t>(c)] * xhat +
                                beta_[static_cast<std::size_t>(c)];
        }
  }
  return y;
}

Tensor BatchNorm::backward(const Tensor& grad_out) {
  const Tensor& xhat = cached_xhat_;
  const int m = grad_out.n * grad_out.t * grad_out.f;
  Tensor gx(grad_out.n, grad_out.c, grad_out.t, grad_out.f);

  for (int c = 0; c < channels_; ++c) {
    double sum_g = 0.0, sum_gx = 0.0;
    for (int nn = 0; nn < grad_out.n; ++nn)
      for (int tt = 0; tt < grad_out.t; ++tt)
        for (int ff = 0; ff < grad_out.f; ++ff) {
          const double g = grad_out.at(nn, c, tt, ff);
          sum_g += g;
          sum_gx += g * xhat.at(nn, c, tt, ff);
        }
    grad_gamma_[static_cast<std::size_t>(c)] += sum_gx;
    grad_beta_[static_cast<std::size_t>(c)] += sum_g;

    const double gamma = gamma_[static_cast<std::size_t>(c)];
    const double inv_std = cached_inv_std_[static_cast<std::size_t>(c)];
    for (int nn = 0; nn < grad_out.n; ++nn)
      for (int tt = 0; tt < grad_out.t; ++tt)
        for (int ff = 0; ff < grad_out.f; ++ff) {
          const double g = grad_out.at(nn, c, tt, ff);
          if (cached_training_) {
            gx.at(nn, c, tt, ff) =
                gamma * inv_std / m *
                (m * g - sum_g - xhat.at(nn, c, tt, ff) * sum_gx);
          } else {
            gx.at(nn, c, tt, ff) = gamma * inv_std * g;
          }
        }
  }
  return gx;
}

void BatchNorm::collect(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".gamma", &gamma_, &grad_gamma_, {channels_}, true});
  out.push_back({prefix + ".beta", &beta_, &grad_beta_, {channels_}, true});
  // running statistics ride along in checkpoints but are not optimized
  out.push_back({prefix + ".running_mean", &running_mean_, nullptr, {channels_}, false});
  out.push_back({prefix + ".running_var", &running_var_, nullptr, {channels_}, false});
}

// ------------------------------------------------------------ activations --

Tensor Relu::forward(const Tensor& x) {
  mask_.assign(x.size(), false);
  Tensor y = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x.v[i] > 0.0) {
      mask_[i] = true;
    } else {
      y.v[i] = 0.0;
    }
  }
  return y;
}

Tensor Relu::backward(const Tensor& grad_out) const {
  Tensor gx = grad_out;
  for (std::size_t i = 0; i < gx.size(); ++i)
    if (!mask_[i]) gx.v[i] = 0.0;
  return gx;
}

Tensor Sigmoid::forward(const Tensor& x) {
  // clamped to the nearest representable values strictly inside (0, 1) so the
  // mask-range guarantee survives saturating inputs
  const double lo = std::numeric_limits<double>::min();
  const double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
  Tensor y = x;
  for (auto& v : y.v) v = std::min(std::max(1.0 / (1.0 + std::exp(-v)), lo), hi);
  cached_out_ = y;
  return y;
}

Tensor Sigmoid::backward(const Tensor& grad_out) const {
  Tensor gx = grad_out;
  for (std::size_t i = 0; i < gx.size(); ++i) {
    const double s = cached_out_.v[i];
    gx.v[i] *= s * (1.0 - s);
  }
  return gx;
}

// ---------------------------------------------------------------- Linear --

Linear::Linear(int in_dim, int out_dim)
    : in_dim_(in_dim), out_dim_(out_dim),
      weight_(static_cast<std::size_t>(in_dim) * out_dim, 0.0),
      bias_(static_cast<std::size_t>(out_dim), 0.0),
      grad_weight_(weight_.size(), 0.0), grad_bias_(bias_.size(), 0.0) {}

void Linear::init_params(Rng& rng) {
  const double stddev = std::sqrt(1.0 / in_dim_);
  for (auto& w : weight_) w = stddev * rng.normal();
  for (auto& b : bias_) b = 0.0;
}

Tensor Linear::forward(const Tensor& x) {
  if (x.c != in_dim_ || x.t != 1 || x.f != 1)
    throw Error("linear: expected (N, in_dim) input");
  cached_input_ = x;
  Tensor y = Tensor::matrix(x.n, out_dim_);
#pragma omp parallel for schedule(static)
  for (int nn = 0; nn < x.n; ++nn)
    for (int o = 0; o < out_dim_; ++o) {
      double acc = bias_[static_cast<std::size_t>(o)];
      for (int i = 0; i < in_dim_; ++i)
        acc += weight_[static_cast<std::size_t>(o) * in_dim_ + i] * x.at(nn, i);
      y.at(nn, o) = acc;
    }
  return y;
}

Tensor Linear::backward(const Tensor& grad_out) {
  const Tensor& x = cached_input_;
  Tensor gx = Tensor::matrix(x.n, in_dim_);
  for (int o = 0; o < out_dim_; ++o) {
    double gb = 0.0;
    for (int nn = 0; nn < x.n; ++nn) {
      const double g = grad_out.at(nn, o);
      gb += g;
      for (int i = 0; i < in_dim_; ++i)
        grad_weight_[static_cast<std::size_t>(o) * in_dim_ + i] += g * x.at(nn, i);
    }
    grad_bias_[static_cast<std::size_t>(o)] += gb;
  }
  for (int nn = 0; nn < x.n; ++nn)
    for (int i = 0; i < in_dim_; ++i) {
      double acc = 0.0;
      for (int o = 0; o < out_dim_; ++o)
        acc += weight_[static_cast<std::size_t>(o) * in_dim_ + i] * grad_out.at(nn, o);
      gx.at(nn, i) = acc;
    }
  return gx;
}

void Linear::collect(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".weight", &weight_, &grad_weight_, {out_dim_, in_dim_}, true});
  out.push_back({prefix + ".bias", &bias_, &grad_bias_, {out_dim_}, true});
}

// -------------------------------------------------------------- StatPool --

Tensor StatPool::forward(const Tensor& x) {
  if (x.t < 1) throw Error("stat_pool: empty time axis");
  const int d = x.c * x.f;
  cached_input_ = x;
  cached_mean_ = Tensor::matrix(x.n, d);
  cached_std_ = Tensor::matrix(x.n, d);
  floored_.assign(static_cast<std::size_t>(x.n) * d, false);

  Tensor y = Tensor::matrix(x.n, 2 * d);
  for (int nn = 0; nn < x.n; ++nn)
    for (int c = 0; c < x.c; ++c)
      for (int ff = 0; ff < x.f; ++ff) {
        const int k = c * x.f + ff;
        double sum = 0.0, sq = 0.0;
        for (int tt = 0; tt < x.t; ++tt) {
          const double v = x.at(nn, c, tt, ff);
          sum += v;
          sq += v * v;
        }
        const double mean = sum / x.t;
        const double var = std::max(sq / x.t - mean * mean, 0.0);
        double sd = std::sqrt(var);
        if (sd < 1e-9) {
          sd = 1e-9;
          floored_[static_cast<std::size_t>(nn) * d + k] = true;
        }
        cached_mean_.at(nn, k) = mean;
        cached_std_.at(nn, k) = sd;
        y.at(nn, k) = mean;
        y.at(nn, d + k) = sd;
      }
  return y;
}

Tensor StatPool::backward(const Tensor& grad_out) const {
  const Tensor& x = cached_input_;
  const int d = x.c * x.f;
  Tensor gx(x.n, x.c, x.t, x.f);
  for (int nn = 0; nn < x.n; ++nn)
    for (int c = 0; c < x.c; ++c)
      for (int ff = 0; ff < x.f; ++ff) {
        const int k = c * x.f + ff;
        const double g_mean = grad_out.at(nn, k);
        const double g_std = grad_out.at(nn, d + k);
        const double mean = cached_mean_.at(nn, k);
        const double sd = cached_std_.at(nn, k);
        const bool floored = floored_[static_cast<std::size_t>(nn) * d + k];
        for (int tt = 0; tt < x.t; ++tt) {
          double g = g_mean / x.t;
          if (!floored)
            g += g_std * (x.at(nn, c, tt, ff) - mean) / (x.t * sd);
          gx.at(nn, c, tt, ff) = g;
        }
      }
  return gx;
}

// ------------------------------------------------------------------ loss --

CeLoss softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  if (static_cast<int>(labels.size()) != logits.n)
    throw Error("cross_entropy: label count mismatch");
  const int k = logits.c;
  CeLoss loss;
  loss.per_sample.assign(static_cast<std::size_t>(logits.n), 0.0);
  loss.grad = Tensor::matrix(logits.n, k);
  loss.correct = 0;
  double total = 0.0;
  for (int nn = 0; nn < logits.n; ++nn) {
    const int y = labels[static_cast<std::size_t>(nn)];
    if (y < 0 || y >= k) throw Error("cross_entropy: label out of range");
    double hi = logits.at(nn, 0);
    int arg = 0;
    for (int j = 1; j < k; ++j)
      if (logits.at(nn, j) > hi) {
        hi = logits.at(nn, j);
        arg = j;
      }
    double z = 0.0;
    for (int j = 0; j < k; ++j) z += std::exp(logits.at(nn, j) - hi);
    const double log_z = hi + std::log(z);
    loss.per_sample[static_cast<std::size_t>(nn)] = log_z - logits.at(nn, y);
    total += loss.per_sample[static_cast<std::size_t>(nn)];
    if (arg == y) ++loss.correct;
    for (int j = 0; j < k; ++j) {
      const double p = std::exp(logits.at(nn, j) - log_z);
      loss.grad.at(nn, j) = (p - (j == y ? 1.0 : 0.0)) / logits.n;
    }
  }
  loss.mean_loss = total / logits.n;
  return loss;
}

std::vector<double> grl_forward(const std::vector<double>& x) { return x; }

std::vector<double> grl_backward(const std::vector<double>& grad, double lambda) {
  std::vector<double> g = grad;
  for (auto& v : g) v *= -lambda;
  return g;
}

double dat_loss(const std::vector<double>& speaker_losses,
                const std::vector<double>& domain_losses, double lambda) {
  if (speaker_losses.empty()) throw Error("dat_loss: empty batch");
  if (speaker_losses.size() != domain_losses.size())
    throw Error("dat_loss: per-sample loss lengths differ");
  double ly = 0.0, ld = 0.0;
  for (double v : speaker_losses) ly += v;
  for (double v : domain_losses) ld += v;
  const double n = static_cast<double>(speaker_losses.size());
  return ly / n - lambda * ld / n;
}

}  // namespace ffsv
