#include "ffsv/network.hpp"

#include <cmath>

#include "ffsv/error.hpp"

namespace ffsv {

namespace {

int conv_out(int in, int kernel, int stride, int pad, int dilation = 1) {
  return (in + 2 * pad - dilation * (kernel - 1) - 1) / stride + 1;
}

}  // namespace

// -------------------------------------------------------------- BamBlock --

BamBlock::BamBlock(int channels, int reduction)
    : channels_(channels), hidden_(std::max(channels / reduction, 1)),
      fc1_(channels, hidden_), fc2_(hidden_, channels), bn_channel_(channels),
      tf_reduce_(1, hidden_, 1, 1, 1, 1, 0, 0, 1, 1, false),
      tf_dilated_(hidden_, hidden_, 3, 3, 1, 1, 2, 2, 2, 2, false),
      tf_project_(hidden_, 1, 1, 1, 1, 1, 0, 0, 1, 1, false), bn_tf_(1) {
  if (channels % reduction != 0)
    throw Error("bam: reduction must divide the channel count");
}

void BamBlock::init_params(Rng& rng) {
  fc1_.init_params(rng);
  fc2_.init_params(rng);
  tf_reduce_.init_params(rng);
  tf_dilated_.init_params(rng);
  tf_project_.init_params(rng);
}

Tensor BamBlock::forward(const Tensor& x, bool training) {
  if (x.c != channels_) throw Error("bam: channel mismatch");
  input_ = x;

  // channel branch: global average pool -> MLP -> BN
  Tensor pooled = Tensor::matrix(x.n, x.c);
  const double inv_tf = 1.0 / (static_cast<double>(x.t) * x.f);
  for (int nn = 0; nn < x.n; ++nn)
    for (int c = 0; c < x.c; ++c) {
      double acc = 0.0;
      for (int tt = 0; tt < x.t; ++tt)
        for (int ff = 0; ff < x.f; ++ff) acc += x.at(nn, c, tt, ff);
      pooled.at(nn, c) = acc * inv_tf;
    }
  Tensor mc = bn_channel_.forward(
      fc2_.forward(relu_fc_.forward(fc1_.forward(pooled))), training);
  sc_ = sig_channel_.forward(mc);

  // time-frequency branch: channel average pool -> convs -> BN
  Tensor cp(x.n, 1, x.t, x.f);
  const double inv_c = 1.0 / x.c;
  for (int nn = 0; nn < x.n; ++nn)
    for (int tt = 0; tt < x.t; ++tt)
      for (int ff = 0; ff < x.f; ++ff) {
        double acc = 0.0;
        for (int c = 0; c < x.c; ++c) acc += x.at(nn, c, tt, ff);
        cp.at(nn, 0, tt, ff) = acc * inv_c;
      }
  Tensor u = relu_tf1_.forward(tf_reduce_.forward(cp));
  u = relu_tf2_.forward(tf_dilated_.forward(u));
  Tensor mtf = bn_tf_.forward(tf_project_.forward(u), training);
  stf_ = sig_tf_.forward(mtf);

  mask_ = Tensor(x.n, x.c, x.t, x.f);
  Tensor y(x.n, x.c, x.t, x.f);
  for (int nn = 0; nn < x.n; ++nn)
    for (int c = 0; c < x.c; ++c)
      for (int tt = 0; tt < x.t; ++tt)
        for (int ff = 0; ff < x.f; ++ff) {
          const double m = 0.5 * (sc_.at(nn, c) + stf_.at(nn, 0, tt, ff));
          mask_.at(nn, c, tt, ff) = m;
          y.at(nn, c, tt, ff) = x.at(nn, c, tt, ff) * (1.0 + m);
        }
  return y;
}

Tensor BamBlock::backward(const Tensor& grad_out) {
  const Tensor& x = input_;
  Tensor gx(x.n, x.c, x.t, x.f);
  Tensor g_sc = Tensor::matrix(x.n, x.c);
  Tensor g_stf(x.n, 1, x.t, x.f);

  for (int nn = 0; nn < x.n; ++nn)
    for (int c = 0; c < x.c; ++c)
      for (int tt = 0; tt < x.t; ++tt)
        for (int ff = 0; ff < x.f; ++ff) {
          const double g = grad_out.at(nn, c, tt, ff);
          gx.at(nn, c, tt, ff) = g * (1.0 + mask_.at(nn, c, tt, ff));
          const double g_mask = g * x.at(nn, c, tt, ff) * 0.5;
          g_sc.at(nn, c) += g_mask;
          g_stf.at(nn, 0, tt, ff) += g_mask;
        }

  // channel branch
  Tensor g_mc = sig_channel_.backward(g_sc);
  Tensor g_pool = fc1_.backward(
      relu_fc_.backward(fc2_.backward(bn_channel_.backward(g_mc))));
  const double inv_tf = 1.0 / (static_cast<double>(x.t) * x.f);
  for (int nn = 0; nn < x.n; ++nn)
    for (int c = 0; c < x.c; ++c) {
      const double g = g_pool.at(nn, c) * inv_tf;
      for (int tt = 0; tt < x.t; ++tt)
        for (int ff = 0; ff < x.f; ++ff) gx.at(nn, c, tt, ff) += g;
    }

  // time-frequency branch
  Tensor g_mtf = sig_tf_.backward(g_stf);
  Tensor g_u = tf_project_.backward(bn_tf_.backward(g_mtf));
  g_u = tf_dilated_.backward(relu_tf2_.backward(g_u));
  Tensor g_cp = tf_reduce_.backward(relu_tf1_.backward(g_u));
  const double inv_c = 1.0 / x.c;
  for (int nn = 0; nn < x.n; ++nn)
    for (int tt = 0; tt < x.t; ++tt)
      for (int ff = 0; ff < x.f; ++ff) {
        const double g = g_cp.at(nn, 0, tt, ff) * inv_c;
        for (int c = 0; c < x.c; ++c) gx.at(nn, c, tt, ff) += g;
      }
  return gx;
}

void BamBlock::collect(const std::string& prefix, std::vector<ParamRef>& out) {
  fc1_.collect(prefix + ".fc1", out);
  fc2_.collect(prefix + ".fc2", out);
  bn_channel_.collect(prefix + ".bn_channel", out);
  tf_reduce_.collect(prefix + ".tf_reduce", out);
  tf_dilated_.collect(prefix + ".tf_dilated", out);
  tf_project_.collect(prefix + ".tf_project", out);
  bn_tf_.collect(prefix + ".bn_tf", out);
}

BamForwardResult bam_forward(const Tensor& x, BamBlock& bam) {
  BamForwardResult result;
  result.refined = bam.forward(x, /*training=*/false);
  result.mask = bam.mask();
  return result;
}

// ------------------------------------------------------------ Bottleneck --

Bottleneck::Bottleneck(int in_ch, int mid_ch, int out_ch, int stride_t,
                       int stride_f, bool with_bam, int reduction)
    : conv1_(in_ch, mid_ch, 1, 1, 1, 1, 0, 0, 1, 1, false),
      conv2_(mid_ch, mid_ch, 3, 3, stride_t, stride_f, 1, 1, 1, 1, false),
      conv3_(mid_ch, out_ch, 1, 1, 1, 1, 0, 0, 1, 1, false), bn1_(mid_ch),
      bn2_(mid_ch), bn3_(out_ch),
      has_proj_(in_ch != out_ch || stride_t != 1 || stride_f != 1) {
  if (has_proj_) {
    proj_ = std::make_unique<Conv2d>(in_ch, out_ch, 1, 1, stride_t, stride_f, 0,
                                     0, 1, 1, false);
    bn_proj_ = std::make_unique<BatchNorm>(out_ch);
  }
  if (with_bam) bam_ = std::make_unique<BamBlock>(out_ch, reduction);
}

void Bottleneck::init_params(Rng& rng) {
  conv1_.init_params(rng);
  conv2_.init_params(rng);
  conv3_.init_params(rng);
  if (has_proj_) proj_->init_params(rng);
  if (bam_) bam_->init_params(rng);
}

Tensor Bottleneck::forward(const Tensor& x, bool training) {
  cached_input_ = x;
  Tensor main = relu1_.forward(bn1_.forward(conv1_.forward(x), training));
  main = relu2_.forward(bn2_.forward(conv2_.forward(main), training));
  main = bn3_.forward(conv3_.forward(main), training);
  Tensor res = has_proj_ ? bn_proj_->forward(proj_->forward(x), training) : x;
  if (!main.same_shape(res)) throw Error("bottleneck: residual shape mismatch");
  for (std::size_t i = 0; i < main.size(); ++i) main.v[i] += res.v[i];
  Tensor y = relu_out_.forward(main);
  if (bam_) y = bam_->forward(y, training);
  return y;
}

Tensor Bottleneck::backward(const Tensor& grad_out) {
  Tensor g = grad_out;
  if (bam_) g = bam_->backward(g);
  g = relu_out_.backward(g);

  Tensor g_res = g;  // the add fans the gradient out to both paths
  Tensor gx = has_proj_ ? proj_->backward(bn_proj_->backward(g_res)) : g_res;

  Tensor g_main = conv3_.backward(bn3_.backward(g));
  g_main = conv2_.backward(bn2_.backward(relu2_.backward(g_main)));
  g_main = conv1_.backward(bn1_.backward(relu1_.backward(g_main)));

  for (std::size_t i = 0; i < gx.size(); ++i) gx.v[i] += g_main.v[i];
  return gx;
}

void Bottleneck::collect(const std::string& prefix, std::vector<ParamRef>& out) {
  conv1_.collect(prefix + ".conv1", out);
  bn1_.collect(prefix + ".bn1", out);
  conv2_.collect(prefix + ".conv2", out);
  bn2_.collect(prefix + ".bn2", out);
  conv3_.collect(prefix + ".conv3", out);
  bn3_.collect(prefix + ".bn3", out);
  if (has_proj_) {
    proj_->collect(prefix + ".proj", out);
    bn_proj_->collect(prefix + ".bn_proj", out);
  }
  if (bam_) bam_->collect(prefix + ".bam", out);
}

// -------------------------------------------------------------- MicroNet --

void MicroNetConfig::validate() const {
  if (in_channels < 1 || input_frames < 1 || input_coeffs < 1)
    throw Error("net: input shape must be positive");
  if (stem_channels < 1 || embedding_dim < 1)
    throw Error("net: channel and embedding sizes must be positive");
  if (blocks.empty()) throw Error("net: at least one block required");
  if (num_speakers < 2) throw Error("net: need at least two speakers");
  if (num_domains < 2) throw Error("net: need at least two domains");
  for (const auto& b : blocks) {
    if (b.mid < 1 || b.out < 1 || b.stride_t < 1 || b.stride_f < 1)
      throw Error("net: invalid block spec");
    if (b.bam && b.out % reduction != 0)
      throw Error("net: reduction must divide BAM block output channels");
  }
}

MicroNet::MicroNet(const MicroNetConfig& cfg)
    : cfg_(cfg),
      stem_(cfg.in_channels, cfg.stem_channels, 3, 3, cfg.stem_stride_t,
            cfg.stem_stride_f, 1, 1, 1, 1, false),
      stem_bn_(cfg.stem_channels),
      pool_(),
      embed_(1, 1),          // re-bound below once the pooled size is known
      speaker_head_(1, 1),
      domain_fc1_(1, 1),
      domain_fc2_(1, 1) {
  cfg.validate();

  int t = conv_out(cfg.input_frames, 3, cfg.stem_stride_t, 1);
  int f = conv_out(cfg.input_coeffs, 3, cfg.stem_stride_f, 1);
  int ch = cfg.stem_channels;
  for (const auto& spec : cfg.blocks) {
    blocks_.push_back(std::make_unique<Bottleneck>(
        ch, spec.mid, spec.out, spec.stride_t, spec.stride_f, spec.bam,
        cfg.reduction));
    t = conv_out(t, 3, spec.stride_t, 1);
    f = conv_out(f, 3, spec.stride_f, 1);
    ch = spec.out;
    if (t < 1 || f < 1) throw Error("net: feature map collapsed to zero size");
  }
  pooled_dim_ = 2 * ch * f;
  embed_ = Linear(pooled_dim_, cfg.embedding_dim);
  speaker_head_ = Linear(cfg.embedding_dim, cfg.num_speakers);
  domain_fc1_ = Linear(cfg.embedding_dim, cfg.domain_hidden);
  domain_fc2_ = Linear(cfg.domain_hidden, cfg.num_domains);

  Rng rng(cfg.init_seed);
  stem_.init_params(rng);
  for (auto& b : blocks_) b->init_params(rng);
  embed_.init_params(rng);
  speaker_head_.init_params(rng);
  domain_fc1_.init_params(rng);
  domain_fc2_.init_params(rng);
}

MicroNet::Output MicroNet::forward(const Tensor& x, bool training) {
  if (x.c != cfg_.in_channels || x.t != cfg_.input_frames ||
      x.f != cfg_.input_coeffs)
    throw Error("net: unexpected input shape");

  Tensor h = stem_relu_.forward(stem_bn_.forward(stem_.forward(x), training));
  for (auto& b : blocks_) h = b->forward(h, training);
  Tensor pooled = pool_.forward(h);

  Output out;
  out.embedding = embed_.forward(pooled);
  out.speaker_logits = speaker_head_.forward(out.embedding);
  out.domain_logits = domain_fc2_.forward(
      domain_relu_.forward(domain_fc1_.forward(out.embedding)));
  return out;
}

void MicroNet::backward(const Tensor& grad_speaker_logits,
                        const Tensor* grad_domain_logits, double grl_lambda) {
  Tensor g_embed = speaker_head_.backward(grad_speaker_logits);
  if (grad_domain_logits != nullptr) {
    Tensor g_dom = domain_fc1_.backward(
        domain_relu_.backward(domain_fc2_.backward(*grad_domain_logits)));
    // gradient reversal between embedding and domain head
    for (std::size_t i = 0; i < g_embed.size(); ++i)
      g_embed.v[i] -= grl_lambda * g_dom.v[i];
  }
  Tensor g = pool_.backward(embed_.backward(g_embed));
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it)
    g = (*it)->backward(g);
  stem_.backward(stem_bn_.backward(stem_relu_.backward(g)));
}

std::vector<ParamRef> MicroNet::params() {
  std::vector<ParamRef> refs;
  stem_.collect("stem.conv", refs);
  stem_bn_.collect("stem.bn", refs);
  for (std::size_t i = 0; i < blocks_.size(); ++i)
    blocks_[i]->collect("block" + std::to_string(i), refs);
  embed_.collect("embed", refs);
  speaker_head_.collect("speaker_head", refs);
  domain_fc1_.collect("domain.fc1", refs);
  domain_fc2_.collect("domain.fc2", refs);
  return refs;
}

void MicroNet::zero_grads() {
  for (auto& p : params()) {
    if (p.grad != nullptr) std::fill(p.grad->begin(), p.grad->end(), 0.0);
  }
}

void MicroNet::sgd_step(double learning_rate) {
  for (auto& p : params()) {
    if (!p.trainable || p.grad == nullptr) continue;
    for (std::size_t i = 0; i < p.value->size(); ++i)
      (*p.value)[i] -= learning_rate * (*p.grad)[i];
  }
}

}  // namespace ffsv
