#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ffsv/layers.hpp"

namespace ffsv {

/// Two-branch attention: channel mask from a pooled 2-layer perceptron, TF
/// mask from convolutions over the channel-pooled map; the sigmoid average of
/// the two refines the input multiplicatively.
class BamBlock {
 public:
  BamBlock(int channels, int reduction);

  Tensor forward(const Tensor& x, bool training);
  Tensor backward(const Tensor& grad_out);
  void collect(const std::string& prefix, std::vector<ParamRef>& out);
  void init_params(Rng& rng);

  // Mask from the last forward, broadcast to the input shape; entries in (0,1).
  const Tensor& mask() const { return mask_; }

 private:
  int channels_, hidden_;
  Linear fc1_, fc2_;
  BatchNorm bn_channel_;
  Relu relu_fc_;
  Conv2d tf_reduce_, tf_dilated_, tf_project_;
  BatchNorm bn_tf_;
  Relu relu_tf1_, relu_tf2_;
  Sigmoid sig_channel_, sig_tf_;
  Tensor input_, mask_, sc_, stf_;
};

struct BamForwardResult {
  Tensor refined;
  Tensor mask;
};

// Standalone attention refinement (inference-mode batch norm):
// mask = (sigmoid(M_C) + sigmoid(M_tf)) / 2, refined = x + x * mask.
BamForwardResult bam_forward(const Tensor& x, BamBlock& bam);

class Bottleneck {
 public:
  Bottleneck(int in_ch, int mid_ch, int out_ch, int stride_t, int stride_f,
             bool with_bam, int reduction);

  Tensor forward(const Tensor& x, bool training);
  Tensor backward(const Tensor& grad_out);
  void collect(const std::string& prefix, std::vector<ParamRef>& out);
  void init_params(Rng& rng);

 private:
  Conv2d conv1_, conv2_, conv3_;
  BatchNorm bn1_, bn2_, bn3_;
  bool has_proj_;
  std::unique_ptr<Conv2d> proj_;
  std::unique_ptr<BatchNorm> bn_proj_;
  std::unique_ptr<BamBlock> bam_;
  Relu relu1_, relu2_, relu_out_;
  Tensor cached_input_;
};

struct BlockSpec {
  int mid = 4;
  int out = 16;
  int stride_t = 2;
  int stride_f = 2;
  bool bam = true;
};

struct MicroNetConfig {
  int in_channels = 1;
  int input_frames = 256;
  int input_coeffs = 30;
  int stem_channels = 8;
  int stem_stride_t = 2;
  int stem_stride_f = 2;
  std::vector<BlockSpec> blocks{{4, 16, 2, 2, true}, {8, 32, 2, 2, true}};
  int reduction = 4;
  int embedding_dim = 64;
  int num_speakers = 2;
  int num_domains = 2;
  int domain_hidden = 16;
  std::uint64_t init_seed = 1;

  void validate() const;
};

/// Stem conv -> bottleneck(+BAM) blocks -> statistic pooling -> embedding FC,
/// with a speaker head and a GRL-coupled domain head on the embedding.
class MicroNet {
 public:
  explicit MicroNet(const MicroNetConfig& cfg);

  struct Output {
    Tensor embedding;       // (N, E)
    Tensor speaker_logits;  // (N, num_speakers)
    Tensor domain_logits;   // (N, num_domains)
  };

  Output forward(const Tensor& x, bool training);

  // Routing contract: speaker gradients flow everywhere on L_y; the domain
  // head descends on +L_d while the trunk receives -lambda * dL_d via the
  // gradient reversal point at the embedding.
  void backward(const Tensor& grad_speaker_logits, const Tensor* grad_domain_logits,
                double grl_lambda);

  std::vector<ParamRef> params();
  void zero_grads();
  void sgd_step(double learning_rate);

  const MicroNetConfig& config() const { return cfg_; }
  int pooled_dim() const { return pooled_dim_; }

 private:
  MicroNetConfig cfg_;
  Conv2d stem_;
  BatchNorm stem_bn_;
  Relu stem_relu_;
  std::vector<std::unique_ptr<Bottleneck>> blocks_;
  StatPool pool_;
  Linear embed_;
  Linear speaker_head_;
  Linear domain_fc1_, domain_fc2_;
  Relu domain_relu_;
  int pooled_dim_ = 0;
};

}  // namespace ffsv
