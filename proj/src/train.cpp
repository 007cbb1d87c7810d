#include "ffsv/train.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ffsv/error.hpp"

namespace ffsv {

void TrainConfig::validate() const {
  if (batch_size < 1 || epochs < 1 || crop_frames < 1 || decay_every < 1)
    throw Error("train: sizes must be positive");
  if (!(learning_rate > 0.0) || !(lr_decay > 0.0))
    throw Error("train: learning rate and decay must be positive");
  if (dat_lambda < 0.0) throw Error("train: dat_lambda must be >= 0");
}

namespace {

FeatureMatrix crop_from(const FeatureMatrix& f, int crop_frames, int start,
                        bool cyclic) {
  FeatureMatrix out(crop_frames, f.cols);
  for (int r = 0; r < crop_frames; ++r) {
    const int src = cyclic ? (start + r) % f.rows : start + r;
    for (int c = 0; c < f.cols; ++c) out.at(r, c) = f.at(src, c);
  }
  return out;
}

}  // namespace

FeatureMatrix random_crop(const FeatureMatrix& f, int crop_frames, Rng& rng) {
  if (f.rows < 1) throw Error("crop: empty feature matrix");
  if (f.rows >= crop_frames)
    return crop_from(f, crop_frames, rng.uniform_int(0, f.rows - crop_frames), false);
  return crop_from(f, crop_frames, rng.uniform_int(0, f.rows - 1), true);
}

FeatureMatrix center_crop(const FeatureMatrix& f, int crop_frames) {
  if (f.rows < 1) throw Error("crop: empty feature matrix");
  if (f.rows >= crop_frames)
    return crop_from(f, crop_frames, (f.rows - crop_frames) / 2, false);
  return crop_from(f, crop_frames, 0, true);
}

std::vector<EpochStats> train(MicroNet& net, const std::vector<TrainExample>& data,
                              const TrainConfig& cfg, bool dat_stage) {
  cfg.validate();
  if (data.empty()) throw Error("train: empty dataset");

  std::set<int> speakers, domains;
  for (const auto& ex : data) {
    speakers.insert(ex.speaker);
    domains.insert(ex.domain);
    if (ex.speaker < 0 || ex.speaker >= net.config().num_speakers)
      throw Error("train: speaker label out of range");
    if (ex.domain < 0 || ex.domain >= net.config().num_domains)
      throw Error("train: domain label out of range");
  }
  if (speakers.size() < 2) throw Error("train: need at least two speaker classes");
  if (dat_stage && domains.size() < 2)
    throw Error("train: DAT stage needs at least two domains");

  Rng rng(cfg.seed);
  const int n = static_cast<int>(data.size());
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

  std::vector<EpochStats> history;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr =
        cfg.learning_rate * std::pow(cfg.lr_decay, epoch / cfg.decay_every);

    // Fisher-Yates with the run RNG keeps epochs reproducible.
    for (int i = n - 1; i > 0; --i)
      std::swap(order[static_cast<std::size_t>(i)],
                order[static_cast<std::size_t>(rng.uniform_int(0, i))]);

    EpochStats stats;
    int seen = 0, correct = 0, batches = 0;
    for (int begin = 0; begin < n; begin += cfg.batch_size) {
      const int count = std::min(cfg.batch_size, n - begin);
      Tensor x(count, 1, cfg.crop_frames, data[0].features.cols);
      std::vector<int> y(static_cast<std::size_t>(count)), d(static_cast<std::size_t>(count));
      for (int b = 0; b < count; ++b) {
        const auto& ex = data[static_cast<std::size_t>(order[static_cast<std::size_t>(begin + b)])];
        FeatureMatrix crop = random_crop(ex.features, cfg.crop_frames, rng);
        for (int r = 0; r < crop.rows; ++r)
          for (int c = 0; c < crop.cols; ++c) x.at(b, 0, r, c) = crop.at(r, c);
        y[static_cast<std::size_t>(b)] = ex.speaker;
        d[static_cast<std::size_t>(b)] = ex.domain;
      }

      auto out = net.forward(x, /*training=*/true);
      auto ce_speaker = softmax_cross_entropy(out.speaker_logits, y);
      if (!std::isfinite(ce_speaker.mean_loss))
        throw Error("train: non-finite speaker loss");

      net.zero_grads();
      if (dat_stage) {
        auto ce_domain = softmax_cross_entropy(out.domain_logits, d);
        if (!std::isfinite(ce_domain.mean_loss))
          throw Error("train: non-finite domain loss");
        stats.domain_loss += ce_domain.mean_loss;
        net.backward(ce_speaker.grad, &ce_domain.grad, cfg.dat_lambda);
      } else {
        net.backward(ce_speaker.grad, nullptr, 0.0);
      }
      net.sgd_step(lr);

      stats.speaker_loss += ce_speaker.mean_loss;
      correct += ce_speaker.correct;
      seen += count;
      ++batches;
    }
    stats.speaker_loss /= batches;
    stats.domain_loss /= batches;
    stats.speaker_accuracy = static_cast<double>(correct) / seen;
    history.push_back(stats);
  }
  return history;
}

}  // namespace ffsv
