// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <memory>

#include "roclab/defense.hpp"
#include "roclab/losses.hpp"

namespace roclab {

namespace {

void accumulate(ModelGrads& into, const ModelGrads& other) {
  std::vector<const std::vector<double>*> src;
  other.shadow.for_each_block(
      [&](const std::vector<double>& v) { src.push_back(&v); });
  std::size_t block = 0;
  into.shadow.for_each_block([&](std::vector<double>& v) {
    const std::vector<double>& s = *src[block++];
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += s[i];
  });
  into.grad_log_tau += other.grad_log_tau;
}

struct AugmentedBatch {
  std::vector<Image> images;
  std::vector<Caption> captions;
};

AugmentedBatch augment_batch(const Dataset& ds,
                             const std::vector<std::size_t>& idx,
                             std::size_t lo, std::size_t hi,
                             const AugmentPolicy& policy, Rng& rng) {
  AugmentedBatch b;
  const Taxonomy& tax = ds.taxonomy;
  for (std::size_t i = lo; i < hi; ++i) {
    const PairedExample& ex = ds.train[idx[i]];
    b.images.push_back(
        augment_image(ex.image, tax.image_h, tax.image_w, policy, rng));
    b.captions.push_back(augment_caption(ex.caption, tax, policy, rng));
  }
  return b;
}

}  // namespace

RunMetrics train(const Dataset& dataset, ModelParams& params,
                 const DefenseConfig& cfg, const TrainConfig& train_cfg,
                 const EpochCallback& on_epoch) {
  const std::size_t n_train = dataset.train.size();
  if (n_train == 0) throw BadConfig("train: empty train split");

  Rng root(train_cfg.seed);
  Rng pool_rng = root.split(1);

  std::unique_ptr<CaptionPool> pool;
  if (cfg.mode == DefenseMode::NnPool) {
    const std::size_t capacity = std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::llround(cfg.pool_fraction * static_cast<double>(n_train))));
    if (train_cfg.batch_size > capacity) {
      throw BadConfig("train: batch size exceeds pool capacity");
    }
    pool = std::make_unique<CaptionPool>(
        pool_init(dataset, params, capacity, pool_rng));
  }

  OptimizerState opt = init_optimizer(params, train_cfg.lr);
  RunMetrics metrics;

  std::vector<std::size_t> order(n_train);
  for (std::size_t i = 0; i < n_train; ++i) order[i] = i;

  std::uint64_t global_step = 0;
  for (std::size_t epoch = 1; epoch <= train_cfg.epochs; ++epoch) {
    Rng epoch_rng = root.split(epoch + 1000);
    epoch_rng.shuffle(order);

    const bool pool_epoch =
        cfg.mode == DefenseMode::NnPool &&
        epoch_mode(epoch, cfg.k_frequency) == EpochMode::Roclip;

    double loss_sum = 0.0;
    std::size_t batch_count = 0;
    std::size_t clean_total = 0, clean_own = 0;
    std::size_t poison_total = 0, poison_adv = 0;

    for (std::size_t lo = 0; lo < n_train; lo += train_cfg.batch_size) {
      const std::size_t hi = std::min(lo + train_cfg.batch_size, n_train);
      const AugmentedBatch aug = augment_batch(dataset, order, lo, hi,
                                               cfg.augmentation, epoch_rng);
      ++global_step;

      if (pool_epoch) {
        const EncodedBatch enc = encode(params, aug.images, aug.captions);
        const MatchResult match = pool_match(*pool, enc.proj_image);
        LossOutput loss =
            roclip_loss(enc.proj_image, match.matched_embeddings,
                        params.temperature);
        // Pool rows are constants: only the image tower trains here.
        loss.grad_text = EmbeddingMatrix();

        std::vector<int> votes;
        for (const Caption& cap : aug.captions) {
          votes.push_back(dataset.taxonomy.caption_class_vote(cap));
        }
        pool->update(enc.proj_text, votes, global_step);

        loss_sum += backward_and_step(params, opt, enc, loss);
        ++batch_count;

        for (std::size_t i = lo; i < hi; ++i) {
          const PairedExample& ex = dataset.train[order[i]];
          const int own_vote =
              dataset.taxonomy.caption_class_vote(ex.caption);
          const int matched_vote = match.matched_class_votes[i - lo];
          if (ex.provenance == Provenance::Clean) {
            ++clean_total;
            if (matched_vote == own_vote) ++clean_own;
          } else {
            ++poison_total;
            if (matched_vote == own_vote) ++poison_adv;
          }
          if (train_cfg.record_match_trace) {
            metrics.match_trace.push_back(
                {epoch, ex.id, static_cast<std::uint32_t>(ex.provenance),
                 matched_vote, ex.true_class, own_vote});
          }
        }
      } else if (cfg.mode == DefenseMode::InModality) {
        const AugmentedBatch aug2 = augment_batch(dataset, order, lo, hi,
                                                  cfg.augmentation, epoch_rng);
        const EncodedBatch enc1 = encode(params, aug.images, aug.captions);
        const EncodedBatch enc2 = encode(params, aug2.images, aug2.captions);
        const InModalityLossOutput loss =
            inmodality_loss(enc1.proj_image, enc2.proj_image, enc1.proj_text,
                            enc2.proj_text, params.temperature);
        ModelGrads g = backward(params, enc1, loss.grad_img1, loss.grad_txt1,
                                loss.grad_log_tau);
        accumulate(g, backward(params, enc2, loss.grad_img2, loss.grad_txt2,
                               0.0));
        apply_adam(params, opt, g);
        loss_sum += loss.value;
        ++batch_count;
      } else {
        const EncodedBatch enc = encode(params, aug.images, aug.captions);
        const LossOutput loss =
            clip_loss(enc.proj_image, enc.proj_text, params.temperature);
        loss_sum += backward_and_step(params, opt, enc, loss);
        ++batch_count;
      }
    }

    EpochMetrics em;
    em.epoch = epoch;
    em.mode = pool_epoch ? "roclip"
              : cfg.mode == DefenseMode::InModality ? "inmodality"
                                                    : "clip";
    em.mean_loss = loss_sum / static_cast<double>(batch_count);
    if (pool_epoch) {
      if (clean_total > 0) {
        em.clean_own_match_frac =
            static_cast<double>(clean_own) / static_cast<double>(clean_total);
      }
      if (poison_total > 0) {
        em.poison_adv_match_frac =
            static_cast<double>(poison_adv) / static_cast<double>(poison_total);
      }
    }
    if (pool) {
      em.pool_oldest_stamp = pool->oldest_stamp();
      em.pool_newest_stamp = pool->newest_stamp();
    }
    metrics.per_epoch.push_back(em);
    if (on_epoch) on_epoch(epoch, params, em);
  }
  return metrics;
}

}  // namespace roclab
