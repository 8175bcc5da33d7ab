// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

#include "roclab/attacks.hpp"
#include "roclab/augment.hpp"
#include "roclab/metrics.hpp"
#include "roclab/model.hpp"
#include "roclab/synth.hpp"

namespace roclab {

// Fixed-capacity FIFO of unit-norm caption embeddings. The buffer is
// always full after initialization; updates evict the oldest entries.
class CaptionPool {
 public:
  CaptionPool(EmbeddingMatrix entries, std::vector<int> class_votes);

  std::size_t capacity() const { return entries_.rows; }
  std::size_t dim() const { return entries_.dim; }
  const EmbeddingMatrix& entries() const { return entries_; }
  const std::vector<std::uint64_t>& stamps() const { return stamps_; }
  int class_vote(std::size_t slot) const { return class_votes_[slot]; }

  // Evicts the oldest batch-size entries and appends the new ones with
  // the given stamp. Throws BatchLargerThanPool.
  void update(const EmbeddingMatrix& caption_embeddings,
              const std::vector<int>& class_votes, std::uint64_t step);

  std::uint64_t oldest_stamp() const;
  std::uint64_t newest_stamp() const;

 private:
  EmbeddingMatrix entries_;           // capacity x dim, slot order
  std::vector<std::uint64_t> stamps_;
  std::vector<int> class_votes_;
  std::size_t head_ = 0;              // oldest slot
};

struct MatchResult {
  EmbeddingMatrix matched_embeddings;
  std::vector<std::size_t> matched_indices;  // pool slots
  std::vector<std::uint64_t> matched_stamps;
  std::vector<int> matched_class_votes;
};

enum class DefenseMode { None, NnPool, InModality };

struct DefenseConfig {
  DefenseMode mode = DefenseMode::NnPool;
  double pool_fraction = 0.02;  // P = pool_fraction * |train|
  std::size_t k_frequency = 3;  // 0 means never (plain CLIP schedule)
  AugmentPolicy augmentation;
  // Pool rows are always treated as constants in the loss (gradient
  // stop); there is no switch to turn that off.
};

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  bool record_match_trace = false;
};

CaptionPool pool_init(const Dataset& dataset, const ModelParams& params,
                      std::size_t capacity, Rng& rng);

// Exact argmin-L2 scan over all pool entries; ties break toward the
// lowest slot index.
MatchResult pool_match(const CaptionPool& pool,
                       const EmbeddingMatrix& img_aug_embeddings);

enum class EpochMode { Clip, Roclip };

// Epochs are 1-indexed; epoch is a pool epoch iff epoch % k == 0.
// k == 0 is the "never" sentinel.
EpochMode epoch_mode(std::size_t epoch, std::size_t k);

using EpochCallback =
    std::function<void(std::size_t epoch, const ModelParams& params,
                       const EpochMetrics& metrics)>;

// Full training loop: augment, encode, match/update on pool epochs,
// step. Mutates params in place and returns the run metrics.
RunMetrics train(const Dataset& dataset, ModelParams& params,
                 const DefenseConfig& cfg, const TrainConfig& train_cfg,
                 const EpochCallback& on_epoch = nullptr);

struct FilterReport {
  double threshold = 0.0;
  std::size_t removed_total = 0;
  double poison_removed_frac = 0.0;
  double clean_removed_frac = 0.0;
};

// Removes the lowest discard_quantile fraction of train pairs by
// image-caption cosine similarity under the given params.
std::pair<Dataset, FilterReport> preprocess_filter(const Dataset& dataset,
                                                   const ModelParams& params,
                                                   double discard_quantile);

}  // namespace roclab
