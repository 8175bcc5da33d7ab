// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <limits>

#include "roclab/defense.hpp"

namespace roclab {

CaptionPool::CaptionPool(EmbeddingMatrix entries, std::vector<int> class_votes)
    : entries_(std::move(entries)),
      stamps_(entries_.rows, 0),
      class_votes_(std::move(class_votes)) {
  if (class_votes_.size() != entries_.rows) {
    throw BadConfig("CaptionPool: vote count mismatch");
  }
  for (std::size_t r = 0; r < entries_.rows; ++r) {
    if (std::abs(row_norm(entries_, r) - 1.0) > 1e-6) {
      throw BadConfig("CaptionPool: entry " + std::to_string(r) +
                      " not unit norm");
    }
  }
}

void CaptionPool::update(const EmbeddingMatrix& caption_embeddings,
                         const std::vector<int>& class_votes,
                         std::uint64_t step) {
  const std::size_t n = caption_embeddings.rows;
  if (n > capacity()) {
    throw BatchLargerThanPool("pool_update: batch " + std::to_string(n) +
                              " > capacity " + std::to_string(capacity()));
  }
  if (caption_embeddings.dim != dim()) {
    throw DimMismatch("pool_update: dim mismatch");
  }
  for (std::size_t i = 0; i < n; ++i) {
    // head_ always points at the oldest slot; overwrite it in place.
    for (std::size_t c = 0; c < dim(); ++c) {
      entries_.at(head_, c) = caption_embeddings.at(i, c);
    }
    stamps_[head_] = step;
    class_votes_[head_] = class_votes[i];
    head_ = (head_ + 1) % capacity();
  }
}

std::uint64_t CaptionPool::oldest_stamp() const {
  return *std::min_element(stamps_.begin(), stamps_.end());
}

std::uint64_t CaptionPool::newest_stamp() const {
  return *std::max_element(stamps_.begin(), stamps_.end());
}

CaptionPool pool_init(const Dataset& dataset, const ModelParams& params,
                      std::size_t capacity, Rng& rng) {
  if (capacity == 0 || capacity > dataset.train.size()) {
    throw BadConfig("pool_init: capacity must be in [1, |train|]");
  }
  std::vector<std::size_t> indices(dataset.train.size());
  for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
  rng.shuffle(indices);
  indices.resize(capacity);

  std::vector<Image> images;
  std::vector<Caption> captions;
  std::vector<int> votes;
  for (std::size_t i : indices) {
    const PairedExample& ex = dataset.train[i];
    images.push_back(ex.image);
    captions.push_back(ex.caption);
    votes.push_back(dataset.taxonomy.caption_class_vote(ex.caption));
  }
  // Un-augmented captions at initialization; encode needs image inputs
  // too, but only the text tower output is kept.
  const EncodedBatch enc = encode(params, images, captions);
  return CaptionPool(enc.proj_text, std::move(votes));
}

MatchResult pool_match(const CaptionPool& pool,
                       const EmbeddingMatrix& img_aug_embeddings) {
  if (img_aug_embeddings.dim != pool.dim()) {
    throw DimMismatch("pool_match: dim mismatch");
  }
  const EmbeddingMatrix& entries = pool.entries();
  MatchResult res;
  res.matched_embeddings = EmbeddingMatrix(img_aug_embeddings.rows, pool.dim());
  for (std::size_t q = 0; q < img_aug_embeddings.rows; ++q) {
    std::size_t best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    const double* query = img_aug_embeddings.row(q);
    for (std::size_t p = 0; p < pool.capacity(); ++p) {
      double d2 = 0.0;
      const double* e = entries.row(p);
      for (std::size_t c = 0; c < pool.dim(); ++c) {
        const double d = query[c] - e[c];
        d2 += d * d;
      }
      if (d2 < best_d2) {  // strict: ties keep the lowest slot index
        best_d2 = d2;
        best = p;
      }
    }
    for (std::size_t c = 0; c < pool.dim(); ++c) {
      res.matched_embeddings.at(q, c) = entries.at(best, c);
    }
    res.matched_indices.push_back(best);
    res.matched_stamps.push_back(pool.stamps()[best]);
    res.matched_class_votes.push_back(pool.class_vote(best));
  }
  res.matched_embeddings.normalized = true;
  return res;
}

EpochMode epoch_mode(std::size_t epoch, std::size_t k) {
  if (epoch < 1) throw BadConfig("epoch_mode: epochs are 1-indexed");
  if (k == 0) return EpochMode::Clip;
  return epoch % k == 0 ? EpochMode::Roclip : EpochMode::Clip;
}

}  // namespace roclab
