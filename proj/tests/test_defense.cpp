// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <deque>
#include <limits>
#include <set>
#include <vector>

#include "doctest.h"
#include "roclab/defense.hpp"
#include "roclab/losses.hpp"

using namespace roclab;

namespace {

EmbeddingMatrix random_unit_rows(std::size_t n, std::size_t d, Rng& rng) {
  EmbeddingMatrix m(n, d);
  for (auto& v : m.values) v = rng.normal();
  return normalize_rows(m);
}

CaptionPool random_pool(std::size_t capacity, std::size_t d, Rng& rng) {
  return CaptionPool(random_unit_rows(capacity, d, rng),
                     std::vector<int>(capacity, -1));
}

double l2_distance(const double* a, const double* b, std::size_t d) {
  double ss = 0.0;
  for (std::size_t i = 0; i < d; ++i) ss += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(ss);
}

Dataset tiny_dataset(std::size_t n_train = 240) {
  auto tax = build_taxonomy(4, 8, 8, 41);
  return generate_dataset(tax, n_train, 5, 8, 43);
}

ModelParams tiny_model(const Dataset& ds, std::uint64_t seed) {
  return init_params(seed, ds.taxonomy.image_h, ds.taxonomy.image_w,
                     ds.taxonomy.vocab_size(), 16, 12, 8);
}

}  // namespace

TEST_CASE("pool_match equals a brute-force scan with tie-breaks") {
  Rng rng(51);
  auto pool = random_pool(100, 16, rng);
  auto queries = random_unit_rows(1000, 16, rng);
  auto result = pool_match(pool, queries);
  REQUIRE(result.matched_indices.size() == 1000);
  for (std::size_t q = 0; q < 1000; ++q) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t slot = 0; slot < pool.capacity(); ++slot) {
      const double d =
          l2_distance(queries.row(q), pool.entries().row(slot), 16);
      if (d < best_d) {  // strict: ties keep the lowest slot
        best_d = d;
        best = slot;
      }
    }
    CHECK(result.matched_indices[q] == best);
    for (std::size_t c = 0; c < 16; ++c)
      CHECK(result.matched_embeddings.at(q, c) ==
            pool.entries().at(best, c));
  }
}

TEST_CASE("pool_match trivial geometry cases") {
  EmbeddingMatrix entries(3, 2);
  entries.at(0, 0) = 1.0;   // e1
  entries.at(1, 1) = 1.0;   // e2
  entries.at(2, 0) = -1.0;  // -e1
  entries.normalized = true;
  CaptionPool pool(entries, {0, 1, 2});
  EmbeddingMatrix query(1, 2);
  query.at(0, 0) = 1.0;
  query.normalized = true;
  auto result = pool_match(pool, query);
  CHECK(result.matched_indices[0] == 0);
  CHECK(result.matched_class_votes[0] == 0);
}

TEST_CASE("argmin L2 equals argmax cosine on unit vectors") {
  Rng rng(52);
  auto pool = random_pool(64, 8, rng);
  auto queries = random_unit_rows(200, 8, rng);
  auto result = pool_match(pool, queries);
  for (std::size_t q = 0; q < queries.rows; ++q) {
    std::size_t best = 0;
    double best_cos = -std::numeric_limits<double>::infinity();
    for (std::size_t slot = 0; slot < pool.capacity(); ++slot) {
      const double c = dot(queries.row(q), pool.entries().row(slot), 8);
      if (c > best_cos) {
        best_cos = c;
        best = slot;
      }
    }
    CHECK(result.matched_indices[q] == best);
  }
}

TEST_CASE("pool update matches a reference FIFO over many rounds") {
  Rng rng(53);
  const std::size_t cap = 37, d = 4;
  auto pool = random_pool(cap, d, rng);

  // Reference model: deque of (vector, vote, stamp), oldest at front.
  std::deque<std::pair<std::vector<double>, int>> ref;
  for (std::size_t s = 0; s < cap; ++s)
    ref.emplace_back(std::vector<double>(pool.entries().row(s),
                                         pool.entries().row(s) + d),
                     pool.class_vote(s));

  for (std::uint64_t round = 1; round <= 10000; ++round) {
    const std::size_t batch = 1 + rng.next_below(cap);
    auto fresh = random_unit_rows(batch, d, rng);
    std::vector<int> votes(batch);
    for (auto& v : votes) v = static_cast<int>(rng.next_below(5));
    pool.update(fresh, votes, round);
    for (std::size_t i = 0; i < batch; ++i) {
      ref.pop_front();
      ref.emplace_back(std::vector<double>(fresh.row(i), fresh.row(i) + d),
                       votes[i]);
    }
    CHECK(pool.capacity() == cap);
    if (round % 500 == 0 || round <= 3) {
      // Slot order may differ from deque order; compare as multisets by
      // matching each reference entry exactly once.
      std::vector<bool> used(cap, false);
      for (const auto& [vec, vote] : ref) {
        bool found = false;
        for (std::size_t s = 0; s < cap && !found; ++s) {
          if (used[s] || pool.class_vote(s) != vote) continue;
          if (std::equal(vec.begin(), vec.end(), pool.entries().row(s))) {
            used[s] = true;
            found = true;
          }
        }
        CHECK(found);
      }
    }
  }
  CHECK(pool.newest_stamp() == 10000);
}

TEST_CASE("pool update rejects oversized batches") {
  Rng rng(54);
  auto pool = random_pool(8, 4, rng);
  auto big = random_unit_rows(9, 4, rng);
  CHECK_THROWS_AS(pool.update(big, std::vector<int>(9, -1), 1),
                  BatchLargerThanPool);
}

TEST_CASE("epoch schedule selects pool epochs every K-th epoch") {
  CHECK(epoch_mode(1, 1) == EpochMode::Roclip);
  CHECK(epoch_mode(7, 1) == EpochMode::Roclip);
  CHECK(epoch_mode(1, 3) == EpochMode::Clip);
  CHECK(epoch_mode(2, 3) == EpochMode::Clip);
  CHECK(epoch_mode(3, 3) == EpochMode::Roclip);
  CHECK(epoch_mode(6, 3) == EpochMode::Roclip);
  CHECK(epoch_mode(30, 3) == EpochMode::Roclip);
  CHECK(epoch_mode(5, 0) == EpochMode::Clip);  // 0 = never
  CHECK_THROWS_AS(epoch_mode(0, 3), BadConfig);
}

TEST_CASE("pool_init draws unit-norm caption embeddings deterministically") {
  auto ds = tiny_dataset();
  auto params = tiny_model(ds, 1);
  Rng r1(2), r2(2);
  auto a = pool_init(ds, params, 12, r1);
  auto b = pool_init(ds, params, 12, r2);
  CHECK(a.capacity() == 12);
  CHECK(a.entries().values == b.entries().values);
  for (std::size_t s = 0; s < a.capacity(); ++s) {
    double ss = 0.0;
    for (std::size_t c = 0; c < a.dim(); ++c)
      ss += a.entries().at(s, c) * a.entries().at(s, c);
    CHECK(std::sqrt(ss) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(a.class_vote(s) >= 0);
    CHECK(a.class_vote(s) < 4);
  }
}

TEST_CASE("train is deterministic under the seed") {
  auto ds = tiny_dataset(160);
  DefenseConfig def;
  def.mode = DefenseMode::NnPool;
  def.pool_fraction = 0.25;
  def.k_frequency = 2;
  def.augmentation.enabled = true;
  TrainConfig tc;
  tc.epochs = 4;
  tc.batch_size = 32;
  tc.seed = 77;

  auto p1 = tiny_model(ds, 5);
  auto p2 = tiny_model(ds, 5);
  auto m1 = train(ds, p1, def, tc);
  auto m2 = train(ds, p2, def, tc);
  REQUIRE(m1.per_epoch.size() == 4);
  for (std::size_t e = 0; e < 4; ++e)
    CHECK(m1.per_epoch[e].mean_loss == m2.per_epoch[e].mean_loss);
  CHECK(p1.img_l1.w.v == p2.img_l1.w.v);
  CHECK(p1.token_emb.v == p2.token_emb.v);
  CHECK(m1.per_epoch[1].mode == "roclip");
  CHECK(m1.per_epoch[0].mode == "clip");
}

TEST_CASE("pool schedule with k=0 reduces to plain training") {
  auto ds = tiny_dataset(160);
  DefenseConfig never;
  never.mode = DefenseMode::NnPool;
  never.k_frequency = 0;
  never.pool_fraction = 0.25;
  never.augmentation.enabled = false;
  DefenseConfig none;
  none.mode = DefenseMode::None;
  none.augmentation.enabled = false;
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 32;
  tc.seed = 88;

  auto p1 = tiny_model(ds, 9);
  auto p2 = tiny_model(ds, 9);
  auto m1 = train(ds, p1, never, tc);
  auto m2 = train(ds, p2, none, tc);
  for (std::size_t e = 0; e < 3; ++e)
    CHECK(m1.per_epoch[e].mean_loss == m2.per_epoch[e].mean_loss);
  CHECK(p1.img_l1.w.v == p2.img_l1.w.v);
}

TEST_CASE("in-modality mode trains and reduces the loss") {
  auto ds = tiny_dataset(160);
  DefenseConfig def;
  def.mode = DefenseMode::InModality;
  def.augmentation.enabled = true;
  TrainConfig tc;
  tc.epochs = 6;
  tc.batch_size = 32;
  tc.seed = 99;
  auto params = tiny_model(ds, 11);
  auto metrics = train(ds, params, def, tc);
  REQUIRE(metrics.per_epoch.size() == 6);
  CHECK(metrics.per_epoch.back().mean_loss <
        metrics.per_epoch.front().mean_loss);
  CHECK(metrics.per_epoch[0].mode == "inmodality");
}

TEST_CASE("preprocess_filter removes the lowest-similarity quantile") {
  auto ds = tiny_dataset(200);
  auto params = tiny_model(ds, 13);

  auto [none_removed, r0] = preprocess_filter(ds, params, 0.0);
  CHECK(r0.removed_total == 0);
  CHECK(none_removed.train.size() == 200);

  auto [filtered, report] = preprocess_filter(ds, params, 0.25);
  CHECK(report.removed_total == 50);
  CHECK(filtered.train.size() == 150);

  // Every removed pair must sit at or below every survivor's cosine.
  auto cosine = [&](const PairedExample& ex) {
    auto enc = encode(params, {ex.image}, {ex.caption});
    return dot(enc.proj_image.row(0), enc.proj_text.row(0),
               enc.proj_image.dim);
  };
  double max_removed = -2.0, min_kept = 2.0;
  std::set<std::uint64_t> kept_ids;
  for (const auto& ex : filtered.train) kept_ids.insert(ex.id);
  for (const auto& ex : ds.train) {
    const double c = cosine(ex);
    if (kept_ids.count(ex.id)) {
      min_kept = std::min(min_kept, c);
    } else {
      max_removed = std::max(max_removed, c);
    }
  }
  CHECK(max_removed <= min_kept + 1e-12);
  CHECK(report.threshold == doctest::Approx(max_removed));

  CHECK_THROWS_AS(preprocess_filter(ds, params, 1.0), BadConfig);
  CHECK_THROWS_AS(preprocess_filter(ds, params, -0.1), BadConfig);
}
