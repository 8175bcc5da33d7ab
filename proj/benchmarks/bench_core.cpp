// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "roclab/defense.hpp"
#include "roclab/losses.hpp"
#include "roclab/model.hpp"

using namespace roclab;

namespace {

EmbeddingMatrix random_unit_rows(std::size_t n, std::size_t d, Rng& rng) {
  EmbeddingMatrix m(n, d);
  for (auto& v : m.values) v = rng.normal();
  return normalize_rows(m);
}

void BM_clip_loss(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  auto img = random_unit_rows(n, 16, rng);
  auto txt = random_unit_rows(n, 16, rng);
  Temperature t{std::log(0.07), true};
  for (auto _ : state) {
    benchmark::DoNotOptimize(clip_loss(img, txt, t).value);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n));
}
BENCHMARK(BM_clip_loss)->Arg(16)->Arg(64)->Arg(256);

void BM_pool_match(benchmark::State& state) {
  const auto capacity = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  CaptionPool pool(random_unit_rows(capacity, 16, rng),
                   std::vector<int>(capacity, -1));
  auto queries = random_unit_rows(64, 16, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(pool_match(pool, queries).matched_indices);
  }
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_pool_match)->Arg(100)->Arg(400)->Arg(1600);

void BM_encode(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  auto params = init_params(3, 16, 16, 224, 64, 32, 16);
  Rng rng(3);
  std::vector<Image> images(batch, Image(256));
  std::vector<Caption> captions(batch);
  for (auto& img : images)
    for (auto& p : img) p = rng.uniform();
  for (auto& cap : captions)
    for (int i = 0; i < 8; ++i)
      cap.push_back(static_cast<std::uint32_t>(rng.next_below(224)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(encode(params, images, captions).proj_image);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(batch));
}
BENCHMARK(BM_encode)->Arg(16)->Arg(64);

void BM_train_step(benchmark::State& state) {
  auto params = init_params(5, 16, 16, 224, 64, 32, 16);
  auto opt = init_optimizer(params, 1e-3);
  Rng rng(4);
  std::vector<Image> images(64, Image(256));
  std::vector<Caption> captions(64);
  for (auto& img : images)
    for (auto& p : img) p = rng.uniform();
  for (auto& cap : captions)
    for (int i = 0; i < 8; ++i)
      cap.push_back(static_cast<std::uint32_t>(rng.next_below(224)));
  for (auto _ : state) {
    auto enc = encode(params, images, captions);
    auto loss = clip_loss(enc.proj_image, enc.proj_text, params.temperature);
    benchmark::DoNotOptimize(backward_and_step(params, opt, enc, loss));
  }
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_train_step);

}  // namespace

BENCHMARK_MAIN();
