// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <set>

#include "doctest.h"
#include "roclab/defense.hpp"
#include "roclab/eval.hpp"

using namespace roclab;

namespace {

struct Fixture {
  Dataset ds;
  ModelParams params;
  ClassPromptBank prompts;
};

// Small dataset plus a briefly-trained model; enough training that the
// classes separate without taking real time.
Fixture trained_fixture() {
  auto tax = build_taxonomy(5, 12, 12, 61);
  Fixture f{generate_dataset(tax, 800, 20, 10, 67), {}, {}};
  f.params = init_params(3, 12, 12, tax.vocab_size(), 24, 16, 8);
  DefenseConfig def;
  def.mode = DefenseMode::None;
  def.augmentation.enabled = false;
  TrainConfig tc;
  tc.epochs = 15;
  tc.batch_size = 32;
  tc.seed = 71;
  train(f.ds, f.params, def, tc);
  f.prompts = build_prompt_bank(f.ds.taxonomy);
  return f;
}

}  // namespace

TEST_CASE("prompt bank has one class-voting prompt per class") {
  auto tax = build_taxonomy(7, 8, 8, 73);
  auto bank = build_prompt_bank(tax);
  REQUIRE(bank.prompts.size() == 7);
  for (std::size_t cls = 0; cls < 7; ++cls)
    CHECK(tax.caption_class_vote(bank.prompts[cls]) ==
          static_cast<int>(cls));
}

TEST_CASE("zero-shot accuracy on a trained model beats chance") {
  auto f = trained_fixture();
  auto result = zero_shot_classify(f.params, f.ds.eval_images, f.prompts);
  CHECK(result.predictions.size() == f.ds.eval_images.size());
  for (auto p : result.predictions) CHECK(p < 5);
  CHECK(result.accuracy > 0.6);  // chance is 0.2
}

TEST_CASE("zero-shot predictions are deterministic") {
  auto f = trained_fixture();
  auto a = zero_shot_classify(f.params, f.ds.eval_images, f.prompts);
  auto b = zero_shot_classify(f.params, f.ds.eval_images, f.prompts);
  CHECK(a.predictions == b.predictions);
}

TEST_CASE("linear probe separates classes and fails on shuffled labels") {
  auto f = trained_fixture();
  const double real =
      linear_probe(f.params, f.ds.eval_images, 0.5, 200, 0.5, 5);
  CHECK(real > 0.6);

  auto shuffled = f.ds.eval_images;
  Rng rng(7);
  std::vector<std::size_t> labels(shuffled.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    labels[i] = shuffled[i].true_class;
  rng.shuffle(labels);
  for (std::size_t i = 0; i < labels.size(); ++i)
    shuffled[i].true_class = labels[i];
  const double permuted = linear_probe(f.params, shuffled, 0.5, 200, 0.5, 5);
  CHECK(permuted < 0.45);  // chance is 0.2
  CHECK(real > permuted);
}

TEST_CASE("linear probe rejects degenerate splits") {
  auto f = trained_fixture();
  CHECK_THROWS_AS(linear_probe(f.params, f.ds.eval_images, 0.0, 10, 0.5, 1),
                  DegenerateSplit);
  CHECK_THROWS_AS(linear_probe(f.params, f.ds.eval_images, 1.0, 10, 0.5, 1),
                  DegenerateSplit);
}

TEST_CASE("poison success rate scores original targets") {
  auto f = trained_fixture();
  AttackSpec spec;
  spec.kind = AttackKind::Targeted;
  spec.adv_class = 1;
  spec.num_targets = 4;
  spec.captions_per_target = 3;
  spec.seed = 81;
  auto poisons = make_targeted_poisons(f.ds, spec);
  const double psr = poison_success_rate(f.params, poisons, f.prompts);
  CHECK(psr >= 0.0);
  CHECK(psr <= 1.0);
  // Untrained-on-poison model: targets should mostly classify as their
  // own class, not the adversarial one.
  CHECK(psr <= 0.5);
}

TEST_CASE("backdoor success rate excludes the adversarial class") {
  auto f = trained_fixture();
  auto trig = make_trigger(AttackKind::BackdoorPatch, 12, 12, 83);
  auto result = backdoor_success_rate(f.params, trig,
                                      AttackKind::BackdoorPatch, 2,
                                      f.ds.eval_images, f.prompts, 60, 85);
  CHECK(result.evaluated == 60);
  CHECK(result.bsr >= 0.0);
  CHECK(result.bsr <= 1.0);
  CHECK(result.clean_acc_on_same_images > 0.5);
}

TEST_CASE("similarity trace tracks one value per snapshot") {
  auto f = trained_fixture();
  AttackSpec spec;
  spec.kind = AttackKind::Targeted;
  spec.adv_class = 0;
  spec.num_targets = 2;
  spec.captions_per_target = 5;
  spec.seed = 87;
  auto poisons = make_targeted_poisons(f.ds, spec);
  auto fresh = init_params(11, 12, 12, f.ds.taxonomy.vocab_size(), 24, 16, 8);
  auto trace = similarity_trace({fresh, f.params}, f.ds, poisons.poisons);
  REQUIRE(trace.clean_mean.size() == 2);
  REQUIRE(trace.poison_mean.size() == 2);
  for (double v : trace.clean_mean) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
  // The trained snapshot aligns clean pairs far better than init.
  CHECK(trace.clean_mean[1] > trace.clean_mean[0]);
}
