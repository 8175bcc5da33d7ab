// SPDX-License-Identifier: Apache-2.0
#include <algorithm>

#include "doctest.h"
#include "roclab/augment.hpp"

using namespace roclab;

namespace {

AugmentPolicy neutral_policy() {
  AugmentPolicy p;
  p.image.crop_scale_min = 1.0;
  p.image.crop_scale_max = 1.0;
  p.image.hflip_prob = 0.0;
  p.image.intensity_jitter = 0.0;
  p.image.blur_prob = 0.0;
  p.text.synonym_prob = 0.0;
  p.text.swap_count = 0;
  p.text.deletion_prob = 0.0;
  return p;
}

Image ramp_image(std::size_t h, std::size_t w) {
  Image img(h * w);
  for (std::size_t i = 0; i < img.size(); ++i)
    img[i] = static_cast<double>(i) / static_cast<double>(img.size());
  return img;
}

}  // namespace

TEST_CASE("disabled policy is the identity on both modalities") {
  AugmentPolicy p;
  p.enabled = false;
  Rng rng(1);
  auto img = ramp_image(8, 8);
  CHECK(augment_image(img, 8, 8, p, rng) == img);
  auto tax = build_taxonomy(4, 8, 8, 2);
  Caption cap{1, 2, static_cast<std::uint32_t>(tax.class_token_base(1))};
  CHECK(augment_caption(cap, tax, p, rng) == cap);
}

TEST_CASE("neutral parameters are the identity") {
  auto p = neutral_policy();
  Rng rng(2);
  auto img = ramp_image(8, 8);
  CHECK(augment_image(img, 8, 8, p, rng) == img);
  auto tax = build_taxonomy(4, 8, 8, 2);
  Caption cap{5, 6, static_cast<std::uint32_t>(tax.class_token_base(0)), 7};
  CHECK(augment_caption(cap, tax, p, rng) == cap);
}

TEST_CASE("forced horizontal flip is an involution") {
  auto p = neutral_policy();
  p.image.hflip_prob = 1.0;
  Rng rng(3);
  auto img = ramp_image(6, 6);
  auto once = augment_image(img, 6, 6, p, rng);
  CHECK(once != img);
  CHECK(augment_image(once, 6, 6, p, rng) == img);
}

TEST_CASE("augmented pixels stay in range") {
  AugmentPolicy p;  // defaults: crop + flip + jitter + blur
  Rng rng(4);
  auto img = ramp_image(16, 16);
  for (int trial = 0; trial < 100; ++trial) {
    auto out = augment_image(img, 16, 16, p, rng);
    CHECK(out.size() == img.size());
    for (double v : out) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("deletion keeps at least two tokens") {
  auto tax = build_taxonomy(4, 8, 8, 5);
  auto p = neutral_policy();
  p.text.deletion_prob = 1.0;
  Rng rng(6);
  Caption cap{1, 2, 3, 4, 5, 6, 7, 8};
  auto out = augment_caption(cap, tax, p, rng);
  CHECK(out.size() == 2);
  // Survivors come from the original caption.
  for (auto tok : out)
    CHECK(std::find(cap.begin(), cap.end(), tok) != cap.end());
}

TEST_CASE("synonym replacement stays inside the token's pair") {
  auto tax = build_taxonomy(4, 8, 8, 7);
  auto p = neutral_policy();
  p.text.synonym_prob = 1.0;
  Rng rng(8);
  const auto base = static_cast<std::uint32_t>(tax.class_token_base(2));
  for (int trial = 0; trial < 1000; ++trial) {
    const std::uint32_t tok =
        base + static_cast<std::uint32_t>(rng.next_below(tax.tokens_per_class));
    Caption cap{1, tok, 2};
    auto out = augment_caption(cap, tax, p, rng);
    REQUIRE(out.size() == 3);
    // Filler tokens have no synonyms; the class token may only move to
    // its partner.
    CHECK(out[0] == 1);
    CHECK(out[2] == 2);
    CHECK((out[1] == tok || out[1] == tax.synonym_partner(tok)));
    CHECK(tax.token_class(out[1]) == 2);
  }
}

TEST_CASE("default text augmentation preserves the class vote") {
  auto tax = build_taxonomy(5, 8, 8, 9);
  AugmentPolicy p;
  p.text.deletion_prob = 0.0;  // synonyms and swaps only
  Rng rng(10);
  Rng sample_rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t cls = sample_rng.next_below(5);
    auto ex = sample_example(tax, cls, sample_rng);
    auto out = augment_caption(ex.caption, tax, p, rng);
    CHECK(out.size() == ex.caption.size());
    CHECK(tax.caption_class_vote(out) == static_cast<int>(cls));
  }
}

TEST_CASE("adjacent swap permutes without changing the multiset") {
  auto tax = build_taxonomy(4, 8, 8, 12);
  auto p = neutral_policy();
  p.text.swap_count = 1;
  Rng rng(13);
  Caption cap{10, 11, 12, 13, 14};
  bool saw_change = false;
  for (int trial = 0; trial < 200; ++trial) {
    auto out = augment_caption(cap, tax, p, rng);
    auto sorted_out = out;
    auto sorted_in = cap;
    std::sort(sorted_out.begin(), sorted_out.end());
    std::sort(sorted_in.begin(), sorted_in.end());
    CHECK(sorted_out == sorted_in);
    if (out != cap) saw_change = true;
  }
  CHECK(saw_change);
}
