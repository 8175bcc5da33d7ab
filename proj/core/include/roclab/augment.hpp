// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "roclab/rng.hpp"
#include "roclab/synth.hpp"

namespace roclab {

struct ImageAugmentPolicy {
  double crop_scale_min = 0.6, crop_scale_max = 1.0;
  double hflip_prob = 0.5;
  double intensity_jitter = 0.2;
  double blur_prob = 0.3;           // 3x3 box blur
  bool grayscale_identity = true;   // no-op on grayscale rasters
};

struct TextAugmentPolicy {
  double synonym_prob = 0.2;   // per class token
  std::size_t swap_count = 1;  // adjacent swaps, each applied with prob 0.5
  double deletion_prob = 0.1;  // per token, floor length 2
};

struct AugmentPolicy {
  ImageAugmentPolicy image;
  TextAugmentPolicy text;
  bool enabled = true;
};

// Random crop (scale uniform in range, bilinear resize back), optional
// horizontal flip, additive intensity jitter clamped to [0,1], optional
// box blur. Output raster shape is unchanged.
Image augment_image(const Image& image, std::size_t h, std::size_t w,
                    const AugmentPolicy& policy, Rng& rng);

// Synonym replacement within the token's synonym pair, one random
// adjacent swap, random deletion with a floor of 2 tokens.
Caption augment_caption(const Caption& tokens, const Taxonomy& taxonomy,
                        const AugmentPolicy& policy, Rng& rng);

}  // namespace roclab
