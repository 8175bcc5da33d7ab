// SPDX-License-Identifier: Apache-2.0
#include "roclab/augment.hpp"

#include <algorithm>
#include <cmath>

namespace roclab {

Image augment_image(const Image& image, std::size_t h, std::size_t w,
                    const AugmentPolicy& policy, Rng& rng) {
  if (!policy.enabled) return image;
  const ImageAugmentPolicy& p = policy.image;
  Image out = image;

  const double scale = rng.uniform(p.crop_scale_min, p.crop_scale_max);
  const std::size_t ch = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::lround(scale * static_cast<double>(h))));
  const std::size_t cw = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::lround(scale * static_cast<double>(w))));
  if (ch < h || cw < w) {
    const std::size_t oy = rng.index(h - ch + 1);
    const std::size_t ox = rng.index(w - cw + 1);
    Image crop(ch * cw);
    for (std::size_t y = 0; y < ch; ++y) {
      for (std::size_t x = 0; x < cw; ++x) {
        crop[y * cw + x] = out[(y + oy) * w + (x + ox)];
      }
    }
    out = resize_bilinear(crop, ch, cw, h, w);
  }

  if (p.hflip_prob > 0.0 && rng.bernoulli(p.hflip_prob)) {
    for (std::size_t y = 0; y < h; ++y) {
      std::reverse(out.begin() + static_cast<std::ptrdiff_t>(y * w),
                   out.begin() + static_cast<std::ptrdiff_t>((y + 1) * w));
    }
  }

  if (p.intensity_jitter > 0.0) {
    const double delta = rng.uniform(-p.intensity_jitter, p.intensity_jitter);
    for (double& v : out) v = std::clamp(v + delta, 0.0, 1.0);
  }

  if (p.blur_prob > 0.0 && rng.bernoulli(p.blur_prob)) {
    Image blurred(h * w);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        double sum = 0.0;
        int count = 0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(y) + dy;
            const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(x) + dx;
            if (yy < 0 || xx < 0 || yy >= static_cast<std::ptrdiff_t>(h) ||
                xx >= static_cast<std::ptrdiff_t>(w)) {
              continue;
            }
            sum += out[static_cast<std::size_t>(yy) * w +
                       static_cast<std::size_t>(xx)];
            ++count;
          }
        }
        blurred[y * w + x] = sum / count;
      }
    }
    out = std::move(blurred);
  }
  return out;
}

Caption augment_caption(const Caption& tokens, const Taxonomy& taxonomy,
                        const AugmentPolicy& policy, Rng& rng) {
  if (tokens.empty()) throw BadConfig("augment_caption: empty caption");
  if (!policy.enabled) return tokens;
  const TextAugmentPolicy& p = policy.text;
  Caption out = tokens;

  for (std::uint32_t& tok : out) {
    if (taxonomy.token_class(tok) >= 0 && rng.bernoulli(p.synonym_prob)) {
      tok = taxonomy.synonym_partner(tok);
    }
  }

  for (std::size_t s = 0; s < p.swap_count; ++s) {
    if (out.size() >= 2 && rng.bernoulli(0.5)) {
      const std::size_t i = rng.index(out.size() - 1);
      std::swap(out[i], out[i + 1]);
    }
  }

  if (p.deletion_prob > 0.0) {
    Caption kept;
    kept.reserve(out.size());
    std::size_t remaining = out.size();
    for (std::uint32_t tok : out) {
      // Stop deleting once the floor of 2 surviving tokens is reached.
      const std::size_t floor_needed = 2 - std::min<std::size_t>(2, kept.size());
      if (remaining > floor_needed && rng.bernoulli(p.deletion_prob)) {
        --remaining;
        continue;
      }
      kept.push_back(tok);
      --remaining;
    }
    out = std::move(kept);
  }
  return out;
}

}  // namespace roclab
