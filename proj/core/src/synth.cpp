// SPDX-License-Identifier: Apache-2.0
#include "roclab/synth.hpp"

#include <algorithm>
#include <cmath>

#include "roclab/errors.hpp"

namespace roclab {

namespace {

constexpr std::size_t kProtoGrid = 4;  // low-res field edge for prototypes

Image random_field(std::size_t grid, std::size_t h, std::size_t w, Rng& rng,
                   double lo, double hi) {
  Image coarse(grid * grid);
  for (double& v : coarse) v = rng.uniform(lo, hi);
  return resize_bilinear(coarse, grid, grid, h, w);
}

double proto_distance(const Image& a, const Image& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace

Image resize_bilinear(const Image& src, std::size_t src_h, std::size_t src_w,
                      std::size_t dst_h, std::size_t dst_w) {
  Image dst(dst_h * dst_w);
  for (std::size_t y = 0; y < dst_h; ++y) {
    for (std::size_t x = 0; x < dst_w; ++x) {
      // Align corners so the source extremes survive the resize.
      const double sy = dst_h > 1
          ? static_cast<double>(y) * (src_h - 1) / (dst_h - 1) : 0.0;
      const double sx = dst_w > 1
          ? static_cast<double>(x) * (src_w - 1) / (dst_w - 1) : 0.0;
      const std::size_t y0 = static_cast<std::size_t>(sy);
      const std::size_t x0 = static_cast<std::size_t>(sx);
      const std::size_t y1 = std::min(y0 + 1, src_h - 1);
      const std::size_t x1 = std::min(x0 + 1, src_w - 1);
      const double fy = sy - static_cast<double>(y0);
      const double fx = sx - static_cast<double>(x0);
      const double top = src[y0 * src_w + x0] * (1 - fx) + src[y0 * src_w + x1] * fx;
      const double bot = src[y1 * src_w + x0] * (1 - fx) + src[y1 * src_w + x1] * fx;
      dst[y * dst_w + x] = top * (1 - fy) + bot * fy;
    }
  }
  return dst;
}

int Taxonomy::token_class(std::uint32_t tok) const {
  if (tok < filler_vocab_size) return -1;
  const std::size_t cls = (tok - filler_vocab_size) / tokens_per_class;
  return cls < classes.size() ? static_cast<int>(cls) : -1;
}

int Taxonomy::caption_class_vote(const Caption& cap) const {
  std::vector<int> counts(classes.size(), 0);
  for (std::uint32_t tok : cap) {
    const int c = token_class(tok);
    if (c >= 0) counts[c] += 1;
  }
  int best = -1, best_count = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] > best_count) {
      best = static_cast<int>(c);
      best_count = counts[c];
    }
  }
  return best;
}

std::uint32_t Taxonomy::synonym_partner(std::uint32_t tok) const {
  const int cls = token_class(tok);
  if (cls < 0) return tok;
  const std::uint32_t base = static_cast<std::uint32_t>(class_token_base(cls));
  const std::uint32_t offset = tok - base;
  return base + (offset ^ 1u);  // pair (2k, 2k+1)
}

Taxonomy build_taxonomy(std::size_t num_classes, std::size_t image_h,
                        std::size_t image_w, std::uint64_t seed) {
  if (num_classes < 4) {
    throw BadConfig("build_taxonomy: need at least 4 classes");
  }
  Taxonomy tax;
  tax.image_h = image_h;
  tax.image_w = image_w;
  tax.classes.resize(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) {
    tax.classes[c] = "class_" + std::to_string(c);
  }

  for (std::uint64_t attempt = 0; attempt < 100; ++attempt) {
    Rng rng(seed + attempt * 0x51ed2701b7c34a3fULL);
    tax.prototypes.clear();
    for (std::size_t c = 0; c < num_classes; ++c) {
      tax.prototypes.push_back(
          random_field(kProtoGrid, image_h, image_w, rng, 0.0, 1.0));
    }
    bool ok = true;
    for (std::size_t a = 0; a < num_classes && ok; ++a) {
      for (std::size_t b = a + 1; b < num_classes; ++b) {
        if (proto_distance(tax.prototypes[a], tax.prototypes[b]) <
            tax.separation_margin) {
          ok = false;
          break;
        }
      }
    }
    if (ok) return tax;
  }
  throw SeparationFailure("build_taxonomy: separation margin unreachable");
}

PairedExample sample_example(const Taxonomy& tax, std::size_t class_id,
                             Rng& rng) {
  if (class_id >= tax.num_classes()) {
    throw BadConfig("sample_example: class out of range");
  }
  PairedExample ex;
  ex.true_class = class_id;
  ex.provenance = Provenance::Clean;

  const Image& proto = tax.prototypes[class_id];
  ex.image = proto;
  if (tax.deform_amplitude > 0.0) {
    const Image field = random_field(kProtoGrid, tax.image_h, tax.image_w, rng,
                                     -tax.deform_amplitude,
                                     tax.deform_amplitude);
    for (std::size_t i = 0; i < ex.image.size(); ++i) ex.image[i] += field[i];
  }
  if (tax.noise_sigma > 0.0) {
    for (double& p : ex.image) p += rng.normal(0.0, tax.noise_sigma);
  }
  for (double& p : ex.image) p = std::clamp(p, 0.0, 1.0);

  // 2-4 class tokens plus 2-12 fillers, shuffled (length 4-16).
  const std::size_t n_class = 2 + rng.index(3);
  const std::size_t n_filler = 2 + rng.index(11);
  for (std::size_t i = 0; i < n_class; ++i) {
    ex.caption.push_back(static_cast<std::uint32_t>(
        tax.class_token_base(class_id) + rng.index(tax.tokens_per_class)));
  }
  for (std::size_t i = 0; i < n_filler; ++i) {
    ex.caption.push_back(
        static_cast<std::uint32_t>(rng.index(tax.filler_vocab_size)));
  }
  rng.shuffle(ex.caption);
  return ex;
}

Dataset generate_dataset(const Taxonomy& tax, std::size_t n_train,
                         std::size_t n_eval_per_class, std::size_t n_targets,
                         std::uint64_t seed) {
  if (n_train < 100) throw BadConfig("generate_dataset: n_train < 100");
  Dataset ds;
  ds.taxonomy = tax;
  ds.seed = seed;

  Rng rng(seed);
  Rng train_rng = rng.split(1);
  Rng eval_rng = rng.split(2);
  Rng target_rng = rng.split(3);

  std::uint64_t next_id = 0;
  const std::size_t c_count = tax.num_classes();
  for (std::size_t i = 0; i < n_train; ++i) {
    PairedExample ex = sample_example(tax, i % c_count, train_rng);
    ex.id = next_id++;
    ds.train.push_back(std::move(ex));
  }
  for (std::size_t c = 0; c < c_count; ++c) {
    for (std::size_t i = 0; i < n_eval_per_class; ++i) {
      PairedExample ex = sample_example(tax, c, eval_rng);
      ex.id = next_id++;
      ds.eval_images.push_back(std::move(ex));
    }
  }
  for (std::size_t i = 0; i < n_targets; ++i) {
    PairedExample ex = sample_example(tax, i % c_count, target_rng);
    ex.id = next_id++;
    ds.target_pool.push_back(std::move(ex));
  }
  ds.next_id = next_id;
  return ds;
}

}  // namespace roclab
