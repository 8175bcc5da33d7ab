// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "roclab/model.hpp"
#include "roclab/rng.hpp"

namespace roclab {

enum class Provenance : std::uint32_t {
  Clean = 0,
  TargetedPoison = 1,
  Backdoor = 2,
  Adaptive = 3,
};

struct PairedExample {
  Image image;        // H*W pixels in [0,1]
  Caption caption;    // 4-16 token ids
  std::size_t true_class = 0;
  Provenance provenance = Provenance::Clean;
  std::uint64_t id = 0;
};

// Procedural label structure: per-class raster prototype plus a
// disjoint per-class vocabulary partitioned into synonym pairs, and a
// shared filler vocabulary.
struct Taxonomy {
  std::size_t image_h = 16, image_w = 16;
  std::vector<std::string> classes;
  std::vector<Image> prototypes;          // one per class
  std::size_t filler_vocab_size = 64;     // token ids [0, filler_vocab_size)
  std::size_t tokens_per_class = 16;      // grouped into synonym pairs
  double separation_margin = 2.0;
  double noise_sigma = 0.05;
  double deform_amplitude = 0.1;

  std::size_t num_classes() const { return classes.size(); }
  std::size_t vocab_size() const {
    return filler_vocab_size + classes.size() * tokens_per_class;
  }
  std::size_t class_token_base(std::size_t cls) const {
    return filler_vocab_size + cls * tokens_per_class;
  }
  bool is_class_token(std::uint32_t tok, std::size_t cls) const {
    return tok >= class_token_base(cls) &&
           tok < class_token_base(cls) + tokens_per_class;
  }
  // Class owning the token, or -1 for filler.
  int token_class(std::uint32_t tok) const;
  // Majority class vote over a caption's tokens; -1 if no class tokens.
  int caption_class_vote(const Caption& cap) const;
  // Tokens in the same synonym pair as tok (including tok itself).
  std::uint32_t synonym_partner(std::uint32_t tok) const;
};

struct Dataset {
  Taxonomy taxonomy;
  std::vector<PairedExample> train;
  std::vector<PairedExample> eval_images;
  std::vector<PairedExample> target_pool;
  std::uint64_t seed = 0;
  std::uint64_t next_id = 0;
  std::string config_digest;  // digest of the producing config, if any
};

// Deterministic prototypes: per-class low-resolution random fields,
// bilinearly upsampled. Retries with a new seed offset (up to 100
// times) until all pairwise prototype L2 distances meet the margin.
Taxonomy build_taxonomy(std::size_t num_classes, std::size_t image_h,
                        std::size_t image_w, std::uint64_t seed);

PairedExample sample_example(const Taxonomy& tax, std::size_t class_id,
                             Rng& rng);

// Class-balanced train split plus eval and target pools with disjoint
// ids. Content is a pure function of (taxonomy, sizes, seed).
Dataset generate_dataset(const Taxonomy& tax, std::size_t n_train,
                         std::size_t n_eval_per_class, std::size_t n_targets,
                         std::uint64_t seed);

// Bilinear resize of a grayscale raster.
Image resize_bilinear(const Image& src, std::size_t src_h, std::size_t src_w,
                      std::size_t dst_h, std::size_t dst_w);

// Dataset persistence: manifest JSON + raster block + caption/metadata
// block. Digest is SHA-256 over the two binary blocks.
void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);
std::string dataset_digest(const Dataset& ds);

}  // namespace roclab
