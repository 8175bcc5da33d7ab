// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "roclab/attacks.hpp"
#include "roclab/metrics.hpp"
#include "roclab/model.hpp"
#include "roclab/synth.hpp"

namespace roclab {

// One prompt caption per class: a fixed filler skeleton with the
// class's first two tokens substituted in.
struct ClassPromptBank {
  std::vector<Caption> prompts;  // index = class
};

ClassPromptBank build_prompt_bank(const Taxonomy& tax);

struct ZeroShotResult {
  std::vector<std::size_t> predictions;
  double accuracy = 0.0;  // meaningful when labels were supplied
};

// Argmax over cosine similarity between each image and every class
// prompt; ties go to the lowest class index.
ZeroShotResult zero_shot_classify(const ModelParams& params,
                                  const std::vector<PairedExample>& images,
                                  const ClassPromptBank& prompt_bank);

// Multinomial logistic regression on frozen pre-projection image
// features, trained full-batch; reports held-out accuracy.
double linear_probe(const ModelParams& params,
                    const std::vector<PairedExample>& labeled_images,
                    double train_fraction, std::size_t epochs, double lr,
                    std::uint64_t seed);

// Fraction of ORIGINAL (un-noised) target images classified as the
// adversarial label.
double poison_success_rate(const ModelParams& params, const PoisonSet& attack,
                           const ClassPromptBank& prompt_bank);

struct BackdoorResult {
  double bsr = 0.0;
  double clean_acc_on_same_images = 0.0;
  std::size_t evaluated = 0;
};

// Applies the trigger to eval images (excluding adv_class members) and
// measures the fraction classified as adv_class.
BackdoorResult backdoor_success_rate(const ModelParams& params,
                                     const TriggerSpec& trigger,
                                     AttackKind kind, std::size_t adv_class,
                                     const std::vector<PairedExample>& eval_images,
                                     const ClassPromptBank& prompt_bank,
                                     std::size_t count, std::uint64_t seed);

struct SimilarityTrace {
  std::vector<double> clean_mean;   // one value per checkpoint
  std::vector<double> poison_mean;
};

// Mean image-caption cosine over clean train pairs and over poison
// pairs, for each parameter snapshot.
SimilarityTrace similarity_trace(const std::vector<ModelParams>& params_sequence,
                                 const Dataset& dataset,
                                 const std::vector<PairedExample>& poisons);

}  // namespace roclab
