// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <numeric>

#include "roclab/defense.hpp"

namespace roclab {

std::pair<Dataset, FilterReport> preprocess_filter(const Dataset& dataset,
                                                   const ModelParams& params,
                                                   double discard_quantile) {
  if (discard_quantile < 0.0 || discard_quantile >= 1.0) {
    throw BadConfig("preprocess_filter: quantile must be in [0,1)");
  }
  const std::size_t n = dataset.train.size();

  // Cosine similarity of every train pair under the given params.
  std::vector<double> sims(n);
  constexpr std::size_t kChunk = 256;
  for (std::size_t lo = 0; lo < n; lo += kChunk) {
    const std::size_t hi = std::min(lo + kChunk, n);
    std::vector<Image> images;
    std::vector<Caption> captions;
    for (std::size_t i = lo; i < hi; ++i) {
      images.push_back(dataset.train[i].image);
      captions.push_back(dataset.train[i].caption);
    }
    const EncodedBatch enc = encode(params, images, captions);
    for (std::size_t i = lo; i < hi; ++i) {
      sims[i] = dot(enc.proj_image.row(i - lo), enc.proj_text.row(i - lo),
                    enc.proj_image.dim);
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return sims[a] < sims[b];
  });
  const std::size_t remove_count =
      static_cast<std::size_t>(discard_quantile * static_cast<double>(n));

  std::vector<bool> removed(n, false);
  for (std::size_t i = 0; i < remove_count; ++i) removed[order[i]] = true;

  FilterReport report;
  report.removed_total = remove_count;
  report.threshold = remove_count > 0 ? sims[order[remove_count - 1]]
                                      : -1.0;
  std::size_t clean_total = 0, clean_removed = 0;
  std::size_t poison_total = 0, poison_removed = 0;
  Dataset filtered = dataset;
  filtered.train.clear();
  for (std::size_t i = 0; i < n; ++i) {
    const bool is_clean = dataset.train[i].provenance == Provenance::Clean;
    (is_clean ? clean_total : poison_total) += 1;
    if (removed[i]) {
      (is_clean ? clean_removed : poison_removed) += 1;
    } else {
      filtered.train.push_back(dataset.train[i]);
    }
  }
  if (clean_total > 0) {
    report.clean_removed_frac =
        static_cast<double>(clean_removed) / static_cast<double>(clean_total);
  }
  if (poison_total > 0) {
    report.poison_removed_frac =
        static_cast<double>(poison_removed) / static_cast<double>(poison_total);
  }
  return {std::move(filtered), report};
}

}  // namespace roclab
