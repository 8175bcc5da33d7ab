// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace roclab {

struct EpochMetrics {
  std::size_t epoch = 0;       // 1-indexed
  std::string mode;            // "clip", "roclip", or "inmodality"
  double mean_loss = 0.0;
  // Match-trace summaries; only meaningful in roclip epochs.
  std::optional<double> clean_own_match_frac;
  std::optional<double> poison_adv_match_frac;
  std::uint64_t pool_oldest_stamp = 0;
  std::uint64_t pool_newest_stamp = 0;
};

struct MatchTraceRow {
  std::size_t epoch = 0;
  std::uint64_t example_id = 0;
  std::uint32_t provenance = 0;
  int matched_class_vote = -1;
  std::size_t true_class = 0;
  int own_class_vote = -1;  // class vote of the example's own caption
};

struct RunMetrics {
  std::vector<EpochMetrics> per_epoch;
  std::vector<MatchTraceRow> match_trace;  // populated when tracing is on
  std::optional<double> zero_shot_acc;
  std::optional<double> linear_probe_acc;
  std::optional<double> psr;
  std::optional<double> bsr;
  std::optional<double> clean_acc_on_patched;
};

}  // namespace roclab
