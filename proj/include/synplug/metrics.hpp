#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "synplug/corpus.hpp"

namespace synplug {

struct ClassMetrics {
  std::size_t tp = 0, fp = 0, fn = 0;
  std::size_t support = 0;   // gold count
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  bool in_macro = false;     // excluded when the class never occurs
};

struct Metrics {
  std::size_t total = 0;
  std::size_t correct = 0;
  std::size_t unparseable = 0;  // failed predictions; always scored incorrect
  double accuracy = 0.0;
  std::array<ClassMetrics, kPolarityCount> per_class;
  double macro_f1 = 0.0;  // unweighted mean over classes present in gold or pred
  double micro_f1 = 0.0;
};

// `preds` entries are nullopt for unparseable predictions. Lengths must match.
Metrics evaluate(const std::vector<std::optional<Polarity>>& preds,
                 const std::vector<Polarity>& golds);

nlohmann::json metrics_to_json(const Metrics& m);

struct RunSummary {
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

struct AggregateResult {
  double mean_accuracy = 0.0;
  double mean_macro_f1 = 0.0;
  std::vector<RunSummary> runs;  // per-seed values, as given
};

AggregateResult aggregate_runs(const std::vector<RunSummary>& runs);

// Shortest round-trip decimal form (std::to_chars), so emitted CSV/JSON
// numbers re-parse to identical doubles.
std::string format_double(double v);

}  // namespace synplug
