#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "synplug/metrics.hpp"
#include "synplug/plugin.hpp"

namespace synplug {

// ---------------------------------------------------------------------------
// Memory-size sweep: train and evaluate one plugin per (memory, seed) cell.
// ---------------------------------------------------------------------------

struct SweepRow {
  KnowledgeKind kind = KnowledgeKind::dep;
  std::size_t memory = 0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

struct SweepConfig {
  KnowledgeKind kind = KnowledgeKind::dep;
  std::size_t dim = 64;
  Combine combine = Combine::concat;
  TrainHyper hyper;  // seed is overridden per cell
};

std::vector<SweepRow> sweep_memory_size(const SweepConfig& cfg,
                                        const std::vector<LabeledExample>& train,
                                        const std::vector<LabeledExample>& dev,
                                        const std::vector<std::size_t>& memories,
                                        const std::vector<std::uint64_t>& seeds);

// CSV with header `kind,M,seed,acc,macro_f1`; numbers round-trip exactly.
std::string sweep_to_csv(const std::vector<SweepRow>& rows);
std::vector<SweepRow> sweep_from_csv(const std::string& text);

// Group rows by (kind, M) and average over seeds.
std::string aggregate_sweep_csv(const std::vector<SweepRow>& rows);

// ---------------------------------------------------------------------------
// Attention reports.
// ---------------------------------------------------------------------------

struct AttentionEntry {
  std::string key;
  std::string value;
  double weight = 0.0;
};

struct AttentionReportRow {
  std::string id;
  Polarity predicted = Polarity::positive;
  bool empty_memory = false;
  std::vector<AttentionEntry> entries;  // sorted by weight, descending
};

// Runs the plugin over the examples and collects per-entry attention
// weights. `warn` fires once when the model was never trained.
std::vector<AttentionReportRow> dump_attention(
    const PluginModel& model, const std::vector<LabeledExample>& examples,
    const std::function<void(const std::string&)>& warn = nullptr);

void write_attention_jsonl(const std::filesystem::path& path,
                           const std::vector<AttentionReportRow>& rows);
// Static heat rendering, one block per instance.
void write_attention_html(const std::filesystem::path& path,
                          const std::vector<AttentionReportRow>& rows);

}  // namespace synplug
