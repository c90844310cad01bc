#include "synplug/report.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace synplug {

namespace {

double parse_double_exact(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw ValidationError("bad number in CSV: \"" + s + "\"");
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::vector<SweepRow> sweep_memory_size(const SweepConfig& cfg,
                                        const std::vector<LabeledExample>& train,
                                        const std::vector<LabeledExample>& dev,
                                        const std::vector<std::size_t>& memories,
                                        const std::vector<std::uint64_t>& seeds) {
  if (memories.empty()) throw ValidationError("sweep: at least one memory size required");
  if (seeds.empty()) throw ValidationError("sweep: at least one seed required");
  std::vector<SweepRow> rows;
  for (std::size_t mem : memories) {
    for (std::uint64_t seed : seeds) {
      try {
        PluginConfig pc{cfg.kind, cfg.dim, mem, cfg.combine};
        Rng init_rng(seed);
        PluginModel model(pc, build_plugin_vocabs(train), init_rng);
        TrainHyper hyper = cfg.hyper;
        hyper.seed = seed;
        train_plugin(model, train, dev, hyper);

        std::vector<std::optional<Polarity>> preds;
        std::vector<Polarity> golds;
        for (const LabeledExample& ex : dev) {
          preds.push_back(plugin_predict(model, ex.instance, ex.bundle).label);
          golds.push_back(*ex.instance.gold);
        }
        Metrics m = evaluate(preds, golds);
        rows.push_back(SweepRow{cfg.kind, mem, seed, m.accuracy, m.macro_f1});
      } catch (const std::exception& e) {
        throw TrainingError("sweep cell (M=" + std::to_string(mem) +
                            ", seed=" + std::to_string(seed) + "): " + e.what());
      }
    }
  }
  return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::string out = "kind,M,seed,acc,macro_f1\n";
  for (const SweepRow& r : rows) {
    out += kind_name(r.kind);
    out += ',' + std::to_string(r.memory);
    out += ',' + std::to_string(r.seed);
    out += ',' + format_double(r.accuracy);
    out += ',' + format_double(r.macro_f1);
    out += '\n';
  }
  return out;
}

std::vector<SweepRow> sweep_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "kind,M,seed,acc,macro_f1")
    throw ValidationError("sweep CSV: missing or unexpected header");
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols = split_csv_line(line);
    if (cols.size() != 5) throw ValidationError("sweep CSV: expected 5 columns, got \"" + line + "\"");
    SweepRow r;
    r.kind = parse_kind(cols[0]);
    r.memory = std::stoul(cols[1]);
    r.seed = std::stoull(cols[2]);
    r.accuracy = parse_double_exact(cols[3]);
    r.macro_f1 = parse_double_exact(cols[4]);
    rows.push_back(r);
  }
  return rows;
}

std::string aggregate_sweep_csv(const std::vector<SweepRow>& rows) {
  if (rows.empty()) throw ValidationError("aggregate: no rows");
  std::map<std::pair<std::string, std::size_t>, std::vector<RunSummary>> groups;
  for (const SweepRow& r : rows)
    groups[{kind_name(r.kind), r.memory}].push_back(RunSummary{r.seed, r.accuracy, r.macro_f1});
  std::string out = "kind,M,seeds,mean_acc,mean_macro_f1\n";
  for (const auto& [key, runs] : groups) {
    AggregateResult agg = aggregate_runs(runs);
    out += key.first;
    out += ',' + std::to_string(key.second);
    out += ',' + std::to_string(runs.size());
    out += ',' + format_double(agg.mean_accuracy);
    out += ',' + format_double(agg.mean_macro_f1);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Attention reports
// ---------------------------------------------------------------------------

std::vector<AttentionReportRow> dump_attention(
    const PluginModel& model, const std::vector<LabeledExample>& examples,
    const std::function<void(const std::string&)>& warn) {
  if (!model.trained() && warn) warn("model checkpoint was never trained");
  std::vector<AttentionReportRow> rows;
  rows.reserve(examples.size());
  for (const LabeledExample& ex : examples) {
    PluginPrediction pred = plugin_predict(model, ex.instance, ex.bundle);
    AttentionReportRow row;
    row.id = ex.instance.id;
    row.predicted = pred.label;
    row.empty_memory = pred.attention.empty_memory;
    KnowledgeBundle mem = model.clip(ex.bundle);
    for (std::size_t i = 0; i < pred.attention.weights.size(); ++i)
      row.entries.push_back(AttentionEntry{mem.keys[i], mem.values[i], pred.attention.weights[i]});
    std::stable_sort(row.entries.begin(), row.entries.end(),
                     [](const AttentionEntry& a, const AttentionEntry& b) {
                       return a.weight > b.weight;
                     });
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_attention_jsonl(const std::filesystem::path& path,
                           const std::vector<AttentionReportRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write file: " + path.string());
  for (const AttentionReportRow& row : rows) {
    nlohmann::json entries = nlohmann::json::array();
    for (const AttentionEntry& e : row.entries)
      entries.push_back({{"key", e.key}, {"value", e.value}, {"weight", e.weight}});
    nlohmann::json j = {{"id", row.id},
                        {"predicted", polarity_name(row.predicted)},
                        {"empty_memory", row.empty_memory},
                        {"entries", std::move(entries)}};
    out << j.dump() << "\n";
  }
}

namespace {

std::string html_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

void write_attention_html(const std::filesystem::path& path,
                          const std::vector<AttentionReportRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write file: " + path.string());
  out << "<!doctype html>\n<html><head><meta charset=\"utf-8\">"
      << "<title>attention report</title>\n<style>\n"
      << "body{font-family:monospace;margin:2em}\n"
      << ".inst{margin-bottom:1.5em}\n"
      << ".entry{display:inline-block;margin:2px;padding:3px 6px;border-radius:3px}\n"
      << "</style></head><body>\n<h1>Memory attention weights</h1>\n";
  for (const AttentionReportRow& row : rows) {
    out << "<div class=\"inst\"><b>" << html_escape(row.id) << "</b> &rarr; "
        << polarity_name(row.predicted);
    if (row.empty_memory) out << " <i>(empty memory)</i>";
    out << "<br>\n";
    for (const AttentionEntry& e : row.entries) {
      // Deeper background = higher weight.
      out << "<span class=\"entry\" style=\"background:rgba(178,24,43,"
          << format_double(e.weight) << ")\">" << html_escape(e.value) << " ("
          << format_double(e.weight) << ")</span>\n";
    }
    out << "</div>\n";
  }
  out << "</body></html>\n";
}

}  // namespace synplug
