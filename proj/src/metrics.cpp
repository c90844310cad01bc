#include "synplug/metrics.hpp"

#include <charconv>

namespace synplug {

Metrics evaluate(const std::vector<std::optional<Polarity>>& preds,
                 const std::vector<Polarity>& golds) {
  if (preds.size() != golds.size())
    throw ValidationError("evaluate: " + std::to_string(preds.size()) + " predictions vs " +
                          std::to_string(golds.size()) + " gold labels");
  Metrics m;
  m.total = golds.size();
  std::array<std::size_t, kPolarityCount> pred_count{};
  for (std::size_t i = 0; i < golds.size(); ++i) {
    std::size_t g = static_cast<std::size_t>(golds[i]);
    m.per_class[g].support += 1;
    if (!preds[i]) {
      // An unparseable prediction is a miss for the gold class and a false
      // positive for nothing.
      m.unparseable += 1;
      m.per_class[g].fn += 1;
      continue;
    }
    std::size_t p = static_cast<std::size_t>(*preds[i]);
    pred_count[p] += 1;
    if (p == g) {
      m.correct += 1;
      m.per_class[g].tp += 1;
    } else {
      m.per_class[p].fp += 1;
      m.per_class[g].fn += 1;
    }
  }
  m.accuracy = m.total == 0 ? 0.0 : static_cast<double>(m.correct) / static_cast<double>(m.total);

  double macro_sum = 0.0;
  std::size_t macro_n = 0;
  std::size_t tp_all = 0, fp_all = 0, fn_all = 0;
  for (std::size_t c = 0; c < kPolarityCount; ++c) {
    ClassMetrics& cm = m.per_class[c];
    cm.precision = (cm.tp + cm.fp) == 0 ? 0.0
                                        : static_cast<double>(cm.tp) /
                                              static_cast<double>(cm.tp + cm.fp);
    cm.recall = (cm.tp + cm.fn) == 0 ? 0.0
                                     : static_cast<double>(cm.tp) /
                                           static_cast<double>(cm.tp + cm.fn);
    cm.f1 = (cm.precision + cm.recall) == 0.0
                ? 0.0
                : 2.0 * cm.precision * cm.recall / (cm.precision + cm.recall);
    cm.in_macro = cm.support > 0 || pred_count[c] > 0;
    if (cm.in_macro) {
      macro_sum += cm.f1;
      macro_n += 1;
    }
    tp_all += cm.tp;
    fp_all += cm.fp;
    fn_all += cm.fn;
  }
  m.macro_f1 = macro_n == 0 ? 0.0 : macro_sum / static_cast<double>(macro_n);

  double micro_p = (tp_all + fp_all) == 0
                       ? 0.0
                       : static_cast<double>(tp_all) / static_cast<double>(tp_all + fp_all);
  double micro_r = (tp_all + fn_all) == 0
                       ? 0.0
                       : static_cast<double>(tp_all) / static_cast<double>(tp_all + fn_all);
  m.micro_f1 = (micro_p + micro_r) == 0.0 ? 0.0 : 2.0 * micro_p * micro_r / (micro_p + micro_r);
  return m;
}

nlohmann::json metrics_to_json(const Metrics& m) {
  nlohmann::json per_class = nlohmann::json::object();
  for (std::size_t c = 0; c < kPolarityCount; ++c) {
    const ClassMetrics& cm = m.per_class[c];
    per_class[polarity_name(static_cast<Polarity>(c))] = {
        {"tp", cm.tp},        {"fp", cm.fp},
        {"fn", cm.fn},        {"support", cm.support},
        {"precision", cm.precision}, {"recall", cm.recall},
        {"f1", cm.f1},        {"in_macro", cm.in_macro}};
  }
  return nlohmann::json{{"total", m.total},
                        {"correct", m.correct},
                        {"unparseable", m.unparseable},
                        {"accuracy", m.accuracy},
                        {"per_class", per_class},
                        {"macro_f1", m.macro_f1},
                        {"micro_f1", m.micro_f1}};
}

AggregateResult aggregate_runs(const std::vector<RunSummary>& runs) {
  if (runs.empty()) throw ValidationError("aggregate_runs: no runs");
  AggregateResult out;
  out.runs = runs;
  for (const RunSummary& r : runs) {
    out.mean_accuracy += r.accuracy;
    out.mean_macro_f1 += r.macro_f1;
  }
  out.mean_accuracy /= static_cast<double>(runs.size());
  out.mean_macro_f1 /= static_cast<double>(runs.size());
  return out;
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) return "0";
  return std::string(buf, ptr);
}

}  // namespace synplug
