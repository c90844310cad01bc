#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include <sstream>

#include "synplug/metrics.hpp"
#include "synplug/report.hpp"
#include "synplug/rng.hpp"
#include "synplug/synthetic.hpp"

using namespace synplug;

namespace {

std::optional<Polarity> P(Polarity p) { return p; }
const std::optional<Polarity> kFail = std::nullopt;

constexpr Polarity pos = Polarity::positive;
constexpr Polarity neu = Polarity::neutral;
constexpr Polarity neg = Polarity::negative;

}  // namespace

TEST_CASE("all-correct balanced predictions score 1.0 everywhere") {
  std::vector<std::optional<Polarity>> preds = {P(pos), P(pos), P(neu), P(neu), P(neg), P(neg)};
  std::vector<Polarity> golds = {pos, pos, neu, neu, neg, neg};
  Metrics m = evaluate(preds, golds);
  CHECK(m.accuracy == 1.0);
  CHECK(m.macro_f1 == 1.0);
  CHECK(m.micro_f1 == 1.0);
  CHECK(m.unparseable == 0);
}

TEST_CASE("all-positive predictions against a mixed gold match the hand matrix") {
  // golds: 2 pos, 1 neg, 1 neu; preds all positive.
  std::vector<std::optional<Polarity>> preds = {P(pos), P(pos), P(pos), P(pos)};
  std::vector<Polarity> golds = {pos, pos, neg, neu};
  Metrics m = evaluate(preds, golds);
  CHECK(m.accuracy == doctest::Approx(0.5).epsilon(1e-12));
  // pos: tp=2 fp=2 fn=0 -> P=1/2 R=1 F1=2/3; neu and neg: F1=0, both in gold.
  CHECK(m.per_class[0].f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(m.per_class[1].f1 == 0.0);
  CHECK(m.per_class[2].f1 == 0.0);
  CHECK(m.macro_f1 == doctest::Approx(2.0 / 9.0).epsilon(1e-12));
}

TEST_CASE("unparseable predictions count as incorrect and are reported") {
  std::vector<std::optional<Polarity>> preds = {P(pos), kFail, P(neg)};
  std::vector<Polarity> golds = {pos, neu, neg};
  Metrics m = evaluate(preds, golds);
  CHECK(m.unparseable == 1);
  CHECK(m.accuracy == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(m.per_class[1].f1 == 0.0);
  CHECK(m.macro_f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("classes absent from gold and prediction leave the macro mean") {
  std::vector<std::optional<Polarity>> preds = {P(pos), P(neg), P(neg)};
  std::vector<Polarity> golds = {pos, pos, neg};
  Metrics m = evaluate(preds, golds);
  // neu never occurs: excluded. pos: P=1 R=1/2 F=2/3; neg: P=1/2 R=1 F=2/3.
  CHECK_FALSE(m.per_class[1].in_macro);
  CHECK(m.macro_f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(m.accuracy == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("all-wrong predictions score zero") {
  std::vector<std::optional<Polarity>> preds = {P(neu), P(neg), P(pos)};
  std::vector<Polarity> golds = {pos, neu, neg};
  Metrics m = evaluate(preds, golds);
  CHECK(m.accuracy == 0.0);
  CHECK(m.macro_f1 == 0.0);
}

TEST_CASE("evaluate rejects length mismatches") {
  CHECK_THROWS_AS(evaluate({P(pos)}, {pos, neg}), ValidationError);
}

TEST_CASE("evaluate is invariant under joint shuffles") {
  Rng rng(64);
  std::vector<std::optional<Polarity>> preds;
  std::vector<Polarity> golds;
  for (int i = 0; i < 200; ++i) {
    golds.push_back(static_cast<Polarity>(rng.index(3)));
    if (rng.chance(0.1))
      preds.push_back(kFail);
    else
      preds.push_back(P(static_cast<Polarity>(rng.index(3))));
  }
  Metrics base = evaluate(preds, golds);
  std::vector<std::size_t> order(golds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int it = 0; it < 20; ++it) {
    rng.shuffle(order);
    std::vector<std::optional<Polarity>> p2;
    std::vector<Polarity> g2;
    for (std::size_t i : order) {
      p2.push_back(preds[i]);
      g2.push_back(golds[i]);
    }
    Metrics m = evaluate(p2, g2);
    CHECK(m.accuracy == base.accuracy);
    CHECK(m.macro_f1 == base.macro_f1);
    CHECK(m.micro_f1 == base.micro_f1);
    CHECK(m.unparseable == base.unparseable);
  }
}

TEST_CASE("aggregate_runs averages and keeps per-seed values") {
  AggregateResult same = aggregate_runs({{1, 0.8, 0.7}, {2, 0.8, 0.7}});
  CHECK(same.mean_accuracy == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(same.mean_macro_f1 == doctest::Approx(0.7).epsilon(1e-12));

  AggregateResult three = aggregate_runs({{1, 0.8, 0.5}, {2, 0.9, 0.6}, {3, 1.0, 0.7}});
  CHECK(three.mean_accuracy == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(three.mean_macro_f1 == doctest::Approx(0.6).epsilon(1e-12));
  REQUIRE(three.runs.size() == 3);
  CHECK(three.runs[1].accuracy == 0.9);

  CHECK_THROWS_AS(aggregate_runs({}), ValidationError);
}

TEST_CASE("aggregate matches a hand recomputation on a 3x2 table") {
  // Two cells (M=1, M=3), three seeds each.
  std::vector<SweepRow> rows = {
      {KnowledgeKind::dep, 1, 1, 0.50, 0.40}, {KnowledgeKind::dep, 1, 2, 0.60, 0.45},
      {KnowledgeKind::dep, 1, 3, 0.70, 0.50}, {KnowledgeKind::dep, 3, 1, 0.90, 0.85},
      {KnowledgeKind::dep, 3, 2, 0.92, 0.86}, {KnowledgeKind::dep, 3, 3, 0.94, 0.87},
  };
  std::string csv = aggregate_sweep_csv(rows);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "kind,M,seeds,mean_acc,mean_macro_f1");
  struct Want {
    std::string prefix;
    double acc, f1;
  };
  std::vector<Want> want = {{"dep,1,3,", 0.6, 0.45}, {"dep,3,3,", 0.92, 0.86}};
  std::size_t row = 0;
  while (std::getline(in, line)) {
    REQUIRE(row < want.size());
    CHECK(line.rfind(want[row].prefix, 0) == 0);
    std::string rest = line.substr(want[row].prefix.size());
    std::size_t comma = rest.find(',');
    CHECK(std::stod(rest.substr(0, comma)) == doctest::Approx(want[row].acc).epsilon(1e-12));
    CHECK(std::stod(rest.substr(comma + 1)) == doctest::Approx(want[row].f1).epsilon(1e-12));
    ++row;
  }
  CHECK(row == want.size());
}

TEST_CASE("sweep CSV round-trips losslessly") {
  std::vector<SweepRow> rows = {
      {KnowledgeKind::dep, 5, 1, 1.0 / 3.0, 0.123456789012345},
      {KnowledgeKind::ccg, 10, 2, 0.9999999999999999, 1e-17},
  };
  std::vector<SweepRow> back = sweep_from_csv(sweep_to_csv(rows));
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].kind == rows[i].kind);
    CHECK(back[i].memory == rows[i].memory);
    CHECK(back[i].seed == rows[i].seed);
    CHECK(back[i].accuracy == rows[i].accuracy);   // bitwise
    CHECK(back[i].macro_f1 == rows[i].macro_f1);   // bitwise
  }
}

TEST_CASE("metrics JSON carries both F1 readings") {
  std::vector<std::optional<Polarity>> preds = {P(pos), P(neg)};
  std::vector<Polarity> golds = {pos, pos};
  nlohmann::json j = metrics_to_json(evaluate(preds, golds));
  CHECK(j.contains("macro_f1"));
  CHECK(j.contains("micro_f1"));
  CHECK(j["per_class"].contains("positive"));
}

TEST_CASE("dump_attention reports single-entry weight 1.0 and pass-through weights") {
  SyntheticConfig cfg;
  cfg.n_train = 40;
  cfg.n_dev = 10;
  cfg.seed = 21;
  SyntheticCorpus corpus = make_planted_corpus(cfg);
  PluginConfig pc{KnowledgeKind::dep, 8, 5, Combine::concat};
  Rng rng(2);
  PluginModel model(pc, build_plugin_vocabs(corpus.train), rng);

  // Single-entry bundle -> weight exactly 1.
  LabeledExample single = corpus.train[0];
  single.bundle.keys.resize(1);
  single.bundle.values.resize(1);
  auto rows = dump_attention(model, {single});
  REQUIRE(rows.size() == 1);
  REQUIRE(rows[0].entries.size() == 1);
  CHECK(rows[0].entries[0].weight == 1.0);

  // Report weights equal memory_attend's, bit for bit.
  const LabeledExample& ex = corpus.train[1];
  auto report = dump_attention(model, {ex});
  AttentionRecord rec = memory_attend(model, encode_query(model, ex.instance), ex.bundle);
  REQUIRE(report[0].entries.size() == rec.weights.size());
  double sum = 0.0;
  for (const AttentionEntry& e : report[0].entries) sum += e.weight;
  CHECK(std::abs(sum - 1.0) < 1e-9);
  for (const AttentionEntry& e : report[0].entries) {
    bool matched = false;
    for (std::size_t i = 0; i < rec.weights.size(); ++i)
      if (ex.bundle.values[i] == e.value && rec.weights[i] == e.weight) matched = true;
    CHECK(matched);
  }

  // Untrained checkpoint warns.
  int warnings = 0;
  dump_attention(model, {ex}, [&](const std::string&) { ++warnings; });
  CHECK(warnings == 1);
}

TEST_CASE("after planted-rule training the marker pair dominates the report") {
  SyntheticConfig cfg;
  cfg.rule = SyntheticConfig::Rule::single_marker;
  cfg.n_train = 500;
  cfg.n_dev = 100;
  cfg.seed = 33;
  cfg.marker_position = 2;  // surrounded by fillers on both sides
  SyntheticCorpus corpus = make_planted_corpus(cfg);
  PluginConfig pc{KnowledgeKind::dep, 32, 5, Combine::concat};
  Rng rng(1);
  PluginModel model(pc, build_plugin_vocabs(corpus.train), rng);
  TrainHyper hyper;
  hyper.epochs = 120;
  hyper.lr = 3e-3;
  TrainLog log = train_plugin(model, corpus.train, corpus.dev, hyper);
  REQUIRE(log.best_dev_accuracy >= 0.95);

  // On dev instances that carry the marker, its weight tops the report.
  std::size_t with_marker = 0, dominated = 0;
  auto rows = dump_attention(model, corpus.dev);
  for (std::size_t i = 0; i < corpus.dev.size(); ++i) {
    const auto& values = corpus.dev[i].bundle.values;
    if (std::find(values.begin(), values.end(), corpus.marker_value) == values.end()) continue;
    ++with_marker;
    if (rows[i].entries.front().value == corpus.marker_value) ++dominated;
  }
  REQUIRE(with_marker > 10);
  CHECK(dominated == with_marker);
}

TEST_CASE("attention report files are written and re-parse") {
  SyntheticConfig cfg;
  cfg.n_train = 10;
  cfg.n_dev = 5;
  cfg.seed = 9;
  SyntheticCorpus corpus = make_planted_corpus(cfg);
  PluginConfig pc{KnowledgeKind::dep, 8, 5, Combine::concat};
  Rng rng(3);
  PluginModel model(pc, build_plugin_vocabs(corpus.train), rng);
  auto rows = dump_attention(model, corpus.dev);
  auto dir = std::filesystem::temp_directory_path() / "attn_report";
  std::filesystem::create_directories(dir);
  write_attention_jsonl(dir / "attention.jsonl", rows);
  write_attention_html(dir / "attention.html", rows);

  std::ifstream in(dir / "attention.jsonl");
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    CHECK(j.contains("entries"));
    ++n;
  }
  CHECK(n == rows.size());
  CHECK(std::filesystem::file_size(dir / "attention.html") > 0);
}
