#include "synplug/synthetic.hpp"

#include <fstream>

namespace synplug {

namespace {

struct Generator {
  const SyntheticConfig& cfg;
  Rng rng;

  explicit Generator(const SyntheticConfig& c) : cfg(c), rng(c.seed) {}

  std::string word(std::size_t i) const { return "w" + std::to_string(i); }
  std::string filler(std::size_t i) const { return "f" + std::to_string(i); }

  // The sentence carries no label signal.
  AbsaInstance instance(const std::string& id) {
    AbsaInstance inst;
    inst.id = id;
    std::size_t n = 6 + rng.index(7);  // 6..12 tokens
    for (std::size_t i = 0; i < n; ++i)
      inst.tokens.push_back(Token{i, word(rng.index(cfg.sentence_word_pool))});
    std::size_t alen = 1 + rng.index(2);  // 1..2 tokens
    std::size_t start = rng.index(n - alen + 1);
    inst.aspect = AspectSpan{start, start + alen};
    return inst;
  }

  KnowledgeBundle bundle_with(const std::vector<std::pair<std::string, std::string>>& planted) {
    KnowledgeBundle b;
    b.kind = cfg.kind;
    b.capacity = cfg.bundle_len;
    // Leading slots host fixed high-frequency fillers so truncation below
    // marker_position + 1 cuts the marker away, never a random symbol.
    std::size_t planted_at = std::min(cfg.marker_position, cfg.bundle_len - planted.size());
    std::size_t next_fixed = 0;
    for (std::size_t i = 0; i < cfg.bundle_len; ++i) {
      if (i >= planted_at && i < planted_at + planted.size()) {
        b.keys.push_back(planted[i - planted_at].first);
        b.values.push_back(planted[i - planted_at].second);
      } else if (i < planted_at) {
        std::string f = filler(next_fixed++);
        b.keys.push_back(f);
        b.values.push_back(f + "-dep");
      } else {
        std::string f = filler(rng.index(cfg.filler_symbol_pool));
        b.keys.push_back(f);
        b.values.push_back(f + "-dep");
      }
    }
    return b;
  }

  LabeledExample example(const std::string& id, SyntheticCorpus& corpus) {
    LabeledExample ex;
    ex.instance = instance(id);
    if (cfg.rule == SyntheticConfig::Rule::three_markers) {
      std::size_t c = rng.index(kPolarityCount);
      ex.instance.gold = static_cast<Polarity>(c);
      std::string key = "mark" + std::to_string(c);
      ex.bundle = bundle_with({{key, corpus.class_marker_values[c]}});
    } else {
      bool present = rng.chance(0.5);
      ex.instance.gold = present ? Polarity::negative : Polarity::positive;
      if (present) {
        ex.bundle = bundle_with({{"poor", corpus.marker_value}});
      } else {
        ex.bundle = bundle_with({});
      }
    }
    return ex;
  }
};

}  // namespace

SyntheticCorpus make_planted_corpus(const SyntheticConfig& cfg) {
  if (cfg.bundle_len == 0) throw ValidationError("synthetic: bundle_len must be positive");
  if (cfg.marker_position >= cfg.bundle_len)
    throw ValidationError("synthetic: marker_position must lie inside the bundle");
  SyntheticCorpus corpus;
  for (std::size_t c = 0; c < kPolarityCount; ++c)
    corpus.class_marker_values[c] = "mark" + std::to_string(c) + "-nsubj";
  corpus.marker_value = "poor-nsubj";

  Generator gen(cfg);
  for (std::size_t i = 0; i < cfg.n_train; ++i)
    corpus.train.push_back(gen.example("train-" + std::to_string(i), corpus));
  for (std::size_t i = 0; i < cfg.n_dev; ++i)
    corpus.dev.push_back(gen.example("dev-" + std::to_string(i), corpus));
  return corpus;
}

void write_synthetic(const std::filesystem::path& dir, const SyntheticCorpus& corpus) {
  std::filesystem::create_directories(dir);
  auto write_split = [&](const std::string& name, const std::vector<LabeledExample>& split) {
    std::ofstream inst(dir / (name + ".jsonl"), std::ios::binary);
    if (!inst) throw ValidationError("cannot write " + (dir / (name + ".jsonl")).string());
    std::vector<BundleEntry> bundles;
    for (const LabeledExample& ex : split) {
      inst << to_absa_json(ex.instance) << "\n";
      bundles.push_back(BundleEntry{ex.instance.id, ex.bundle});
    }
    save_bundle_file(dir / (name + ".bundles.jsonl"), bundles);
  };
  write_split("train", corpus.train);
  write_split("dev", corpus.dev);
}

}  // namespace synplug
