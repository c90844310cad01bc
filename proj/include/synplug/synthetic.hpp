#pragma once

#include <array>
#include <filesystem>

#include "synplug/plugin.hpp"

namespace synplug {

// Planted-rule corpus: the gold polarity is a deterministic function of a
// designated key/value symbol in the bundle, while the sentence tokens are
// pure noise. Used as a learnability oracle for the memory mechanism.
struct SyntheticConfig {
  std::size_t n_train = 2000;
  std::size_t n_dev = 500;
  KnowledgeKind kind = KnowledgeKind::dep;
  std::size_t sentence_word_pool = 30;
  std::size_t filler_symbol_pool = 20;
  std::size_t bundle_len = 5;
  // Index of the class marker inside the bundle. Entries before it are drawn
  // from a small always-present filler set, so truncating the bundle below
  // marker_position + 1 removes the signal entirely.
  std::size_t marker_position = 0;
  std::uint64_t seed = 1;

  enum class Rule {
    three_markers,  // one marker symbol per class; label = marker's class
    single_marker,  // marker present (p=.5) -> negative, absent -> positive
  };
  Rule rule = Rule::three_markers;
};

struct SyntheticCorpus {
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> dev;
  std::array<std::string, kPolarityCount> class_marker_values;  // three_markers
  std::string marker_value;                                     // single_marker
};

SyntheticCorpus make_planted_corpus(const SyntheticConfig& cfg);

// Writes <prefix>.jsonl and <prefix>.bundles.jsonl for both splits under dir
// (prefix "train"/"dev").
void write_synthetic(const std::filesystem::path& dir, const SyntheticCorpus& corpus);

}  // namespace synplug
