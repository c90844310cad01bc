#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "synplug/corpus.hpp"

namespace synplug {

enum class KnowledgeKind { dep, constituent, ccg };

const std::string& kind_name(KnowledgeKind k);
KnowledgeKind parse_kind(const std::string& s);

// A context word paired with a dependency relation. `order` is 1 for a direct
// arc to an aspect word and 2 for a two-arc path; `index` is the token
// position of the context word (used for deterministic tie-breaking).
struct DepPair {
  std::string word;
  std::string rel;
  int order = 1;
  std::size_t index = 0;

  bool operator==(const DepPair&) const = default;
};

// (word, rel) -> count over the training split.
class FrequencyTable {
 public:
  void add(const std::string& word, const std::string& rel, std::size_t n = 1);
  std::size_t count(const std::string& word, const std::string& rel) const;  // 0 if unseen
  std::size_t distinct() const { return counts_.size(); }
  bool empty() const { return counts_.empty(); }

 private:
  std::map<std::pair<std::string, std::string>, std::size_t> counts_;
};

// Ordered key/value symbol pairs of one knowledge kind, at most `capacity`
// entries. `fallback` marks a constituent bundle built from the aspect words
// because no phrase node qualified.
struct KnowledgeBundle {
  KnowledgeKind kind = KnowledgeKind::dep;
  std::vector<std::string> keys;
  std::vector<std::string> values;
  std::size_t capacity = 0;
  bool fallback = false;

  std::size_t size() const { return keys.size(); }
  bool empty() const { return keys.empty(); }
};

// JSON-lines serialization: {"id","kind","keys":[...],"values":[...]}.
struct BundleEntry {
  std::string id;
  KnowledgeBundle bundle;
};
std::string to_bundle_json(const BundleEntry& e);
BundleEntry parse_bundle_json(const std::string& line);
std::vector<BundleEntry> load_bundle_file(const std::filesystem::path& path);
void save_bundle_file(const std::filesystem::path& path, const std::vector<BundleEntry>& entries);

// Keep at most `capacity` leading entries. Used when a model is configured
// with a smaller memory than the bundle was extracted with.
KnowledgeBundle truncate_bundle(const KnowledgeBundle& b, std::size_t capacity);

// ---------------------------------------------------------------------------
// Dependency knowledge
// ---------------------------------------------------------------------------

// All first- and second-order dependency pairs around the aspect term.
//
// First order: context words with a direct arc to any aspect word (either
// direction); the pair carries that arc's label. Second order: words reached
// by any two-arc path from an aspect word; the pair carries the label of the
// outer arc. Context words inside the aspect span are dropped, as is the
// synthetic ROOT. Duplicates are removed per (token occurrence, rel, order).
std::vector<DepPair> extract_dep_pairs(const ParsedInstance& pi);

// Counts extracted (word, rel) pairs over a training split.
FrequencyTable build_frequency_table(const std::vector<ParsedInstance>& train);

// Ranks pairs by training frequency (descending; unseen pairs count 0),
// breaking ties by (order asc, index asc, value symbol asc), and keeps the
// top `memory`. Keys are the context words, values `word-rel`.
KnowledgeBundle select_dep_bundle(const std::vector<DepPair>& pairs, const FrequencyTable& ft,
                                  std::size_t memory);

// ---------------------------------------------------------------------------
// Constituent knowledge
// ---------------------------------------------------------------------------

// Picks the longest phrase node covering the whole aspect with span length
// < max_len (ties: shallower node, then leftmost). Keys are the phrase
// words, values `word-LABEL`. If no node qualifies the bundle falls back to
// the aspect words labeled with the smallest covering node's label.
// `capacity` > 0 additionally truncates the phrase to that many words,
// trimming context before the aspect first, then after it.
KnowledgeBundle extract_constituent(const ParsedInstance& pi, std::size_t max_len = 10,
                                    std::size_t capacity = 0);

// ---------------------------------------------------------------------------
// CCG supertag knowledge
// ---------------------------------------------------------------------------

// Tokens within `window` positions of the aspect term plus the aspect tokens
// themselves, clipped to sentence bounds. Keys are token forms, values
// `token_TAG`. `capacity` truncates like extract_constituent.
KnowledgeBundle extract_supertag_window(const ParsedInstance& pi, std::size_t window = 3,
                                        std::size_t capacity = 0);

// Dispatch on kind; `memory` is the bundle capacity (dep: frequency-ranked
// selection; const/ccg: aspect-preserving truncation).
KnowledgeBundle extract_bundle(const ParsedInstance& pi, KnowledgeKind kind,
                               const FrequencyTable& ft, std::size_t memory);

}  // namespace synplug
