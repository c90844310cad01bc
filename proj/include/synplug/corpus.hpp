#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "synplug/errors.hpp"

namespace synplug {

// ---------------------------------------------------------------------------
// Sentiment labels. Order is fixed (positive, neutral, negative) and doubles
// as the classifier output index.
// ---------------------------------------------------------------------------
enum class Polarity { positive = 0, neutral = 1, negative = 2 };

inline constexpr std::size_t kPolarityCount = 3;

const std::string& polarity_name(Polarity p);
Polarity parse_polarity(const std::string& s);  // throws ValidationError

// ---------------------------------------------------------------------------
// Core instance types.
// ---------------------------------------------------------------------------
struct Token {
  std::size_t index = 0;  // 0-based position in the sentence
  std::string form;
};

// Token range [start, end) of the aspect term.
struct AspectSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - start; }
  bool contains(std::size_t i) const { return i >= start && i < end; }
};

struct AbsaInstance {
  std::string id;
  std::vector<Token> tokens;
  AspectSpan aspect;
  std::optional<Polarity> gold;  // absent for inference-only files

  std::size_t size() const { return tokens.size(); }
  std::vector<std::string> forms() const;
  std::vector<std::string> aspect_forms() const;
  std::string sentence_text() const;  // forms joined by single spaces
  std::string aspect_text() const;
};

// ---------------------------------------------------------------------------
// Dependency annotation. head[i] == 0 means token i hangs off the synthetic
// ROOT; otherwise head[i] is the 1-based position of the head token.
// ---------------------------------------------------------------------------
struct DepTree {
  std::vector<int> head;
  std::vector<std::string> rel;

  std::size_t size() const { return head.size(); }
  bool operator==(const DepTree&) const = default;
};

// Validates single root, in-range heads, acyclicity (every token reaches
// ROOT), non-empty relation labels. `where` prefixes error messages.
void validate_dep_tree(const DepTree& t, const std::string& where);

// ---------------------------------------------------------------------------
// Constituency annotation. A leaf carries its word (label is the POS tag);
// internal nodes carry a phrase label and ordered children. Spans are token
// ranges [start, end) computed bottom-up at parse time.
// ---------------------------------------------------------------------------
struct ConstNode {
  std::string label;
  std::size_t start = 0;
  std::size_t end = 0;
  std::vector<ConstNode> children;
  std::optional<std::string> word;  // set iff leaf

  bool is_leaf() const { return word.has_value(); }
  std::size_t span_len() const { return end - start; }
  bool operator==(const ConstNode&) const = default;
};

using ConstTree = ConstNode;

// Leaf words in order.
std::vector<std::string> fringe(const ConstNode& n);

// Per-token CCG supertags; length must equal the sentence length.
using SupertagSeq = std::vector<std::string>;

// An instance with whatever sidecar annotations were available.
struct ParsedInstance {
  AbsaInstance instance;
  std::optional<DepTree> dep;
  std::optional<ConstTree> constituency;
  std::optional<SupertagSeq> supertags;
};

// ---------------------------------------------------------------------------
// File formats.
//
// ABSA instances: JSON-lines, UTF-8, one object per line:
//   {"id": "...", "tokens": ["...", ...], "aspect_start": 0, "aspect_end": 1,
//    "polarity": "positive"}          (polarity optional for inference files)
//
// Dependency: CoNLL-U. Blocks separated by blank lines, a `# sent_id = <id>`
// comment per block, tab-separated columns ID FORM LEMMA UPOS XPOS FEATS
// HEAD DEPREL DEPS MISC. Only ID, FORM, HEAD, DEPREL are consumed; multiword
// token lines (ID "1-2") and empty nodes (ID "1.1") are skipped.
//
// Constituency: one Penn-style bracketed tree per line, prefixed `id<TAB>`.
// Leaves are `(POS word)` pairs.
//
// Supertags: TSV lines `id<TAB>tag1 tag2 ...`, one tag per token.
// ---------------------------------------------------------------------------

std::vector<AbsaInstance> load_absa_jsonl(const std::filesystem::path& path);

struct ConlluSentence {
  std::string id;
  std::vector<std::string> forms;
  DepTree tree;
};

std::vector<ConlluSentence> parse_conllu(const std::string& text);
std::vector<ConlluSentence> load_conllu_file(const std::filesystem::path& path);

ConstTree parse_bracketed(const std::string& text);

struct ConstEntry {
  std::string id;
  ConstTree tree;
};
std::vector<ConstEntry> load_const_file(const std::filesystem::path& path);

struct SupertagEntry {
  std::string id;
  SupertagSeq tags;
};
std::vector<SupertagEntry> parse_supertags(const std::string& text);
std::vector<SupertagEntry> load_supertag_file(const std::filesystem::path& path);

// Serializers; parse(serialize(x)) reproduces x exactly.
std::string to_conllu(const ConlluSentence& s);
std::string to_bracketed(const ConstNode& n);
std::string to_supertag_line(const SupertagEntry& e);
std::string to_absa_json(const AbsaInstance& inst);

// Attaches annotations to an instance, enforcing length agreement. Null
// pointers mean the annotation is absent. The constituency fringe must
// reproduce the instance tokens.
ParsedInstance bind(const AbsaInstance& instance, const ConlluSentence* dep,
                    const ConstTree* constituency, const SupertagSeq* supertags);

// Loads `<dir>/<split>.jsonl` plus any of `<split>.conllu`, `<split>.trees`,
// `<split>.ccg` that exist, binding sidecars to instances by id. Instances
// missing from a sidecar simply lack that annotation.
std::vector<ParsedInstance> load_split(const std::filesystem::path& dir, const std::string& split);

}  // namespace synplug
