#include "synplug/knowledge.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

namespace synplug {

using nlohmann::json;

const std::string& kind_name(KnowledgeKind k) {
  static const std::string names[3] = {"dep", "const", "ccg"};
  return names[static_cast<std::size_t>(k)];
}

KnowledgeKind parse_kind(const std::string& s) {
  if (s == "dep") return KnowledgeKind::dep;
  if (s == "const") return KnowledgeKind::constituent;
  if (s == "ccg") return KnowledgeKind::ccg;
  throw ValidationError("unknown knowledge kind: \"" + s + "\" (expected dep|const|ccg)");
}

void FrequencyTable::add(const std::string& word, const std::string& rel, std::size_t n) {
  counts_[{word, rel}] += n;
}

std::size_t FrequencyTable::count(const std::string& word, const std::string& rel) const {
  auto it = counts_.find({word, rel});
  return it == counts_.end() ? 0 : it->second;
}

// ---------------------------------------------------------------------------
// Bundle serialization
// ---------------------------------------------------------------------------

std::string to_bundle_json(const BundleEntry& e) {
  json j;
  j["id"] = e.id;
  j["kind"] = kind_name(e.bundle.kind);
  j["keys"] = e.bundle.keys;
  j["values"] = e.bundle.values;
  if (e.bundle.fallback) j["fallback"] = true;
  return j.dump();
}

BundleEntry parse_bundle_json(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("malformed bundle JSON: ") + e.what());
  }
  for (const char* field : {"id", "kind", "keys", "values"}) {
    if (!j.contains(field)) throw ValidationError(std::string("bundle missing field \"") + field + "\"");
  }
  BundleEntry e;
  e.id = j["id"].get<std::string>();
  e.bundle.kind = parse_kind(j["kind"].get<std::string>());
  e.bundle.keys = j["keys"].get<std::vector<std::string>>();
  e.bundle.values = j["values"].get<std::vector<std::string>>();
  if (e.bundle.keys.size() != e.bundle.values.size())
    throw ValidationError("bundle \"" + e.id + "\": keys/values length mismatch");
  for (const auto& s : e.bundle.keys)
    if (s.empty()) throw ValidationError("bundle \"" + e.id + "\": empty key symbol");
  for (const auto& s : e.bundle.values)
    if (s.empty()) throw ValidationError("bundle \"" + e.id + "\": empty value symbol");
  e.bundle.fallback = j.value("fallback", false);
  e.bundle.capacity = e.bundle.keys.size();
  return e;
}

std::vector<BundleEntry> load_bundle_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file: " + path.string());
  std::vector<BundleEntry> out;
  std::string line;
  std::size_t ln = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++ln;
    if (line.empty()) continue;
    try {
      out.push_back(parse_bundle_json(line));
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + " line " + std::to_string(ln) + ": " + e.what());
    }
    if (!seen.insert(out.back().id).second)
      throw ValidationError(path.string() + ": duplicate bundle id \"" + out.back().id + "\"");
  }
  return out;
}

void save_bundle_file(const std::filesystem::path& path, const std::vector<BundleEntry>& entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write file: " + path.string());
  for (const BundleEntry& e : entries) out << to_bundle_json(e) << "\n";
}

KnowledgeBundle truncate_bundle(const KnowledgeBundle& b, std::size_t capacity) {
  KnowledgeBundle out = b;
  out.capacity = capacity;
  if (capacity > 0 && out.keys.size() > capacity) {
    out.keys.resize(capacity);
    out.values.resize(capacity);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dependency extraction
// ---------------------------------------------------------------------------

namespace {

// Undirected token adjacency; each edge keeps the label of its arc.
struct DepGraph {
  std::vector<std::vector<std::pair<std::size_t, const std::string*>>> nbrs;

  explicit DepGraph(const DepTree& t) : nbrs(t.size()) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t.head[i] == 0) continue;  // ROOT arc: not a token-token edge
      std::size_t h = static_cast<std::size_t>(t.head[i]) - 1;
      nbrs[i].push_back({h, &t.rel[i]});
      nbrs[h].push_back({i, &t.rel[i]});
    }
  }
};

}  // namespace

std::vector<DepPair> extract_dep_pairs(const ParsedInstance& pi) {
  if (!pi.dep)
    throw ValidationError("instance \"" + pi.instance.id + "\": missing dependency annotation");
  const DepTree& tree = *pi.dep;
  const AspectSpan& aspect = pi.instance.aspect;
  const auto& tokens = pi.instance.tokens;
  DepGraph g(tree);

  std::vector<DepPair> out;
  std::set<std::tuple<std::size_t, std::string, int>> seen;  // (occurrence, rel, order)
  auto emit = [&](std::size_t w, const std::string& rel, int order) {
    if (aspect.contains(w)) return;
    if (!seen.insert({w, rel, order}).second) return;
    out.push_back(DepPair{tokens[w].form, rel, order, w});
  };

  for (std::size_t a = aspect.start; a < aspect.end; ++a) {
    for (const auto& [w, rel1] : g.nbrs[a]) {
      emit(w, *rel1, 1);
      // Any two-arc path a -- w -- w2; the pair carries the outer arc label.
      for (const auto& [w2, rel2] : g.nbrs[w]) {
        if (w2 == a) continue;
        emit(w2, *rel2, 2);
      }
    }
  }
  return out;
}

FrequencyTable build_frequency_table(const std::vector<ParsedInstance>& train) {
  if (train.empty()) throw ValidationError("cannot build frequency table from an empty corpus");
  FrequencyTable ft;
  for (const ParsedInstance& pi : train) {
    if (!pi.dep) continue;
    for (const DepPair& p : extract_dep_pairs(pi)) ft.add(p.word, p.rel);
  }
  return ft;
}

KnowledgeBundle select_dep_bundle(const std::vector<DepPair>& pairs, const FrequencyTable& ft,
                                  std::size_t memory) {
  struct Ranked {
    std::size_t freq;
    const DepPair* p;
    std::string value;
  };
  std::vector<Ranked> ranked;
  ranked.reserve(pairs.size());
  for (const DepPair& p : pairs)
    ranked.push_back(Ranked{ft.count(p.word, p.rel), &p, p.word + "-" + p.rel});
  // Total order independent of input order, so shuffled inputs select
  // identically.
  std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.freq != b.freq) return a.freq > b.freq;
    if (a.p->order != b.p->order) return a.p->order < b.p->order;
    if (a.p->index != b.p->index) return a.p->index < b.p->index;
    return a.value < b.value;
  });

  KnowledgeBundle bundle;
  bundle.kind = KnowledgeKind::dep;
  bundle.capacity = memory;
  for (const Ranked& r : ranked) {
    if (bundle.keys.size() >= memory) break;
    bundle.keys.push_back(r.p->word);
    bundle.values.push_back(r.value);
  }
  return bundle;
}

// ---------------------------------------------------------------------------
// Constituent extraction
// ---------------------------------------------------------------------------

namespace {

struct NodeRef {
  const ConstNode* node;
  std::size_t depth;
};

// Phrase nodes and preterminals alike; the word tokens are the true leaves.
void collect_nodes(const ConstNode& n, std::size_t depth, std::vector<NodeRef>& out) {
  out.push_back({&n, depth});
  for (const ConstNode& c : n.children) collect_nodes(c, depth + 1, out);
}

// Trims [lo, hi) to `capacity` tokens keeping the aspect: context before the
// aspect goes first, then context after it, then (degenerate, aspect wider
// than the memory) the aspect tail.
void trim_to_capacity(std::size_t& lo, std::size_t& hi, const AspectSpan& aspect,
                      std::size_t capacity) {
  if (capacity == 0) return;
  while (hi - lo > capacity && lo < aspect.start) ++lo;
  while (hi - lo > capacity && hi > aspect.end) --hi;
  while (hi - lo > capacity) --hi;
}

}  // namespace

KnowledgeBundle extract_constituent(const ParsedInstance& pi, std::size_t max_len,
                                    std::size_t capacity) {
  if (!pi.constituency)
    throw ValidationError("instance \"" + pi.instance.id + "\": missing constituency annotation");
  const AspectSpan& aspect = pi.instance.aspect;
  const auto& tokens = pi.instance.tokens;

  std::vector<NodeRef> all;
  collect_nodes(*pi.constituency, 0, all);

  const ConstNode* best = nullptr;
  std::size_t best_depth = 0;
  for (const NodeRef& r : all) {
    const ConstNode* n = r.node;
    if (n->start > aspect.start || n->end < aspect.end) continue;
    if (n->span_len() >= max_len) continue;
    if (!best || n->span_len() > best->span_len() ||
        (n->span_len() == best->span_len() &&
         (r.depth < best_depth || (r.depth == best_depth && n->start < best->start)))) {
      best = n;
      best_depth = r.depth;
    }
  }

  KnowledgeBundle bundle;
  bundle.kind = KnowledgeKind::constituent;

  std::size_t lo, hi;
  std::string label;
  if (best) {
    lo = best->start;
    hi = best->end;
    label = best->label;
  } else {
    // No qualifying phrase: fall back to the aspect words under the smallest
    // covering node's label.
    bundle.fallback = true;
    lo = aspect.start;
    hi = aspect.end;
    const ConstNode* cover = nullptr;
    for (const NodeRef& r : all) {
      const ConstNode* n = r.node;
      if (n->start > aspect.start || n->end < aspect.end) continue;
      if (!cover || n->span_len() < cover->span_len()) cover = n;
    }
    label = cover ? cover->label : pi.constituency->label;
  }

  trim_to_capacity(lo, hi, aspect, capacity);
  bundle.capacity = capacity > 0 ? capacity : hi - lo;
  for (std::size_t i = lo; i < hi; ++i) {
    bundle.keys.push_back(tokens[i].form);
    bundle.values.push_back(tokens[i].form + "-" + label);
  }
  return bundle;
}

// ---------------------------------------------------------------------------
// CCG supertag window
// ---------------------------------------------------------------------------

KnowledgeBundle extract_supertag_window(const ParsedInstance& pi, std::size_t window,
                                        std::size_t capacity) {
  if (!pi.supertags)
    throw ValidationError("instance \"" + pi.instance.id + "\": missing supertag annotation");
  const AspectSpan& aspect = pi.instance.aspect;
  const auto& tokens = pi.instance.tokens;
  const SupertagSeq& tags = *pi.supertags;

  std::size_t lo = aspect.start >= window ? aspect.start - window : 0;
  std::size_t hi = std::min(tokens.size(), aspect.end + window);
  trim_to_capacity(lo, hi, aspect, capacity);

  KnowledgeBundle bundle;
  bundle.kind = KnowledgeKind::ccg;
  bundle.capacity = capacity > 0 ? capacity : hi - lo;
  for (std::size_t i = lo; i < hi; ++i) {
    bundle.keys.push_back(tokens[i].form);
    bundle.values.push_back(tokens[i].form + "_" + tags[i]);
  }
  return bundle;
}

KnowledgeBundle extract_bundle(const ParsedInstance& pi, KnowledgeKind kind,
                               const FrequencyTable& ft, std::size_t memory) {
  switch (kind) {
    case KnowledgeKind::dep:
      return select_dep_bundle(extract_dep_pairs(pi), ft, memory);
    case KnowledgeKind::constituent:
      return extract_constituent(pi, 10, memory);
    case KnowledgeKind::ccg:
      return extract_supertag_window(pi, 3, memory);
  }
  throw ValidationError("bad knowledge kind");
}

}  // namespace synplug
