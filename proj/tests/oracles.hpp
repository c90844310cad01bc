// Test-only oracles and random-structure generators. These stay independent
// of the library's extraction/attention implementations: the dependency
// oracle works on a labeled adjacency matrix, the constituent oracle on a
// flat node scan.
#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "synplug/corpus.hpp"
#include "synplug/knowledge.hpp"
#include "synplug/rng.hpp"

namespace testutil {

using namespace synplug;

// --------------------------------------------------------------------------
// Random structures
// --------------------------------------------------------------------------

// Random labeled tree over n tokens: tokens are attached in a random order,
// each to a parent chosen among already-attached tokens.
inline DepTree random_dep_tree(Rng& rng, std::size_t n, const std::vector<std::string>& labels) {
  DepTree t;
  t.head.assign(n, 0);
  t.rel.assign(n, "");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t tok = order[k];
    if (k == 0) {
      t.head[tok] = 0;
      t.rel[tok] = "root";
    } else {
      std::size_t parent = order[rng.index(k)];
      t.head[tok] = static_cast<int>(parent) + 1;
      t.rel[tok] = labels[rng.index(labels.size())];
    }
  }
  return t;
}

inline AbsaInstance random_instance(Rng& rng, std::size_t n, std::size_t word_pool = 12) {
  AbsaInstance inst;
  inst.id = "r";
  for (std::size_t i = 0; i < n; ++i)
    inst.tokens.push_back(Token{i, "t" + std::to_string(rng.index(word_pool))});
  std::size_t alen = 1 + rng.index(std::min<std::size_t>(n, 3));
  std::size_t start = rng.index(n - alen + 1);
  inst.aspect = AspectSpan{start, start + alen};
  return inst;
}

// Random constituency tree over the given words: spans split recursively at
// random pivots, with a chance of flat n-ary nodes.
inline ConstNode random_const_tree(Rng& rng, const std::vector<std::string>& words,
                                   std::size_t lo, std::size_t hi, int depth = 0) {
  static const std::vector<std::string> phrase_labels = {"S", "NP", "VP", "PP", "ADJP"};
  static const std::vector<std::string> pos_labels = {"NN", "DT", "JJ", "VB"};
  if (hi - lo == 1) {
    ConstNode leaf;
    leaf.label = pos_labels[rng.index(pos_labels.size())];
    leaf.start = lo;
    leaf.end = hi;
    leaf.word = words[lo];
    return leaf;
  }
  ConstNode node;
  node.label = phrase_labels[rng.index(phrase_labels.size())];
  node.start = lo;
  node.end = hi;
  std::size_t parts = 2 + rng.index(std::min<std::size_t>(hi - lo - 1, 3));
  std::vector<std::size_t> cuts = {lo, hi};
  while (cuts.size() < parts + 1) {
    std::size_t c = lo + 1 + rng.index(hi - lo - 1);
    if (std::find(cuts.begin(), cuts.end(), c) == cuts.end()) cuts.push_back(c);
  }
  std::sort(cuts.begin(), cuts.end());
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k)
    node.children.push_back(random_const_tree(rng, words, cuts[k], cuts[k + 1], depth + 1));
  return node;
}

// --------------------------------------------------------------------------
// Dependency-pair oracle: labeled adjacency matrix + explicit 1- and 2-step
// path enumeration.
// --------------------------------------------------------------------------

struct OraclePair {
  std::string word;
  std::string rel;
  int order;
  std::size_t index;
  auto operator<=>(const OraclePair&) const = default;
};

inline std::set<OraclePair> oracle_dep_pairs(const AbsaInstance& inst, const DepTree& tree) {
  const std::size_t n = tree.size();
  std::vector<std::vector<std::string>> label(n, std::vector<std::string>(n));
  std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i) {
    if (tree.head[i] == 0) continue;
    std::size_t h = static_cast<std::size_t>(tree.head[i]) - 1;
    adj[i][h] = adj[h][i] = true;
    label[i][h] = label[h][i] = tree.rel[i];
  }
  std::set<OraclePair> out;
  for (std::size_t a = inst.aspect.start; a < inst.aspect.end; ++a) {
    for (std::size_t w = 0; w < n; ++w) {
      if (!adj[a][w]) continue;
      if (!inst.aspect.contains(w))
        out.insert({inst.tokens[w].form, label[a][w], 1, w});
      for (std::size_t w2 = 0; w2 < n; ++w2) {
        if (!adj[w][w2] || w2 == a) continue;
        if (!inst.aspect.contains(w2))
          out.insert({inst.tokens[w2].form, label[w][w2], 2, w2});
      }
    }
  }
  return out;
}

inline std::set<OraclePair> as_oracle_set(const std::vector<DepPair>& pairs) {
  std::set<OraclePair> out;
  for (const DepPair& p : pairs) out.insert({p.word, p.rel, p.order, p.index});
  return out;
}

// --------------------------------------------------------------------------
// Constituent oracle: collect every node with its depth, scan linearly.
// --------------------------------------------------------------------------

struct OracleNode {
  std::size_t start, end, depth;
  std::string label;
};

inline void oracle_collect(const ConstNode& n, std::size_t depth, std::vector<OracleNode>& out) {
  out.push_back({n.start, n.end, depth, n.label});
  for (const ConstNode& c : n.children) oracle_collect(c, depth + 1, out);
}

struct OracleConstResult {
  bool fallback = false;
  std::size_t lo = 0, hi = 0;
  std::string label;
};

inline OracleConstResult oracle_constituent(const ConstNode& tree, const AspectSpan& aspect,
                                            std::size_t max_len) {
  std::vector<OracleNode> nodes;
  oracle_collect(tree, 0, nodes);
  const OracleNode* best = nullptr;
  for (const OracleNode& n : nodes) {
    if (n.start > aspect.start || n.end < aspect.end) continue;
    if (n.end - n.start >= max_len) continue;
    if (!best) {
      best = &n;
      continue;
    }
    std::size_t bl = best->end - best->start, nl = n.end - n.start;
    if (nl > bl || (nl == bl && (n.depth < best->depth ||
                                 (n.depth == best->depth && n.start < best->start))))
      best = &n;
  }
  OracleConstResult r;
  if (best) {
    r.lo = best->start;
    r.hi = best->end;
    r.label = best->label;
    return r;
  }
  r.fallback = true;
  r.lo = aspect.start;
  r.hi = aspect.end;
  const OracleNode* cover = nullptr;
  for (const OracleNode& n : nodes) {
    if (n.start > aspect.start || n.end < aspect.end) continue;
    if (!cover || n.end - n.start < cover->end - cover->start) cover = &n;
  }
  r.label = cover ? cover->label : tree.label;
  return r;
}

}  // namespace testutil
