// End-to-end: parse realistic two-clause sentences, extract bundles from the
// actual syntax, train a plugin per knowledge kind, and require the memory to
// resolve labels a bag-of-words encoder cannot.
//
// Corpus shape: "the N1 was A1 although the N2 was A2 ." with the aspect on
// N1 or N2 and the gold label set by that clause's adjective. Both clauses'
// adjectives appear in every sentence and their polarities are independent,
// so the sentence token multiset is ambiguous whenever they disagree; only
// the aspect-linked syntax identifies the right one.

#include <doctest.h>

#include <sstream>

#include "synplug/corpus.hpp"
#include "synplug/knowledge.hpp"
#include "synplug/plugin.hpp"
#include "synplug/rng.hpp"

using namespace synplug;

namespace {

const std::vector<std::string> kNouns = {"service", "food",  "bar",    "staff",
                                         "pizza",   "salad", "coffee", "decor"};
const std::vector<std::vector<std::string>> kAdjByClass = {
    {"great", "fantastic", "tasty", "friendly"},   // positive
    {"okay", "average", "ordinary", "acceptable"}, // neutral
    {"poor", "awful", "bland", "rude"},            // negative
};

struct PipelineCorpus {
  std::vector<ParsedInstance> parsed;
  std::vector<Polarity> golds;
};

std::string conllu_block(const std::string& id, const std::vector<std::string>& toks) {
  // Heads/rels for the fixed 10-token frame.
  static const int heads[10] = {2, 4, 4, 0, 9, 7, 9, 9, 4, 4};
  static const char* rels[10] = {"det", "nsubj", "cop",   "root", "mark",
                                 "det", "nsubj", "cop",   "advcl", "punct"};
  std::ostringstream out;
  out << "# sent_id = " << id << "\n";
  for (int i = 0; i < 10; ++i)
    out << (i + 1) << '\t' << toks[i] << "\t_\t_\t_\t_\t" << heads[i] << '\t' << rels[i]
        << "\t_\t_\n";
  return out.str();
}

std::string tree_line(const std::vector<std::string>& t) {
  return "(S (S (NP (DT " + t[0] + ") (NN " + t[1] + ")) (VP (VBD " + t[2] + ") (ADJP (JJ " +
         t[3] + ")))) (SBAR (IN " + t[4] + ") (S (NP (DT " + t[5] + ") (NN " + t[6] +
         ")) (VP (VBD " + t[7] + ") (ADJP (JJ " + t[8] + "))))) (. " + t[9] + "))";
}

SupertagSeq supertags_for() {
  return {"NP/N", "N", "(S[dcl]\\NP)/(S[adj]\\NP)", "S[adj]\\NP", "((S\\NP)\\(S\\NP))/S[dcl]",
          "NP/N", "N", "(S[dcl]\\NP)/(S[adj]\\NP)", "S[adj]\\NP", "."};
}

PipelineCorpus make_corpus(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  PipelineCorpus corpus;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t c1 = rng.index(3), c2 = rng.index(3);
    std::vector<std::string> toks = {
        "the", kNouns[rng.index(kNouns.size())],
        "was", kAdjByClass[c1][rng.index(kAdjByClass[c1].size())],
        "although",
        "the", kNouns[rng.index(kNouns.size())],
        "was", kAdjByClass[c2][rng.index(kAdjByClass[c2].size())],
        "."};
    bool first_clause = rng.chance(0.5);

    AbsaInstance inst;
    inst.id = "p" + std::to_string(i);
    for (std::size_t k = 0; k < toks.size(); ++k) inst.tokens.push_back(Token{k, toks[k]});
    inst.aspect = first_clause ? AspectSpan{1, 2} : AspectSpan{6, 7};
    inst.gold = static_cast<Polarity>(first_clause ? c1 : c2);

    // Feed the annotations through the real parsers.
    ConlluSentence dep = parse_conllu(conllu_block(inst.id, toks))[0];
    ConstTree tree = parse_bracketed(tree_line(toks));
    SupertagSeq tags = supertags_for();
    corpus.golds.push_back(*inst.gold);
    corpus.parsed.push_back(synplug::bind(inst, &dep, &tree, &tags));
  }
  return corpus;
}

double train_and_score(KnowledgeKind kind, const PipelineCorpus& train_c,
                       const PipelineCorpus& dev_c) {
  FrequencyTable ft;
  if (kind == KnowledgeKind::dep) ft = build_frequency_table(train_c.parsed);

  auto to_examples = [&](const PipelineCorpus& c) {
    std::vector<LabeledExample> out;
    for (const ParsedInstance& pi : c.parsed)
      out.push_back(LabeledExample{pi.instance, extract_bundle(pi, kind, ft, 5)});
    return out;
  };
  std::vector<LabeledExample> train = to_examples(train_c);
  std::vector<LabeledExample> dev = to_examples(dev_c);

  PluginConfig cfg{kind, 32, 5, Combine::concat};
  Rng rng(7);
  PluginModel model(cfg, build_plugin_vocabs(train), rng);
  TrainHyper hyper;
  hyper.epochs = 60;
  hyper.stop_at_dev_acc = 0.97;
  return train_plugin(model, train, dev, hyper).best_dev_accuracy;
}

}  // namespace

TEST_CASE("syntax-extracted memories resolve clause-ambiguous sentiment") {
  PipelineCorpus train = make_corpus(600, 101);
  PipelineCorpus dev = make_corpus(200, 202);

  // The ambiguity is real: a noticeable share of instances carries two
  // disagreeing adjectives.
  std::size_t conflicting = 0;
  for (const ParsedInstance& pi : dev.parsed) {
    const auto& toks = pi.instance.tokens;
    auto cls = [](const std::string& adj) {
      for (std::size_t c = 0; c < 3; ++c)
        for (const std::string& a : kAdjByClass[c])
          if (a == adj) return c;
      return std::size_t{3};
    };
    if (cls(toks[3].form) != cls(toks[8].form)) ++conflicting;
  }
  CHECK(conflicting > 50);

  SUBCASE("dependency pairs") { CHECK(train_and_score(KnowledgeKind::dep, train, dev) >= 0.9); }
  SUBCASE("constituent phrase") {
    CHECK(train_and_score(KnowledgeKind::constituent, train, dev) >= 0.9);
  }
  SUBCASE("supertag window") { CHECK(train_and_score(KnowledgeKind::ccg, train, dev) >= 0.9); }
}

TEST_CASE("extracted dependency bundles carry the clause-local adjective") {
  PipelineCorpus corpus = make_corpus(50, 303);
  FrequencyTable ft = build_frequency_table(corpus.parsed);
  for (const ParsedInstance& pi : corpus.parsed) {
    KnowledgeBundle b = extract_bundle(pi, KnowledgeKind::dep, ft, 5);
    bool first_clause = pi.instance.aspect.start == 1;
    const std::string& own_adj = pi.instance.tokens[first_clause ? 3 : 8].form;
    const std::string& other_adj = pi.instance.tokens[first_clause ? 8 : 3].form;
    bool has_own = false, other_as_nsubj = false;
    for (const std::string& v : b.values) {
      if (v == own_adj + "-nsubj") has_own = true;
      if (v == other_adj + "-nsubj" && other_adj != own_adj) other_as_nsubj = true;
    }
    CHECK(has_own);
    CHECK_FALSE(other_as_nsubj);  // the other clause's adjective is advcl, never nsubj
  }
}
