#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "synplug/corpus.hpp"

using namespace synplug;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& content) {
  auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path, std::ios::binary);
  out << content;
  return path;
}

std::filesystem::path data_dir() {
  return std::filesystem::path(TEST_DATA_DIR);
}

}  // namespace

TEST_CASE("load_absa_jsonl accepts a minimal record") {
  auto path = write_temp(
      "absa_min.jsonl",
      R"({"id":"a","tokens":["ok"],"aspect_start":0,"aspect_end":1,"polarity":"positive"})"
      "\n");
  auto got = load_absa_jsonl(path);
  REQUIRE(got.size() == 1);
  CHECK(got[0].id == "a");
  CHECK(got[0].tokens.size() == 1);
  CHECK(got[0].tokens[0].form == "ok");
  CHECK(got[0].aspect.start == 0);
  CHECK(got[0].aspect.end == 1);
  REQUIRE(got[0].gold.has_value());
  CHECK(*got[0].gold == Polarity::positive);
}

TEST_CASE("load_absa_jsonl rejects an empty aspect span") {
  auto path = write_temp(
      "absa_empty.jsonl",
      R"({"id":"a","tokens":["ok"],"aspect_start":0,"aspect_end":0,"polarity":"positive"})"
      "\n");
  CHECK_THROWS_WITH_AS(load_absa_jsonl(path), doctest::Contains("empty aspect span"),
                       ValidationError);
}

TEST_CASE("load_absa_jsonl names the id and both lines for duplicates") {
  std::string lines;
  for (int i = 1; i <= 10; ++i) {
    std::string id = i == 7 ? "dup" : "x" + std::to_string(i);
    if (i == 3) id = "dup";
    lines += R"({"id":")" + id +
             R"(","tokens":["ok"],"aspect_start":0,"aspect_end":1,"polarity":"neutral"})" + "\n";
  }
  auto path = write_temp("absa_dup.jsonl", lines);
  try {
    load_absa_jsonl(path);
    FAIL("expected a duplicate-id error");
  } catch (const ValidationError& e) {
    std::string msg = e.what();
    CHECK(msg.find("dup") != std::string::npos);
    CHECK(msg.find("3") != std::string::npos);
    CHECK(msg.find("7") != std::string::npos);
  }
}

TEST_CASE("load_absa_jsonl reports malformed JSON with its line number") {
  auto path = write_temp(
      "absa_bad.jsonl",
      R"({"id":"a","tokens":["ok"],"aspect_start":0,"aspect_end":1,"polarity":"neutral"})"
      "\n{oops\n");
  CHECK_THROWS_WITH_AS(load_absa_jsonl(path), doctest::Contains("line 2"), ValidationError);
}

TEST_CASE("load_absa_jsonl rejects unknown polarity strings") {
  auto path = write_temp(
      "absa_pol.jsonl",
      R"({"id":"a","tokens":["ok"],"aspect_start":0,"aspect_end":1,"polarity":"meh"})" "\n");
  CHECK_THROWS_WITH_AS(load_absa_jsonl(path), doctest::Contains("unknown polarity"),
                       ValidationError);
}

TEST_CASE("parse_conllu handles a root-only tree") {
  auto got = parse_conllu("# sent_id = one\n1\tok\t_\t_\t_\t_\t0\troot\t_\t_\n");
  REQUIRE(got.size() == 1);
  CHECK(got[0].id == "one");
  CHECK(got[0].tree.head == std::vector<int>{0});
  CHECK(got[0].tree.rel == std::vector<std::string>{"root"});
}

TEST_CASE("parse_conllu reproduces the bar-service sentence arcs") {
  auto sents = load_conllu_file(data_dir() / "tiny" / "train.conllu");
  REQUIRE(sents.size() == 3);
  const ConlluSentence& s = sents[0];
  CHECK(s.id == "s1");
  REQUIRE(s.forms.size() == 10);
  // poor <-nsubj- service, poor <-cop- is, poor <-mark- although,
  // fantastic <-advcl- poor
  CHECK(s.tree.head[6] == 9);
  CHECK(s.tree.rel[6] == "nsubj");
  CHECK(s.tree.head[7] == 9);
  CHECK(s.tree.rel[7] == "cop");
  CHECK(s.tree.head[4] == 9);
  CHECK(s.tree.rel[4] == "mark");
  CHECK(s.tree.head[8] == 4);
  CHECK(s.tree.rel[8] == "advcl");
  CHECK(s.tree.head[5] == 7);
  CHECK(s.tree.rel[5] == "compound");
}

TEST_CASE("parse_conllu rejects a two-cycle") {
  std::string block =
      "# sent_id = c\n"
      "1\ta\t_\t_\t_\t_\t2\tdep\t_\t_\n"
      "2\tb\t_\t_\t_\t_\t1\tdep\t_\t_\n";
  CHECK_THROWS_AS(parse_conllu(block), ValidationError);
}

TEST_CASE("parse_conllu rejects missing sent_id and out-of-range heads") {
  CHECK_THROWS_WITH_AS(parse_conllu("1\tok\t_\t_\t_\t_\t0\troot\t_\t_\n"),
                       doctest::Contains("missing sent_id"), ValidationError);
  CHECK_THROWS_WITH_AS(
      parse_conllu("# sent_id = x\n1\tok\t_\t_\t_\t_\t9\tdep\t_\t_\n"),
      doctest::Contains("HEAD out of range"), ValidationError);
}

TEST_CASE("parse_conllu skips multiword tokens and empty nodes") {
  std::string block =
      "# sent_id = m\n"
      "1-2\tdel\t_\t_\t_\t_\t_\t_\t_\t_\n"
      "1\ta\t_\t_\t_\t_\t0\troot\t_\t_\n"
      "1.1\tghost\t_\t_\t_\t_\t_\t_\t_\t_\n"
      "2\tb\t_\t_\t_\t_\t1\tdep\t_\t_\n";
  auto got = parse_conllu(block);
  REQUIRE(got.size() == 1);
  CHECK(got[0].forms == std::vector<std::string>{"a", "b"});
}

TEST_CASE("dep trees round-trip through CoNLL-U") {
  Rng rng(2024);
  for (int it = 0; it < 200; ++it) {
    std::size_t n = 1 + rng.index(9);
    ConlluSentence s;
    s.id = "rt" + std::to_string(it);
    for (std::size_t i = 0; i < n; ++i) s.forms.push_back("w" + std::to_string(i));
    s.tree = testutil::random_dep_tree(rng, n, {"amod", "nsubj", "obj"});
    auto parsed = parse_conllu(to_conllu(s));
    REQUIRE(parsed.size() == 1);
    CHECK(parsed[0].id == s.id);
    CHECK(parsed[0].forms == s.forms);
    CHECK(parsed[0].tree == s.tree);
  }
}

TEST_CASE("accepted dep trees reach every token from the root") {
  Rng rng(7);
  for (int it = 0; it < 200; ++it) {
    std::size_t n = 1 + rng.index(9);
    DepTree t = testutil::random_dep_tree(rng, n, {"a", "b", "c"});
    validate_dep_tree(t, "prop");  // must not throw
    // Count tokens whose head chain terminates at ROOT.
    std::size_t reachable = 0;
    for (std::size_t i = 0; i < n; ++i) {
      int cur = static_cast<int>(i) + 1;
      std::size_t steps = 0;
      while (cur != 0 && steps <= n) {
        cur = t.head[cur - 1];
        ++steps;
      }
      if (cur == 0) ++reachable;
    }
    CHECK(reachable == n);
  }
}

TEST_CASE("parse_bracketed computes spans bottom-up") {
  ConstTree t = parse_bracketed("(NP (DT the) (NN bar))");
  CHECK(t.label == "NP");
  CHECK(t.start == 0);
  CHECK(t.end == 2);
  REQUIRE(t.children.size() == 2);
  CHECK(t.children[0].is_leaf());
  CHECK(*t.children[0].word == "the");
  CHECK(fringe(t) == std::vector<std::string>{"the", "bar"});

  ConstTree s = parse_bracketed("(S (NP (NN food)) (VP (VBZ rocks)))");
  CHECK(s.start == 0);
  CHECK(s.end == 2);
  CHECK(s.children[0].label == "NP");
  CHECK(s.children[0].start == 0);
  CHECK(s.children[0].end == 1);
}

TEST_CASE("parse_bracketed reports unbalanced input with an offset") {
  CHECK_THROWS_WITH_AS(parse_bracketed("(NP (NN bar)"), doctest::Contains("offset"),
                       ValidationError);
  CHECK_THROWS_WITH_AS(parse_bracketed("(NP)"), doctest::Contains("empty node"), ValidationError);
  CHECK_THROWS_AS(parse_bracketed("(NP (NN bar)))"), ValidationError);
}

TEST_CASE("const trees round-trip through bracketed text") {
  Rng rng(11);
  for (int it = 0; it < 200; ++it) {
    std::size_t n = 1 + rng.index(10);
    std::vector<std::string> words;
    for (std::size_t i = 0; i < n; ++i) words.push_back("w" + std::to_string(i));
    ConstNode t = testutil::random_const_tree(rng, words, 0, n);
    ConstNode back = parse_bracketed(to_bracketed(t));
    CHECK(back == t);
    CHECK(fringe(back) == words);
  }
}

TEST_CASE("parse_supertags splits tags and validates") {
  auto got = parse_supertags("s1\tN/N N\n");
  REQUIRE(got.size() == 1);
  CHECK(got[0].tags == SupertagSeq{"N/N", "N"});

  CHECK_THROWS_WITH_AS(parse_supertags("s1\t\n"), doctest::Contains("empty tag list"),
                       ValidationError);
  CHECK_THROWS_WITH_AS(parse_supertags("s1\tN\ns1\tN\n"), doctest::Contains("duplicate id"),
                       ValidationError);
}

TEST_CASE("bind enforces per-annotation length agreement") {
  AbsaInstance inst;
  inst.id = "b";
  for (std::size_t i = 0; i < 9; ++i) inst.tokens.push_back(Token{i, "w" + std::to_string(i)});
  inst.aspect = {2, 4};

  SupertagSeq nine(9, "N");
  ParsedInstance ok = synplug::bind(inst, nullptr, nullptr, &nine);
  CHECK(ok.supertags.has_value());
  CHECK_FALSE(ok.constituency.has_value());
  CHECK_FALSE(ok.dep.has_value());

  ConlluSentence short_dep;
  short_dep.id = "b";
  Rng rng(3);
  short_dep.tree = testutil::random_dep_tree(rng, 8, {"dep"});
  for (std::size_t i = 0; i < 8; ++i) short_dep.forms.push_back("w");
  try {
    synplug::bind(inst, &short_dep, nullptr, nullptr);
    FAIL("expected a length error");
  } catch (const ValidationError& e) {
    std::string msg = e.what();
    CHECK(msg.find("8") != std::string::npos);
    CHECK(msg.find("9") != std::string::npos);
  }
}

TEST_CASE("bind rejects a constituency fringe that disagrees with the tokens") {
  AbsaInstance inst;
  inst.id = "f";
  inst.tokens = {Token{0, "the"}, Token{1, "bar"}};
  inst.aspect = {1, 2};
  ConstTree tree = parse_bracketed("(NP (DT the) (NN pub))");
  CHECK_THROWS_WITH_AS(synplug::bind(inst, nullptr, &tree, nullptr), doctest::Contains("pub"),
                       ValidationError);
}

TEST_CASE("load_split binds sidecars by id and tolerates absences") {
  auto split = load_split(data_dir() / "tiny", "train");
  REQUIRE(split.size() == 3);
  for (const ParsedInstance& pi : split) {
    CHECK(pi.dep.has_value());
    CHECK(pi.constituency.has_value());
    CHECK(pi.supertags.has_value());
  }
  CHECK(split[0].instance.id == "s1");
  CHECK(split[0].instance.aspect.start == 5);
}
