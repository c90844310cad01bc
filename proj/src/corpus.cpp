#include "synplug/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace synplug {

using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string cur;
  for (char c : text) {
    if (c == '\n') {
      if (!cur.empty() && cur.back() == '\r') cur.pop_back();
      lines.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) lines.push_back(cur);
  return lines;
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> parts;
  std::istringstream ss(s);
  std::string w;
  while (ss >> w) parts.push_back(w);
  return parts;
}

std::vector<std::string> split_tabs(const std::string& s) {
  std::vector<std::string> cols;
  std::size_t pos = 0;
  while (true) {
    std::size_t tab = s.find('\t', pos);
    if (tab == std::string::npos) {
      cols.push_back(s.substr(pos));
      break;
    }
    cols.push_back(s.substr(pos, tab - pos));
    pos = tab + 1;
  }
  return cols;
}

}  // namespace

const std::string& polarity_name(Polarity p) {
  static const std::string names[kPolarityCount] = {"positive", "neutral", "negative"};
  return names[static_cast<std::size_t>(p)];
}

Polarity parse_polarity(const std::string& s) {
  if (s == "positive") return Polarity::positive;
  if (s == "neutral") return Polarity::neutral;
  if (s == "negative") return Polarity::negative;
  throw ValidationError("unknown polarity string: \"" + s + "\"");
}

std::vector<std::string> AbsaInstance::forms() const {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const Token& t : tokens) out.push_back(t.form);
  return out;
}

std::vector<std::string> AbsaInstance::aspect_forms() const {
  std::vector<std::string> out;
  for (std::size_t i = aspect.start; i < aspect.end; ++i) out.push_back(tokens[i].form);
  return out;
}

std::string AbsaInstance::sentence_text() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i].form;
  }
  return out;
}

std::string AbsaInstance::aspect_text() const {
  std::string out;
  for (std::size_t i = aspect.start; i < aspect.end; ++i) {
    if (i > aspect.start) out += ' ';
    out += tokens[i].form;
  }
  return out;
}

// ---------------------------------------------------------------------------
// ABSA JSON-lines
// ---------------------------------------------------------------------------

namespace {

AbsaInstance instance_from_json(const json& j, std::size_t line_no) {
  auto fail = [&](const std::string& msg) {
    throw ValidationError("line " + std::to_string(line_no) + ": " + msg);
  };
  if (!j.is_object()) fail("expected a JSON object");
  for (const char* field : {"id", "tokens", "aspect_start", "aspect_end"}) {
    if (!j.contains(field)) fail(std::string("missing field \"") + field + "\"");
  }
  AbsaInstance inst;
  if (!j["id"].is_string()) fail("\"id\" must be a string");
  inst.id = j["id"].get<std::string>();
  if (!j["tokens"].is_array() || j["tokens"].empty()) fail("\"tokens\" must be a non-empty array");
  std::size_t idx = 0;
  for (const auto& t : j["tokens"]) {
    if (!t.is_string()) fail("token must be a string");
    std::string form = t.get<std::string>();
    if (form.empty()) fail("empty token form at position " + std::to_string(idx));
    inst.tokens.push_back(Token{idx, std::move(form)});
    ++idx;
  }
  if (!j["aspect_start"].is_number_integer() || !j["aspect_end"].is_number_integer())
    fail("aspect bounds must be integers");
  long long s = j["aspect_start"].get<long long>();
  long long e = j["aspect_end"].get<long long>();
  if (s < 0 || e < 0) fail("negative aspect bound");
  if (s == e) fail("empty aspect span");
  if (s > e) fail("aspect_start > aspect_end");
  if (static_cast<std::size_t>(e) > inst.tokens.size())
    fail("aspect_end " + std::to_string(e) + " exceeds sentence length " +
         std::to_string(inst.tokens.size()));
  inst.aspect = AspectSpan{static_cast<std::size_t>(s), static_cast<std::size_t>(e)};
  if (j.contains("polarity") && !j["polarity"].is_null()) {
    if (!j["polarity"].is_string()) fail("\"polarity\" must be a string");
    try {
      inst.gold = parse_polarity(j["polarity"].get<std::string>());
    } catch (const ValidationError& e) {
      fail(e.what());
    }
  }
  return inst;
}

}  // namespace

std::vector<AbsaInstance> load_absa_jsonl(const std::filesystem::path& path) {
  std::string text = read_file(path);
  std::vector<AbsaInstance> out;
  std::unordered_map<std::string, std::size_t> id_line;
  std::size_t line_no = 0;
  for (const std::string& line : split_lines(text)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    AbsaInstance inst = instance_from_json(j, line_no);
    auto [it, fresh] = id_line.emplace(inst.id, line_no);
    if (!fresh)
      throw ValidationError("duplicate id \"" + inst.id + "\" on lines " +
                            std::to_string(it->second) + " and " + std::to_string(line_no));
    out.push_back(std::move(inst));
  }
  return out;
}

std::string to_absa_json(const AbsaInstance& inst) {
  json j;
  j["id"] = inst.id;
  j["tokens"] = inst.forms();
  j["aspect_start"] = inst.aspect.start;
  j["aspect_end"] = inst.aspect.end;
  if (inst.gold) j["polarity"] = polarity_name(*inst.gold);
  return j.dump();
}

// ---------------------------------------------------------------------------
// CoNLL-U
// ---------------------------------------------------------------------------

void validate_dep_tree(const DepTree& t, const std::string& where) {
  const std::size_t n = t.size();
  if (t.rel.size() != n) throw ValidationError(where + ": head/rel length mismatch");
  int roots = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (t.head[i] < 0 || t.head[i] > static_cast<int>(n))
      throw ValidationError(where + ": HEAD out of range for token " + std::to_string(i + 1));
    if (t.head[i] == static_cast<int>(i) + 1)
      throw ValidationError(where + ": token " + std::to_string(i + 1) + " heads itself");
    if (t.head[i] == 0) ++roots;
    if (t.rel[i].empty())
      throw ValidationError(where + ": empty relation label for token " + std::to_string(i + 1));
  }
  if (roots != 1)
    throw ValidationError(where + ": expected exactly one root, found " + std::to_string(roots));
  // Every token must reach ROOT without revisiting a node.
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t steps = 0;
    int cur = static_cast<int>(i) + 1;
    while (cur != 0) {
      cur = t.head[cur - 1];
      if (++steps > n)
        throw ValidationError(where + ": cycle in heads involving token " + std::to_string(i + 1));
    }
  }
}

std::vector<ConlluSentence> parse_conllu(const std::string& text) {
  std::vector<ConlluSentence> out;
  std::unordered_map<std::string, std::size_t> seen;

  std::vector<std::string> lines = split_lines(text);
  lines.push_back("");  // terminate the final block

  std::optional<std::string> sent_id;
  std::vector<std::string> forms;
  DepTree tree;
  std::size_t block_start = 1;

  auto flush = [&](std::size_t end_line) {
    if (forms.empty() && !sent_id) return;
    std::string where = "block at line " + std::to_string(block_start);
    if (!sent_id) throw ValidationError(where + ": missing sent_id");
    if (forms.empty()) throw ValidationError(where + ": no token lines");
    validate_dep_tree(tree, "sentence \"" + *sent_id + "\"");
    if (seen.count(*sent_id))
      throw ValidationError("duplicate sent_id \"" + *sent_id + "\"");
    seen.emplace(*sent_id, end_line);
    out.push_back(ConlluSentence{*sent_id, std::move(forms), std::move(tree)});
    sent_id.reset();
    forms.clear();
    tree = DepTree{};
  };

  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string& line = lines[ln];
    if (line.empty()) {
      flush(ln + 1);
      block_start = ln + 2;
      continue;
    }
    if (line[0] == '#') {
      std::size_t eq = line.find('=');
      if (eq != std::string::npos) {
        std::string key = line.substr(1, eq - 1);
        key.erase(std::remove_if(key.begin(), key.end(), ::isspace), key.end());
        if (key == "sent_id") {
          std::string val = line.substr(eq + 1);
          std::size_t a = val.find_first_not_of(" \t");
          sent_id = (a == std::string::npos) ? "" : val.substr(a);
        }
      }
      continue;
    }
    std::vector<std::string> cols = split_tabs(line);
    if (cols.size() < 8)
      throw ValidationError("line " + std::to_string(ln + 1) + ": expected >= 8 tab-separated columns");
    const std::string& id_col = cols[0];
    // Skip multiword-token ranges ("1-2") and empty nodes ("1.1").
    if (id_col.find('-') != std::string::npos || id_col.find('.') != std::string::npos) continue;
    std::size_t expect = forms.size() + 1;
    std::size_t id_val = 0;
    try {
      id_val = std::stoul(id_col);
    } catch (...) {
      throw ValidationError("line " + std::to_string(ln + 1) + ": bad token ID \"" + id_col + "\"");
    }
    if (id_val != expect)
      throw ValidationError("line " + std::to_string(ln + 1) + ": token ID " + id_col +
                            ", expected " + std::to_string(expect));
    if (cols[1].empty())
      throw ValidationError("line " + std::to_string(ln + 1) + ": empty FORM");
    int head = 0;
    try {
      head = std::stoi(cols[6]);
    } catch (...) {
      throw ValidationError("line " + std::to_string(ln + 1) + ": bad HEAD \"" + cols[6] + "\"");
    }
    forms.push_back(cols[1]);
    tree.head.push_back(head);
    tree.rel.push_back(cols[7]);
  }
  return out;
}

std::vector<ConlluSentence> load_conllu_file(const std::filesystem::path& path) {
  return parse_conllu(read_file(path));
}

std::string to_conllu(const ConlluSentence& s) {
  std::ostringstream out;
  out << "# sent_id = " << s.id << "\n";
  for (std::size_t i = 0; i < s.forms.size(); ++i) {
    out << (i + 1) << '\t' << s.forms[i] << "\t_\t_\t_\t_\t" << s.tree.head[i] << '\t'
        << s.tree.rel[i] << "\t_\t_\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Bracketed constituency trees
// ---------------------------------------------------------------------------

namespace {

struct BracketParser {
  const std::string& text;
  std::size_t pos = 0;

  explicit BracketParser(const std::string& t) : text(t) {}

  [[noreturn]] void fail(const std::string& msg) const {
    throw ValidationError("bracketed tree, offset " + std::to_string(pos) + ": " + msg);
  }

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  }

  std::string atom() {
    std::size_t start = pos;
    while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos])) &&
           text[pos] != '(' && text[pos] != ')')
      ++pos;
    if (pos == start) fail("expected a symbol");
    return text.substr(start, pos - start);
  }

  ConstNode node(std::size_t& next_leaf) {
    skip_ws();
    if (pos >= text.size() || text[pos] != '(') fail("expected '('");
    ++pos;
    skip_ws();
    if (pos < text.size() && text[pos] == ')') fail("empty node");
    ConstNode n;
    n.label = atom();
    skip_ws();
    if (pos >= text.size()) fail("unbalanced brackets (unexpected end of input)");
    if (text[pos] == ')') fail("empty node (label \"" + n.label + "\" has no children)");
    if (text[pos] != '(') {
      // Preterminal leaf: (POS word)
      n.word = atom();
      n.start = next_leaf;
      n.end = ++next_leaf;
      skip_ws();
      if (pos >= text.size() || text[pos] != ')')
        fail("expected ')' after leaf \"" + *n.word + "\"");
      ++pos;
      return n;
    }
    while (true) {
      skip_ws();
      if (pos >= text.size()) fail("unbalanced brackets (unexpected end of input)");
      if (text[pos] == ')') {
        ++pos;
        break;
      }
      if (text[pos] != '(') fail("words may only appear inside (POS word) leaves");
      n.children.push_back(node(next_leaf));
    }
    n.start = n.children.front().start;
    n.end = n.children.back().end;
    return n;
  }
};

}  // namespace

ConstTree parse_bracketed(const std::string& text) {
  BracketParser p(text);
  std::size_t next_leaf = 0;
  ConstNode root = p.node(next_leaf);
  p.skip_ws();
  if (p.pos != text.size()) p.fail("trailing content after tree");
  return root;
}

std::vector<ConstEntry> load_const_file(const std::filesystem::path& path) {
  std::vector<ConstEntry> out;
  std::unordered_map<std::string, std::size_t> seen;
  std::size_t ln = 0;
  for (const std::string& line : split_lines(read_file(path))) {
    ++ln;
    if (line.empty()) continue;
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw ValidationError(path.string() + " line " + std::to_string(ln) + ": expected id<TAB>tree");
    std::string id = line.substr(0, tab);
    auto [it, fresh] = seen.emplace(id, ln);
    if (!fresh)
      throw ValidationError(path.string() + ": duplicate id \"" + id + "\" on lines " +
                            std::to_string(it->second) + " and " + std::to_string(ln));
    try {
      out.push_back(ConstEntry{id, parse_bracketed(line.substr(tab + 1))});
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + " line " + std::to_string(ln) + ": " + e.what());
    }
  }
  return out;
}

std::vector<std::string> fringe(const ConstNode& n) {
  std::vector<std::string> words;
  if (n.is_leaf()) {
    words.push_back(*n.word);
    return words;
  }
  for (const ConstNode& c : n.children) {
    auto sub = fringe(c);
    words.insert(words.end(), sub.begin(), sub.end());
  }
  return words;
}

std::string to_bracketed(const ConstNode& n) {
  std::string out = "(" + n.label;
  if (n.is_leaf()) {
    out += " " + *n.word;
  } else {
    for (const ConstNode& c : n.children) out += " " + to_bracketed(c);
  }
  out += ")";
  return out;
}

// ---------------------------------------------------------------------------
// Supertags
// ---------------------------------------------------------------------------

std::vector<SupertagEntry> parse_supertags(const std::string& text) {
  std::vector<SupertagEntry> out;
  std::unordered_map<std::string, std::size_t> seen;
  std::size_t ln = 0;
  for (const std::string& line : split_lines(text)) {
    ++ln;
    if (line.empty()) continue;
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw ValidationError("line " + std::to_string(ln) + ": expected id<TAB>tags");
    std::string id = line.substr(0, tab);
    auto [it, fresh] = seen.emplace(id, ln);
    if (!fresh)
      throw ValidationError("duplicate id \"" + id + "\" on lines " + std::to_string(it->second) +
                            " and " + std::to_string(ln));
    SupertagSeq tags = split_ws(line.substr(tab + 1));
    if (tags.empty()) throw ValidationError("line " + std::to_string(ln) + ": empty tag list");
    out.push_back(SupertagEntry{std::move(id), std::move(tags)});
  }
  return out;
}

std::vector<SupertagEntry> load_supertag_file(const std::filesystem::path& path) {
  return parse_supertags(read_file(path));
}

std::string to_supertag_line(const SupertagEntry& e) {
  std::string out = e.id + "\t";
  for (std::size_t i = 0; i < e.tags.size(); ++i) {
    if (i) out += ' ';
    out += e.tags[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Binding
// ---------------------------------------------------------------------------

ParsedInstance bind(const AbsaInstance& instance, const ConlluSentence* dep,
                    const ConstTree* constituency, const SupertagSeq* supertags) {
  const std::size_t n = instance.tokens.size();
  ParsedInstance pi;
  pi.instance = instance;
  if (dep) {
    if (dep->tree.size() != n)
      throw ValidationError("instance \"" + instance.id + "\": dependency tree has " +
                            std::to_string(dep->tree.size()) + " tokens, instance has " +
                            std::to_string(n));
    pi.dep = dep->tree;
  }
  if (constituency) {
    std::vector<std::string> leaves = fringe(*constituency);
    if (leaves.size() != n)
      throw ValidationError("instance \"" + instance.id + "\": constituency tree has " +
                            std::to_string(leaves.size()) + " leaves, instance has " +
                            std::to_string(n));
    for (std::size_t i = 0; i < n; ++i) {
      if (leaves[i] != instance.tokens[i].form)
        throw ValidationError("instance \"" + instance.id + "\": constituency leaf " +
                              std::to_string(i) + " is \"" + leaves[i] + "\" but token is \"" +
                              instance.tokens[i].form + "\"");
    }
    pi.constituency = *constituency;
  }
  if (supertags) {
    if (supertags->size() != n)
      throw ValidationError("instance \"" + instance.id + "\": supertag sequence has " +
                            std::to_string(supertags->size()) + " tags, instance has " +
                            std::to_string(n));
    pi.supertags = *supertags;
  }
  return pi;
}

std::vector<ParsedInstance> load_split(const std::filesystem::path& dir, const std::string& split) {
  std::vector<AbsaInstance> instances = load_absa_jsonl(dir / (split + ".jsonl"));

  std::unordered_map<std::string, ConlluSentence> dep_by_id;
  std::unordered_map<std::string, ConstTree> const_by_id;
  std::unordered_map<std::string, SupertagSeq> tags_by_id;

  auto conllu_path = dir / (split + ".conllu");
  if (std::filesystem::exists(conllu_path)) {
    for (auto& s : load_conllu_file(conllu_path)) dep_by_id.emplace(s.id, std::move(s));
  }
  auto trees_path = dir / (split + ".trees");
  if (std::filesystem::exists(trees_path)) {
    for (auto& e : load_const_file(trees_path)) const_by_id.emplace(e.id, std::move(e.tree));
  }
  auto ccg_path = dir / (split + ".ccg");
  if (std::filesystem::exists(ccg_path)) {
    for (auto& e : load_supertag_file(ccg_path)) tags_by_id.emplace(e.id, std::move(e.tags));
  }

  std::vector<ParsedInstance> out;
  out.reserve(instances.size());
  for (const AbsaInstance& inst : instances) {
    auto d = dep_by_id.find(inst.id);
    auto c = const_by_id.find(inst.id);
    auto t = tags_by_id.find(inst.id);
    out.push_back(synplug::bind(inst, d == dep_by_id.end() ? nullptr : &d->second,
                                c == const_by_id.end() ? nullptr : &c->second,
                                t == tags_by_id.end() ? nullptr : &t->second));
  }
  return out;
}

}  // namespace synplug
