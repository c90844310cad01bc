// Command-line surface: extraction, training, evaluation, sweeps, attention
// reports, gateway inference. Exit codes: 0 success, 2 validation error,
// 3 network failure.

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iostream>
#include <map>
#include <thread>

#include <CLI11.hpp>

#include "synplug/checkpoint.hpp"
#include "synplug/corpus.hpp"
#include "synplug/gateway.hpp"
#include "synplug/hub.hpp"
#include "synplug/knowledge.hpp"
#include "synplug/metrics.hpp"
#include "synplug/micro_lm.hpp"
#include "synplug/plugin.hpp"
#include "synplug/report.hpp"
#include "synplug/synthetic.hpp"

namespace {

using namespace synplug;

std::vector<std::size_t> parse_size_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::string cur;
  for (char c : s + ",") {
    if (c == ',') {
      if (!cur.empty()) out.push_back(std::stoul(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (out.empty()) throw ValidationError("empty list: \"" + s + "\"");
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> out;
  for (std::size_t v : parse_size_list(s)) out.push_back(v);
  return out;
}

// "dep=path,const=path" -> ordered (kind, path) pairs.
std::vector<std::pair<KnowledgeKind, std::string>> parse_kind_map(const std::string& s) {
  std::vector<std::pair<KnowledgeKind, std::string>> out;
  std::string cur;
  for (char c : s + ",") {
    if (c == ',') {
      if (!cur.empty()) {
        std::size_t eq = cur.find('=');
        if (eq == std::string::npos)
          throw ValidationError("expected kind=path, got \"" + cur + "\"");
        out.emplace_back(parse_kind(cur.substr(0, eq)), cur.substr(eq + 1));
      }
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (out.empty()) throw ValidationError("empty kind map: \"" + s + "\"");
  return out;
}

// Joins instances with bundles by id; instances without a bundle get an
// empty one (classified from the query alone).
std::vector<LabeledExample> load_examples(const std::filesystem::path& instances_path,
                                          const std::filesystem::path& bundles_path,
                                          KnowledgeKind kind) {
  std::vector<AbsaInstance> instances = load_absa_jsonl(instances_path);
  std::map<std::string, KnowledgeBundle> by_id;
  for (BundleEntry& e : load_bundle_file(bundles_path)) {
    if (e.bundle.kind != kind)
      throw ValidationError(bundles_path.string() + ": bundle \"" + e.id + "\" has kind " +
                            kind_name(e.bundle.kind) + ", expected " + kind_name(kind));
    by_id.emplace(e.id, std::move(e.bundle));
  }
  std::vector<LabeledExample> out;
  out.reserve(instances.size());
  for (AbsaInstance& inst : instances) {
    LabeledExample ex;
    auto it = by_id.find(inst.id);
    if (it != by_id.end())
      ex.bundle = it->second;
    else
      ex.bundle.kind = kind;
    ex.instance = std::move(inst);
    out.push_back(std::move(ex));
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write file: " + path.string());
  out << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// ---------------------------------------------------------------------------
// Subcommand bodies
// ---------------------------------------------------------------------------

struct ExtractArgs {
  std::string kind = "dep";
  std::string train_dir;
  std::string split;
  std::size_t memory = 5;
  std::string out;
};

void run_extract(const ExtractArgs& a) {
  KnowledgeKind kind = parse_kind(a.kind);
  std::vector<ParsedInstance> target = load_split(a.train_dir, a.split);
  FrequencyTable ft;
  if (kind == KnowledgeKind::dep) {
    std::vector<ParsedInstance> train =
        a.split == "train" ? target : load_split(a.train_dir, "train");
    ft = build_frequency_table(train);
  }
  std::vector<BundleEntry> entries;
  entries.reserve(target.size());
  for (const ParsedInstance& pi : target)
    entries.push_back(BundleEntry{pi.instance.id, extract_bundle(pi, kind, ft, a.memory)});
  save_bundle_file(a.out, entries);
  std::cerr << "extracted " << entries.size() << " " << kind_name(kind) << " bundles -> " << a.out
            << "\n";
}

struct TrainPluginArgs {
  std::string kind = "dep";
  std::string train, bundles, dev, dev_bundles;
  std::string queries;  // precomputed h_XA vectors (optional)
  std::size_t dim = 64;
  std::size_t memory = 5;
  std::string combine = "concat";
  std::size_t epochs = 50;
  std::size_t batch = 32;
  double lr = 1e-3;
  std::size_t patience = 0;
  double stop_at_acc = -1.0;
  std::uint64_t seed = 1;
  std::string out;
};

void run_train_plugin(const TrainPluginArgs& a) {
  KnowledgeKind kind = parse_kind(a.kind);
  std::vector<LabeledExample> train = load_examples(a.train, a.bundles, kind);
  std::vector<LabeledExample> dev;
  if (!a.dev.empty()) dev = load_examples(a.dev, a.dev_bundles, kind);

  PluginConfig cfg{kind, a.dim, a.memory, parse_combine(a.combine)};
  Rng init_rng(a.seed);
  PluginModel model(cfg, build_plugin_vocabs(train), init_rng);
  if (!a.queries.empty())
    model.set_external_queries(std::make_shared<QueryVectors>(load_query_vectors(a.queries)));
  TrainHyper hyper{a.lr, a.epochs, a.batch, a.seed, a.patience, a.stop_at_acc};
  TrainLog log = train_plugin(model, train, dev, hyper);
  model.save(a.out);
  std::cerr << "trained " << kind_name(kind) << " plugin over " << log.epochs_run << " epochs";
  if (!dev.empty())
    std::cerr << ": best dev acc " << format_double(log.best_dev_accuracy) << " at epoch "
              << log.best_epoch;
  std::cerr << " -> " << a.out << "\n";
}

struct EvalPluginArgs {
  std::string model, in, bundles, out, preds, queries;
};

void run_eval_plugin(const EvalPluginArgs& a) {
  PluginModel model = PluginModel::load(a.model);
  if (!a.queries.empty())
    model.set_external_queries(std::make_shared<QueryVectors>(load_query_vectors(a.queries)));
  std::vector<LabeledExample> examples = load_examples(a.in, a.bundles, model.config().kind);
  std::vector<std::optional<Polarity>> preds;
  std::vector<Polarity> golds;
  std::string preds_text;
  for (const LabeledExample& ex : examples) {
    PluginPrediction p = plugin_predict(model, ex.instance, ex.bundle);
    preds.push_back(p.label);
    nlohmann::json j = {{"id", ex.instance.id}, {"pred", polarity_name(p.label)}};
    preds_text += j.dump() + "\n";
    if (ex.instance.gold) golds.push_back(*ex.instance.gold);
  }
  if (!a.preds.empty()) write_text(a.preds, preds_text);
  if (golds.size() == preds.size() && !golds.empty()) {
    Metrics m = evaluate(preds, golds);
    std::string text = metrics_to_json(m).dump(2) + "\n";
    if (!a.out.empty()) write_text(a.out, text);
    std::cout << text;
  } else if (!golds.empty()) {
    throw ValidationError("some instances lack gold labels; cannot evaluate");
  }
}

struct InitLmArgs {
  std::string train;
  std::size_t dim = 32, heads = 2, layers = 2, max_len = 128;
  std::size_t pretrain_epochs = 0;
  double lr = 1e-3;
  std::uint64_t seed = 1;
  std::string out;
};

void run_init_lm(const InitLmArgs& a) {
  std::vector<AbsaInstance> train = load_absa_jsonl(a.train);
  MicroLmConfig cfg;
  cfg.dim = a.dim;
  cfg.heads = a.heads;
  cfg.layers = a.layers;
  cfg.ffn_hidden = 2 * a.dim;
  cfg.max_len = a.max_len;
  Rng rng(a.seed);
  MicroLm lm(cfg, build_lm_vocab(train), rng);
  if (a.pretrain_epochs > 0) pretrain_lm(lm, train, a.pretrain_epochs, a.lr, a.seed);
  lm.save(a.out);
  std::cerr << "micro LM (dim " << a.dim << ", " << a.layers << " layers) hash "
            << hash_hex(lm.hash()) << " -> " << a.out << "\n";
}

struct TrainFusedArgs {
  std::string plugins = "dep";
  std::string lm;
  std::string train, dev;
  std::string bundles, dev_bundles;  // kind=path lists
  std::size_t dim = 64;
  std::size_t memory = 5;
  std::size_t hub_hidden = 0;  // 0 -> 2 * lm dim
  std::size_t epochs = 100;
  std::size_t batch = 32;
  double lr = 1e-3;
  double stop_at_acc = -1.0;
  std::uint64_t seed = 1;
  std::string out;
};

std::vector<FusedExample> load_fused_examples(
    const std::string& instances_path,
    const std::vector<std::pair<KnowledgeKind, std::string>>& bundle_paths) {
  std::vector<AbsaInstance> instances = load_absa_jsonl(instances_path);
  std::vector<std::map<std::string, KnowledgeBundle>> maps;
  for (const auto& [kind, path] : bundle_paths) {
    std::map<std::string, KnowledgeBundle> m;
    for (BundleEntry& e : load_bundle_file(path)) m.emplace(e.id, std::move(e.bundle));
    maps.push_back(std::move(m));
  }
  std::vector<FusedExample> out;
  for (AbsaInstance& inst : instances) {
    FusedExample ex;
    for (std::size_t u = 0; u < bundle_paths.size(); ++u) {
      auto it = maps[u].find(inst.id);
      KnowledgeBundle b;
      b.kind = bundle_paths[u].first;
      if (it != maps[u].end()) b = it->second;
      ex.bundles.push_back(std::move(b));
    }
    ex.instance = std::move(inst);
    out.push_back(std::move(ex));
  }
  return out;
}

void run_train_fused(const TrainFusedArgs& a) {
  MicroLm lm = MicroLm::load(a.lm);

  std::vector<std::string> kinds;
  {
    std::string cur;
    for (char c : a.plugins + ",") {
      if (c == ',') {
        if (!cur.empty()) kinds.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
  }
  // Align bundle files with the plugin kind order, whatever order they were
  // given in.
  auto align = [&kinds](const std::string& arg, const char* flag) {
    std::vector<std::pair<KnowledgeKind, std::string>> out;
    auto given = parse_kind_map(arg);
    for (const std::string& k : kinds) {
      KnowledgeKind kind = parse_kind(k);
      auto it = std::find_if(given.begin(), given.end(),
                             [&](const auto& p) { return p.first == kind; });
      if (it == given.end())
        throw ValidationError(std::string(flag) + " is missing an entry for kind " + k);
      out.push_back(*it);
    }
    if (given.size() != kinds.size())
      throw ValidationError(std::string(flag) + " must name exactly one file per plugin kind");
    return out;
  };
  auto train_bundle_paths = align(a.bundles, "--bundles");
  auto dev_bundle_paths =
      a.dev.empty() ? train_bundle_paths : align(a.dev_bundles, "--dev-bundles");

  std::vector<FusedExample> train = load_fused_examples(a.train, train_bundle_paths);
  std::vector<FusedExample> dev;
  if (!a.dev.empty()) dev = load_fused_examples(a.dev, dev_bundle_paths);

  // Plugins are built fresh over the training vocabulary, one per kind.
  Rng init_rng(a.seed);
  std::vector<PluginModel> plugins;
  for (std::size_t u = 0; u < kinds.size(); ++u) {
    KnowledgeKind kind = parse_kind(kinds[u]);
    std::vector<LabeledExample> view;
    view.reserve(train.size());
    for (const FusedExample& ex : train)
      view.push_back(LabeledExample{ex.instance, ex.bundles[u]});
    PluginConfig cfg{kind, a.dim, a.memory, Combine::concat};
    plugins.emplace_back(cfg, build_plugin_vocabs(view), init_rng);
  }
  std::vector<PluginModel*> plugin_ptrs;
  for (PluginModel& p : plugins) plugin_ptrs.push_back(&p);

  HubConfig hcfg;
  hcfg.in_dim = a.dim * plugins.size();
  hcfg.out_dim = lm.config().dim;
  hcfg.hidden = a.hub_hidden ? a.hub_hidden : 2 * lm.config().dim;
  HubModel hub(hcfg, init_rng);

  TrainHyper hyper{a.lr, a.epochs, a.batch, a.seed, 0, a.stop_at_acc};
  Strategy1Stats stats = train_strategy1(lm, plugin_ptrs, hub, train, dev, hyper);
  if (stats.unknown_prompt_tokens > 0)
    std::cerr << "warning: " << stats.unknown_prompt_tokens
              << " prompt tokens were unknown to the LM vocabulary (mapped to UNK)\n";
  for (PluginModel& p : plugins) p.set_trained(true);
  save_fused(a.out, hub, plugin_ptrs, lm.hash());
  std::cerr << "fused model trained over " << stats.epochs_run << " epochs";
  if (!dev.empty())
    std::cerr << ": best dev acc " << format_double(stats.best_dev_accuracy) << " at epoch "
              << stats.best_epoch;
  std::cerr << ", lm hash " << hash_hex(stats.lm_hash_after) << " (unchanged) -> " << a.out
            << "\n";
}

struct EvalFusedArgs {
  std::string fused, lm, in, bundles, out, preds;
};

void run_eval_fused(const EvalFusedArgs& a) {
  FusedCheckpoint ckpt = load_fused(a.fused);
  MicroLm lm = MicroLm::load(a.lm);
  if (lm.hash() != ckpt.lm_hash)
    throw ValidationError("LM checkpoint hash " + hash_hex(lm.hash()) +
                          " does not match the hash recorded at fusion time " +
                          hash_hex(ckpt.lm_hash));

  std::vector<std::pair<KnowledgeKind, std::string>> bundle_paths = parse_kind_map(a.bundles);
  std::vector<std::pair<KnowledgeKind, std::string>> ordered;
  for (const PluginModel& p : ckpt.plugins) {
    auto it = std::find_if(bundle_paths.begin(), bundle_paths.end(),
                           [&](const auto& kp) { return kp.first == p.config().kind; });
    if (it == bundle_paths.end())
      throw ValidationError("--bundles is missing an entry for kind " +
                            kind_name(p.config().kind));
    ordered.push_back(*it);
  }
  std::vector<FusedExample> examples = load_fused_examples(a.in, ordered);

  std::vector<PluginModel*> plugin_ptrs;
  for (PluginModel& p : ckpt.plugins) plugin_ptrs.push_back(&p);

  std::string preds_text;
  std::vector<std::optional<Polarity>> preds;
  std::vector<Polarity> golds;
  bool all_gold = true;
  for (const FusedExample& ex : examples) {
    std::vector<double> logits = fused_predict_logits(lm, plugin_ptrs, ckpt.hub, ex);
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.size(); ++c)
      if (logits[c] > logits[best]) best = c;
    Polarity label = static_cast<Polarity>(best);
    preds.push_back(label);
    nlohmann::json j = {{"id", ex.instance.id}, {"pred", polarity_name(label)}};
    preds_text += j.dump() + "\n";
    if (ex.instance.gold)
      golds.push_back(*ex.instance.gold);
    else
      all_gold = false;
  }
  if (!a.preds.empty()) write_text(a.preds, preds_text);
  if (all_gold && !examples.empty()) {
    Metrics m = evaluate(preds, golds);
    std::string text = metrics_to_json(m).dump(2) + "\n";
    if (!a.out.empty()) write_text(a.out, text);
    std::cout << text;
  }
}

struct SweepArgs {
  std::string kind = "dep";
  std::string train, bundles, dev, dev_bundles;
  std::string memory = "1,3,5";
  std::string seeds = "1,2,3";
  std::size_t dim = 64;
  std::size_t epochs = 50;
  std::size_t batch = 32;
  double lr = 1e-3;
  double stop_at_acc = -1.0;
  std::string out;
};

void run_sweep(const SweepArgs& a) {
  KnowledgeKind kind = parse_kind(a.kind);
  std::vector<LabeledExample> train = load_examples(a.train, a.bundles, kind);
  std::vector<LabeledExample> dev = load_examples(a.dev, a.dev_bundles, kind);
  SweepConfig cfg;
  cfg.kind = kind;
  cfg.dim = a.dim;
  cfg.hyper = TrainHyper{a.lr, a.epochs, a.batch, 1, 0, a.stop_at_acc};
  std::vector<SweepRow> rows =
      sweep_memory_size(cfg, train, dev, parse_size_list(a.memory), parse_seed_list(a.seeds));
  std::string csv = sweep_to_csv(rows);
  if (!a.out.empty())
    write_text(a.out, csv);
  else
    std::cout << csv;
}

struct DumpAttentionArgs {
  std::string model, in, bundles, out_dir, queries;
};

void run_dump_attention(const DumpAttentionArgs& a) {
  PluginModel model = PluginModel::load(a.model);
  if (!a.queries.empty())
    model.set_external_queries(std::make_shared<QueryVectors>(load_query_vectors(a.queries)));
  std::vector<LabeledExample> examples = load_examples(a.in, a.bundles, model.config().kind);
  auto rows = dump_attention(model, examples,
                             [](const std::string& w) { std::cerr << "warning: " << w << "\n"; });
  std::filesystem::create_directories(a.out_dir);
  write_attention_jsonl(std::filesystem::path(a.out_dir) / "attention.jsonl", rows);
  write_attention_html(std::filesystem::path(a.out_dir) / "attention.html", rows);
  std::cerr << "wrote attention report for " << rows.size() << " instances -> " << a.out_dir
            << "\n";
}

struct AggregateArgs {
  std::string in, out;
};

void run_aggregate(const AggregateArgs& a) {
  std::vector<SweepRow> rows = sweep_from_csv(read_text(a.in));
  std::string csv = aggregate_sweep_csv(rows);
  if (!a.out.empty())
    write_text(a.out, csv);
  else
    std::cout << csv;
}

struct InferLlmArgs {
  std::string endpoint, model_name, template_path;
  std::string plugins;  // kind=ckpt list
  std::string in;
  std::string bundles;  // kind=path list
  std::string out;
  std::string audit, replay;
  int concurrency = 4;
  int max_retries = 3;
  int backoff_ms = 1000;
  int max_tokens = 16;
};

void run_infer_llm(const InferLlmArgs& a) {
  PromptTemplate tmpl = PromptTemplate::load(a.template_path);

  std::vector<std::pair<KnowledgeKind, PluginModel>> plugins;
  if (!a.plugins.empty()) {
    for (const auto& [kind, path] : parse_kind_map(a.plugins)) {
      PluginModel m = PluginModel::load(path);
      if (m.config().kind != kind)
        throw ValidationError("plugin checkpoint " + path + " has kind " +
                              kind_name(m.config().kind) + ", listed as " + kind_name(kind));
      plugins.emplace_back(kind, std::move(m));
    }
  }
  std::vector<std::map<std::string, KnowledgeBundle>> bundle_maps(plugins.size());
  if (!a.bundles.empty()) {
    auto paths = parse_kind_map(a.bundles);
    for (const auto& [kind, path] : paths) {
      bool matched = false;
      for (std::size_t u = 0; u < plugins.size(); ++u) {
        if (plugins[u].first != kind) continue;
        for (BundleEntry& e : load_bundle_file(path))
          bundle_maps[u].emplace(e.id, std::move(e.bundle));
        matched = true;
      }
      if (!matched)
        throw ValidationError("--bundles names kind " + kind_name(kind) + " with no plugin");
    }
  }

  std::vector<AbsaInstance> instances = load_absa_jsonl(a.in);

  ChatConfig cfg;
  cfg.endpoint = a.endpoint;
  cfg.model = a.model_name;
  cfg.max_retries = a.max_retries;
  cfg.backoff_base_ms = a.backoff_ms;
  cfg.max_tokens = a.max_tokens;

  std::optional<AuditLog> audit;
  if (!a.audit.empty()) audit.emplace(a.audit);
  Transport transport;
  if (!a.replay.empty()) transport = make_replay_transport(a.replay);
  ChatClient client(cfg, audit ? &*audit : nullptr, transport);

  struct RowResult {
    std::string raw;
    LabelParse parse;
  };
  std::vector<RowResult> results(instances.size());

  // Plugin predictions are deterministic and cheap; render prompts up front.
  std::vector<std::string> prompts(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    std::map<KnowledgeKind, Polarity> preds;
    for (std::size_t u = 0; u < plugins.size(); ++u) {
      KnowledgeBundle b;
      b.kind = plugins[u].first;
      auto it = bundle_maps[u].find(instances[i].id);
      if (it != bundle_maps[u].end()) b = it->second;
      preds[plugins[u].first] = plugin_predict(plugins[u].second, instances[i], b).label;
    }
    prompts[i] = tmpl.render(instances[i], preds, [](const std::string& w) {
      std::cerr << "warning: " << w << "\n";
    });
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&]() {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= instances.size()) return;
      {
        std::lock_guard<std::mutex> lock(error_mu);
        if (error) return;
      }
      try {
        ChatResult res = client.complete(prompts[i]);
        results[i] = RowResult{res.text, parse_label(res.text)};
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::size_t workers = std::max(1, std::min<int>(a.concurrency, 16));
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (std::thread& th : pool) th.join();
  if (error) std::rethrow_exception(error);

  std::string preds_text;
  std::vector<std::optional<Polarity>> preds;
  std::vector<Polarity> golds;
  bool all_gold = true;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const RowResult& r = results[i];
    nlohmann::json j = {{"id", instances[i].id}, {"raw", r.raw}};
    if (r.parse.ok()) {
      j["pred"] = polarity_name(*r.parse.label);
    } else {
      j["pred"] = nullptr;
      j["parse_failure"] = r.parse.failure == LabelParse::Failure::none_found
                               ? "no polarity keyword"
                               : "multiple polarity keywords";
    }
    preds_text += j.dump() + "\n";
    preds.push_back(r.parse.label);
    if (instances[i].gold)
      golds.push_back(*instances[i].gold);
    else
      all_gold = false;
  }
  write_text(a.out, preds_text);
  std::cerr << "wrote " << instances.size() << " predictions -> " << a.out << "\n";
  if (all_gold && !instances.empty()) {
    Metrics m = evaluate(preds, golds);
    std::cout << metrics_to_json(m).dump(2) << "\n";
  }
}

struct MakeSyntheticArgs {
  std::string out_dir;
  std::string rule = "three";
  std::size_t n_train = 2000, n_dev = 500;
  std::size_t bundle_len = 5;
  std::size_t marker_pos = 0;
  std::uint64_t seed = 1;
};

void run_make_synthetic(const MakeSyntheticArgs& a) {
  SyntheticConfig cfg;
  cfg.n_train = a.n_train;
  cfg.n_dev = a.n_dev;
  cfg.bundle_len = a.bundle_len;
  cfg.marker_position = a.marker_pos;
  cfg.seed = a.seed;
  if (a.rule == "three")
    cfg.rule = SyntheticConfig::Rule::three_markers;
  else if (a.rule == "single")
    cfg.rule = SyntheticConfig::Rule::single_marker;
  else
    throw ValidationError("--rule must be three|single");
  write_synthetic(a.out_dir, make_planted_corpus(cfg));
  std::cerr << "wrote synthetic corpus (" << a.n_train << " train / " << a.n_dev << " dev) -> "
            << a.out_dir << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"memory-based syntactic-knowledge plugins for aspect sentiment analysis"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value config file (sections per subcommand)");

  std::uint64_t global_seed = 1;
  auto* g_seed = app.add_option("--seed", global_seed,
                                "seed applied to subcommands unless they set their own");
  std::string out_dir;
  app.add_option("--out", out_dir,
                 "base directory for relative output paths (created if missing)");

  ExtractArgs ex;
  auto* c_extract = app.add_subcommand("extract", "extract knowledge bundles from parsed corpora");
  c_extract->add_option("--kind", ex.kind, "dep|const|ccg")->required();
  c_extract->add_option("--train", ex.train_dir, "corpus directory")->required();
  c_extract->add_option("--split", ex.split, "split name to extract")->required();
  c_extract->add_option("--memory", ex.memory, "bundle capacity M");
  c_extract->add_option("--out", ex.out, "output bundle JSONL")->required();

  TrainPluginArgs tp;
  auto* c_train = app.add_subcommand("train-plugin", "train one memory plugin standalone");
  c_train->add_option("--kind", tp.kind)->required();
  c_train->add_option("--train", tp.train, "train instances JSONL")->required();
  c_train->add_option("--bundles", tp.bundles, "train bundles JSONL")->required();
  c_train->add_option("--dev", tp.dev, "dev instances JSONL");
  c_train->add_option("--dev-bundles", tp.dev_bundles, "dev bundles JSONL");
  c_train->add_option("--queries", tp.queries,
                      "precomputed query vectors JSONL (replaces the internal encoder)");
  c_train->add_option("--dim", tp.dim);
  c_train->add_option("--memory", tp.memory);
  c_train->add_option("--combine", tp.combine, "concat|sum");
  c_train->add_option("--epochs", tp.epochs);
  c_train->add_option("--batch", tp.batch);
  c_train->add_option("--lr", tp.lr);
  c_train->add_option("--patience", tp.patience);
  c_train->add_option("--stop-at-acc", tp.stop_at_acc);
  c_train->add_option("--seed", tp.seed);
  c_train->add_option("--out", tp.out)->required();

  EvalPluginArgs ep;
  auto* c_eval = app.add_subcommand("eval-plugin", "evaluate a plugin checkpoint");
  c_eval->add_option("--model", ep.model)->required();
  c_eval->add_option("--in", ep.in, "instances JSONL")->required();
  c_eval->add_option("--bundles", ep.bundles)->required();
  c_eval->add_option("--out", ep.out, "metrics JSON");
  c_eval->add_option("--preds", ep.preds, "predictions JSONL");
  c_eval->add_option("--queries", ep.queries, "precomputed query vectors JSONL");

  InitLmArgs il;
  auto* c_lm = app.add_subcommand("init-lm", "initialize (optionally pretrain) the micro LM");
  c_lm->add_option("--train", il.train)->required();
  c_lm->add_option("--dim", il.dim);
  c_lm->add_option("--heads", il.heads);
  c_lm->add_option("--layers", il.layers);
  c_lm->add_option("--max-len", il.max_len);
  c_lm->add_option("--pretrain-epochs", il.pretrain_epochs);
  c_lm->add_option("--lr", il.lr);
  c_lm->add_option("--seed", il.seed);
  c_lm->add_option("--out", il.out)->required();

  TrainFusedArgs tf;
  auto* c_fused = app.add_subcommand("train-fused", "train plugins + hub against a frozen LM");
  c_fused->add_option("--plugins", tf.plugins, "comma list of kinds, e.g. dep,const,ccg");
  c_fused->add_option("--lm", tf.lm, "micro LM checkpoint")->required();
  c_fused->add_option("--train", tf.train)->required();
  c_fused->add_option("--bundles", tf.bundles, "kind=path, one per plugin")->required();
  c_fused->add_option("--dev", tf.dev);
  c_fused->add_option("--dev-bundles", tf.dev_bundles);
  c_fused->add_option("--dim", tf.dim, "plugin embedding width");
  c_fused->add_option("--memory", tf.memory);
  c_fused->add_option("--hub-hidden", tf.hub_hidden);
  c_fused->add_option("--epochs", tf.epochs);
  c_fused->add_option("--batch", tf.batch);
  c_fused->add_option("--lr", tf.lr);
  c_fused->add_option("--stop-at-acc", tf.stop_at_acc);
  c_fused->add_option("--seed", tf.seed);
  c_fused->add_option("--out", tf.out)->required();

  EvalFusedArgs ef;
  auto* c_eval_fused = app.add_subcommand("eval-fused", "evaluate a fused checkpoint");
  c_eval_fused->add_option("--fused", ef.fused)->required();
  c_eval_fused->add_option("--lm", ef.lm, "micro LM checkpoint")->required();
  c_eval_fused->add_option("--in", ef.in)->required();
  c_eval_fused->add_option("--bundles", ef.bundles, "kind=path list")->required();
  c_eval_fused->add_option("--out", ef.out, "metrics JSON");
  c_eval_fused->add_option("--preds", ef.preds, "predictions JSONL");

  SweepArgs sw;
  auto* c_sweep = app.add_subcommand("sweep", "train/evaluate across memory sizes and seeds");
  c_sweep->add_option("--kind", sw.kind)->required();
  c_sweep->add_option("--train", sw.train)->required();
  c_sweep->add_option("--bundles", sw.bundles)->required();
  c_sweep->add_option("--dev", sw.dev)->required();
  c_sweep->add_option("--dev-bundles", sw.dev_bundles)->required();
  c_sweep->add_option("--memory", sw.memory, "comma list of M values");
  c_sweep->add_option("--seeds", sw.seeds, "comma list of seeds");
  c_sweep->add_option("--dim", sw.dim);
  c_sweep->add_option("--epochs", sw.epochs);
  c_sweep->add_option("--batch", sw.batch);
  c_sweep->add_option("--lr", sw.lr);
  c_sweep->add_option("--stop-at-acc", sw.stop_at_acc);
  c_sweep->add_option("--out", sw.out, "CSV path (stdout when omitted)");

  DumpAttentionArgs da;
  auto* c_dump = app.add_subcommand("dump-attention", "per-instance memory weight report");
  c_dump->add_option("--model", da.model)->required();
  c_dump->add_option("--in", da.in)->required();
  c_dump->add_option("--bundles", da.bundles)->required();
  c_dump->add_option("--out", da.out_dir, "output directory")->required();
  c_dump->add_option("--queries", da.queries, "precomputed query vectors JSONL");

  AggregateArgs ag;
  auto* c_agg = app.add_subcommand("aggregate", "average sweep rows over seeds");
  c_agg->add_option("--in", ag.in, "sweep CSV")->required();
  c_agg->add_option("--out", ag.out, "aggregated CSV (stdout when omitted)");

  InferLlmArgs llm;
  auto* c_llm = app.add_subcommand("infer-llm", "ask a chat endpoint with plugin-informed prompts");
  c_llm->add_option("--endpoint", llm.endpoint, "e.g. https://api.example.com/v1")->required();
  c_llm->add_option("--model", llm.model_name)->required();
  c_llm->add_option("--template", llm.template_path)->required();
  c_llm->add_option("--plugins", llm.plugins, "kind=ckpt list");
  c_llm->add_option("--in", llm.in)->required();
  c_llm->add_option("--bundles", llm.bundles, "kind=path list");
  c_llm->add_option("--out", llm.out)->required();
  c_llm->add_option("--audit", llm.audit, "audit log JSONL (appended)");
  c_llm->add_option("--replay", llm.replay, "replay a recorded audit log instead of the network");
  c_llm->add_option("--concurrency", llm.concurrency);
  c_llm->add_option("--max-retries", llm.max_retries);
  c_llm->add_option("--backoff-ms", llm.backoff_ms);
  c_llm->add_option("--max-tokens", llm.max_tokens);

  MakeSyntheticArgs ms;
  auto* c_synth = app.add_subcommand("make-synthetic", "emit a planted-rule corpus");
  c_synth->add_option("--out", ms.out_dir)->required();
  c_synth->add_option("--rule", ms.rule, "three|single");
  c_synth->add_option("--n-train", ms.n_train);
  c_synth->add_option("--n-dev", ms.n_dev);
  c_synth->add_option("--bundle-len", ms.bundle_len);
  c_synth->add_option("--marker-pos", ms.marker_pos);
  c_synth->add_option("--seed", ms.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  // Global --seed backs any per-subcommand seed left at its default.
  if (g_seed->count() > 0) {
    for (auto [sub, seed] : {std::pair<CLI::App*, std::uint64_t*>{c_train, &tp.seed},
                             {c_lm, &il.seed},
                             {c_fused, &tf.seed},
                             {c_synth, &ms.seed}}) {
      if (sub->count("--seed") == 0) *seed = global_seed;
    }
  }

  try {
    // Relative outputs land under the global --out directory.
    if (!out_dir.empty()) {
      std::filesystem::create_directories(out_dir);
      auto resolve = [&](std::string& path) {
        if (!path.empty() && std::filesystem::path(path).is_relative())
          path = (std::filesystem::path(out_dir) / path).string();
      };
      for (std::string* p : {&ex.out, &tp.out, &ep.out, &ep.preds, &il.out, &tf.out, &ef.out,
                             &ef.preds, &sw.out, &da.out_dir, &ag.out, &llm.out, &llm.audit,
                             &ms.out_dir})
        resolve(*p);
    }

    if (*c_extract) run_extract(ex);
    if (*c_train) run_train_plugin(tp);
    if (*c_eval) run_eval_plugin(ep);
    if (*c_lm) run_init_lm(il);
    if (*c_fused) run_train_fused(tf);
    if (*c_eval_fused) run_eval_fused(ef);
    if (*c_sweep) run_sweep(sw);
    if (*c_dump) run_dump_attention(da);
    if (*c_agg) run_aggregate(ag);
    if (*c_llm) run_infer_llm(llm);
    if (*c_synth) run_make_synthetic(ms);
  } catch (const NetworkError& e) {
    std::cerr << "network error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
