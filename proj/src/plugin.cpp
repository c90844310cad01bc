#include "synplug/plugin.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "synplug/checkpoint.hpp"

namespace synplug {

using ad::Parameter;
using ad::Tape;
using ad::Tensor;

const std::string& combine_name(Combine c) {
  static const std::string names[2] = {"concat", "sum"};
  return names[static_cast<std::size_t>(c)];
}

Combine parse_combine(const std::string& s) {
  if (s == "concat") return Combine::concat;
  if (s == "sum") return Combine::sum;
  throw ValidationError("unknown combine mode: \"" + s + "\" (expected concat|sum)");
}

QueryVectors load_query_vectors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open query vectors: " + path.string());
  QueryVectors out;
  std::string line;
  std::size_t ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(path.string() + " line " + std::to_string(ln) + ": " + e.what());
    }
    std::string id = j.at("id").get<std::string>();
    if (!out.emplace(id, j.at("vector").get<std::vector<double>>()).second)
      throw ValidationError(path.string() + ": duplicate query id \"" + id + "\"");
  }
  return out;
}

PluginVocabs build_plugin_vocabs(const std::vector<LabeledExample>& train) {
  PluginVocabs v;
  v.token.add(kSepSymbol);
  for (const LabeledExample& ex : train) {
    for (const Token& t : ex.instance.tokens) v.token.add(t.form);
    for (const std::string& k : ex.bundle.keys) v.key.add(k);
    for (const std::string& s : ex.bundle.values) v.value.add(s);
  }
  return v;
}

namespace {

void init_embedding(Tensor& t, Rng& rng) {
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-0.1, 0.1);
}

void init_linear(Tensor& w, Rng& rng) {
  double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (std::size_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-bound, bound);
}

}  // namespace

PluginModel::PluginModel(PluginConfig cfg, PluginVocabs vocabs, Rng& init_rng)
    : cfg_(cfg), vocabs_(std::move(vocabs)) {
  if (cfg_.dim == 0) throw ValidationError("plugin: dim must be positive");
  if (cfg_.memory == 0) throw ValidationError("plugin: memory must be positive");
  const std::size_t d = cfg_.dim;
  const std::size_t cls_in = cfg_.combine == Combine::concat ? 2 * d : d;

  token_table_ = Parameter("token_table", Tensor({vocabs_.token.size(), d}));
  proj_w_ = Parameter("proj_w", Tensor({d, d}));
  proj_b_ = Parameter("proj_b", Tensor({d}));
  key_table_ = Parameter("key_table", Tensor({vocabs_.key.size(), d}));
  value_table_ = Parameter("value_table", Tensor({vocabs_.value.size(), d}));
  cls_w_ = Parameter("cls_w", Tensor({kPolarityCount, cls_in}));
  cls_b_ = Parameter("cls_b", Tensor({kPolarityCount}));

  init_embedding(token_table_.value, init_rng);
  init_linear(proj_w_.value, init_rng);
  init_embedding(key_table_.value, init_rng);
  init_embedding(value_table_.value, init_rng);
  init_linear(cls_w_.value, init_rng);
}

std::vector<Parameter*> PluginModel::parameters() {
  return {&token_table_, &proj_w_, &proj_b_, &key_table_, &value_table_, &cls_w_, &cls_b_};
}

std::vector<const Parameter*> PluginModel::parameters() const {
  return {&token_table_, &proj_w_, &proj_b_, &key_table_, &value_table_, &cls_w_, &cls_b_};
}

PluginModel::Bound PluginModel::bind(Tape& t) {
  Bound b;
  b.tape = &t;
  b.token_table = t.param(token_table_);
  b.proj_w = t.param(proj_w_);
  b.proj_b = t.param(proj_b_);
  b.key_table = t.param(key_table_);
  b.value_table = t.param(value_table_);
  b.cls_w = t.param(cls_w_);
  b.cls_b = t.param(cls_b_);
  return b;
}

std::vector<int> PluginModel::query_token_ids(const AbsaInstance& inst) const {
  std::vector<int> ids;
  ids.reserve(inst.tokens.size() + 1 + inst.aspect.size());
  for (const Token& t : inst.tokens) ids.push_back(vocabs_.token.lookup(t.form));
  ids.push_back(vocabs_.token.lookup(kSepSymbol));
  for (std::size_t i = inst.aspect.start; i < inst.aspect.end; ++i)
    ids.push_back(vocabs_.token.lookup(inst.tokens[i].form));
  return ids;
}

void PluginModel::set_external_queries(std::shared_ptr<const QueryVectors> q) {
  external_queries_ = std::move(q);
}

Tape::Id PluginModel::encode_query_node(const Bound& b, const AbsaInstance& inst) const {
  if (inst.tokens.empty()) throw ValidationError("encode_query: instance has no tokens");
  Tape& t = *b.tape;
  if (external_queries_) {
    auto it = external_queries_->find(inst.id);
    if (it == external_queries_->end())
      throw ValidationError("no precomputed query vector for instance \"" + inst.id + "\"");
    if (it->second.size() != cfg_.dim)
      throw ValidationError("precomputed query for \"" + inst.id + "\" has length " +
                            std::to_string(it->second.size()) + ", model dim is " +
                            std::to_string(cfg_.dim));
    return t.input(Tensor::from(it->second));
  }
  Tape::Id emb = t.embedding(b.token_table, query_token_ids(inst));
  Tape::Id pooled = t.mean_rows(emb);
  return t.add(t.matmul(b.proj_w, pooled), b.proj_b);
}

KnowledgeBundle PluginModel::clip(const KnowledgeBundle& bundle) const {
  return truncate_bundle(bundle, cfg_.memory);
}

PluginModel::AttendNodes PluginModel::memory_attend_node(const Bound& b, Tape::Id query,
                                                         const KnowledgeBundle& bundle) const {
  Tape& t = *b.tape;
  KnowledgeBundle mem = clip(bundle);
  AttendNodes out;
  if (mem.empty()) {
    out.output = t.input(Tensor({cfg_.dim}));
    return out;
  }
  std::vector<int> kids, vids;
  for (const std::string& k : mem.keys) kids.push_back(vocabs_.key.lookup(k));
  for (const std::string& v : mem.values) vids.push_back(vocabs_.value.lookup(v));
  Tape::Id keys = t.embedding(b.key_table, std::move(kids));
  Tape::Id values = t.embedding(b.value_table, std::move(vids));
  Tape::Id weights = t.softmax(t.matmul(keys, query));
  out.weights = weights;
  out.output = t.matmul(t.transpose(values), weights);
  return out;
}

Tape::Id PluginModel::logits_node(const Bound& b, Tape::Id query, Tape::Id output) const {
  Tape& t = *b.tape;
  Tape::Id combined = cfg_.combine == Combine::concat
                          ? t.concat({output, query})
                          : t.add(output, query);
  return t.add(t.matmul(b.cls_w, combined), b.cls_b);
}

// ---------------------------------------------------------------------------
// Plain-vector entry points
// ---------------------------------------------------------------------------

std::vector<double> encode_query(const PluginModel& model, const AbsaInstance& inst) {
  Tape t;
  auto& m = const_cast<PluginModel&>(model);
  PluginModel::Bound b = m.bind(t);
  return t.value(model.encode_query_node(b, inst)).vec();
}

AttentionRecord memory_attend(const PluginModel& model, const std::vector<double>& query,
                              const KnowledgeBundle& bundle) {
  Tape t;
  auto& m = const_cast<PluginModel&>(model);
  PluginModel::Bound b = m.bind(t);
  Tape::Id q = t.input(Tensor::from(query));
  PluginModel::AttendNodes nodes = model.memory_attend_node(b, q, bundle);
  AttentionRecord rec;
  rec.output = t.value(nodes.output).vec();
  if (nodes.weights) {
    rec.weights = t.value(*nodes.weights).vec();
  } else {
    rec.empty_memory = true;
  }
  return rec;
}

PluginPrediction plugin_predict(const PluginModel& model, const AbsaInstance& inst,
                                const KnowledgeBundle& bundle) {
  Tape t;
  auto& m = const_cast<PluginModel&>(model);
  PluginModel::Bound b = m.bind(t);
  Tape::Id query = model.encode_query_node(b, inst);
  PluginModel::AttendNodes nodes = model.memory_attend_node(b, query, bundle);
  Tape::Id logits = model.logits_node(b, query, nodes.output);
  Tape::Id dist = t.softmax(logits);

  PluginPrediction pred;
  const Tensor& p = t.value(dist);
  std::size_t best = 0;
  for (std::size_t i = 0; i < kPolarityCount; ++i) {
    pred.dist[i] = p[i];
    if (p[i] > p[best]) best = i;
  }
  pred.label = static_cast<Polarity>(best);
  pred.attention.output = t.value(nodes.output).vec();
  if (nodes.weights)
    pred.attention.weights = t.value(*nodes.weights).vec();
  else
    pred.attention.empty_memory = true;
  return pred;
}

double plugin_accuracy(const PluginModel& model, const std::vector<LabeledExample>& examples) {
  if (examples.empty()) return 0.0;
  std::size_t correct = 0;
  for (const LabeledExample& ex : examples) {
    if (!ex.instance.gold) throw ValidationError("accuracy: instance \"" + ex.instance.id +
                                                 "\" has no gold label");
    if (plugin_predict(model, ex.instance, ex.bundle).label == *ex.instance.gold) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace {

Tape::Id example_loss(PluginModel& model, const PluginModel::Bound& b, const LabeledExample& ex) {
  Tape& t = *b.tape;
  Tape::Id query = model.encode_query_node(b, ex.instance);
  PluginModel::AttendNodes nodes = model.memory_attend_node(b, query, ex.bundle);
  Tape::Id logits = model.logits_node(b, query, nodes.output);
  return t.cross_entropy(logits, static_cast<int>(*ex.instance.gold));
}

std::vector<Tensor> snapshot_values(const std::vector<Parameter*>& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const Parameter* p : params) out.push_back(p->value);
  return out;
}

void restore_values(const std::vector<Parameter*>& params, const std::vector<Tensor>& vals) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = vals[i];
}

}  // namespace

TrainLog train_plugin(PluginModel& model, const std::vector<LabeledExample>& train,
                      const std::vector<LabeledExample>& dev, const TrainHyper& hyper) {
  if (train.empty()) throw ValidationError("train_plugin: empty training split");
  for (const LabeledExample& ex : train)
    if (!ex.instance.gold)
      throw ValidationError("train_plugin: instance \"" + ex.instance.id + "\" has no gold label");
  for (const LabeledExample& ex : dev)
    if (!ex.instance.gold)
      throw ValidationError("train_plugin: dev instance \"" + ex.instance.id + "\" has no gold label");

  std::vector<Parameter*> params = model.parameters();
  ad::Adam adam(params, ad::AdamConfig{hyper.lr});
  Rng rng(hyper.seed);

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainLog log;
  std::vector<Tensor> best = snapshot_values(params);
  double best_acc = -1.0;
  std::size_t since_best = 0;

  const std::size_t batch = std::max<std::size_t>(1, hyper.batch_size);
  for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t off = 0; off < order.size(); off += batch) {
      std::size_t hi = std::min(order.size(), off + batch);
      Tape t;
      PluginModel::Bound b = model.bind(t);
      std::vector<Tape::Id> losses;
      losses.reserve(hi - off);
      for (std::size_t k = off; k < hi; ++k) losses.push_back(example_loss(model, b, train[order[k]]));
      Tape::Id loss = t.scale(t.add_n(losses), 1.0 / static_cast<double>(losses.size()));
      double lv = t.value(loss).item();
      if (!std::isfinite(lv))
        throw TrainingError("non-finite loss " + std::to_string(lv) + " at epoch " +
                            std::to_string(epoch) + ", batch offset " + std::to_string(off));
      ad::zero_grads(params);
      t.backward(loss);
      adam.step();
    }
    ad::zero_grads(params);

    // With no dev split the final parameters win; otherwise keep the best.
    double acc = dev.empty() ? 0.0 : plugin_accuracy(model, dev);
    log.dev_accuracy.push_back(acc);
    log.epochs_run = epoch;
    if (dev.empty() || acc > best_acc) {
      best_acc = acc;
      best = snapshot_values(params);
      log.best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (hyper.stop_at_dev_acc >= 0.0 && acc >= hyper.stop_at_dev_acc) break;
    if (hyper.patience > 0 && since_best >= hyper.patience) break;
  }

  restore_values(params, best);
  log.best_dev_accuracy = std::max(best_acc, 0.0);
  model.set_trained(true);
  return log;
}

double grad_check_plugin(PluginModel& model, const std::vector<LabeledExample>& batch, double eps) {
  if (eps < 1e-7 || eps > 1e-3)
    throw ValidationError("grad_check_plugin: eps must lie in [1e-7, 1e-3]");
  if (batch.empty()) throw ValidationError("grad_check_plugin: empty batch");

  std::vector<Parameter*> params = model.parameters();

  auto batch_loss = [&]() {
    Tape t;
    PluginModel::Bound b = model.bind(t);
    std::vector<Tape::Id> losses;
    for (const LabeledExample& ex : batch) losses.push_back(example_loss(model, b, ex));
    Tape::Id loss = t.scale(t.add_n(losses), 1.0 / static_cast<double>(losses.size()));
    return t.value(loss).item();
  };

  // Analytic gradients.
  ad::zero_grads(params);
  {
    Tape t;
    PluginModel::Bound b = model.bind(t);
    std::vector<Tape::Id> losses;
    for (const LabeledExample& ex : batch) losses.push_back(example_loss(model, b, ex));
    t.backward(t.scale(t.add_n(losses), 1.0 / static_cast<double>(losses.size())));
  }

  double max_rel = 0.0;
  for (Parameter* p : params) {
    if (!p->trainable) continue;
    for (std::size_t i = 0; i < p->value.numel(); ++i) {
      double saved = p->value[i];
      p->value[i] = saved + eps;
      double lp = batch_loss();
      p->value[i] = saved - eps;
      double lm = batch_loss();
      p->value[i] = saved;
      double fd = (lp - lm) / (2.0 * eps);
      double g = p->grad[i];
      double rel = std::abs(g - fd) / std::max({std::abs(g), std::abs(fd), 1e-6});
      max_rel = std::max(max_rel, rel);
    }
  }
  ad::zero_grads(params);
  return max_rel;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

nlohmann::json PluginModel::to_json() const {
  nlohmann::json j;
  j["header"] = {{"kind", kind_name(cfg_.kind)},
                 {"dim", cfg_.dim},
                 {"memory", cfg_.memory},
                 {"combine", combine_name(cfg_.combine)},
                 {"trained", trained_},
                 {"vocab_hash",
                  {{"token", hash_hex(vocabs_.token.hash())},
                   {"key", hash_hex(vocabs_.key.hash())},
                   {"value", hash_hex(vocabs_.value.hash())}}}};
  j["vocabs"] = {{"token", vocab_to_json(vocabs_.token)},
                 {"key", vocab_to_json(vocabs_.key)},
                 {"value", vocab_to_json(vocabs_.value)}};
  j["params"] = params_to_json(const_cast<PluginModel*>(this)->parameters());
  return j;
}

PluginModel PluginModel::from_json(const nlohmann::json& j) {
  const auto& h = j.at("header");
  PluginConfig cfg;
  cfg.kind = parse_kind(h.at("kind").get<std::string>());
  cfg.dim = h.at("dim").get<std::size_t>();
  cfg.memory = h.at("memory").get<std::size_t>();
  cfg.combine = parse_combine(h.at("combine").get<std::string>());

  PluginVocabs vocabs;
  vocabs.token = vocab_from_json(j.at("vocabs").at("token"));
  vocabs.key = vocab_from_json(j.at("vocabs").at("key"));
  vocabs.value = vocab_from_json(j.at("vocabs").at("value"));

  const auto& vh = h.at("vocab_hash");
  if (vh.at("token").get<std::string>() != hash_hex(vocabs.token.hash()) ||
      vh.at("key").get<std::string>() != hash_hex(vocabs.key.hash()) ||
      vh.at("value").get<std::string>() != hash_hex(vocabs.value.hash()))
    throw ValidationError("plugin checkpoint: vocabulary hash mismatch");

  Rng rng(0);
  PluginModel model(cfg, std::move(vocabs), rng);
  params_from_json(j.at("params"), model.parameters());
  model.set_trained(h.value("trained", false));
  return model;
}

void PluginModel::save(const std::filesystem::path& path) const {
  save_checkpoint(path, "plugin", to_json());
}

PluginModel PluginModel::load(const std::filesystem::path& path) {
  return from_json(load_checkpoint(path, "plugin"));
}

}  // namespace synplug
