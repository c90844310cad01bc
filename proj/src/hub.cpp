#include "synplug/hub.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "synplug/checkpoint.hpp"

namespace synplug {

using ad::Parameter;
using ad::Tape;
using ad::Tensor;

HubModel::HubModel(HubConfig cfg, Rng& rng) : cfg_(cfg) {
  if (cfg_.in_dim == 0 || cfg_.hidden == 0 || cfg_.out_dim == 0)
    throw ValidationError("hub: all widths must be positive");
  w1_ = Parameter("hub.w1", Tensor({cfg_.hidden, cfg_.in_dim}));
  b1_ = Parameter("hub.b1", Tensor({cfg_.hidden}));
  w2_ = Parameter("hub.w2", Tensor({cfg_.out_dim, cfg_.hidden}));
  b2_ = Parameter("hub.b2", Tensor({cfg_.out_dim}));
  double bound1 = std::sqrt(6.0 / static_cast<double>(cfg_.hidden + cfg_.in_dim));
  double bound2 = std::sqrt(6.0 / static_cast<double>(cfg_.out_dim + cfg_.hidden));
  for (std::size_t i = 0; i < w1_.value.numel(); ++i) w1_.value[i] = rng.uniform(-bound1, bound1);
  for (std::size_t i = 0; i < w2_.value.numel(); ++i) w2_.value[i] = rng.uniform(-bound2, bound2);
}

std::vector<Parameter*> HubModel::parameters() { return {&w1_, &b1_, &w2_, &b2_}; }

HubModel::Bound HubModel::bind(Tape& t) {
  Bound b;
  b.tape = &t;
  b.w1 = t.param(w1_);
  b.b1 = t.param(b1_);
  b.w2 = t.param(w2_);
  b.b2 = t.param(b2_);
  return b;
}

Tape::Id HubModel::forward_node(const Bound& b, Tape::Id x) const {
  Tape& t = *b.tape;
  if (t.value(x).ndim() != 1 || t.value(x).len() != cfg_.in_dim)
    throw ad::ShapeError("hub: input has shape " + t.value(x).shape_str() + ", expected [" +
                         std::to_string(cfg_.in_dim) + "]");
  Tape::Id h = t.relu(t.add(t.matmul(b.w1, x), b.b1));
  return t.add(t.matmul(b.w2, h), b.b2);
}

std::vector<double> hub_forward(const HubModel& hub,
                                const std::vector<std::vector<double>>& outputs) {
  if (outputs.empty()) throw ValidationError("hub_forward: no plugin outputs");
  std::vector<double> x;
  for (const auto& o : outputs) x.insert(x.end(), o.begin(), o.end());
  Tape t;
  HubModel::Bound b = const_cast<HubModel&>(hub).bind(t);
  return t.value(hub.forward_node(b, t.input(Tensor::from(std::move(x))))).vec();
}

nlohmann::json HubModel::to_json() const {
  nlohmann::json j;
  j["config"] = {{"in_dim", cfg_.in_dim}, {"hidden", cfg_.hidden}, {"out_dim", cfg_.out_dim}};
  j["params"] = params_to_json(const_cast<HubModel*>(this)->parameters());
  return j;
}

HubModel HubModel::from_json(const nlohmann::json& j) {
  HubConfig cfg;
  cfg.in_dim = j.at("config").at("in_dim").get<std::size_t>();
  cfg.hidden = j.at("config").at("hidden").get<std::size_t>();
  cfg.out_dim = j.at("config").at("out_dim").get<std::size_t>();
  Rng rng(0);
  HubModel hub(cfg, rng);
  params_from_json(j.at("params"), hub.parameters());
  return hub;
}

// ---------------------------------------------------------------------------
// Strategy 1
// ---------------------------------------------------------------------------

namespace {

struct FusedGraph {
  Tape::Id logits;
};

FusedGraph fused_logits_node(Tape& t, MicroLm::Bound& lmb, MicroLm& lm,
                             std::vector<PluginModel::Bound>& pbs,
                             std::vector<PluginModel*>& plugins, HubModel::Bound& hb,
                             HubModel& hub, const FusedExample& ex) {
  std::vector<Tape::Id> outs;
  for (std::size_t u = 0; u < plugins.size(); ++u) {
    Tape::Id query = plugins[u]->encode_query_node(pbs[u], ex.instance);
    outs.push_back(plugins[u]->memory_attend_node(pbs[u], query, ex.bundles[u]).output);
  }
  Tape::Id hp = hub.forward_node(hb, outs.size() == 1 ? outs[0] : t.concat(outs));
  PromptEncoding enc = lm.encode_prompt(ex.instance);
  Tape::Id hidden = lm.hidden_states_node(lmb, enc.ids, hp);
  return {lm.polarity_logits_node(lmb, hidden)};
}

void check_example(const FusedExample& ex, std::size_t n_plugins) {
  if (ex.bundles.size() != n_plugins)
    throw ValidationError("fused example \"" + ex.instance.id + "\" carries " +
                          std::to_string(ex.bundles.size()) + " bundles for " +
                          std::to_string(n_plugins) + " plugins");
}

}  // namespace

std::vector<double> fused_predict_logits(MicroLm& lm, std::vector<PluginModel*>& plugins,
                                         HubModel& hub, const FusedExample& ex) {
  check_example(ex, plugins.size());
  Tape t;
  MicroLm::Bound lmb = lm.bind(t);
  HubModel::Bound hb = hub.bind(t);
  std::vector<PluginModel::Bound> pbs;
  for (PluginModel* p : plugins) pbs.push_back(p->bind(t));
  FusedGraph g = fused_logits_node(t, lmb, lm, pbs, plugins, hb, hub, ex);
  return t.value(g.logits).vec();
}

double fused_accuracy(MicroLm& lm, std::vector<PluginModel*>& plugins, HubModel& hub,
                      const std::vector<FusedExample>& examples) {
  if (examples.empty()) return 0.0;
  std::size_t correct = 0;
  for (const FusedExample& ex : examples) {
    if (!ex.instance.gold)
      throw ValidationError("accuracy: instance \"" + ex.instance.id + "\" has no gold label");
    std::vector<double> logits = fused_predict_logits(lm, plugins, hub, ex);
    std::size_t best = 0;
    for (std::size_t i = 1; i < logits.size(); ++i)
      if (logits[i] > logits[best]) best = i;
    if (static_cast<Polarity>(best) == *ex.instance.gold) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

Strategy1Stats train_strategy1(MicroLm& lm, std::vector<PluginModel*> plugins, HubModel& hub,
                               const std::vector<FusedExample>& train,
                               const std::vector<FusedExample>& dev, const TrainHyper& hyper) {
  if (train.empty()) throw ValidationError("train_strategy1: empty training split");
  if (plugins.empty() || plugins.size() > 3)
    throw ValidationError("train_strategy1: expected 1..3 plugins, got " +
                          std::to_string(plugins.size()));
  if (!lm.frozen()) throw ValidationError("train_strategy1: the LM must be frozen");
  for (const FusedExample& ex : train) {
    check_example(ex, plugins.size());
    if (!ex.instance.gold)
      throw ValidationError("train_strategy1: instance \"" + ex.instance.id +
                            "\" has no gold label");
  }
  for (const FusedExample& ex : dev) check_example(ex, plugins.size());

  std::vector<Parameter*> trainable;
  for (PluginModel* p : plugins)
    for (Parameter* q : p->parameters()) trainable.push_back(q);
  std::vector<Parameter*> hub_params = hub.parameters();
  trainable.insert(trainable.end(), hub_params.begin(), hub_params.end());

  Strategy1Stats stats;
  stats.lm_hash_before = lm.hash();
  for (const FusedExample& ex : train) stats.unknown_prompt_tokens += lm.encode_prompt(ex.instance).unknown;
  for (const FusedExample& ex : dev) stats.unknown_prompt_tokens += lm.encode_prompt(ex.instance).unknown;

  ad::Adam adam(trainable, ad::AdamConfig{hyper.lr});
  Rng rng(hyper.seed);
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  struct Snapshot {
    std::vector<Tensor> values;
  };
  auto snap = [&]() {
    Snapshot s;
    for (Parameter* p : trainable) s.values.push_back(p->value);
    return s;
  };
  auto restore = [&](const Snapshot& s) {
    for (std::size_t i = 0; i < trainable.size(); ++i) trainable[i]->value = s.values[i];
  };
  Snapshot best = snap();
  double best_acc = -1.0;
  stats.min_hub_grad_norm = std::numeric_limits<double>::infinity();

  const std::size_t batch = std::max<std::size_t>(1, hyper.batch_size);
  for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t off = 0; off < order.size(); off += batch) {
      std::size_t hi = std::min(order.size(), off + batch);
      Tape t;
      MicroLm::Bound lmb = lm.bind(t);
      HubModel::Bound hb = hub.bind(t);
      std::vector<PluginModel::Bound> pbs;
      for (PluginModel* p : plugins) pbs.push_back(p->bind(t));
      std::vector<Tape::Id> losses;
      for (std::size_t k = off; k < hi; ++k) {
        const FusedExample& ex = train[order[k]];
        FusedGraph g = fused_logits_node(t, lmb, lm, pbs, plugins, hb, hub, ex);
        losses.push_back(t.cross_entropy(g.logits, static_cast<int>(*ex.instance.gold)));
      }
      Tape::Id loss = t.scale(t.add_n(losses), 1.0 / static_cast<double>(losses.size()));
      double lv = t.value(loss).item();
      if (!std::isfinite(lv))
        throw TrainingError("train_strategy1: non-finite loss at epoch " + std::to_string(epoch) +
                            ", batch offset " + std::to_string(off));
      ad::zero_grads(trainable);
      t.backward(loss);
      stats.min_hub_grad_norm = std::min(stats.min_hub_grad_norm, ad::grad_norm(hub_params));
      adam.step();
    }
    ad::zero_grads(trainable);

    double acc = dev.empty() ? 0.0 : fused_accuracy(lm, plugins, hub, dev);
    stats.epochs_run = epoch;
    if (dev.empty() || acc > best_acc) {
      best_acc = acc;
      best = snap();
      stats.best_epoch = epoch;
    }
    if (hyper.stop_at_dev_acc >= 0.0 && acc >= hyper.stop_at_dev_acc) break;
  }

  restore(best);
  stats.best_dev_accuracy = std::max(best_acc, 0.0);
  stats.lm_hash_after = lm.hash();
  if (stats.lm_hash_after != stats.lm_hash_before)
    throw TrainingError("train_strategy1: frozen LM parameters changed during training");
  return stats;
}

void save_fused(const std::filesystem::path& path, const HubModel& hub,
                const std::vector<PluginModel*>& plugins, std::uint64_t lm_hash) {
  nlohmann::json j;
  j["lm_hash"] = hash_hex(lm_hash);
  j["hub"] = hub.to_json();
  nlohmann::json arr = nlohmann::json::array();
  for (const PluginModel* p : plugins) arr.push_back(p->to_json());
  j["plugins"] = std::move(arr);
  save_checkpoint(path, "fused", std::move(j));
}

FusedCheckpoint load_fused(const std::filesystem::path& path) {
  nlohmann::json j = load_checkpoint(path, "fused");
  FusedCheckpoint out{HubModel::from_json(j.at("hub")), {}, 0};
  out.lm_hash = std::stoull(j.at("lm_hash").get<std::string>(), nullptr, 16);
  for (const auto& pj : j.at("plugins")) out.plugins.push_back(PluginModel::from_json(pj));
  return out;
}

}  // namespace synplug
