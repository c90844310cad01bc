#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include "synplug/micro_lm.hpp"
#include "synplug/plugin.hpp"

namespace synplug {

struct HubConfig {
  std::size_t in_dim = 64;    // sum of plugin output widths
  std::size_t hidden = 64;    // one hidden relu layer
  std::size_t out_dim = 32;   // LM embedding width
};

// MLP mapping the (concatenated) plugin outputs into the LM embedding space.
class HubModel {
 public:
  HubModel(HubConfig cfg, Rng& init_rng);

  const HubConfig& config() const { return cfg_; }
  std::vector<ad::Parameter*> parameters();

  ad::Parameter& w1() { return w1_; }
  ad::Parameter& b1() { return b1_; }
  ad::Parameter& w2() { return w2_; }
  ad::Parameter& b2() { return b2_; }

  struct Bound {
    ad::Tape* tape = nullptr;
    ad::Tape::Id w1, b1, w2, b2;
  };
  Bound bind(ad::Tape& t);
  ad::Tape::Id forward_node(const Bound& b, ad::Tape::Id x) const;

  nlohmann::json to_json() const;
  static HubModel from_json(const nlohmann::json& j);

 private:
  HubConfig cfg_;
  ad::Parameter w1_, b1_, w2_, b2_;
};

// h^P from one or more plugin outputs (concatenated in order). Widths must
// sum to the configured input width.
std::vector<double> hub_forward(const HubModel& hub,
                                const std::vector<std::vector<double>>& outputs);

// ---------------------------------------------------------------------------
// Strategy-1 training: plugins + hub learn through the frozen LM.
// ---------------------------------------------------------------------------

// One instance with a bundle per plugin, aligned with the plugin list.
struct FusedExample {
  AbsaInstance instance;
  std::vector<KnowledgeBundle> bundles;
};

struct Strategy1Stats {
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  double best_dev_accuracy = 0.0;
  double min_hub_grad_norm = 0.0;  // smallest per-batch hub gradient norm seen
  std::uint64_t lm_hash_before = 0;
  std::uint64_t lm_hash_after = 0;
  std::size_t unknown_prompt_tokens = 0;  // words that fell back to UNK
};

// Polarity logits for one example through plugins -> hub -> frozen LM.
std::vector<double> fused_predict_logits(MicroLm& lm, std::vector<PluginModel*>& plugins,
                                         HubModel& hub, const FusedExample& ex);
double fused_accuracy(MicroLm& lm, std::vector<PluginModel*>& plugins, HubModel& hub,
                      const std::vector<FusedExample>& examples);

// Cross-entropy over plugin + hub parameters only; the LM must be frozen and
// its parameter hash is checked after training (mismatch is a hard failure).
Strategy1Stats train_strategy1(MicroLm& lm, std::vector<PluginModel*> plugins, HubModel& hub,
                               const std::vector<FusedExample>& train,
                               const std::vector<FusedExample>& dev, const TrainHyper& hyper);

// Fused checkpoint: hub + plugins + the frozen LM's hash.
void save_fused(const std::filesystem::path& path, const HubModel& hub,
                const std::vector<PluginModel*>& plugins, std::uint64_t lm_hash);

struct FusedCheckpoint {
  HubModel hub;
  std::vector<PluginModel> plugins;
  std::uint64_t lm_hash = 0;
};
FusedCheckpoint load_fused(const std::filesystem::path& path);

}  // namespace synplug
