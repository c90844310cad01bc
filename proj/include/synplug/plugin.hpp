#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include <json.hpp>

#include "synplug/corpus.hpp"
#include "synplug/knowledge.hpp"
#include "synplug/optim.hpp"
#include "synplug/rng.hpp"
#include "synplug/tape.hpp"
#include "synplug/vocab.hpp"

namespace synplug {

// How the memory output and the query vector are combined before the
// classifier: concatenation (default) or elementwise sum.
enum class Combine { concat, sum };

const std::string& combine_name(Combine c);
Combine parse_combine(const std::string& s);

struct PluginConfig {
  KnowledgeKind kind = KnowledgeKind::dep;
  std::size_t dim = 64;
  std::size_t memory = 5;
  Combine combine = Combine::concat;
};

// An instance paired with its knowledge bundle; gold (when present) lives on
// the instance.
struct LabeledExample {
  AbsaInstance instance;
  KnowledgeBundle bundle;
};

// Attention over the memory for one instance. `weights` line up with the
// bundle entries and sum to 1; an empty bundle yields the designated
// empty-memory result (zero output, no weights, flag set).
struct AttentionRecord {
  std::vector<double> weights;
  std::vector<double> output;
  bool empty_memory = false;
};

struct PluginPrediction {
  std::array<double, kPolarityCount> dist;
  Polarity label = Polarity::positive;
  AttentionRecord attention;
};

struct PluginVocabs {
  Vocab token;  // sentence/aspect tokens, plus the separator
  Vocab key;
  Vocab value;
};

// Precomputed query vectors keyed by instance id, exported from any external
// encoder. JSONL: {"id": "...", "vector": [f64, ...]}.
using QueryVectors = std::map<std::string, std::vector<double>>;
QueryVectors load_query_vectors(const std::filesystem::path& path);

// Token, key and value vocabularies from the training examples, in first-seen
// order.
PluginVocabs build_plugin_vocabs(const std::vector<LabeledExample>& train);

// Key-value memory classifier over one knowledge kind.
//
// The query encoder mean-pools trainable token embeddings over
// sentence + <sep> + aspect and applies an affine projection. Memory keys
// score the query by dot product, a softmax turns scores into weights, and
// the weighted sum of value embeddings is combined with the query for a
// 3-way affine classifier.
class PluginModel {
 public:
  PluginModel(PluginConfig cfg, PluginVocabs vocabs, Rng& init_rng);

  const PluginConfig& config() const { return cfg_; }
  const PluginVocabs& vocabs() const { return vocabs_; }

  // Set by train_plugin; persisted so downstream reports can warn on
  // untrained checkpoints.
  bool trained() const { return trained_; }
  void set_trained(bool t) { trained_ = t; }

  // When set, h_XA is read from this table by instance id instead of the
  // internal mean-pool encoder (whose parameters then stay untouched).
  void set_external_queries(std::shared_ptr<const QueryVectors> q);
  bool uses_external_queries() const { return external_queries_ != nullptr; }

  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;

  // Direct parameter access (tests configure tables explicitly).
  ad::Parameter& token_table() { return token_table_; }
  ad::Parameter& proj_w() { return proj_w_; }
  ad::Parameter& proj_b() { return proj_b_; }
  ad::Parameter& key_table() { return key_table_; }
  ad::Parameter& value_table() { return value_table_; }
  ad::Parameter& cls_w() { return cls_w_; }
  ad::Parameter& cls_b() { return cls_b_; }

  // --- tape-level forward, for training and fusion ---
  struct Bound {
    ad::Tape* tape = nullptr;
    ad::Tape::Id token_table, proj_w, proj_b, key_table, value_table, cls_w, cls_b;
  };
  Bound bind(ad::Tape& t);

  struct AttendNodes {
    std::optional<ad::Tape::Id> weights;  // absent for an empty bundle
    ad::Tape::Id output;                  // o^P, length dim
  };

  ad::Tape::Id encode_query_node(const Bound& b, const AbsaInstance& inst) const;
  AttendNodes memory_attend_node(const Bound& b, ad::Tape::Id query,
                                 const KnowledgeBundle& bundle) const;
  ad::Tape::Id logits_node(const Bound& b, ad::Tape::Id query, ad::Tape::Id output) const;

  // Bundle entries beyond config().memory are dropped before embedding.
  KnowledgeBundle clip(const KnowledgeBundle& bundle) const;

  std::vector<int> query_token_ids(const AbsaInstance& inst) const;

  void save(const std::filesystem::path& path) const;
  static PluginModel load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  static PluginModel from_json(const nlohmann::json& j);

 private:
  PluginConfig cfg_;
  PluginVocabs vocabs_;
  bool trained_ = false;
  std::shared_ptr<const QueryVectors> external_queries_;
  ad::Parameter token_table_, proj_w_, proj_b_, key_table_, value_table_, cls_w_, cls_b_;
};

// --- plain-vector entry points ---

std::vector<double> encode_query(const PluginModel& model, const AbsaInstance& inst);
AttentionRecord memory_attend(const PluginModel& model, const std::vector<double>& query,
                              const KnowledgeBundle& bundle);
PluginPrediction plugin_predict(const PluginModel& model, const AbsaInstance& inst,
                                const KnowledgeBundle& bundle);
double plugin_accuracy(const PluginModel& model, const std::vector<LabeledExample>& examples);

// --- training ---

struct TrainHyper {
  double lr = 1e-3;
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  std::size_t patience = 0;        // 0 = run all epochs
  double stop_at_dev_acc = -1.0;   // < 0 = never stop on accuracy
};

struct TrainLog {
  std::vector<double> dev_accuracy;  // one entry per epoch run
  std::size_t best_epoch = 0;        // 1-based
  double best_dev_accuracy = 0.0;
  std::size_t epochs_run = 0;
};

// Minimizes cross-entropy over the plugin parameters with Adam; keeps the
// best-dev snapshot and restores it before returning. Only PluginModel state
// is touched.
TrainLog train_plugin(PluginModel& model, const std::vector<LabeledExample>& train,
                      const std::vector<LabeledExample>& dev, const TrainHyper& hyper);

// Max relative error between tape gradients and central finite differences
// over all trainable parameters, on the batch cross-entropy loss.
double grad_check_plugin(PluginModel& model, const std::vector<LabeledExample>& batch, double eps);

}  // namespace synplug
