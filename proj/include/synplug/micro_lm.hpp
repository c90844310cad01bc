#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "synplug/corpus.hpp"
#include "synplug/rng.hpp"
#include "synplug/tape.hpp"
#include "synplug/vocab.hpp"

namespace synplug {

struct MicroLmConfig {
  std::size_t dim = 32;
  std::size_t heads = 2;
  std::size_t layers = 2;
  std::size_t ffn_hidden = 64;
  std::size_t max_len = 128;
};

struct PromptEncoding {
  std::vector<int> ids;
  std::size_t unknown = 0;  // tokens that fell back to UNK
};

// Small frozen causal transformer standing in for a full LM: learned token
// and position embeddings, pre-norm attention/FFN blocks, a final layernorm,
// a next-token head over the word vocabulary and a dedicated 3-way polarity
// head read at the last position.
//
// A fused forward appends one extra embedding position after the prompt; the
// causal mask then lets the readout position attend to everything.
class MicroLm {
 public:
  MicroLm(MicroLmConfig cfg, Vocab vocab, Rng& init_rng);

  const MicroLmConfig& config() const { return cfg_; }
  const Vocab& vocab() const { return vocab_; }

  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;
  void freeze();
  void unfreeze();
  bool frozen() const;
  std::uint64_t hash() const;  // over parameter values

  // Sentence + aspect rendered as <bos> X... <sep> A...; unseen words map to
  // UNK and are counted.
  PromptEncoding encode_prompt(const AbsaInstance& inst) const;

  struct Bound {
    ad::Tape* tape = nullptr;
    ad::Tape::Id tok_table, pos_table;
    struct Layer {
      ad::Tape::Id ln1_g, ln1_b, wq, wk, wv, wo;
      ad::Tape::Id ln2_g, ln2_b, ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    };
    std::vector<Layer> layers;
    ad::Tape::Id lnf_g, lnf_b, lm_head_w, lm_head_b, pol_w, pol_b;
  };
  Bound bind(ad::Tape& t);

  // Final-layer hidden states, one row per position (plus one for the fused
  // vector when given).
  ad::Tape::Id hidden_states_node(const Bound& b, const std::vector<int>& ids,
                                  std::optional<ad::Tape::Id> fused) const;
  ad::Tape::Id polarity_logits_node(const Bound& b, ad::Tape::Id hidden) const;
  // Next-token logits for every position; used by the toy pretraining loop.
  ad::Tape::Id token_logits_node(const Bound& b, ad::Tape::Id hidden) const;

  void save(const std::filesystem::path& path) const;
  static MicroLm load(const std::filesystem::path& path);

 private:
  MicroLmConfig cfg_;
  Vocab vocab_;
  ad::Parameter tok_table_, pos_table_;
  struct LayerParams {
    ad::Parameter ln1_g, ln1_b, wq, wk, wv, wo;
    ad::Parameter ln2_g, ln2_b, ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  };
  std::vector<LayerParams> layers_;
  ad::Parameter lnf_g_, lnf_b_, lm_head_w_, lm_head_b_, pol_w_, pol_b_;
};

// Polarity logits for a prompt fused with `hp` (length = lm dim).
std::vector<double> fuse_and_forward(const MicroLm& lm, const std::vector<int>& prompt_ids,
                                     const std::vector<double>& hp);

// Builds the LM word vocabulary from training sentences.
Vocab build_lm_vocab(const std::vector<AbsaInstance>& train);

// Optional toy pretraining on next-token prediction over the training
// sentences; unfreezes, trains, re-freezes.
void pretrain_lm(MicroLm& lm, const std::vector<AbsaInstance>& train, std::size_t epochs,
                 double lr, std::uint64_t seed);

}  // namespace synplug
