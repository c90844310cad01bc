#include "synplug/micro_lm.hpp"

#include <cmath>

#include "synplug/checkpoint.hpp"
#include "synplug/optim.hpp"

namespace synplug {

using ad::Parameter;
using ad::Tape;
using ad::Tensor;

namespace {

void init_embedding(Tensor& t, Rng& rng) {
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-0.1, 0.1);
}

void init_linear(Tensor& w, Rng& rng) {
  double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (std::size_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-bound, bound);
}

Parameter ones_param(const std::string& name, std::size_t d) {
  Tensor t({d});
  t.fill(1.0);
  return Parameter(name, std::move(t));
}

}  // namespace

MicroLm::MicroLm(MicroLmConfig cfg, Vocab vocab, Rng& rng)
    : cfg_(cfg), vocab_(std::move(vocab)) {
  if (cfg_.dim % cfg_.heads != 0)
    throw ValidationError("micro_lm: dim must be divisible by the head count");
  const std::size_t d = cfg_.dim;
  const std::size_t h = cfg_.ffn_hidden;
  const std::size_t v = vocab_.size();

  tok_table_ = Parameter("tok_table", Tensor({v, d}));
  pos_table_ = Parameter("pos_table", Tensor({cfg_.max_len, d}));
  init_embedding(tok_table_.value, rng);
  init_embedding(pos_table_.value, rng);

  layers_.resize(cfg_.layers);
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    std::string p = "layer" + std::to_string(l) + ".";
    LayerParams& lp = layers_[l];
    lp.ln1_g = ones_param(p + "ln1_g", d);
    lp.ln1_b = Parameter(p + "ln1_b", Tensor({d}));
    lp.wq = Parameter(p + "wq", Tensor({d, d}));
    lp.wk = Parameter(p + "wk", Tensor({d, d}));
    lp.wv = Parameter(p + "wv", Tensor({d, d}));
    lp.wo = Parameter(p + "wo", Tensor({d, d}));
    lp.ln2_g = ones_param(p + "ln2_g", d);
    lp.ln2_b = Parameter(p + "ln2_b", Tensor({d}));
    lp.ffn_w1 = Parameter(p + "ffn_w1", Tensor({d, h}));
    lp.ffn_b1 = Parameter(p + "ffn_b1", Tensor({h}));
    lp.ffn_w2 = Parameter(p + "ffn_w2", Tensor({h, d}));
    lp.ffn_b2 = Parameter(p + "ffn_b2", Tensor({d}));
    init_linear(lp.wq.value, rng);
    init_linear(lp.wk.value, rng);
    init_linear(lp.wv.value, rng);
    init_linear(lp.wo.value, rng);
    init_linear(lp.ffn_w1.value, rng);
    init_linear(lp.ffn_w2.value, rng);
  }

  lnf_g_ = ones_param("lnf_g", d);
  lnf_b_ = Parameter("lnf_b", Tensor({d}));
  lm_head_w_ = Parameter("lm_head_w", Tensor({d, v}));
  lm_head_b_ = Parameter("lm_head_b", Tensor({v}));
  pol_w_ = Parameter("pol_w", Tensor({kPolarityCount, d}));
  pol_b_ = Parameter("pol_b", Tensor({kPolarityCount}));
  init_linear(lm_head_w_.value, rng);
  init_linear(pol_w_.value, rng);

  freeze();
}

std::vector<Parameter*> MicroLm::parameters() {
  std::vector<Parameter*> out = {&tok_table_, &pos_table_};
  for (LayerParams& lp : layers_) {
    for (Parameter* p : {&lp.ln1_g, &lp.ln1_b, &lp.wq, &lp.wk, &lp.wv, &lp.wo, &lp.ln2_g,
                         &lp.ln2_b, &lp.ffn_w1, &lp.ffn_b1, &lp.ffn_w2, &lp.ffn_b2})
      out.push_back(p);
  }
  for (Parameter* p : {&lnf_g_, &lnf_b_, &lm_head_w_, &lm_head_b_, &pol_w_, &pol_b_})
    out.push_back(p);
  return out;
}

std::vector<const Parameter*> MicroLm::parameters() const {
  auto mut = const_cast<MicroLm*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

void MicroLm::freeze() {
  for (Parameter* p : parameters()) p->trainable = false;
}

void MicroLm::unfreeze() {
  for (Parameter* p : parameters()) p->trainable = true;
}

bool MicroLm::frozen() const {
  for (const Parameter* p : parameters())
    if (p->trainable) return false;
  return true;
}

std::uint64_t MicroLm::hash() const {
  auto mut = const_cast<MicroLm*>(this)->parameters();
  return ad::params_hash(mut);
}

PromptEncoding MicroLm::encode_prompt(const AbsaInstance& inst) const {
  PromptEncoding enc;
  auto push = [&](const std::string& w) {
    int id = vocab_.lookup(w);
    if (id == kUnkId && w != kUnkSymbol) ++enc.unknown;
    enc.ids.push_back(id);
  };
  push(kBosSymbol);
  for (const Token& t : inst.tokens) push(t.form);
  push(kSepSymbol);
  for (std::size_t i = inst.aspect.start; i < inst.aspect.end; ++i) push(inst.tokens[i].form);
  return enc;
}

MicroLm::Bound MicroLm::bind(Tape& t) {
  Bound b;
  b.tape = &t;
  b.tok_table = t.param(tok_table_);
  b.pos_table = t.param(pos_table_);
  for (LayerParams& lp : layers_) {
    Bound::Layer bl;
    bl.ln1_g = t.param(lp.ln1_g);
    bl.ln1_b = t.param(lp.ln1_b);
    bl.wq = t.param(lp.wq);
    bl.wk = t.param(lp.wk);
    bl.wv = t.param(lp.wv);
    bl.wo = t.param(lp.wo);
    bl.ln2_g = t.param(lp.ln2_g);
    bl.ln2_b = t.param(lp.ln2_b);
    bl.ffn_w1 = t.param(lp.ffn_w1);
    bl.ffn_b1 = t.param(lp.ffn_b1);
    bl.ffn_w2 = t.param(lp.ffn_w2);
    bl.ffn_b2 = t.param(lp.ffn_b2);
    b.layers.push_back(bl);
  }
  b.lnf_g = t.param(lnf_g_);
  b.lnf_b = t.param(lnf_b_);
  b.lm_head_w = t.param(lm_head_w_);
  b.lm_head_b = t.param(lm_head_b_);
  b.pol_w = t.param(pol_w_);
  b.pol_b = t.param(pol_b_);
  return b;
}

Tape::Id MicroLm::hidden_states_node(const Bound& b, const std::vector<int>& ids,
                                     std::optional<Tape::Id> fused) const {
  if (ids.empty()) throw ValidationError("micro_lm: empty prompt");
  if (ids.size() + (fused ? 1 : 0) > cfg_.max_len)
    throw ValidationError("micro_lm: prompt length " + std::to_string(ids.size()) +
                          " exceeds max_len " + std::to_string(cfg_.max_len));
  Tape& t = *b.tape;
  const std::size_t dh = cfg_.dim / cfg_.heads;

  std::vector<int> pos(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) pos[i] = static_cast<int>(i);
  Tape::Id x = t.add(t.embedding(b.tok_table, ids), t.embedding(b.pos_table, pos));
  // The fused vector is appended as one extra position, after the prompt, so
  // the final readout position sees it under the causal mask.
  if (fused) x = t.append_row(x, *fused);

  for (const Bound::Layer& l : b.layers) {
    Tape::Id xn = t.layernorm(x, l.ln1_g, l.ln1_b);
    Tape::Id q = t.matmul(xn, l.wq);
    Tape::Id k = t.matmul(xn, l.wk);
    Tape::Id v = t.matmul(xn, l.wv);
    std::vector<Tape::Id> heads;
    for (std::size_t h = 0; h < cfg_.heads; ++h) {
      std::size_t lo = h * dh, hi = lo + dh;
      Tape::Id qh = t.slice_cols(q, lo, hi);
      Tape::Id kh = t.slice_cols(k, lo, hi);
      Tape::Id vh = t.slice_cols(v, lo, hi);
      Tape::Id scores = t.scale(t.matmul(qh, t.transpose(kh)), 1.0 / std::sqrt(double(dh)));
      heads.push_back(t.matmul(t.softmax_rows_causal(scores), vh));
    }
    x = t.add(x, t.matmul(t.concat_cols(heads), l.wo));
    Tape::Id xn2 = t.layernorm(x, l.ln2_g, l.ln2_b);
    Tape::Id f1 = t.relu(t.add_rowvec(t.matmul(xn2, l.ffn_w1), l.ffn_b1));
    x = t.add(x, t.add_rowvec(t.matmul(f1, l.ffn_w2), l.ffn_b2));
  }
  return t.layernorm(x, b.lnf_g, b.lnf_b);
}

Tape::Id MicroLm::polarity_logits_node(const Bound& b, Tape::Id hidden) const {
  Tape& t = *b.tape;
  Tape::Id last = t.row(hidden, t.value(hidden).rows() - 1);
  return t.add(t.matmul(b.pol_w, last), b.pol_b);
}

Tape::Id MicroLm::token_logits_node(const Bound& b, Tape::Id hidden) const {
  Tape& t = *b.tape;
  return t.add_rowvec(t.matmul(hidden, b.lm_head_w), b.lm_head_b);
}

std::vector<double> fuse_and_forward(const MicroLm& lm, const std::vector<int>& prompt_ids,
                                     const std::vector<double>& hp) {
  if (hp.size() != lm.config().dim)
    throw ValidationError("fuse_and_forward: fused vector has length " +
                          std::to_string(hp.size()) + ", lm dim is " +
                          std::to_string(lm.config().dim));
  Tape t;
  MicroLm& m = const_cast<MicroLm&>(lm);
  MicroLm::Bound b = m.bind(t);
  Tape::Id fused = t.input(Tensor::from(hp));
  Tape::Id hidden = lm.hidden_states_node(b, prompt_ids, fused);
  return t.value(lm.polarity_logits_node(b, hidden)).vec();
}

Vocab build_lm_vocab(const std::vector<AbsaInstance>& train) {
  Vocab v;
  v.add(kBosSymbol);
  v.add(kSepSymbol);
  for (const AbsaInstance& inst : train)
    for (const Token& t : inst.tokens) v.add(t.form);
  return v;
}

void pretrain_lm(MicroLm& lm, const std::vector<AbsaInstance>& train, std::size_t epochs,
                 double lr, std::uint64_t seed) {
  if (train.empty()) throw ValidationError("pretrain_lm: empty training split");
  lm.unfreeze();
  std::vector<Parameter*> params = lm.parameters();
  ad::Adam adam(params, ad::AdamConfig{lr});
  Rng rng(seed);
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t idx : order) {
      PromptEncoding enc = lm.encode_prompt(train[idx]);
      if (enc.ids.size() < 2) continue;
      Tape t;
      MicroLm::Bound b = lm.bind(t);
      Tape::Id hidden = lm.hidden_states_node(b, enc.ids, std::nullopt);
      Tape::Id logits = lm.token_logits_node(b, hidden);
      std::vector<Tape::Id> losses;
      for (std::size_t i = 0; i + 1 < enc.ids.size(); ++i)
        losses.push_back(t.cross_entropy(t.row(logits, i), enc.ids[i + 1]));
      Tape::Id loss = t.scale(t.add_n(losses), 1.0 / static_cast<double>(losses.size()));
      if (!std::isfinite(t.value(loss).item()))
        throw TrainingError("pretrain_lm: non-finite loss");
      ad::zero_grads(params);
      t.backward(loss);
      adam.step();
    }
  }
  ad::zero_grads(params);
  lm.freeze();
}

void MicroLm::save(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["header"] = {{"dim", cfg_.dim},         {"heads", cfg_.heads},
                 {"layers", cfg_.layers},   {"ffn_hidden", cfg_.ffn_hidden},
                 {"max_len", cfg_.max_len}, {"vocab_hash", hash_hex(vocab_.hash())}};
  j["vocab"] = vocab_to_json(vocab_);
  j["params"] = params_to_json(const_cast<MicroLm*>(this)->parameters());
  save_checkpoint(path, "micro_lm", std::move(j));
}

MicroLm MicroLm::load(const std::filesystem::path& path) {
  nlohmann::json j = load_checkpoint(path, "micro_lm");
  const auto& h = j.at("header");
  MicroLmConfig cfg;
  cfg.dim = h.at("dim").get<std::size_t>();
  cfg.heads = h.at("heads").get<std::size_t>();
  cfg.layers = h.at("layers").get<std::size_t>();
  cfg.ffn_hidden = h.at("ffn_hidden").get<std::size_t>();
  cfg.max_len = h.at("max_len").get<std::size_t>();
  Vocab vocab = vocab_from_json(j.at("vocab"));
  if (h.at("vocab_hash").get<std::string>() != hash_hex(vocab.hash()))
    throw ValidationError(path.string() + ": vocabulary hash mismatch");
  Rng rng(0);
  MicroLm lm(cfg, std::move(vocab), rng);
  params_from_json(j.at("params"), lm.parameters());
  return lm;
}

}  // namespace synplug
