#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "synplug/tensor.hpp"

namespace synplug::ad {

// A named tensor with its gradient buffer. Frozen parameters (trainable ==
// false) never receive gradient and are never touched by the optimizer.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Tensor v, bool train = true)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()), trainable(train) {}

  void zero_grad() { grad.fill(0.0); }
};

void zero_grads(const std::vector<Parameter*>& params);
double grad_norm(const std::vector<Parameter*>& params);
// FNV-1a over the raw value bytes, in parameter order.
std::uint64_t params_hash(const std::vector<Parameter*>& params);

// Reverse-mode tape. Ops record the forward value and a backward closure;
// node creation order is already topological, so backward() replays the
// closures in reverse and accumulates into bound Parameter::grad buffers
// (trainable parameters only).
//
// A tape is single-threaded and single-shot: build a forward graph, call
// backward() at most once, then discard.
class Tape {
 public:
  using Id = std::uint32_t;

  Id param(Parameter& p);      // leaf bound to a parameter
  Id input(Tensor v);          // constant leaf

  // --- arithmetic ---
  Id matmul(Id a, Id b);       // [m,k]x[k,n] -> [m,n];  [m,k]x[k] -> [m]
  Id add(Id a, Id b);          // same shape
  Id add_n(const std::vector<Id>& xs);
  Id add_rowvec(Id m, Id v);   // [r,c] + [c], broadcast over rows
  Id scale(Id a, double c);
  Id dot(Id a, Id b);          // rank-1 . rank-1 -> scalar
  Id mean_rows(Id m);          // [r,c] -> [c]

  // --- structure ---
  Id concat(const std::vector<Id>& parts);       // rank-1 concat
  Id concat_cols(const std::vector<Id>& parts);  // [r,c_i] -> [r, sum c_i]
  Id slice_cols(Id m, std::size_t lo, std::size_t hi);
  Id append_row(Id m, Id v);   // [r,c] + [c] -> [r+1,c]
  Id row(Id m, std::size_t i);
  Id transpose(Id m);
  Id embedding(Id table, std::vector<int> ids);  // [V,d] + n ids -> [n,d]

  // --- nonlinearities ---
  Id relu(Id x);
  Id softmax(Id v);                 // rank-1, max-subtracted
  Id softmax_rows_causal(Id s);     // [T,T]; row i normalized over j <= i
  Id layernorm(Id x, Id gain, Id bias, double eps = 1e-5);  // rows of x
  Id cross_entropy(Id logits, int gold);                    // rank-1 -> scalar

  const Tensor& value(Id id) const { return nodes_[id].val; }
  const Tensor& grad(Id id) const;  // valid after backward()

  // Seeds d(loss)/d(loss) = 1 and propagates. Throws ValidationError if the
  // loss is not scalar or backward already ran.
  void backward(Id loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor val;
    Tensor grad;
    std::function<void(Tape&, Id)> back;  // empty for leaves
    Parameter* bound = nullptr;
  };

  Id push(Tensor val, std::function<void(Tape&, Id)> back = {});
  Tensor& grad_mut(Id id) { return nodes_[id].grad; }
  const Tensor& val_of(Id id) const { return nodes_[id].val; }
  void check(Id id, const char* op) const;

  // deque keeps value/grad references stable while new nodes are recorded
  std::deque<Node> nodes_;
  bool ran_backward_ = false;
};

}  // namespace synplug::ad
