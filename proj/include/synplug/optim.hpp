#pragma once

#include <cstddef>
#include <vector>

#include "synplug/tape.hpp"

namespace synplug::ad {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Moment buffers are kept per parameter, in the
// order given at construction; frozen parameters are skipped entirely so
// their values stay bitwise stable.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig cfg = {});

  // Applies one update from the current Parameter::grad buffers.
  void step();

  const std::vector<Parameter*>& params() const { return params_; }
  std::size_t steps_taken() const { return t_; }

 private:
  std::vector<Parameter*> params_;
  AdamConfig cfg_;
  std::vector<Tensor> m_, v_;
  std::size_t t_ = 0;
};

// One-shot functional form.
void adam_step(const std::vector<Parameter*>& params, Adam& state);

}  // namespace synplug::ad
