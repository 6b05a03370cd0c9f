#pragma once

#include <vector>

#include "tumorseg/tensor.hpp"

namespace tumorseg {

// Adam with bias correction. Moment buffers are allocated lazily to match the
// parameter list on the first step.
class AdamOptimizer {
 public:
  AdamOptimizer(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-7);

  // Applies one update; params[i] is adjusted using grads[i].
  void step(const std::vector<Tensor*>& params, const std::vector<Tensor*>& grads);

  long long updates() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long long t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace tumorseg
