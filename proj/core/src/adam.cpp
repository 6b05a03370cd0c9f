#include "tumorseg/adam.hpp"

#include <cmath>

#include "tumorseg/errors.hpp"

namespace tumorseg {

AdamOptimizer::AdamOptimizer(double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (lr_ < 0.0) throw ConfigInvalidError("learning rate must be >= 0");
}

void AdamOptimizer::step(const std::vector<Tensor*>& params,
                         const std::vector<Tensor*>& grads) {
  if (params.size() != grads.size()) {
    throw ShapeMismatchError("optimizer parameter/gradient list mismatch");
  }
  if (m_.empty()) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const Tensor* p : params) {
      m_.emplace_back(p->shape());
      v_.emplace_back(p->shape());
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    if (!p.same_shape(g) || !p.same_shape(m)) {
      throw ShapeMismatchError("optimizer state shape mismatch");
    }
    for (std::int64_t j = 0; j < p.size(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

}  // namespace tumorseg
