#pragma once

#include <vector>

#include "hamprune/tensor.hpp"

namespace hamprune {

/// Adam with bias correction. State buffers are allocated on the first step
/// and keyed by parameter order, which must stay fixed across steps.
class Adam {
  public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads);

    long steps_taken() const { return t_; }
    double lr() const { return lr_; }

  private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<Tensor> m_, v_;
};

/// Plain gradient descent.
class Sgd {
  public:
    explicit Sgd(double lr) : lr_(lr) {}

    void step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads);

    double lr() const { return lr_; }

  private:
    double lr_;
};

}  // namespace hamprune
