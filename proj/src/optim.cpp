#include "hamprune/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace hamprune {

namespace {

void check_pairs(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads) {
    if (params.size() != grads.size())
        throw std::invalid_argument("optimizer: parameter/gradient count mismatch");
    for (size_t i = 0; i < params.size(); ++i) {
        if (!params[i]->same_shape(*grads[i]))
            throw std::invalid_argument("optimizer: shape mismatch at parameter " +
                                        std::to_string(i));
        if (!grads[i]->all_finite())
            throw std::runtime_error("optimizer: non-finite gradient at parameter " +
                                     std::to_string(i));
    }
}

}  // namespace

void Adam::step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads) {
    check_pairs(params, grads);
    if (m_.empty()) {
        for (Tensor* p : params) {
            m_.emplace_back(Tensor::zeros(p->shape));
            v_.emplace_back(Tensor::zeros(p->shape));
        }
    }
    if (m_.size() != params.size())
        throw std::invalid_argument("adam: parameter list changed between steps");
    ++t_;
    double c1 = 1.0 - std::pow(beta1_, double(t_));
    double c2 = 1.0 - std::pow(beta2_, double(t_));
    for (size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = *grads[i];
        Tensor& m = m_[i];
        Tensor& v = v_[i];
        for (size_t k = 0; k < p.numel(); ++k) {
            m.at(k) = beta1_ * m.at(k) + (1.0 - beta1_) * g.at(k);
            v.at(k) = beta2_ * v.at(k) + (1.0 - beta2_) * g.at(k) * g.at(k);
            double mhat = m.at(k) / c1;
            double vhat = v.at(k) / c2;
            p.at(k) -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

void Sgd::step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads) {
    check_pairs(params, grads);
    for (size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = *grads[i];
        for (size_t k = 0; k < p.numel(); ++k) p.at(k) -= lr_ * g.at(k);
    }
}

}  // namespace hamprune
