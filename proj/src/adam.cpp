#include "macc/adam.hpp"

#include <cmath>

#include "macc/error.hpp"

namespace macc {

Adam::Adam(std::vector<Tensor> params, AdamConfig config) : config_(config), params_(std::move(params)) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
        m_.emplace_back(p.numel(), 0.0);
        v_.emplace_back(p.numel(), 0.0);
    }
}

void Adam::step() {
    for (const auto& p : params_) {
        if (!p.has_grad()) {
            throw Error("adam: parameter '" + (p.name().empty() ? std::string("<unnamed>") : p.name()) +
                        "' has no gradient");
        }
    }
    ++t_;
    const auto t = static_cast<double>(t_);
    const double c1 = 1.0 - std::pow(config_.beta1, t);
    const double c2 = 1.0 - std::pow(config_.beta2, t);
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto w = params_[k].data();
        auto g = params_[k].mutable_grad();
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
            v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
            w[i] -= config_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.epsilon);
            g[i] = 0.0;
        }
    }
}

void Adam::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

}  // namespace macc
