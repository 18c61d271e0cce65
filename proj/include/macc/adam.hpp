#pragma once

#include <cstdint>
#include <vector>

#include "macc/tensor.hpp"

namespace macc {

struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adam with bias correction over a fixed parameter list.
class Adam {
public:
    Adam(std::vector<Tensor> params, AdamConfig config = {});

    /// Applies one update from the current grads and zeroes them. Throws if
    /// any parameter has no gradient buffer; nothing is modified in that case.
    void step();
    void zero_grad();

    std::uint64_t steps() const { return t_; }
    const AdamConfig& config() const { return config_; }
    const std::vector<std::vector<double>>& first_moments() const { return m_; }
    const std::vector<std::vector<double>>& second_moments() const { return v_; }

private:
    AdamConfig config_;
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_, v_;
    std::uint64_t t_ = 0;
};

}  // namespace macc
