#ifndef SURIMI_OPTIMIZER_HPP
#define SURIMI_OPTIMIZER_HPP

#include <cstdint>
#include <vector>

#include "surimi/tensor.hpp"

namespace surimi::nn {

/// Adam with the reference constants: beta1 = 0.9, beta2 = 0.999, eps = 1e-8,
/// bias-corrected first and second moments.
struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::int64_t step = 0;

    static AdamState for_params(const std::vector<Tensor*>& params);
};

void adam_step(const std::vector<Tensor*>& params,
               const std::vector<Tensor*>& grads, AdamState& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

}  // namespace surimi::nn

#endif
