#ifndef SURIMI_LOSSES_HPP
#define SURIMI_LOSSES_HPP

#include <string>

#include "surimi/tensor.hpp"

namespace surimi::nn {

enum class Loss { mse, categorical_ce, binary_ce };

const char* to_string(Loss l);
Loss loss_from_string(const std::string& s);

/// Scalar mean loss. mse and binary_ce average over every element,
/// categorical_ce over the batch rows.
double loss_value(Loss loss, const Tensor& pred, const Tensor& target);

/// d(mean loss) / d pred.
Tensor loss_grad(Loss loss, const Tensor& pred, const Tensor& target);

}  // namespace surimi::nn

#endif
