#ifndef SURIMI_TESTUTIL_HPP
#define SURIMI_TESTUTIL_HPP

#include <cmath>
#include <string>
#include <vector>

#include "surimi/losses.hpp"
#include "surimi/network.hpp"
#include "surimi/rng.hpp"
#include "surimi/train.hpp"

namespace testutil {

using namespace surimi;
using namespace surimi::nn;

// relative error with a small absolute floor so near-zero gradients compare
// by absolute difference
inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

inline Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = scale * rng.normal();
    return t;
}

// random target matching the loss family
inline Tensor random_target(const Shape& shape, Loss loss, Rng& rng) {
    Tensor t(shape);
    switch (loss) {
        case Loss::mse:
            for (double& v : t.data) v = rng.normal();
            break;
        case Loss::categorical_ce: {
            const int rows = shape[0], cols = shape[1];
            for (int r = 0; r < rows; ++r)
                t(r, static_cast<int>(rng.uniform_index((std::uint64_t)cols))) = 1.0;
            break;
        }
        case Loss::binary_ce:
            for (double& v : t.data) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
            break;
    }
    return t;
}

struct GradCheck {
    double max_param_err = 0.0;
    double max_input_err = 0.0;
};

// Central finite differences (step h) of the scalar mean loss against the
// analytic backward pass, dropout off, 64-bit throughout.
inline GradCheck grad_check(const NetworkSpec& spec,
                            std::vector<Tensor> inputs, Loss loss,
                            std::uint64_t seed, bool check_inputs = false,
                            double h = 1e-5) {
    Network net = Network::build(spec, seed);
    Rng trng(derive_seed(seed, "targets"));
    std::vector<const Tensor*> in_ptrs;
    for (auto& t : inputs) in_ptrs.push_back(&t);

    const Tensor out0 = net.forward(in_ptrs, false, nullptr);
    const Tensor target = random_target(out0.shape, loss, trng);

    net.zero_grad();
    net.forward(in_ptrs, false, nullptr);
    const auto input_grads = net.backward(loss_grad(loss, out0, target));
    std::vector<double> analytic;
    for (Tensor* g : net.grads())
        analytic.insert(analytic.end(), g->data.begin(), g->data.end());

    auto loss_at = [&]() {
        return loss_value(loss, net.forward(in_ptrs, false, nullptr), target);
    };

    GradCheck res;
    std::vector<double> theta = net.flat_params();
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double keep = theta[i];
        theta[i] = keep + h;
        net.set_flat_params(theta);
        const double lp = loss_at();
        theta[i] = keep - h;
        net.set_flat_params(theta);
        const double lm = loss_at();
        theta[i] = keep;
        net.set_flat_params(theta);
        const double fd = (lp - lm) / (2.0 * h);
        res.max_param_err = std::max(res.max_param_err, rel_err(analytic[i], fd));
    }

    if (check_inputs) {
        for (std::size_t k = 0; k < inputs.size(); ++k) {
            for (std::size_t i = 0; i < inputs[k].size(); ++i) {
                const double keep = inputs[k].data[i];
                inputs[k].data[i] = keep + h;
                const double lp = loss_at();
                inputs[k].data[i] = keep - h;
                const double lm = loss_at();
                inputs[k].data[i] = keep;
                const double fd = (lp - lm) / (2.0 * h);
                res.max_input_err = std::max(
                    res.max_input_err, rel_err(input_grads[k].data[i], fd));
            }
        }
    }
    return res;
}

}  // namespace testutil

#endif
