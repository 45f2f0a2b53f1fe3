#ifndef SURIMI_TENSOR_HPP
#define SURIMI_TENSOR_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "surimi/common.hpp"

namespace surimi::nn {

using Shape = std::vector<int>;

inline std::size_t shape_size(const Shape& s) {
    std::size_t n = 1;
    for (int d : s) n *= static_cast<std::size_t>(d);
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + ")";
}

// Dense row-major tensor of doubles. Rank 1..3 is what the engine uses:
// (batch), (batch, features), (batch, length, channels).
struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(Shape s) : shape(std::move(s)), data(shape_size(shape), 0.0) {}
    Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != shape_size(shape))
            throw ShapeError("tensor data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
    }

    static Tensor zeros(Shape s) { return Tensor(std::move(s)); }

    std::size_t size() const { return data.size(); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    double& operator()(int i) { return data[static_cast<std::size_t>(i)]; }
    double operator()(int i) const { return data[static_cast<std::size_t>(i)]; }
    double& operator()(int i, int j) {
        return data[static_cast<std::size_t>(i) * shape[1] + j];
    }
    double operator()(int i, int j) const {
        return data[static_cast<std::size_t>(i) * shape[1] + j];
    }
    double& operator()(int i, int j, int k) {
        return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
    }
    double operator()(int i, int j, int k) const {
        return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
    }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

inline bool all_finite(const Tensor& t) {
    for (double v : t.data)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace surimi::nn

#endif
