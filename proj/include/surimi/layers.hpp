#ifndef SURIMI_LAYERS_HPP
#define SURIMI_LAYERS_HPP

#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

#include "surimi/tensor.hpp"

namespace surimi::nn {

enum class Activation { linear, relu, elu, leaky_relu, sigmoid, softmax };
enum class Padding { valid, same };
enum class LayerKind {
    conv1d,
    conv1d_transpose,
    max_pool1d,
    dropout,
    flatten,
    lstm,
    dense,
    embedding,
    concat,
    reshape,
    crop,
};

const char* to_string(Activation a);
const char* to_string(Padding p);
const char* to_string(LayerKind k);
Activation activation_from_string(const std::string& s);
Padding padding_from_string(const std::string& s);
LayerKind layer_kind_from_string(const std::string& s);

// Scalar activations (softmax excluded; it is row-wise).
inline double activate(Activation a, double x, double leaky_a = 5.0,
                       double elu_alpha = 1.0) {
    switch (a) {
        case Activation::linear: return x;
        case Activation::relu: return x > 0.0 ? x : 0.0;
        case Activation::elu: return x > 0.0 ? x : elu_alpha * std::expm1(x);
        case Activation::leaky_relu: return x >= 0.0 ? x : x / leaky_a;
        case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-x));
        case Activation::softmax: break;
    }
    throw DomainError("softmax is not a scalar activation");
}

inline double activate_grad(Activation a, double x, double leaky_a = 5.0,
                            double elu_alpha = 1.0) {
    switch (a) {
        case Activation::linear: return 1.0;
        case Activation::relu: return x > 0.0 ? 1.0 : 0.0;
        case Activation::elu: return x > 0.0 ? 1.0 : elu_alpha * std::exp(x);
        case Activation::leaky_relu: return x >= 0.0 ? 1.0 : 1.0 / leaky_a;
        case Activation::sigmoid: {
            const double s = 1.0 / (1.0 + std::exp(-x));
            return s * (1.0 - s);
        }
        case Activation::softmax: break;
    }
    throw DomainError("softmax is not a scalar activation");
}

/// Declarative description of one layer. Only the fields meaningful for
/// `kind` are read; validate() enforces their ranges.
struct LayerSpec {
    LayerKind kind = LayerKind::dense;
    int filters = 0;
    int kernel_size = 1;
    int stride = 1;
    Padding padding = Padding::valid;
    int pool_size = 1;
    double rate = 0.0;
    int units = 0;
    Activation activation = Activation::linear;
    double leaky_a = 5.0;
    double elu_alpha = 1.0;
    int classes = 0;    // embedding vocabulary
    int embed_dim = 0;  // embedding output width
    Shape target_shape; // reshape, per-sample
    int width = 0;      // crop

    void validate() const;

    static LayerSpec conv1d(int filters, int kernel_size, Activation act,
                            Padding padding = Padding::valid, int stride = 1);
    static LayerSpec conv1d_transpose(int filters, int kernel_size, Activation act,
                                      Padding padding = Padding::same,
                                      int stride = 2);
    static LayerSpec max_pool1d(int pool_size);
    static LayerSpec dropout(double rate);
    static LayerSpec flatten();
    static LayerSpec lstm(int units, Activation act);
    static LayerSpec dense(int units, Activation act);
    static LayerSpec embedding(int classes, int embed_dim);
    static LayerSpec concat();
    static LayerSpec reshape(Shape target);
    static LayerSpec crop(int width);

    nlohmann::json to_json() const;
    static LayerSpec from_json(const nlohmann::json& j);
};

}  // namespace surimi::nn

#endif
