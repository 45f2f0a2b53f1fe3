#ifndef SURIMI_NETWORK_HPP
#define SURIMI_NETWORK_HPP

#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "surimi/layers.hpp"
#include "surimi/rng.hpp"
#include "surimi/tensor.hpp"

namespace surimi::nn {

namespace detail {
class Layer;
}

/// One node of the computation graph. `inputs` refer to earlier nodes by
/// index; network input k is encoded as -(k+1).
struct NodeDef {
    LayerSpec spec;
    std::vector<int> inputs;
};

inline int input_ref(int k) { return -(k + 1); }

struct NetworkSpec {
    std::vector<Shape> input_shapes;  // per-sample shapes, batch excluded
    std::vector<NodeDef> nodes;

    /// Chain of layers over a single input.
    static NetworkSpec sequential(Shape input_shape, std::vector<LayerSpec> layers);

    nlohmann::json to_json() const;
    static NetworkSpec from_json(const nlohmann::json& j);
};

/// A feed-forward computation graph with parameters and exact analytic
/// gradients. Inference (`training = false`) is pure and reentrant; a
/// forward pass in training mode caches activations for one backward pass.
class Network {
public:
    Network();
    ~Network();
    Network(Network&&) noexcept;
    Network& operator=(Network&&) noexcept;

    static Network build(const NetworkSpec& spec, std::uint64_t init_seed);

    Tensor forward(const std::vector<const Tensor*>& inputs, bool training = false,
                   Rng* rng = nullptr);
    Tensor forward(const Tensor& input, bool training = false, Rng* rng = nullptr);

    /// Gradients of a scalar loss with respect to every parameter (accumulated
    /// into grads()) and every network input (returned), given d loss / d output.
    /// Must follow a forward pass.
    std::vector<Tensor> backward(const Tensor& grad_output);

    void zero_grad();
    std::vector<Tensor*> params();
    std::vector<Tensor*> grads();
    std::size_t param_count() const;

    std::vector<double> flat_params() const;
    void set_flat_params(std::span<const double> values);

    const NetworkSpec& spec() const { return spec_; }
    const Shape& output_shape() const { return output_shape_; }  // per-sample
    std::uint64_t init_seed() const { return init_seed_; }

    Network clone() const;

    /// Writes `<base>.json` (manifest) and `<base>.bin` (little-endian
    /// parameter blob). The manifest embeds caller metadata and a checksum.
    void save(const std::string& base_path, const nlohmann::json& metadata) const;
    static Network load(const std::string& base_path,
                        nlohmann::json* metadata_out = nullptr);

    std::uint64_t params_checksum() const;

private:
    NetworkSpec spec_;
    std::vector<std::unique_ptr<detail::Layer>> layers_;
    Shape output_shape_;
    std::uint64_t init_seed_ = 0;
    // per-node cached outputs of the last forward pass
    std::vector<Tensor> node_outputs_;
    std::vector<Shape> node_input_batch_shapes_;
    int last_batch_ = -1;
};

}  // namespace surimi::nn

#endif
