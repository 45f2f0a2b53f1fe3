#include "surimi/network.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "surimi/csv.hpp"

namespace surimi::nn {

using json = nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "parameter blobs are little-endian");

// ---------------------------------------------------------------------------
// enum names

const char* to_string(Activation a) {
    switch (a) {
        case Activation::linear: return "linear";
        case Activation::relu: return "relu";
        case Activation::elu: return "elu";
        case Activation::leaky_relu: return "leaky_relu";
        case Activation::sigmoid: return "sigmoid";
        case Activation::softmax: return "softmax";
    }
    return "?";
}

const char* to_string(Padding p) {
    return p == Padding::valid ? "valid" : "same";
}

const char* to_string(LayerKind k) {
    switch (k) {
        case LayerKind::conv1d: return "conv1d";
        case LayerKind::conv1d_transpose: return "conv1d_transpose";
        case LayerKind::max_pool1d: return "max_pool1d";
        case LayerKind::dropout: return "dropout";
        case LayerKind::flatten: return "flatten";
        case LayerKind::lstm: return "lstm";
        case LayerKind::dense: return "dense";
        case LayerKind::embedding: return "embedding";
        case LayerKind::concat: return "concat";
        case LayerKind::reshape: return "reshape";
        case LayerKind::crop: return "crop";
    }
    return "?";
}

template <typename E>
static E enum_from_string_impl(const std::string& s, std::initializer_list<E> all,
                               const char* what) {
    for (E e : all)
        if (s == to_string(e)) return e;
    throw SchemaError(std::string("unknown ") + what + " '" + s + "'");
}

Activation activation_from_string(const std::string& s) {
    return enum_from_string_impl<Activation>(
        s,
        {Activation::linear, Activation::relu, Activation::elu,
         Activation::leaky_relu, Activation::sigmoid, Activation::softmax},
        "activation");
}

Padding padding_from_string(const std::string& s) {
    return enum_from_string_impl<Padding>(s, {Padding::valid, Padding::same},
                                          "padding");
}

LayerKind layer_kind_from_string(const std::string& s) {
    return enum_from_string_impl<LayerKind>(
        s,
        {LayerKind::conv1d, LayerKind::conv1d_transpose, LayerKind::max_pool1d,
         LayerKind::dropout, LayerKind::flatten, LayerKind::lstm, LayerKind::dense,
         LayerKind::embedding, LayerKind::concat, LayerKind::reshape,
         LayerKind::crop},
        "layer kind");
}

// ---------------------------------------------------------------------------
// LayerSpec

void LayerSpec::validate() const {
    switch (kind) {
        case LayerKind::conv1d:
        case LayerKind::conv1d_transpose:
            if (filters < 1) throw DomainError("conv: filters must be >= 1");
            if (kernel_size < 1) throw DomainError("conv: kernel_size must be >= 1");
            if (stride < 1) throw DomainError("conv: stride must be >= 1");
            break;
        case LayerKind::max_pool1d:
            if (pool_size < 1) throw DomainError("pool_size must be >= 1");
            break;
        case LayerKind::dropout:
            if (rate < 0.0 || rate >= 1.0)
                throw DomainError("dropout rate must be in [0,1)");
            break;
        case LayerKind::lstm:
        case LayerKind::dense:
            if (units < 1) throw DomainError("units must be >= 1");
            break;
        case LayerKind::embedding:
            if (classes < 1 || embed_dim < 1)
                throw DomainError("embedding: classes and embed_dim must be >= 1");
            break;
        case LayerKind::reshape:
            if (target_shape.empty())
                throw DomainError("reshape: empty target shape");
            for (int d : target_shape)
                if (d < 1) throw DomainError("reshape: non-positive dimension");
            break;
        case LayerKind::crop:
            if (width < 1) throw DomainError("crop: width must be >= 1");
            break;
        case LayerKind::flatten:
        case LayerKind::concat:
            break;
    }
    if (leaky_a < 1.0)
        throw DomainError("leaky_relu parameter must be >= 1");
}

LayerSpec LayerSpec::conv1d(int filters, int kernel_size, Activation act,
                            Padding padding, int stride) {
    LayerSpec s;
    s.kind = LayerKind::conv1d;
    s.filters = filters;
    s.kernel_size = kernel_size;
    s.activation = act;
    s.padding = padding;
    s.stride = stride;
    return s;
}

LayerSpec LayerSpec::conv1d_transpose(int filters, int kernel_size, Activation act,
                                      Padding padding, int stride) {
    LayerSpec s;
    s.kind = LayerKind::conv1d_transpose;
    s.filters = filters;
    s.kernel_size = kernel_size;
    s.activation = act;
    s.padding = padding;
    s.stride = stride;
    return s;
}

LayerSpec LayerSpec::max_pool1d(int pool_size) {
    LayerSpec s;
    s.kind = LayerKind::max_pool1d;
    s.pool_size = pool_size;
    return s;
}

LayerSpec LayerSpec::dropout(double rate) {
    LayerSpec s;
    s.kind = LayerKind::dropout;
    s.rate = rate;
    return s;
}

LayerSpec LayerSpec::flatten() {
    LayerSpec s;
    s.kind = LayerKind::flatten;
    return s;
}

LayerSpec LayerSpec::lstm(int units, Activation act) {
    LayerSpec s;
    s.kind = LayerKind::lstm;
    s.units = units;
    s.activation = act;
    return s;
}

LayerSpec LayerSpec::dense(int units, Activation act) {
    LayerSpec s;
    s.kind = LayerKind::dense;
    s.units = units;
    s.activation = act;
    return s;
}

LayerSpec LayerSpec::embedding(int classes, int embed_dim) {
    LayerSpec s;
    s.kind = LayerKind::embedding;
    s.classes = classes;
    s.embed_dim = embed_dim;
    return s;
}

LayerSpec LayerSpec::concat() {
    LayerSpec s;
    s.kind = LayerKind::concat;
    return s;
}

LayerSpec LayerSpec::reshape(Shape target) {
    LayerSpec s;
    s.kind = LayerKind::reshape;
    s.target_shape = std::move(target);
    return s;
}

LayerSpec LayerSpec::crop(int width) {
    LayerSpec s;
    s.kind = LayerKind::crop;
    s.width = width;
    return s;
}

json LayerSpec::to_json() const {
    json j;
    j["kind"] = to_string(kind);
    switch (kind) {
        case LayerKind::conv1d:
        case LayerKind::conv1d_transpose:
            j["filters"] = filters;
            j["kernel_size"] = kernel_size;
            j["stride"] = stride;
            j["padding"] = to_string(padding);
            j["activation"] = to_string(activation);
            break;
        case LayerKind::max_pool1d:
            j["pool_size"] = pool_size;
            break;
        case LayerKind::dropout:
            j["rate"] = rate;
            break;
        case LayerKind::lstm:
        case LayerKind::dense:
            j["units"] = units;
            j["activation"] = to_string(activation);
            break;
        case LayerKind::embedding:
            j["classes"] = classes;
            j["embed_dim"] = embed_dim;
            break;
        case LayerKind::reshape:
            j["target_shape"] = target_shape;
            break;
        case LayerKind::crop:
            j["width"] = width;
            break;
        case LayerKind::flatten:
        case LayerKind::concat:
            break;
    }
    if (activation == Activation::leaky_relu) j["leaky_a"] = leaky_a;
    if (activation == Activation::elu) j["elu_alpha"] = elu_alpha;
    return j;
}

LayerSpec LayerSpec::from_json(const json& j) {
    LayerSpec s;
    s.kind = layer_kind_from_string(j.at("kind"));
    s.filters = j.value("filters", 0);
    s.kernel_size = j.value("kernel_size", 1);
    s.stride = j.value("stride", 1);
    if (j.contains("padding")) s.padding = padding_from_string(j["padding"]);
    s.pool_size = j.value("pool_size", 1);
    s.rate = j.value("rate", 0.0);
    s.units = j.value("units", 0);
    if (j.contains("activation"))
        s.activation = activation_from_string(j["activation"]);
    s.leaky_a = j.value("leaky_a", 5.0);
    s.elu_alpha = j.value("elu_alpha", 1.0);
    s.classes = j.value("classes", 0);
    s.embed_dim = j.value("embed_dim", 0);
    if (j.contains("target_shape"))
        s.target_shape = j["target_shape"].get<Shape>();
    s.width = j.value("width", 0);
    s.validate();
    return s;
}

// ---------------------------------------------------------------------------
// layers

namespace detail {

Shape with_batch(const Shape& per_sample, int batch) {
    Shape s;
    s.reserve(per_sample.size() + 1);
    s.push_back(batch);
    s.insert(s.end(), per_sample.begin(), per_sample.end());
    return s;
}

namespace {

// Row-wise softmax over the last dimension of a rank-2 tensor.
void softmax_rows(Tensor& t) {
    const int rows = t.dim(0), cols = t.dim(1);
    for (int r = 0; r < rows; ++r) {
        double mx = t(r, 0);
        for (int c = 1; c < cols; ++c) mx = std::max(mx, t(r, c));
        double sum = 0.0;
        for (int c = 0; c < cols; ++c) {
            const double e = std::exp(t(r, c) - mx);
            t(r, c) = e;
            sum += e;
        }
        for (int c = 0; c < cols; ++c) t(r, c) /= sum;
    }
}

struct ConvGeom {
    int in_len = 0, out_len = 0, pad_left = 0;
};

// Geometry of a forward conv mapping length L to out_len.
ConvGeom conv_geometry(int L, int k, int s, Padding p, int layer_index) {
    ConvGeom g;
    g.in_len = L;
    if (p == Padding::valid) {
        if (L < k)
            throw ShapeError("layer " + std::to_string(layer_index) +
                             ": input length " + std::to_string(L) +
                             " shorter than kernel " + std::to_string(k));
        g.out_len = (L - k) / s + 1;
        g.pad_left = 0;
    } else {
        g.out_len = (L + s - 1) / s;
        const int pad_total = std::max((g.out_len - 1) * s + k - L, 0);
        g.pad_left = pad_total / 2;
    }
    return g;
}

}  // namespace

class Layer {
public:
    explicit Layer(LayerSpec spec, int index) : spec_(std::move(spec)), index_(index) {
        spec_.validate();
    }
    virtual ~Layer() = default;

    // Shape setup with per-sample input shapes; allocates parameters.
    virtual void configure(const std::vector<Shape>& in_shapes) = 0;
    virtual void init_params(Rng&) {}

    virtual Tensor forward(const std::vector<const Tensor*>& ins, bool training,
                           Rng* rng) = 0;
    virtual std::vector<Tensor> backward(const Tensor& grad_out) = 0;

    virtual std::vector<Tensor*> params() { return {}; }
    virtual std::vector<Tensor*> grads() { return {}; }

    void zero_grad() {
        for (Tensor* g : grads()) g->fill(0.0);
    }

    const LayerSpec& spec() const { return spec_; }
    const Shape& out_shape() const { return out_shape_; }  // per-sample
    int index() const { return index_; }

protected:
    [[noreturn]] void shape_fail(const std::string& what) const {
        throw ShapeError("layer " + std::to_string(index_) + " (" +
                         to_string(spec_.kind) + "): " + what);
    }

    void expect_inputs(const std::vector<Shape>& in, std::size_t n) const {
        if (in.size() != n)
            throw ShapeError("layer " + std::to_string(index_) + " (" +
                             to_string(spec_.kind) + "): expected " +
                             std::to_string(n) + " inputs, got " +
                             std::to_string(in.size()));
    }

    LayerSpec spec_;
    int index_;
    Shape out_shape_;
};

namespace {

// Activation with pre-activation caching. apply() mutates in place.
struct ActCache {
    Activation act;
    double leaky_a, elu_alpha;
    Tensor pre;  // cached pre-activation
    Tensor out;  // cached output (softmax only)

    void apply(Tensor& t, bool keep_cache) {
        if (act == Activation::softmax) {
            if (t.rank() != 2)
                throw ShapeError("softmax requires a rank-2 activation");
            if (keep_cache) pre = t;
            softmax_rows(t);
            if (keep_cache) out = t;
            return;
        }
        if (keep_cache) pre = t;
        if (act == Activation::linear) return;
        for (double& v : t.data) v = activate(act, v, leaky_a, elu_alpha);
    }

    // d loss/d pre from d loss/d out
    Tensor backward(const Tensor& grad_out) const {
        Tensor g = grad_out;
        if (act == Activation::linear) return g;
        if (act == Activation::softmax) {
            const int rows = out.dim(0), cols = out.dim(1);
            for (int r = 0; r < rows; ++r) {
                double dot = 0.0;
                for (int c = 0; c < cols; ++c) dot += grad_out(r, c) * out(r, c);
                for (int c = 0; c < cols; ++c)
                    g(r, c) = out(r, c) * (grad_out(r, c) - dot);
            }
            return g;
        }
        for (std::size_t i = 0; i < g.data.size(); ++i)
            g.data[i] *= activate_grad(act, pre.data[i], leaky_a, elu_alpha);
        return g;
    }
};

// Shared correlation kernels for conv1d and its transpose.
//
//   corr_forward:  y[b,m,co] = sum_{kk,ci} x[b, m*s+kk-pad, ci] * W[kk,ci,co]
//   corr_input_grad / corr_weight_grad are its exact adjoints.
void corr_forward(const Tensor& x, const Tensor& W, int stride, int pad,
                  Tensor& y) {
    const int B = x.dim(0), L = x.dim(1), Cin = x.dim(2);
    const int M = y.dim(1), Cout = y.dim(2);
    const int k = W.dim(0);
    for (int b = 0; b < B; ++b)
        for (int m = 0; m < M; ++m)
            for (int kk = 0; kk < k; ++kk) {
                const int i = m * stride + kk - pad;
                if (i < 0 || i >= L) continue;
                for (int ci = 0; ci < Cin; ++ci) {
                    const double xv = x(b, i, ci);
                    if (xv == 0.0) continue;
                    for (int co = 0; co < Cout; ++co)
                        y(b, m, co) += xv * W(kk, ci, co);
                }
            }
}

void corr_input_grad(const Tensor& gy, const Tensor& W, int stride, int pad,
                     Tensor& gx) {
    const int B = gy.dim(0), M = gy.dim(1), Cout = gy.dim(2);
    const int L = gx.dim(1), Cin = gx.dim(2);
    const int k = W.dim(0);
    for (int b = 0; b < B; ++b)
        for (int m = 0; m < M; ++m)
            for (int kk = 0; kk < k; ++kk) {
                const int i = m * stride + kk - pad;
                if (i < 0 || i >= L) continue;
                for (int ci = 0; ci < Cin; ++ci) {
                    double acc = 0.0;
                    for (int co = 0; co < Cout; ++co)
                        acc += gy(b, m, co) * W(kk, ci, co);
                    gx(b, i, ci) += acc;
                }
            }
}

void corr_weight_grad(const Tensor& x, const Tensor& gy, int stride, int pad,
                      Tensor& gW) {
    const int B = x.dim(0), L = x.dim(1), Cin = x.dim(2);
    const int M = gy.dim(1), Cout = gy.dim(2);
    const int k = gW.dim(0);
    for (int b = 0; b < B; ++b)
        for (int m = 0; m < M; ++m)
            for (int kk = 0; kk < k; ++kk) {
                const int i = m * stride + kk - pad;
                if (i < 0 || i >= L) continue;
                for (int ci = 0; ci < Cin; ++ci) {
                    const double xv = x(b, i, ci);
                    if (xv == 0.0) continue;
                    for (int co = 0; co < Cout; ++co)
                        gW(kk, ci, co) += xv * gy(b, m, co);
                }
            }
}

class DenseLayer : public Layer {
public:
    using Layer::Layer;

    void configure(const std::vector<Shape>& in) override {
        expect_inputs(in, 1);
        if (in[0].size() != 1) shape_fail("expects a flat (features) input");
        in_features_ = in[0][0];
        out_shape_ = {spec_.units};
        W_ = Tensor({in_features_, spec_.units});
        b_ = Tensor({spec_.units});
        gW_ = Tensor(W_.shape);
        gb_ = Tensor(b_.shape);
    }

    void init_params(Rng& rng) override {
        const double limit = std::sqrt(6.0 / (in_features_ + spec_.units));
        for (double& v : W_.data) v = rng.uniform(-limit, limit);
    }

    Tensor forward(const std::vector<const Tensor*>& ins, bool training,
                   Rng*) override {
        const Tensor& x = *ins[0];
        const int B = x.dim(0), F = in_features_, U = spec_.units;
        Tensor y({B, U});
        for (int b = 0; b < B; ++b) {
            for (int u = 0; u < U; ++u) y(b, u) = b_(u);
            for (int f = 0; f < F; ++f) {
                const double xv = x(b, f);
                if (xv == 0.0) continue;
                for (int u = 0; u < U; ++u) y(b, u) += xv * W_(f, u);
            }
        }
        x_ = x;
        act_ = {spec_.activation, spec_.leaky_a, spec_.elu_alpha, {}, {}};
        act_.apply(y, true);
        (void)training;
        return y;
    }

    std::vector<Tensor> backward(const Tensor& grad_out) override {
        const Tensor gpre = act_.backward(grad_out);
        const int B = x_.dim(0), F = in_features_, U = spec_.units;
        Tensor gx({B, F});
        for (int b = 0; b < B; ++b) {
            for (int u = 0; u < U; ++u) gb_(u) += gpre(b, u);
            for (int f = 0; f < F; ++f) {
                const double xv = x_(b, f);
                double acc = 0.0;
                for (int u = 0; u < U; ++u) {
                    const double g = gpre(b, u);
                    gW_(f, u) += xv * g;
                    acc += g * W_(f, u);
                }
                gx(b, f) = acc;
            }
        }
        return {std::move(gx)};
    }

    std::vector<Tensor*> params() override { return {&W_, &b_}; }
    std::vector<Tensor*> grads() override { return {&gW_, &gb_}; }

private:
    int in_features_ = 0;
    Tensor W_, b_, gW_, gb_;
    Tensor x_;
    ActCache act_;
};

class Conv1DLayer : public Layer {
public:
    using Layer::Layer;

    void configure(const std::vector<Shape>& in) override {
        expect_inputs(in, 1);
        if (in[0].size() != 2) shape_fail("expects (length, channels) input");
        L_ = in[0][0];
        Cin_ = in[0][1];
        geom_ = conv_geometry(L_, spec_.kernel_size, spec_.stride, spec_.padding,
                              index_);
        out_shape_ = {geom_.out_len, spec_.filters};
        W_ = Tensor({spec_.kernel_size, Cin_, spec_.filters});
        b_ = Tensor({spec_.filters});
        gW_ = Tensor(W_.shape);
        gb_ = Tensor(b_.shape);
    }

    void init_params(Rng& rng) override {
        const double fan_in = spec_.kernel_size * Cin_;
        const double fan_out = spec_.kernel_size * spec_.filters;
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        for (double& v : W_.data) v = rng.uniform(-limit, limit);
    }

    Tensor forward(const std::vector<const Tensor*>& ins, bool, Rng*) override {
        const Tensor& x = *ins[0];
        const int B = x.dim(0);
        Tensor y({B, geom_.out_len, spec_.filters});
        for (int b = 0; b < B; ++b)
            for (int m = 0; m < geom_.out_len; ++m)
                for (int co = 0; co < spec_.filters; ++co) y(b, m, co) = b_(co);
        corr_forward(x, W_, spec_.stride, geom_.pad_left, y);
        x_ = x;
        act_ = {spec_.activation, spec_.leaky_a, spec_.elu_alpha, {}, {}};
        if (spec_.activation == Activation::softmax)
            shape_fail("softmax is not supported on conv outputs");
        act_.apply(y, true);
        return y;
    }

    std::vector<Tensor> backward(const Tensor& grad_out) override {
        const Tensor gpre = act_.backward(grad_out);
        const int B = gpre.dim(0);
        for (int b = 0; b < B; ++b)
            for (int m = 0; m < geom_.out_len; ++m)
                for (int co = 0; co < spec_.filters; ++co)
                    gb_(co) += gpre(b, m, co);
        corr_weight_grad(x_, gpre, spec_.stride, geom_.pad_left, gW_);
        Tensor gx({B, L_, Cin_});
        corr_input_grad(gpre, W_, spec_.stride, geom_.pad_left, gx);
        return {std::move(gx)};
    }

    std::vector<Tensor*> params() override { return {&W_, &b_}; }
    std::vector<Tensor*> grads() override { return {&gW_, &gb_}; }

private:
    int L_ = 0, Cin_ = 0;
    ConvGeom geom_;
    Tensor W_, b_, gW_, gb_;
    Tensor x_;
    ActCache act_;
};

// Transposed convolution, defined as the exact adjoint of a strided conv:
// for padding 'same' the output length is L*stride, for 'valid' it is
// (L-1)*stride + kernel. Weight layout is (k, out_channels, in_channels).
class Conv1DTransposeLayer : public Layer {
public:
    using Layer::Layer;

    void configure(const std::vector<Shape>& in) override {
        expect_inputs(in, 1);
        if (in[0].size() != 2) shape_fail("expects (length, channels) input");
        L_ = in[0][0];
        Cin_ = in[0][1];
        const int k = spec_.kernel_size, s = spec_.stride;
        out_len_ = spec_.padding == Padding::same ? L_ * s : (L_ - 1) * s + k;
        geom_ = conv_geometry(out_len_, k, s, spec_.padding, index_);
        if (geom_.out_len != L_)
            shape_fail("inconsistent transpose geometry");
        out_shape_ = {out_len_, spec_.filters};
        W_ = Tensor({k, spec_.filters, Cin_});
        b_ = Tensor({spec_.filters});
        gW_ = Tensor(W_.shape);
        gb_ = Tensor(b_.shape);
    }

    void init_params(Rng& rng) override {
        const double fan_in = spec_.kernel_size * Cin_;
        const double fan_out = spec_.kernel_size * spec_.filters;
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        for (double& v : W_.data) v = rng.uniform(-limit, limit);
    }

    Tensor forward(const std::vector<const Tensor*>& ins, bool, Rng*) override {
        const Tensor& x = *ins[0];
        const int B = x.dim(0);
        Tensor y({B, out_len_, spec_.filters});
        // scatter: y[b, m*s+kk-pad, co] += x[b,m,ci] * W[kk,co,ci]
        const int k = spec_.kernel_size;
        for (int b = 0; b < B; ++b)
            for (int m = 0; m < L_; ++m)
                for (int kk = 0; kk < k; ++kk) {
                    const int o = m * spec_.stride + kk - geom_.pad_left;
                    if (o < 0 || o >= out_len_) continue;
                    for (int ci = 0; ci < Cin_; ++ci) {
                        const double xv = x(b, m, ci);
                        if (xv == 0.0) continue;
                        for (int co = 0; co < spec_.filters; ++co)
                            y(b, o, co) += xv * W_(kk, co, ci);
                    }
                }
        for (int b = 0; b < B; ++b)
            for (int o = 0; o < out_len_; ++o)
                for (int co = 0; co < spec_.filters; ++co) y(b, o, co) += b_(co);
        x_ = x;
        act_ = {spec_.activation, spec_.leaky_a, spec_.elu_alpha, {}, {}};
        if (spec_.activation == Activation::softmax)
            shape_fail("softmax is not supported on conv outputs");
        act_.apply(y, true);
        return y;
    }

    std::vector<Tensor> backward(const Tensor& grad_out) override {
        const Tensor gpre = act_.backward(grad_out);
        const int B = gpre.dim(0), k = spec_.kernel_size;
        for (int b = 0; b < B; ++b)
            for (int o = 0; o < out_len_; ++o)
                for (int co = 0; co < spec_.filters; ++co)
                    gb_(co) += gpre(b, o, co);
        Tensor gx({B, L_, Cin_});
        for (int b = 0; b < B; ++b)
            for (int m = 0; m < L_; ++m)
                for (int kk = 0; kk < k; ++kk) {
                    const int o = m * spec_.stride + kk - geom_.pad_left;
                    if (o < 0 || o >= out_len_) continue;
                    for (int ci = 0; ci < Cin_; ++ci) {
                        double acc = 0.0;
                        for (int co = 0; co < spec_.filters; ++co) {
                            acc += gpre(b, o, co) * W_(kk, co, ci);
                            gW_(kk, co, ci) += gpre(b, o, co) * x_(b, m, ci);
                        }
                        gx(b, m, ci) += acc;
                    }
                }
        return {std::move(gx)};
    }

    std::vector<Tensor*> params() override { return {&W_, &b_}; }
    std::vector<Tensor*> grads() override { return {&gW_, &gb_}; }

private:
    int L_ = 0, Cin_ = 0, out_len_ = 0;
    ConvGeom geom_;
    Tensor W_, b_, gW_, gb_;
    Tensor x_;
    ActCache act_;
};

class MaxPool1DLayer : public Layer {
public:
    using Layer::Layer;

    void configure(const std::vector<Shape>& in) override {
        expect_inputs(in, 1);
        if (in[0].size() != 2) shape_fail("expects (length, channels) input");
        L_ = in[0][0];
        C_ = in[0][1];
        if (L_ < spec_.pool_size)
            shape_fail("input length " + std::to_string(L_) +
                       " shorter than pool size " + std::to_string(spec_.pool_size));
        out_len_ = L_ / spec_.pool_size;
        out_shape_ = {out_len_, C_};
    }

    Tensor forward(const std::vector<const Tensor*>& ins, bool, Rng*) override {
        const Tensor& x = *ins[0];
        const int B = x.dim(0), p = spec_.pool_size;
        Tensor y({B, out_len_, C_});
        argmax_.assign(static_cast<std::size_t>(B) * out_len_ * C_, 0);
        for (int b = 0; b < B; ++b)
            for (int m = 0; m < out_len_; ++m)
                for (int c = 0; c < C_; ++c) {
                    int best = m * p;
                    double bv = x(b, best, c);
                    for (int i = m * p + 1; i < (m + 1) * p; ++i)
                        if (x(b, i, c) > bv) {  // ties keep the lowest index
                            bv = x(b, i, c);
                            best = i;
                        }
                    y(b, m, c) = bv;
                    argmax_[(static_cast<std::size_t>(b) * out_len_ + m) * C_ + c] =
                        best;
                }
        B_ = B;
        return y;
    }

    std::vector<Tensor> backward(const Tensor& grad_out) override {
        Tensor gx({B_, L_, C_});
        for (int b = 0; b < B_; ++b)
            for (int m = 0; m < out_len_; ++m)
                for (int c = 0; c < C_; ++c)
                    gx(b,
                       argmax_[(static_cast<std::size_t>(b) * out_len_ + m) * C_ + c],
                       c) += grad_out(b, m, c);
        return {std::move(gx)};
    }

private:
    int L_ = 0, C_ = 0, out_len_ = 0, B_ = 0;
    std::vector<int> argmax_;
};

class DropoutLayer : public Layer {
public:
    using Layer::Layer;

    void configure(const std::vector<Shape>& in) override {
        expect_inputs(in, 1);
        out_shape_ = in[0];
    }

    Tensor forward(const std::vector<const Tensor*>& ins, bool training,
                   Rng* rng) override {
        const Tensor& x = *ins[0];
        if (!training || spec_.rate == 0.0) {
            active_ = false;
            return x;
        }
        if (rng == nullptr)
            throw Error("dropout in training mode needs an RNG stream");
        active_ = true;
        const double keep = 1.0 - spec_.rate;
        mask_.assign(x.size(), 0.0);
        Tensor y(x.shape);
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (rng->uniform() >= spec_.rate) {
                mask_[i] = 1.0 / keep;  // inverted scaling
                y.data[i] = x.data[i] * mask_[i];
            }
        }
        return y;
    }

    std::vector<Tensor> backward(const Tensor& grad_out) override {
        Tensor gx = grad_out;
        if (active_)
            for (std::size_t i = 0; i < gx.size(); ++i) gx.data[i] *= mask_[i];
        return {std::move(gx)};
    }

private:
    bool active_ = false;
    std::vector<double> mask_;
};

class FlattenLayer : public Layer {
public:
    using Layer::Layer;

    void configure(const std::vector<Shape>& in) override {
        expect_inputs(in, 1);
        in_shape_ = in[0];
        out_shape_ = {static_cast<int>(shape_size(in[0]))};
    }

    Tensor forward(const std::vector<const Tensor*>& ins, bool, Rng*) override {
        const Tensor& x = *ins[0];
        B_ = x.dim(0);
        Tensor y({B_, out_shape_[0]});
        y.data = x.data;
        return y;
    }

    std::vector<Tensor> backward(const Tensor& grad_out) override {
        Tensor gx(with_batch(in_shape_, B_));
        gx.data = grad_out.data;
        return {std::move(gx)};
    }

private:
    Shape in_shape_;
    int B_ = 0;
};

class ReshapeLayer : public Layer {
public:
    using Layer::Layer;

    void configure(const std::vector<Shape>& in) override {
        expect_inputs(in, 1);
        if (shape_size(in[0]) != shape_size(spec_.target_shape))
            shape_fail("cannot reshape " + shape_str(in[0]) + " to " +
                       shape_str(spec_.target_shape));
        in_shape_ = in[0];
        out_shape_ = spec_.target_shape;
    }

    Tensor forward(const std::vector<const Tensor*>& ins, bool, Rng*) override {
        const Tensor& x = *ins[0];
        B_ = x.dim(0);
        Tensor y(with_batch(out_shape_, B_));
        y.data = x.data;
        return y;
    }

    std::vector<Tensor> backward(const Tensor& grad_out) override {
        Tensor gx(with_batch(in_shape_, B_));
        gx.data = grad_out.data;
        return {std::move(gx)};
    }

private:
    Shape in_shape_;
    int B_ = 0;
};

class CropLayer : public Layer {
public:
    using Layer::Layer;

    void configure(const std::vector<Shape>& in) override {
        expect_inputs(in, 1);
        if (in[0].size() != 1) shape_fail("expects a flat (features) input");
        in_width_ = in[0][0];
        if (spec_.width > in_width_)
            shape_fail("crop width exceeds input width");
        out_shape_ = {spec_.width};
    }

    Tensor forward(const std::vector<const Tensor*>& ins, bool, Rng*) override {
        const Tensor& x = *ins[0];
        B_ = x.dim(0);
        Tensor y({B_, spec_.width});
        for (int b = 0; b < B_; ++b)
            for (int f = 0; f < spec_.width; ++f) y(b, f) = x(b, f);
        return y;
    }

    std::vector<Tensor> backward(const Tensor& grad_out) override {
        Tensor gx({B_, in_width_});
        for (int b = 0; b < B_; ++b)
            for (int f = 0; f < spec_.width; ++f) gx(b, f) = grad_out(b, f);
        return {std::move(gx)};
    }

private:
    int in_width_ = 0, B_ = 0;
};

class ConcatLayer : public Layer {
public:
    using Layer::Layer;

    void configure(const std::vector<Shape>& in) override {
        if (in.size() < 2) shape_fail("needs at least two inputs");
        lead_ = in[0];
        lead_.pop_back();
        widths_.clear();
        int total = 0;
        for (const Shape& s : in) {
            if (s.empty()) shape_fail("scalar inputs cannot be concatenated");
            Shape head = s;
            const int w = head.back();
            head.pop_back();
            if (head != lead_)
                shape_fail("inputs disagree on leading dimensions");
            widths_.push_back(w);
            total += w;
        }
        out_shape_ = lead_;
        out_shape_.push_back(total);
    }

    Tensor forward(const std::vector<const Tensor*>& ins, bool, Rng*) override {
        B_ = ins[0]->dim(0);
        const std::size_t rows = static_cast<std::size_t>(B_) * shape_size(lead_);
        Tensor y(with_batch(out_shape_, B_));
        const int total = out_shape_.back();
        int off = 0;
        for (std::size_t k = 0; k < ins.size(); ++k) {
            const int w = widths_[k];
            const auto& src = ins[k]->data;
            for (std::size_t r = 0; r < rows; ++r)
                for (int c = 0; c < w; ++c)
                    y.data[r * total + off + c] = src[r * w + c];
            off += w;
        }
        return y;
    }

    std::vector<Tensor> backward(const Tensor& grad_out) override {
        const std::size_t rows = static_cast<std::size_t>(B_) * shape_size(lead_);
        const int total = out_shape_.back();
        std::vector<Tensor> gs;
        int off = 0;
        for (int w : widths_) {
            Shape s = lead_;
            s.push_back(w);
            Tensor g(with_batch(s, B_));
            for (std::size_t r = 0; r < rows; ++r)
                for (int c = 0; c < w; ++c)
                    g.data[r * w + c] = grad_out.data[r * total + off + c];
            off += w;
            gs.push_back(std::move(g));
        }
        return gs;
    }

private:
    Shape lead_;  // shared per-sample dims, channel axis excluded
    std::vector<int> widths_;
    int B_ = 0;
};

class EmbeddingLayer : public Layer {
public:
    using Layer::Layer;

    void configure(const std::vector<Shape>& in) override {
        expect_inputs(in, 1);
        if (!in[0].empty()) shape_fail("expects a (batch,) index input");
        out_shape_ = {spec_.embed_dim};
        table_ = Tensor({spec_.classes, spec_.embed_dim});
        gtable_ = Tensor(table_.shape);
    }

    void init_params(Rng& rng) override {
        for (double& v : table_.data) v = rng.uniform(-0.05, 0.05);
    }

    Tensor forward(const std::vector<const Tensor*>& ins, bool, Rng*) override {
        const Tensor& x = *ins[0];
        const int B = x.dim(0);
        idx_.resize(static_cast<std::size_t>(B));
        Tensor y({B, spec_.embed_dim});
        for (int b = 0; b < B; ++b) {
            const double v = x(b);
            const int c = static_cast<int>(std::llround(v));
            if (std::abs(v - c) > 1e-9 || c < 0 || c >= spec_.classes)
                throw DomainError("embedding index " + std::to_string(v) +
                                  " out of range [0," +
                                  std::to_string(spec_.classes) + ")");
            idx_[static_cast<std::size_t>(b)] = c;
            for (int d = 0; d < spec_.embed_dim; ++d) y(b, d) = table_(c, d);
        }
        B_ = B;
        return y;
    }

    std::vector<Tensor> backward(const Tensor& grad_out) override {
        for (int b = 0; b < B_; ++b) {
            const int c = idx_[static_cast<std::size_t>(b)];
            for (int d = 0; d < spec_.embed_dim; ++d)
                gtable_(c, d) += grad_out(b, d);
        }
        // indices are not differentiable
        return {Tensor({B_})};
    }

    std::vector<Tensor*> params() override { return {&table_}; }
    std::vector<Tensor*> grads() override { return {&gtable_}; }

private:
    Tensor table_, gtable_;
    std::vector<int> idx_;
    int B_ = 0;
};

// LSTM over (batch, time, features); a flat (batch, features) input is a
// single time step. Gate blocks are ordered [i f g o]; the configured
// activation plays the role of tanh for the candidate and the cell output.
class LstmLayer : public Layer {
public:
    using Layer::Layer;

    void configure(const std::vector<Shape>& in) override {
        expect_inputs(in, 1);
        if (in[0].size() == 1) {
            T_ = 1;
            F_ = in[0][0];
        } else if (in[0].size() == 2) {
            T_ = in[0][0];
            F_ = in[0][1];
        } else {
            shape_fail("expects (features) or (time, features) input");
        }
        const int U = spec_.units;
        out_shape_ = {U};
        Wx_ = Tensor({F_, 4 * U});
        Wh_ = Tensor({U, 4 * U});
        b_ = Tensor({4 * U});
        gWx_ = Tensor(Wx_.shape);
        gWh_ = Tensor(Wh_.shape);
        gb_ = Tensor(b_.shape);
    }

    void init_params(Rng& rng) override {
        const int U = spec_.units;
        const double lx = std::sqrt(6.0 / (F_ + 4 * U));
        for (double& v : Wx_.data) v = rng.uniform(-lx, lx);
        const double lh = std::sqrt(6.0 / (U + 4 * U));
        for (double& v : Wh_.data) v = rng.uniform(-lh, lh);
    }

    Tensor forward(const std::vector<const Tensor*>& ins, bool, Rng*) override {
        const Tensor& xin = *ins[0];
        B_ = xin.dim(0);
        x_ = xin;
        rank2_input_ = xin.rank() == 2;
        if (rank2_input_) x_.shape = {B_, 1, F_};

        const int U = spec_.units;
        auto zt = [&](std::vector<Tensor>& v) {
            v.assign(static_cast<std::size_t>(T_), Tensor({B_, U}));
        };
        zt(i_);
        zt(f_);
        zt(g_);
        zt(o_);
        zt(c_);
        zt(hc_);
        zt(h_);
        zg_.assign(static_cast<std::size_t>(T_), Tensor({B_, U}));

        Tensor h_prev({B_, U}), c_prev({B_, U});
        for (int t = 0; t < T_; ++t) {
            Tensor z({B_, 4 * U});
            for (int b = 0; b < B_; ++b) {
                for (int u = 0; u < 4 * U; ++u) z(b, u) = b_(u);
                for (int f = 0; f < F_; ++f) {
                    const double xv = x_(b, t, f);
                    if (xv == 0.0) continue;
                    for (int u = 0; u < 4 * U; ++u) z(b, u) += xv * Wx_(f, u);
                }
                for (int k = 0; k < U; ++k) {
                    const double hv = h_prev(b, k);
                    if (hv == 0.0) continue;
                    for (int u = 0; u < 4 * U; ++u) z(b, u) += hv * Wh_(k, u);
                }
            }
            for (int b = 0; b < B_; ++b)
                for (int u = 0; u < U; ++u) {
                    const double zi = z(b, u);
                    const double zf = z(b, U + u);
                    const double zg = z(b, 2 * U + u);
                    const double zo = z(b, 3 * U + u);
                    const double iv = 1.0 / (1.0 + std::exp(-zi));
                    const double fv = 1.0 / (1.0 + std::exp(-zf));
                    const double gv =
                        activate(spec_.activation, zg, spec_.leaky_a, spec_.elu_alpha);
                    const double ov = 1.0 / (1.0 + std::exp(-zo));
                    const double cv = fv * c_prev(b, u) + iv * gv;
                    const double hcv =
                        activate(spec_.activation, cv, spec_.leaky_a, spec_.elu_alpha);
                    i_[t](b, u) = iv;
                    f_[t](b, u) = fv;
                    g_[t](b, u) = gv;
                    o_[t](b, u) = ov;
                    zg_[t](b, u) = zg;
                    c_[t](b, u) = cv;
                    hc_[t](b, u) = hcv;
                    h_[t](b, u) = ov * hcv;
                }
            h_prev = h_[t];
            c_prev = c_[t];
        }
        return h_[static_cast<std::size_t>(T_ - 1)];
    }

    std::vector<Tensor> backward(const Tensor& grad_out) override {
        const int U = spec_.units;
        Tensor dh = grad_out;
        Tensor dc({B_, U});
        Tensor gx(x_.shape);
        for (int t = T_ - 1; t >= 0; --t) {
            Tensor dz({B_, 4 * U});
            for (int b = 0; b < B_; ++b)
                for (int u = 0; u < U; ++u) {
                    const double iv = i_[t](b, u), fv = f_[t](b, u),
                                 gv = g_[t](b, u), ov = o_[t](b, u);
                    const double dho = dh(b, u);
                    const double dov = dho * hc_[t](b, u);
                    double dcv = dc(b, u) +
                                 dho * ov *
                                     activate_grad(spec_.activation, c_[t](b, u),
                                                   spec_.leaky_a, spec_.elu_alpha);
                    const double c_prev =
                        t > 0 ? c_[t - 1](b, u) : 0.0;
                    const double div = dcv * gv;
                    const double dgv = dcv * iv;
                    const double dfv = dcv * c_prev;
                    dc(b, u) = dcv * fv;
                    dz(b, u) = div * iv * (1.0 - iv);
                    dz(b, U + u) = dfv * fv * (1.0 - fv);
                    dz(b, 2 * U + u) =
                        dgv * activate_grad(spec_.activation, zg_[t](b, u),
                                            spec_.leaky_a, spec_.elu_alpha);
                    dz(b, 3 * U + u) = dov * ov * (1.0 - ov);
                }
            // parameter and input gradients
            Tensor dh_prev({B_, U});
            for (int b = 0; b < B_; ++b) {
                for (int u = 0; u < 4 * U; ++u) gb_(u) += dz(b, u);
                for (int f = 0; f < F_; ++f) {
                    const double xv = x_(b, t, f);
                    double acc = 0.0;
                    for (int u = 0; u < 4 * U; ++u) {
                        gWx_(f, u) += xv * dz(b, u);
                        acc += dz(b, u) * Wx_(f, u);
                    }
                    gx(b, t, f) = acc;
                }
                if (t > 0) {
                    for (int k = 0; k < U; ++k) {
                        const double hv = h_[t - 1](b, k);
                        double acc = 0.0;
                        for (int u = 0; u < 4 * U; ++u) {
                            gWh_(k, u) += hv * dz(b, u);
                            acc += dz(b, u) * Wh_(k, u);
                        }
                        dh_prev(b, k) = acc;
                    }
                }
            }
            dh = std::move(dh_prev);
        }
        if (rank2_input_) gx.shape = {B_, F_};
        return {std::move(gx)};
    }

    std::vector<Tensor*> params() override { return {&Wx_, &Wh_, &b_}; }
    std::vector<Tensor*> grads() override { return {&gWx_, &gWh_, &gb_}; }

private:
    int T_ = 1, F_ = 0, B_ = 0;
    bool rank2_input_ = false;
    Tensor Wx_, Wh_, b_, gWx_, gWh_, gb_;
    Tensor x_;
    std::vector<Tensor> i_, f_, g_, o_, c_, hc_, h_, zg_;
};

std::unique_ptr<Layer> make_layer(const LayerSpec& spec, int index) {
    switch (spec.kind) {
        case LayerKind::dense: return std::make_unique<DenseLayer>(spec, index);
        case LayerKind::conv1d: return std::make_unique<Conv1DLayer>(spec, index);
        case LayerKind::conv1d_transpose:
            return std::make_unique<Conv1DTransposeLayer>(spec, index);
        case LayerKind::max_pool1d:
            return std::make_unique<MaxPool1DLayer>(spec, index);
        case LayerKind::dropout: return std::make_unique<DropoutLayer>(spec, index);
        case LayerKind::flatten: return std::make_unique<FlattenLayer>(spec, index);
        case LayerKind::lstm: return std::make_unique<LstmLayer>(spec, index);
        case LayerKind::embedding:
            return std::make_unique<EmbeddingLayer>(spec, index);
        case LayerKind::concat: return std::make_unique<ConcatLayer>(spec, index);
        case LayerKind::reshape: return std::make_unique<ReshapeLayer>(spec, index);
        case LayerKind::crop: return std::make_unique<CropLayer>(spec, index);
    }
    throw Error("unhandled layer kind");
}

}  // namespace

}  // namespace detail

// ---------------------------------------------------------------------------
// NetworkSpec

NetworkSpec NetworkSpec::sequential(Shape input_shape,
                                    std::vector<LayerSpec> layers) {
    NetworkSpec spec;
    spec.input_shapes = {std::move(input_shape)};
    int prev = input_ref(0);
    for (auto& l : layers) {
        spec.nodes.push_back({std::move(l), {prev}});
        prev = static_cast<int>(spec.nodes.size()) - 1;
    }
    return spec;
}

json NetworkSpec::to_json() const {
    json j;
    j["input_shapes"] = input_shapes;
    json jnodes = json::array();
    for (const auto& n : nodes) {
        json jn = n.spec.to_json();
        jn["inputs"] = n.inputs;
        jnodes.push_back(std::move(jn));
    }
    j["nodes"] = jnodes;
    return j;
}

NetworkSpec NetworkSpec::from_json(const json& j) {
    NetworkSpec spec;
    spec.input_shapes = j.at("input_shapes").get<std::vector<Shape>>();
    for (const auto& jn : j.at("nodes")) {
        NodeDef n;
        n.spec = LayerSpec::from_json(jn);
        n.inputs = jn.at("inputs").get<std::vector<int>>();
        spec.nodes.push_back(std::move(n));
    }
    return spec;
}

// ---------------------------------------------------------------------------
// Network

Network::Network() = default;
Network::~Network() = default;
Network::Network(Network&&) noexcept = default;
Network& Network::operator=(Network&&) noexcept = default;

Network Network::build(const NetworkSpec& spec, std::uint64_t init_seed) {
    if (spec.nodes.empty()) throw DomainError("network has no layers");
    Network net;
    net.spec_ = spec;
    net.init_seed_ = init_seed;

    std::vector<Shape> node_shapes;  // per-sample
    for (std::size_t ni = 0; ni < spec.nodes.size(); ++ni) {
        const NodeDef& node = spec.nodes[ni];
        std::vector<Shape> in_shapes;
        for (int ref : node.inputs) {
            if (ref < 0) {
                const std::size_t k = static_cast<std::size_t>(-ref - 1);
                if (k >= spec.input_shapes.size())
                    throw ShapeError("node " + std::to_string(ni) +
                                     " references missing network input");
                in_shapes.push_back(spec.input_shapes[k]);
            } else {
                if (static_cast<std::size_t>(ref) >= ni)
                    throw ShapeError("node " + std::to_string(ni) +
                                     " references a later node");
                in_shapes.push_back(node_shapes[static_cast<std::size_t>(ref)]);
            }
        }
        auto layer = detail::make_layer(node.spec, static_cast<int>(ni));
        layer->configure(in_shapes);
        Rng rng(derive_seed(init_seed, "layer-init", ni));
        layer->init_params(rng);
        node_shapes.push_back(layer->out_shape());
        net.layers_.push_back(std::move(layer));
    }
    net.output_shape_ = node_shapes.back();
    return net;
}

Tensor Network::forward(const std::vector<const Tensor*>& inputs, bool training,
                        Rng* rng) {
    if (inputs.size() != spec_.input_shapes.size())
        throw ShapeError("network expects " +
                         std::to_string(spec_.input_shapes.size()) +
                         " inputs, got " + std::to_string(inputs.size()));
    const int B = inputs.empty() ? 0 : inputs[0]->dim(0);
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const Tensor& t = *inputs[k];
        if (t.rank() < 1 || t.dim(0) != B)
            throw ShapeError("network inputs disagree on batch size");
        Shape per(t.shape.begin() + 1, t.shape.end());
        if (per != spec_.input_shapes[k])
            throw ShapeError("network input " + std::to_string(k) + " has shape " +
                             shape_str(per) + ", expected " +
                             shape_str(spec_.input_shapes[k]));
    }

    node_outputs_.clear();
    node_outputs_.reserve(layers_.size());
    last_batch_ = B;
    for (std::size_t ni = 0; ni < layers_.size(); ++ni) {
        std::vector<const Tensor*> ins;
        for (int ref : spec_.nodes[ni].inputs)
            ins.push_back(ref < 0 ? inputs[static_cast<std::size_t>(-ref - 1)]
                                  : &node_outputs_[static_cast<std::size_t>(ref)]);
        Tensor out = layers_[ni]->forward(ins, training, rng);
#ifndef NDEBUG
        if (!all_finite(out))
            throw NumericError("non-finite activation after layer " +
                               std::to_string(ni));
#endif
        node_outputs_.push_back(std::move(out));
    }
    return node_outputs_.back();
}

Tensor Network::forward(const Tensor& input, bool training, Rng* rng) {
    return forward(std::vector<const Tensor*>{&input}, training, rng);
}

std::vector<Tensor> Network::backward(const Tensor& grad_output) {
    if (node_outputs_.size() != layers_.size())
        throw Error("backward called without a preceding forward pass");
    std::vector<Tensor> node_grads(layers_.size());
    std::vector<Tensor> input_grads(spec_.input_shapes.size());
    for (std::size_t k = 0; k < input_grads.size(); ++k)
        input_grads[k] =
            Tensor(detail::with_batch(spec_.input_shapes[k], last_batch_));

    node_grads.back() = grad_output;
    for (std::size_t ni = layers_.size(); ni-- > 0;) {
        if (node_grads[ni].size() == 0) continue;  // unused branch
        std::vector<Tensor> gins = layers_[ni]->backward(node_grads[ni]);
#ifndef NDEBUG
        for (const Tensor& g : gins)
            if (!all_finite(g))
                throw NumericError("non-finite gradient below layer " +
                                   std::to_string(ni));
#endif
        const auto& refs = spec_.nodes[ni].inputs;
        for (std::size_t k = 0; k < refs.size(); ++k) {
            const int ref = refs[k];
            Tensor& g = gins[k];
            if (ref < 0) {
                Tensor& acc = input_grads[static_cast<std::size_t>(-ref - 1)];
                for (std::size_t i = 0; i < acc.size(); ++i)
                    acc.data[i] += g.data[i];
            } else {
                Tensor& acc = node_grads[static_cast<std::size_t>(ref)];
                if (acc.size() == 0)
                    acc = std::move(g);
                else
                    for (std::size_t i = 0; i < acc.size(); ++i)
                        acc.data[i] += g.data[i];
            }
        }
    }
    return input_grads;
}

void Network::zero_grad() {
    for (auto& l : layers_) l->zero_grad();
}

std::vector<Tensor*> Network::params() {
    std::vector<Tensor*> out;
    for (auto& l : layers_)
        for (Tensor* p : l->params()) out.push_back(p);
    return out;
}

std::vector<Tensor*> Network::grads() {
    std::vector<Tensor*> out;
    for (auto& l : layers_)
        for (Tensor* g : l->grads()) out.push_back(g);
    return out;
}

std::size_t Network::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_)
        for (Tensor* p : const_cast<detail::Layer&>(*l).params()) n += p->size();
    return n;
}

std::vector<double> Network::flat_params() const {
    std::vector<double> out;
    for (const auto& l : layers_)
        for (Tensor* p : const_cast<detail::Layer&>(*l).params())
            out.insert(out.end(), p->data.begin(), p->data.end());
    return out;
}

void Network::set_flat_params(std::span<const double> values) {
    std::size_t off = 0;
    for (auto& l : layers_)
        for (Tensor* p : l->params()) {
            if (off + p->size() > values.size())
                throw ShapeError("flat parameter vector too short");
            std::copy(values.begin() + static_cast<long>(off),
                      values.begin() + static_cast<long>(off + p->size()),
                      p->data.begin());
            off += p->size();
        }
    if (off != values.size())
        throw ShapeError("flat parameter vector length mismatch");
}

Network Network::clone() const {
    Network copy = Network::build(spec_, init_seed_);
    copy.set_flat_params(flat_params());
    return copy;
}

std::uint64_t Network::params_checksum() const {
    const auto flat = flat_params();
    return fnv1a64(flat.data(), flat.size() * sizeof(double));
}

void Network::save(const std::string& base_path, const json& metadata) const {
    json manifest;
    manifest["schema_version"] = 1;
    manifest["format"] = "surimi-network";
    manifest["init_seed"] = init_seed_;
    manifest["spec"] = spec_.to_json();
    json shapes = json::array();
    for (const auto& l : layers_)
        for (Tensor* p : const_cast<detail::Layer&>(*l).params())
            shapes.push_back(p->shape);
    manifest["param_shapes"] = shapes;
    const auto flat = flat_params();
    manifest["param_count"] = flat.size();
    manifest["blob_fnv1a64"] =
        hex64(fnv1a64(flat.data(), flat.size() * sizeof(double)));
    manifest["metadata"] = metadata;
    csv::write_file(base_path + ".json", manifest.dump(2) + "\n");

    std::ofstream bin(base_path + ".bin", std::ios::binary);
    if (!bin) throw Error("cannot write " + base_path + ".bin");
    bin.write(reinterpret_cast<const char*>(flat.data()),
              static_cast<std::streamsize>(flat.size() * sizeof(double)));
}

Network Network::load(const std::string& base_path, json* metadata_out) {
    json manifest = json::parse(csv::read_file(base_path + ".json"));
    if (manifest.value("format", "") != "surimi-network")
        throw SchemaError(base_path + ".json is not a network manifest");
    Network net = Network::build(NetworkSpec::from_json(manifest.at("spec")),
                                 manifest.value("init_seed", 0ull));

    const std::string blob = csv::read_file(base_path + ".bin");
    const std::size_t count = manifest.at("param_count").get<std::size_t>();
    if (blob.size() != count * sizeof(double))
        throw SchemaError("parameter blob size mismatch for " + base_path);
    std::vector<double> flat(count);
    std::memcpy(flat.data(), blob.data(), blob.size());
    const std::string want = manifest.at("blob_fnv1a64").get<std::string>();
    if (hex64(fnv1a64(flat.data(), flat.size() * sizeof(double))) != want)
        throw SchemaError("parameter blob checksum mismatch for " + base_path);

    // shape validation against the manifest
    auto shapes = manifest.at("param_shapes").get<std::vector<Shape>>();
    std::size_t si = 0;
    for (Tensor* p : net.params()) {
        if (si >= shapes.size() || p->shape != shapes[si])
            throw SchemaError("parameter shape mismatch for " + base_path);
        ++si;
    }
    if (si != shapes.size())
        throw SchemaError("parameter shape mismatch for " + base_path);

    net.set_flat_params(flat);
    if (metadata_out) *metadata_out = manifest.value("metadata", json::object());
    return net;
}

}  // namespace surimi::nn
