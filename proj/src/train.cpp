#include "surimi/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "surimi/optimizer.hpp"

namespace surimi::nn {

// ---------------------------------------------------------------------------
// losses

const char* to_string(Loss l) {
    switch (l) {
        case Loss::mse: return "mse";
        case Loss::categorical_ce: return "categorical_ce";
        case Loss::binary_ce: return "binary_ce";
    }
    return "?";
}

Loss loss_from_string(const std::string& s) {
    if (s == "mse") return Loss::mse;
    if (s == "categorical_ce") return Loss::categorical_ce;
    if (s == "binary_ce") return Loss::binary_ce;
    throw SchemaError("unknown loss '" + s + "'");
}

namespace {
constexpr double kProbFloor = 1e-12;
}

double loss_value(Loss loss, const Tensor& pred, const Tensor& target) {
    if (!pred.same_shape(target))
        throw ShapeError("loss: prediction shape " + shape_str(pred.shape) +
                         " does not match target " + shape_str(target.shape));
    const std::size_t n = pred.size();
    if (n == 0) throw DomainError("loss on empty tensors");
    const int batch = pred.dim(0);
    double acc = 0.0;
    switch (loss) {
        case Loss::mse:
            for (std::size_t i = 0; i < n; ++i) {
                const double d = pred.data[i] - target.data[i];
                acc += d * d;
            }
            return acc / static_cast<double>(n);
        case Loss::categorical_ce:
            for (std::size_t i = 0; i < n; ++i)
                if (target.data[i] != 0.0)
                    acc -= target.data[i] *
                           std::log(std::max(pred.data[i], kProbFloor));
            return acc / static_cast<double>(batch);
        case Loss::binary_ce:
            for (std::size_t i = 0; i < n; ++i) {
                const double p =
                    std::clamp(pred.data[i], kProbFloor, 1.0 - kProbFloor);
                acc -= target.data[i] * std::log(p) +
                       (1.0 - target.data[i]) * std::log1p(-p);
            }
            return acc / static_cast<double>(n);
    }
    throw Error("unhandled loss");
}

Tensor loss_grad(Loss loss, const Tensor& pred, const Tensor& target) {
    if (!pred.same_shape(target))
        throw ShapeError("loss: prediction shape " + shape_str(pred.shape) +
                         " does not match target " + shape_str(target.shape));
    const std::size_t n = pred.size();
    const int batch = pred.dim(0);
    Tensor g(pred.shape);
    switch (loss) {
        case Loss::mse:
            for (std::size_t i = 0; i < n; ++i)
                g.data[i] =
                    2.0 * (pred.data[i] - target.data[i]) / static_cast<double>(n);
            return g;
        case Loss::categorical_ce:
            for (std::size_t i = 0; i < n; ++i)
                if (target.data[i] != 0.0)
                    g.data[i] = -target.data[i] /
                                std::max(pred.data[i], kProbFloor) /
                                static_cast<double>(batch);
            return g;
        case Loss::binary_ce:
            for (std::size_t i = 0; i < n; ++i) {
                const double p =
                    std::clamp(pred.data[i], kProbFloor, 1.0 - kProbFloor);
                g.data[i] = (p - target.data[i]) / (p * (1.0 - p)) /
                            static_cast<double>(n);
            }
            return g;
    }
    throw Error("unhandled loss");
}

// ---------------------------------------------------------------------------
// Adam

AdamState AdamState::for_params(const std::vector<Tensor*>& params) {
    AdamState st;
    for (const Tensor* p : params) {
        st.m.emplace_back(p->shape);
        st.v.emplace_back(p->shape);
    }
    return st;
}

void adam_step(const std::vector<Tensor*>& params,
               const std::vector<Tensor*>& grads, AdamState& state, double lr,
               double beta1, double beta2, double eps) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw ShapeError("adam_step: parameter/gradient/state count mismatch");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& p = *params[k];
        const Tensor& g = *grads[k];
        if (!p.same_shape(g))
            throw ShapeError("adam_step: gradient shape mismatch at tensor " +
                             std::to_string(k));
        Tensor& m = state.m[k];
        Tensor& v = state.v[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m.data[i] = beta1 * m.data[i] + (1.0 - beta1) * g.data[i];
            v.data[i] = beta2 * v.data[i] + (1.0 - beta2) * g.data[i] * g.data[i];
            const double mhat = m.data[i] / bc1;
            const double vhat = v.data[i] / bc2;
            p.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

// ---------------------------------------------------------------------------
// training loop

void TrainConfig::validate() const {
    if (epochs < 1) throw DomainError("epochs must be >= 1");
    if (batch_size < 1) throw DomainError("batch_size must be >= 1");
    if (early_stopping_patience && *early_stopping_patience < 1)
        throw DomainError("patience must be >= 1 when set");
    if (validation_fraction < 0.0 || validation_fraction >= 1.0)
        throw DomainError("validation_fraction must be in [0,1)");
    if (early_stopping_patience && validation_fraction == 0.0)
        throw DomainError("early stopping needs a validation split");
}

EarlyStopping::EarlyStopping(int patience)
    : patience_(patience), best_loss_(std::numeric_limits<double>::infinity()) {
    if (patience < 1) throw DomainError("patience must be >= 1");
}

bool EarlyStopping::observe(double val_loss) {
    ++epoch_;
    if (val_loss < best_loss_) {
        best_loss_ = val_loss;
        best_epoch_ = epoch_;
        bad_epochs_ = 0;
        return true;
    }
    ++bad_epochs_;
    return false;
}

Tensor gather_rows(const Tensor& t, const std::vector<std::size_t>& indices) {
    Shape s = t.shape;
    s[0] = static_cast<int>(indices.size());
    Tensor out(s);
    const std::size_t row = t.size() / static_cast<std::size_t>(t.dim(0));
    for (std::size_t r = 0; r < indices.size(); ++r)
        std::copy(t.data.begin() + static_cast<long>(indices[r] * row),
                  t.data.begin() + static_cast<long>((indices[r] + 1) * row),
                  out.data.begin() + static_cast<long>(r * row));
    return out;
}

TrainHistory train(Network& net, const Tensor& inputs, const Tensor& targets,
                   const TrainConfig& cfg) {
    cfg.validate();
    if (inputs.rank() < 1 || inputs.dim(0) == 0)
        throw DomainError("empty training set");
    if (targets.dim(0) != inputs.dim(0))
        throw ShapeError("inputs and targets are not row-aligned");

    const std::size_t m = static_cast<std::size_t>(inputs.dim(0));
    std::vector<std::size_t> train_idx, val_idx;
    if (cfg.early_stopping_patience) {
        Rng split_rng(derive_seed(cfg.seed, "split"));
        auto perm = split_rng.permutation(m);
        std::size_t n_val = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::floor(
                   cfg.validation_fraction * static_cast<double>(m))));
        if (n_val >= m) n_val = m - 1;
        if (m < 2)
            throw DomainError("early stopping needs at least two rows");
        train_idx.assign(perm.begin(), perm.end() - static_cast<long>(n_val));
        val_idx.assign(perm.end() - static_cast<long>(n_val), perm.end());
    } else {
        train_idx.resize(m);
        for (std::size_t i = 0; i < m; ++i) train_idx[i] = i;
    }

    const Tensor val_x =
        val_idx.empty() ? Tensor() : gather_rows(inputs, val_idx);
    const Tensor val_y =
        val_idx.empty() ? Tensor() : gather_rows(targets, val_idx);

    Rng epoch_rng(derive_seed(cfg.seed, "epochs"));
    Rng dropout_rng(derive_seed(cfg.seed, "dropout"));

    auto params = net.params();
    auto grads = net.grads();
    AdamState adam = AdamState::for_params(params);

    TrainHistory hist;
    std::optional<EarlyStopping> stopper;
    if (cfg.early_stopping_patience)
        stopper.emplace(*cfg.early_stopping_patience);
    std::vector<double> best_params;

    const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto order = epoch_rng.permutation(train_idx.size());
        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += bs) {
            const std::size_t end = std::min(order.size(), start + bs);
            std::vector<std::size_t> batch_rows;
            batch_rows.reserve(end - start);
            for (std::size_t i = start; i < end; ++i)
                batch_rows.push_back(train_idx[order[i]]);
            const Tensor bx = gather_rows(inputs, batch_rows);
            const Tensor by = gather_rows(targets, batch_rows);

            net.zero_grad();
            const Tensor pred = net.forward(bx, true, &dropout_rng);
            const double loss = loss_value(cfg.loss, pred, by);
            if (!std::isfinite(loss))
                throw NumericError("non-finite training loss at epoch " +
                                   std::to_string(epoch + 1));
            net.backward(loss_grad(cfg.loss, pred, by));
            adam_step(params, grads, adam, cfg.learning_rate);

            loss_sum += loss * static_cast<double>(end - start);
            seen += end - start;
        }
        hist.train_loss.push_back(loss_sum / static_cast<double>(seen));
        hist.epochs_run = epoch + 1;

        if (stopper) {
            const Tensor vpred = net.forward(val_x, false, nullptr);
            const double vloss = loss_value(cfg.loss, vpred, val_y);
            if (!std::isfinite(vloss))
                throw NumericError("non-finite validation loss at epoch " +
                                   std::to_string(epoch + 1));
            hist.val_loss.push_back(vloss);
            if (stopper->observe(vloss)) best_params = net.flat_params();
            if (stopper->should_stop()) {
                log_info("early stopping at epoch " + std::to_string(epoch + 1) +
                         " (best epoch " + std::to_string(stopper->best_epoch() + 1) +
                         ")");
                break;
            }
        }
    }

    if (stopper) {
        hist.best_epoch = stopper->best_epoch();
        net.set_flat_params(best_params);
    }
    return hist;
}

}  // namespace surimi::nn
