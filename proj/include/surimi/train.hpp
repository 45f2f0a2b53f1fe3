#ifndef SURIMI_TRAIN_HPP
#define SURIMI_TRAIN_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "surimi/losses.hpp"
#include "surimi/network.hpp"

namespace surimi::nn {

enum class Optimizer { adam };

struct TrainConfig {
    double learning_rate = 1e-3;
    int epochs = 1;
    int batch_size = 32;
    Optimizer optimizer = Optimizer::adam;
    Loss loss = Loss::mse;
    std::optional<int> early_stopping_patience;
    double validation_fraction = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TrainHistory {
    std::vector<double> train_loss;  // one entry per epoch run
    std::vector<double> val_loss;    // empty when no validation split
    int best_epoch = -1;             // 0-based; -1 when no early stopping
    int epochs_run = 0;
};

/// Tracks "no improvement for `patience` consecutive epochs". Observation
/// order is epoch order; the first observation always improves.
class EarlyStopping {
public:
    explicit EarlyStopping(int patience);
    /// Returns true when this epoch improved on the best validation loss.
    bool observe(double val_loss);
    bool should_stop() const { return bad_epochs_ >= patience_; }
    int best_epoch() const { return best_epoch_; }
    double best_loss() const { return best_loss_; }

private:
    int patience_;
    int bad_epochs_ = 0;
    int best_epoch_ = -1;
    int epoch_ = -1;
    double best_loss_;
};

/// Minibatch training with Adam. When a patience is configured, a validation
/// split is carved from the tail after a seeded shuffle and the parameters of
/// the best validation epoch are restored on return.
TrainHistory train(Network& net, const Tensor& inputs, const Tensor& targets,
                   const TrainConfig& cfg);

/// Rows `indices` of `t` along dim 0.
Tensor gather_rows(const Tensor& t, const std::vector<std::size_t>& indices);

}  // namespace surimi::nn

#endif
