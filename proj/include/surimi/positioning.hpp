#ifndef SURIMI_POSITIONING_HPP
#define SURIMI_POSITIONING_HPP

#include <optional>
#include <string>
#include <vector>

#include "surimi/network.hpp"
#include "surimi/radiomap.hpp"
#include "surimi/train.hpp"

namespace surimi {

struct PredictedLabels {
    double x = 0, y = 0, z = 0;  // meters
    int floor = 0;
    int building = 0;
    std::vector<double> floor_probs;
    std::vector<double> building_probs;
};

/// One network plus its training recipe.
struct ModelPlan {
    nn::NetworkSpec spec;
    nn::TrainConfig config;
};

struct Table1Models {
    ModelPlan position;
    ModelPlan floor;
    std::optional<ModelPlan> building;  // present iff CB > 1
};

/// Optional overrides for the fixed training parameters; unset fields keep
/// the defaults.
struct TrainOverrides {
    std::optional<int> epochs;
    std::optional<int> batch_size;
    std::optional<double> learning_rate;
    std::optional<int> patience;  // <= 0 disables early stopping
    std::optional<double> validation_fraction;

    void apply(nn::TrainConfig& cfg) const;
};

/// The three estimator plans: position regression, floor classification,
/// building classification.
Table1Models build_table1_models(int n, int cf, int cb);

/// Positioning estimator bundle: three nets plus the fitted label scaler and
/// enough provenance to reproduce and validate a run.
struct PositioningModel {
    nn::Network position_net;
    nn::Network floor_net;
    std::optional<nn::Network> building_net;
    LabelScaler scaler;
    int cf = 1;
    int cb = 1;
    std::vector<long long> floor_values;
    std::vector<long long> building_values;
    std::uint64_t train_fingerprint = 0;
    std::uint64_t seed = 0;
    nn::TrainHistory position_history, floor_history, building_history;

    int input_width() const;
};

PositioningModel train_positioning(const RadioMap& rm_train, std::uint64_t seed,
                                   const TrainOverrides& overrides = {});

/// Predicts labels for powed fingerprints (row-major rows x n).
std::vector<PredictedLabels> predict(PositioningModel& model,
                                     const std::vector<double>& fingerprints,
                                     std::size_t rows);

std::vector<PredictedLabels> predict(PositioningModel& model,
                                     const RadioMap& rm);

/// Model bundle directory: parameter archives, scaler, provenance manifest.
void save_bundle(const PositioningModel& model, const std::string& dir);
PositioningModel load_bundle(const std::string& dir);

}  // namespace surimi

#endif
