#ifndef SURIMI_EVALUATION_HPP
#define SURIMI_EVALUATION_HPP

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "surimi/positioning.hpp"
#include "surimi/radiomap.hpp"

namespace surimi {

/// k-nearest-neighbour baseline in fingerprint feature space. Position is
/// the centroid of the k neighbours; floor/building by majority vote (ties
/// take the nearest neighbour's class). Distance ties take the lowest
/// training row index.
std::vector<PredictedLabels> knn_predict(const RadioMap& rm_train,
                                         const RadioMap& rm_test, int k = 1);

struct PositioningErrors {
    double e2d = 0;           // meters
    double e3d = 0;           // meters
    double floor_hit = 0;     // percent
    double building_hit = 0;  // percent
};

PositioningErrors positioning_errors(const std::vector<PredictedLabels>& pred,
                                     const LabelSet& truth);

/// One evaluated system within a report.
struct SystemResult {
    std::string name;
    double e2d = 0, e3d = 0;
    std::optional<double> ne2d, ne3d;  // normalized to the baseline row
    double floor_hit = 0, building_hit = 0;
    long long phi = 0;  // synthetic fingerprints added
};

struct SystemEval {
    std::string name;
    PositioningErrors errors;
    long long phi = 0;
    std::uint64_t test_fingerprint = 0;
};

struct EvalReport {
    int schema_version = 1;
    std::string dataset;
    std::uint64_t seed = 0;
    std::uint64_t test_fingerprint = 0;
    nlohmann::json config_echo;
    std::vector<SystemResult> systems;  // first row is the baseline

    nlohmann::ordered_json to_json() const;
    static EvalReport from_json(const nlohmann::json& j);
    std::string to_text_table() const;
};

/// Builds a Table-IV-shaped report. The first system is the baseline; its
/// normalized errors are exactly 1. A zero baseline error marks the column
/// not-normalizable instead of dividing.
EvalReport build_report(const std::string& dataset_id,
                        const std::vector<SystemEval>& systems,
                        nlohmann::json config_echo, std::uint64_t seed);

/// Arithmetic mean over reports per system name (the "Avg." row).
EvalReport average_reports(const std::vector<EvalReport>& reports);

}  // namespace surimi

#endif
