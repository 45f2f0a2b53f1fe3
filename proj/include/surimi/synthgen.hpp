#ifndef SURIMI_SYNTHGEN_HPP
#define SURIMI_SYNTHGEN_HPP

#include <cstdint>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "surimi/radiomap.hpp"

namespace surimi {

/// Log-distance path-loss world used for desk-scale fixtures. Buildings are
/// disjoint blocks along the x axis; every (building, floor) hosts APs.
struct SynthConfig {
    int n_aps = 16;
    int floors = 3;
    int buildings = 1;
    double area_x = 40.0;  // meters per building block
    double area_y = 25.0;
    double building_gap = 20.0;
    double floor_height = 4.0;
    int train_points = 600;
    int test_points = 150;
    double tx_power_dbm = -30.0;
    double path_loss_exponent = 2.0;
    double floor_attenuation_db = 16.0;
    double noise_std_db = 6.0;
    double detection_threshold_dbm = -95.0;
    std::uint64_t seed = 1;

    void validate() const;
    nlohmann::json to_json() const;
    static SynthConfig from_json(const nlohmann::json& j);
};

struct SynthWorld {
    struct Ap {
        double x, y, z;
        int floor, building;
    };
    RadioMap train;
    RadioMap test;
    std::vector<Ap> aps;  // ground truth, emitted in the JSON sidecar
};

/// Seeded generation of raw-dBm train/test maps. Train and test consume
/// independent derived streams, so resizing one never perturbs the other.
SynthWorld synth_generate_world(const SynthConfig& cfg);

std::pair<RadioMap, RadioMap> synth_generate(const SynthConfig& cfg);

/// Generator ground truth: the config plus AP placements.
nlohmann::json synth_sidecar(const SynthConfig& cfg, const SynthWorld& world);

}  // namespace surimi

#endif
