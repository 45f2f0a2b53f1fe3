#include "surimi/synthgen.hpp"

#include <cmath>

#include "surimi/rng.hpp"

namespace surimi {

void SynthConfig::validate() const {
    if (n_aps < 1 || floors < 1 || buildings < 1 || train_points < 1 ||
        test_points < 1)
        throw DomainError("synth config counts must be >= 1");
    if (area_x <= 0 || area_y <= 0 || floor_height <= 0)
        throw DomainError("synth config areas must be positive");
    if (noise_std_db < 0) throw DomainError("noise_std_db must be >= 0");
    if (detection_threshold_dbm >= tx_power_dbm)
        throw DomainError("detection threshold must be below tx power");
}

nlohmann::json SynthConfig::to_json() const {
    nlohmann::json j;
    j["n_aps"] = n_aps;
    j["floors"] = floors;
    j["buildings"] = buildings;
    j["area_x"] = area_x;
    j["area_y"] = area_y;
    j["building_gap"] = building_gap;
    j["floor_height"] = floor_height;
    j["train_points"] = train_points;
    j["test_points"] = test_points;
    j["tx_power_dbm"] = tx_power_dbm;
    j["path_loss_exponent"] = path_loss_exponent;
    j["floor_attenuation_db"] = floor_attenuation_db;
    j["noise_std_db"] = noise_std_db;
    j["detection_threshold_dbm"] = detection_threshold_dbm;
    j["seed"] = seed;
    return j;
}

SynthConfig SynthConfig::from_json(const nlohmann::json& j) {
    SynthConfig c;
    c.n_aps = j.value("n_aps", c.n_aps);
    c.floors = j.value("floors", c.floors);
    c.buildings = j.value("buildings", c.buildings);
    c.area_x = j.value("area_x", c.area_x);
    c.area_y = j.value("area_y", c.area_y);
    c.building_gap = j.value("building_gap", c.building_gap);
    c.floor_height = j.value("floor_height", c.floor_height);
    c.train_points = j.value("train_points", c.train_points);
    c.test_points = j.value("test_points", c.test_points);
    c.tx_power_dbm = j.value("tx_power_dbm", c.tx_power_dbm);
    c.path_loss_exponent = j.value("path_loss_exponent", c.path_loss_exponent);
    c.floor_attenuation_db =
        j.value("floor_attenuation_db", c.floor_attenuation_db);
    c.noise_std_db = j.value("noise_std_db", c.noise_std_db);
    c.detection_threshold_dbm =
        j.value("detection_threshold_dbm", c.detection_threshold_dbm);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

SynthWorld synth_generate_world(const SynthConfig& cfg) {
    cfg.validate();

    // APs cycle through (building, floor) pairs so every floor has coverage;
    // positions are uniform within the assigned block.
    Rng ap_rng(derive_seed(cfg.seed, "aps"));
    std::vector<SynthWorld::Ap> aps;
    aps.reserve(static_cast<std::size_t>(cfg.n_aps));
    for (int a = 0; a < cfg.n_aps; ++a) {
        SynthWorld::Ap ap;
        const int slot = a % (cfg.buildings * cfg.floors);
        ap.building = slot / cfg.floors;
        ap.floor = slot % cfg.floors;
        const double x0 = ap.building * (cfg.area_x + cfg.building_gap);
        ap.x = x0 + ap_rng.uniform() * cfg.area_x;
        ap.y = ap_rng.uniform() * cfg.area_y;
        ap.z = ap.floor * cfg.floor_height;
        aps.push_back(ap);
    }

    auto make_map = [&](int points, std::uint64_t stream_seed) {
        Rng rng(stream_seed);
        RadioMap rm;
        rm.representation = Representation::raw_dbm;
        rm.non_detected_marker = 100.0;
        for (int j = 0; j < cfg.n_aps; ++j) {
            char buf[16];
            std::snprintf(buf, sizeof buf, "AP%03d", j + 1);
            rm.ap_ids.emplace_back(buf);
        }
        for (int f = 0; f < cfg.floors; ++f) rm.labels.floor_values.push_back(f);
        for (int b = 0; b < cfg.buildings; ++b)
            rm.labels.building_values.push_back(b);

        for (int i = 0; i < points; ++i) {
            const int building = static_cast<int>(
                rng.uniform_index(static_cast<std::uint64_t>(cfg.buildings)));
            const int floor = static_cast<int>(
                rng.uniform_index(static_cast<std::uint64_t>(cfg.floors)));
            const double x0 = building * (cfg.area_x + cfg.building_gap);
            const double x = x0 + rng.uniform() * cfg.area_x;
            const double y = rng.uniform() * cfg.area_y;
            const double z = floor * cfg.floor_height;
            rm.labels.x.push_back(x);
            rm.labels.y.push_back(y);
            rm.labels.z.push_back(z);
            rm.labels.floor.push_back(floor);
            rm.labels.building.push_back(building);

            for (const SynthWorld::Ap& ap : aps) {
                const double d = std::sqrt((x - ap.x) * (x - ap.x) +
                                           (y - ap.y) * (y - ap.y) +
                                           (z - ap.z) * (z - ap.z));
                double rss = cfg.tx_power_dbm -
                             10.0 * cfg.path_loss_exponent *
                                 std::log10(std::max(d, 1.0)) -
                             cfg.floor_attenuation_db * std::abs(floor - ap.floor);
                if (cfg.noise_std_db > 0.0)
                    rss += rng.normal(0.0, cfg.noise_std_db);
                rm.rss.push_back(rss < cfg.detection_threshold_dbm
                                     ? rm.non_detected_marker
                                     : rss);
            }
        }
        rm.validate();
        return rm;
    };

    SynthWorld world;
    world.train = make_map(cfg.train_points, derive_seed(cfg.seed, "train"));
    world.test = make_map(cfg.test_points, derive_seed(cfg.seed, "test"));
    world.aps = std::move(aps);
    return world;
}

std::pair<RadioMap, RadioMap> synth_generate(const SynthConfig& cfg) {
    SynthWorld world = synth_generate_world(cfg);
    return {std::move(world.train), std::move(world.test)};
}

nlohmann::json synth_sidecar(const SynthConfig& cfg, const SynthWorld& world) {
    nlohmann::json j;
    j["config"] = cfg.to_json();
    nlohmann::json aps = nlohmann::json::array();
    for (const auto& ap : world.aps)
        aps.push_back({{"x", ap.x},
                       {"y", ap.y},
                       {"z", ap.z},
                       {"floor", ap.floor},
                       {"building", ap.building}});
    j["access_points"] = aps;
    return j;
}

}  // namespace surimi
