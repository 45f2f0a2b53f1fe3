#ifndef SURIMI_RADIOMAP_HPP
#define SURIMI_RADIOMAP_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "surimi/common.hpp"

namespace surimi {

enum class Representation { raw_dbm, powed };

inline const char* to_string(Representation r) {
    return r == Representation::raw_dbm ? "raw_dbm" : "powed";
}

/// Per-fingerprint ground truth. Floor/building hold dense 0-based indices;
/// the *_values vectors map a dense index back to the source label.
struct LabelSet {
    std::vector<double> x;  // meters (longitude axis)
    std::vector<double> y;  // meters (latitude axis)
    std::vector<double> z;  // meters (altitude; derived from floor if absent)
    std::vector<int> floor;
    std::vector<int> building;
    std::vector<long long> floor_values;     // dense index -> original label
    std::vector<long long> building_values;  // dense index -> original label

    std::size_t size() const { return x.size(); }
    int num_floors() const { return static_cast<int>(floor_values.size()); }
    int num_buildings() const { return static_cast<int>(building_values.size()); }
};

/// Radio map: m fingerprints of n RSS observations plus labels. Immutable
/// after construction; transforms return new maps.
struct RadioMap {
    std::vector<double> rss;  // row-major m x n
    LabelSet labels;
    std::vector<std::string> ap_ids;
    Representation representation = Representation::raw_dbm;
    double non_detected_marker = 100.0;  // dBm sentinel, raw_dbm only
    std::vector<std::uint8_t> synthetic;  // provenance; empty = all real

    std::size_t m() const { return labels.size(); }
    std::size_t n() const { return ap_ids.size(); }

    double rss_at(std::size_t i, std::size_t j) const { return rss[i * n() + j]; }
    bool is_detected(std::size_t i, std::size_t j) const {
        if (representation == Representation::powed) return rss_at(i, j) != 0.0;
        return rss_at(i, j) != non_detected_marker;
    }
    std::vector<double> fingerprint(std::size_t i) const {
        return std::vector<double>(rss.begin() + static_cast<long>(i * n()),
                                   rss.begin() + static_cast<long>((i + 1) * n()));
    }
    bool is_synthetic(std::size_t i) const {
        return !synthetic.empty() && synthetic[i] != 0;
    }
    std::size_t real_count() const;
    std::size_t synthetic_count() const;

    /// Checks the type invariants; throws on violation.
    void validate() const;
};

/// Min-max scaler over the three coordinate axes (Eq.-1 style).
struct LabelScaler {
    std::array<double, 3> mins{0, 0, 0};
    std::array<double, 3> maxs{0, 0, 0};

    std::array<double, 3> scale(const std::array<double, 3>& v) const;
    std::array<double, 3> unscale(const std::array<double, 3>& s) const;
};

LabelScaler fit_label_scaler(const LabelSet& labels);

/// Dataset ingestion schema for the canonical CSV layout.
struct DatasetSchema {
    std::string ap_prefix = "AP";
    int n_aps = 0;  // 0 = auto-detect from header
    double non_detected = 100.0;
    double floor_height = 4.0;  // meters, used when no altitude column
    bool has_altitude = false;
    Representation representation = Representation::raw_dbm;

    static DatasetSchema from_json_file(const std::string& path);
    static DatasetSchema from_json_text(const std::string& text);
    std::string to_json_text() const;
};

RadioMap load_dataset(const std::string& path, const DatasetSchema& schema);

/// Writes the canonical CSV (header, AP columns, LONGITUDE, LATITUDE,
/// ALTITUDE, FLOOR, BUILDINGID). Original floor/building labels are written.
void save_dataset(const RadioMap& rm, const std::string& path);

/// Eq.-4 powed transform. beta defaults to e at call sites.
RadioMap to_powed(const RadioMap& rm, double beta);

/// Minimum RSS over detected cells only. Throws DomainError when every cell
/// is non-detected.
double min_detected_rss(const RadioMap& rm);

std::vector<double> one_hot(int index, int num_classes);

/// Fingerprint of the map contents (used for bundle provenance).
std::uint64_t radiomap_fingerprint(const RadioMap& rm);

}  // namespace surimi

#endif
