#include "surimi/radiomap.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "surimi/csv.hpp"

namespace surimi {

using json = nlohmann::json;

std::size_t RadioMap::real_count() const {
    if (synthetic.empty()) return m();
    std::size_t c = 0;
    for (auto s : synthetic) c += (s == 0);
    return c;
}

std::size_t RadioMap::synthetic_count() const {
    return m() - real_count();
}

void RadioMap::validate() const {
    const std::size_t mm = labels.size();
    if (mm == 0) throw DomainError("radio map has no fingerprints");
    if (ap_ids.empty()) throw DomainError("radio map has no AP columns");
    if (rss.size() != mm * ap_ids.size())
        throw ShapeError("rss size does not match m x n");
    if (labels.y.size() != mm || labels.z.size() != mm ||
        labels.floor.size() != mm || labels.building.size() != mm)
        throw ShapeError("label vectors are not row-aligned");
    std::vector<std::string> ids = ap_ids;
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
        throw DomainError("duplicate AP identifiers");
    if (representation == Representation::powed) {
        for (double v : rss)
            if (v < 0.0 || v > 1.0)
                throw DomainError("powed value outside [0,1]");
    }
    for (std::size_t i = 0; i < mm; ++i) {
        if (!std::isfinite(labels.x[i]) || !std::isfinite(labels.y[i]) ||
            !std::isfinite(labels.z[i]))
            throw DomainError("non-finite coordinate at row " + std::to_string(i));
        if (labels.floor[i] < 0 || labels.floor[i] >= labels.num_floors())
            throw DomainError("floor index out of dense range at row " +
                              std::to_string(i));
        if (labels.building[i] < 0 || labels.building[i] >= labels.num_buildings())
            throw DomainError("building index out of dense range at row " +
                              std::to_string(i));
    }
    if (!synthetic.empty() && synthetic.size() != mm)
        throw ShapeError("synthetic mask not row-aligned");
}

std::array<double, 3> LabelScaler::scale(const std::array<double, 3>& v) const {
    std::array<double, 3> out{};
    for (int k = 0; k < 3; ++k) {
        if (!std::isfinite(v[k])) throw DomainError("non-finite label value");
        const double range = maxs[k] - mins[k];
        out[k] = range == 0.0 ? 0.0 : (v[k] - mins[k]) / range;
    }
    return out;
}

std::array<double, 3> LabelScaler::unscale(const std::array<double, 3>& s) const {
    std::array<double, 3> out{};
    for (int k = 0; k < 3; ++k) {
        const double range = maxs[k] - mins[k];
        out[k] = range == 0.0 ? mins[k] : mins[k] + s[k] * range;
    }
    return out;
}

LabelScaler fit_label_scaler(const LabelSet& labels) {
    if (labels.size() == 0) throw DomainError("cannot fit scaler on empty labels");
    LabelScaler ls;
    const std::vector<double>* axes[3] = {&labels.x, &labels.y, &labels.z};
    for (int k = 0; k < 3; ++k) {
        double mn = (*axes[k])[0], mx = (*axes[k])[0];
        for (double v : *axes[k]) {
            if (!std::isfinite(v)) throw DomainError("non-finite label value");
            mn = std::min(mn, v);
            mx = std::max(mx, v);
        }
        ls.mins[k] = mn;
        ls.maxs[k] = mx;
    }
    return ls;
}

DatasetSchema DatasetSchema::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw SchemaError(std::string("invalid schema JSON: ") + e.what());
    }
    DatasetSchema s;
    s.ap_prefix = j.value("ap_prefix", s.ap_prefix);
    s.n_aps = j.value("n_aps", 0);
    s.non_detected = j.value("non_detected", s.non_detected);
    s.floor_height = j.value("floor_height", s.floor_height);
    s.has_altitude = j.value("has_altitude", s.has_altitude);
    if (j.contains("representation")) {
        const std::string r = j["representation"];
        if (r == "raw_dbm")
            s.representation = Representation::raw_dbm;
        else if (r == "powed")
            s.representation = Representation::powed;
        else
            throw SchemaError("unknown representation '" + r + "'");
    }
    return s;
}

DatasetSchema DatasetSchema::from_json_file(const std::string& path) {
    return from_json_text(csv::read_file(path));
}

std::string DatasetSchema::to_json_text() const {
    json j;
    j["ap_prefix"] = ap_prefix;
    j["n_aps"] = n_aps;
    j["non_detected"] = non_detected;
    j["floor_height"] = floor_height;
    j["has_altitude"] = has_altitude;
    j["representation"] = to_string(representation);
    return j.dump(2) + "\n";
}

namespace {

// Dense 0-based re-indexing that preserves the source partition. Original
// values are kept sorted so the mapping is deterministic.
void reindex(const std::vector<long long>& raw, std::vector<int>& dense,
             std::vector<long long>& values) {
    std::map<long long, int> order;
    for (long long v : raw) order.emplace(v, 0);
    int next = 0;
    for (auto& [v, idx] : order) idx = next++;
    values.clear();
    values.reserve(order.size());
    for (auto& [v, idx] : order) values.push_back(v);
    dense.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) dense[i] = order[raw[i]];
}

long long parse_integer_label(const std::string& cell, std::size_t row,
                              const std::string& colname) {
    // labels may be written as integers or integral floats (e.g. "2.0")
    double v;
    try {
        v = csv::parse_double(cell, row, 0);
    } catch (const ParseError&) {
        throw ParseError("non-numeric " + colname + " label '" + cell +
                         "' at row " + std::to_string(row));
    }
    const double r = std::round(v);
    if (std::abs(v - r) > 1e-9)
        throw ParseError("non-integral " + colname + " label '" + cell +
                         "' at row " + std::to_string(row));
    return static_cast<long long>(r);
}

}  // namespace

RadioMap load_dataset(const std::string& path, const DatasetSchema& schema) {
    const auto lines = csv::read_lines(path);
    if (lines.empty() || (lines.size() == 1 && lines[0].empty()))
        throw DomainError("empty dataset: " + path);

    const auto header = csv::split_line(lines[0]);

    // locate AP columns: the leading run of columns that carry the prefix
    std::size_t n_aps = 0;
    while (n_aps < header.size() &&
           header[n_aps].rfind(schema.ap_prefix, 0) == 0)
        ++n_aps;
    if (schema.n_aps > 0) {
        if (n_aps != static_cast<std::size_t>(schema.n_aps))
            throw SchemaError("expected " + std::to_string(schema.n_aps) +
                              " AP columns with prefix '" + schema.ap_prefix +
                              "', found " + std::to_string(n_aps));
    }
    if (n_aps == 0)
        throw SchemaError("no AP columns with prefix '" + schema.ap_prefix + "'");

    // ALTITUDE is optional; accept it whenever the header carries it
    const bool has_altitude =
        schema.has_altitude ||
        (n_aps + 2 < header.size() && header[n_aps + 2] == "ALTITUDE");
    std::vector<std::string> expected = {"LONGITUDE", "LATITUDE"};
    if (has_altitude) expected.push_back("ALTITUDE");
    expected.push_back("FLOOR");
    expected.push_back("BUILDINGID");

    for (std::size_t k = 0; k < expected.size(); ++k) {
        const std::size_t col = n_aps + k;
        if (col >= header.size())
            throw SchemaError("missing column " + expected[k]);
        if (header[col] != expected[k])
            throw SchemaError("expected column " + expected[k] + " at position " +
                              std::to_string(col + 1) + ", found '" + header[col] +
                              "'");
    }
    if (header.size() > n_aps + expected.size())
        throw SchemaError("unexpected extra column '" +
                          header[n_aps + expected.size()] + "'");

    RadioMap rm;
    rm.ap_ids.assign(header.begin(), header.begin() + static_cast<long>(n_aps));
    rm.representation = schema.representation;
    rm.non_detected_marker = schema.non_detected;

    std::vector<long long> raw_floor, raw_building;
    const std::size_t ncols = header.size();
    for (std::size_t li = 1; li < lines.size(); ++li) {
        if (lines[li].empty()) continue;
        const auto cells = csv::split_line(lines[li]);
        if (cells.size() != ncols)
            throw SchemaError("row " + std::to_string(li) + " has " +
                              std::to_string(cells.size()) + " cells, expected " +
                              std::to_string(ncols));
        for (std::size_t j = 0; j < n_aps; ++j)
            rm.rss.push_back(csv::parse_double(cells[j], li, j + 1));
        std::size_t c = n_aps;
        rm.labels.x.push_back(csv::parse_double(cells[c], li, c + 1));
        ++c;
        rm.labels.y.push_back(csv::parse_double(cells[c], li, c + 1));
        ++c;
        double alt = 0.0;
        if (has_altitude) {
            alt = csv::parse_double(cells[c], li, c + 1);
            ++c;
        }
        raw_floor.push_back(parse_integer_label(cells[c], li, "FLOOR"));
        ++c;
        raw_building.push_back(parse_integer_label(cells[c], li, "BUILDINGID"));
        rm.labels.z.push_back(has_altitude ? alt : 0.0);
    }
    if (raw_floor.empty()) throw DomainError("empty dataset: " + path);

    reindex(raw_floor, rm.labels.floor, rm.labels.floor_values);
    reindex(raw_building, rm.labels.building, rm.labels.building_values);

    if (!has_altitude) {
        for (std::size_t i = 0; i < rm.labels.size(); ++i)
            rm.labels.z[i] = rm.labels.floor[i] * schema.floor_height;
    }

    rm.validate();
    return rm;
}

void save_dataset(const RadioMap& rm, const std::string& path) {
    std::string out;
    out.reserve(rm.m() * rm.n() * 6);
    for (std::size_t j = 0; j < rm.n(); ++j) {
        out += rm.ap_ids[j];
        out += ',';
    }
    out += "LONGITUDE,LATITUDE,ALTITUDE,FLOOR,BUILDINGID\n";
    for (std::size_t i = 0; i < rm.m(); ++i) {
        for (std::size_t j = 0; j < rm.n(); ++j) {
            out += csv::format_double(rm.rss_at(i, j));
            out += ',';
        }
        out += csv::format_double(rm.labels.x[i]);
        out += ',';
        out += csv::format_double(rm.labels.y[i]);
        out += ',';
        out += csv::format_double(rm.labels.z[i]);
        out += ',';
        out += std::to_string(rm.labels.floor_values[rm.labels.floor[i]]);
        out += ',';
        out += std::to_string(rm.labels.building_values[rm.labels.building[i]]);
        out += '\n';
    }
    csv::write_file(path, out);
}

double min_detected_rss(const RadioMap& rm) {
    bool any = false;
    double mn = 0.0;
    for (std::size_t i = 0; i < rm.m(); ++i)
        for (std::size_t j = 0; j < rm.n(); ++j)
            if (rm.is_detected(i, j)) {
                const double v = rm.rss_at(i, j);
                mn = any ? std::min(mn, v) : v;
                any = true;
            }
    if (!any) throw DomainError("radio map has no detected RSS values");
    return mn;
}

RadioMap to_powed(const RadioMap& rm, double beta) {
    if (rm.representation == Representation::powed)
        throw InvalidStateError("radio map is already powed");
    const double mn = min_detected_rss(rm);
    if (mn >= 0.0)
        throw DomainError("min detected RSS must be negative, got " +
                          std::to_string(mn));

    RadioMap out = rm;
    out.representation = Representation::powed;
    std::size_t clamped = 0;
    for (std::size_t i = 0; i < rm.m(); ++i) {
        for (std::size_t j = 0; j < rm.n(); ++j) {
            double& cell = out.rss[i * rm.n() + j];
            if (!rm.is_detected(i, j)) {
                cell = 0.0;
                continue;
            }
            const double v = rm.rss_at(i, j);
            double p = std::pow((v - mn) / (-mn), beta);
            if (v > 0.0) {
                p = 1.0;  // corrupt positive-dBm cell
                ++clamped;
            }
            cell = p;
        }
    }
    if (clamped > 0)
        log_warn(std::to_string(clamped) +
                 " detected RSS values above 0 dBm clamped to 1 in powed space");
    return out;
}

std::vector<double> one_hot(int index, int num_classes) {
    if (num_classes < 1) throw DomainError("one_hot: num_classes must be >= 1");
    if (index < 0 || index >= num_classes)
        throw DomainError("one_hot: index " + std::to_string(index) +
                          " out of range [0," + std::to_string(num_classes) + ")");
    std::vector<double> v(static_cast<std::size_t>(num_classes), 0.0);
    v[static_cast<std::size_t>(index)] = 1.0;
    return v;
}

std::uint64_t radiomap_fingerprint(const RadioMap& rm) {
    std::uint64_t h = fnv1a64(rm.rss.data(), rm.rss.size() * sizeof(double));
    h = fnv1a64(rm.labels.x.data(), rm.labels.x.size() * sizeof(double), h);
    h = fnv1a64(rm.labels.y.data(), rm.labels.y.size() * sizeof(double), h);
    h = fnv1a64(rm.labels.z.data(), rm.labels.z.size() * sizeof(double), h);
    h = fnv1a64(rm.labels.floor.data(), rm.labels.floor.size() * sizeof(int), h);
    h = fnv1a64(rm.labels.building.data(),
                rm.labels.building.size() * sizeof(int), h);
    return h;
}

}  // namespace surimi
