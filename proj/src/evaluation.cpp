#include "surimi/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace surimi {

std::vector<PredictedLabels> knn_predict(const RadioMap& rm_train,
                                         const RadioMap& rm_test, int k) {
    if (rm_train.representation != rm_test.representation)
        throw InvalidStateError("k-NN maps use different representations");
    if (rm_train.n() != rm_test.n())
        throw ShapeError("k-NN maps have different AP counts");
    if (k < 1 || static_cast<std::size_t>(k) > rm_train.m())
        throw DomainError("k must be in [1, m_train]");

    const std::size_t n = rm_train.n();
    const int cf = rm_train.labels.num_floors();
    const int cb = rm_train.labels.num_buildings();

    std::vector<PredictedLabels> out(rm_test.m());
    std::vector<std::pair<double, std::size_t>> dist(rm_train.m());
    for (std::size_t t = 0; t < rm_test.m(); ++t) {
        for (std::size_t i = 0; i < rm_train.m(); ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double d = rm_test.rss[t * n + j] - rm_train.rss[i * n + j];
                acc += d * d;
            }
            dist[i] = {acc, i};
        }
        std::partial_sort(dist.begin(), dist.begin() + k, dist.end());

        PredictedLabels& p = out[t];
        p.floor_probs.assign(static_cast<std::size_t>(cf), 0.0);
        p.building_probs.assign(static_cast<std::size_t>(cb), 0.0);
        std::vector<int> floor_votes(static_cast<std::size_t>(cf), 0);
        std::vector<int> building_votes(static_cast<std::size_t>(cb), 0);
        for (int q = 0; q < k; ++q) {
            const std::size_t i = dist[static_cast<std::size_t>(q)].second;
            p.x += rm_train.labels.x[i];
            p.y += rm_train.labels.y[i];
            p.z += rm_train.labels.z[i];
            ++floor_votes[static_cast<std::size_t>(rm_train.labels.floor[i])];
            ++building_votes[
                static_cast<std::size_t>(rm_train.labels.building[i])];
        }
        p.x /= k;
        p.y /= k;
        p.z /= k;
        for (int c = 0; c < cf; ++c)
            p.floor_probs[static_cast<std::size_t>(c)] =
                static_cast<double>(floor_votes[static_cast<std::size_t>(c)]) / k;
        for (int c = 0; c < cb; ++c)
            p.building_probs[static_cast<std::size_t>(c)] =
                static_cast<double>(building_votes[static_cast<std::size_t>(c)]) /
                k;

        const std::size_t nearest = dist[0].second;
        auto majority = [&](const std::vector<int>& votes, int nearest_class) {
            int best = 0;
            for (std::size_t c = 1; c < votes.size(); ++c)
                if (votes[c] > votes[static_cast<std::size_t>(best)])
                    best = static_cast<int>(c);
            int winners = 0;
            for (int v : votes)
                if (v == votes[static_cast<std::size_t>(best)]) ++winners;
            return winners > 1 ? nearest_class : best;
        };
        p.floor = majority(floor_votes, rm_train.labels.floor[nearest]);
        p.building = majority(building_votes, rm_train.labels.building[nearest]);
    }
    return out;
}

PositioningErrors positioning_errors(const std::vector<PredictedLabels>& pred,
                                     const LabelSet& truth) {
    if (pred.empty()) throw DomainError("positioning_errors on empty input");
    if (pred.size() != truth.size())
        throw ShapeError("predictions and truth are not row-aligned");
    PositioningErrors e;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double dx = pred[i].x - truth.x[i];
        const double dy = pred[i].y - truth.y[i];
        const double dz = pred[i].z - truth.z[i];
        e.e2d += std::sqrt(dx * dx + dy * dy);
        e.e3d += std::sqrt(dx * dx + dy * dy + dz * dz);
        e.floor_hit += pred[i].floor == truth.floor[i] ? 1.0 : 0.0;
        e.building_hit += pred[i].building == truth.building[i] ? 1.0 : 0.0;
    }
    const double m = static_cast<double>(pred.size());
    e.e2d /= m;
    e.e3d /= m;
    e.floor_hit = 100.0 * e.floor_hit / m;
    e.building_hit = 100.0 * e.building_hit / m;
    return e;
}

EvalReport build_report(const std::string& dataset_id,
                        const std::vector<SystemEval>& systems,
                        nlohmann::json config_echo, std::uint64_t seed) {
    if (systems.empty()) throw DomainError("report needs at least one system");
    for (const auto& s : systems)
        if (s.test_fingerprint != systems.front().test_fingerprint)
            throw ProvenanceError("systems were evaluated on mixed test splits");

    EvalReport rep;
    rep.dataset = dataset_id;
    rep.seed = seed;
    rep.test_fingerprint = systems.front().test_fingerprint;
    rep.config_echo = std::move(config_echo);

    const PositioningErrors& base = systems.front().errors;
    for (std::size_t i = 0; i < systems.size(); ++i) {
        const auto& s = systems[i];
        SystemResult r;
        r.name = s.name;
        r.e2d = s.errors.e2d;
        r.e3d = s.errors.e3d;
        r.floor_hit = s.errors.floor_hit;
        r.building_hit = s.errors.building_hit;
        r.phi = s.phi;
        if (i == 0) {
            r.ne2d = 1.0;  // baseline normalizes to exactly 1
            r.ne3d = 1.0;
        } else {
            if (base.e2d > 0.0) r.ne2d = s.errors.e2d / base.e2d;
            if (base.e3d > 0.0) r.ne3d = s.errors.e3d / base.e3d;
        }
        rep.systems.push_back(std::move(r));
    }
    return rep;
}

EvalReport average_reports(const std::vector<EvalReport>& reports) {
    if (reports.empty()) throw DomainError("no reports to average");
    EvalReport avg;
    avg.dataset = "Avg.";
    avg.seed = reports.front().seed;
    avg.test_fingerprint = 0;
    avg.config_echo = nlohmann::json::object();

    // keep the system order of the first report
    for (const auto& s0 : reports.front().systems) {
        SystemResult acc;
        acc.name = s0.name;
        double ne2d_sum = 0, ne3d_sum = 0;
        int ne2d_cnt = 0, ne3d_cnt = 0;
        int found = 0;
        for (const auto& rep : reports) {
            for (const auto& s : rep.systems) {
                if (s.name != s0.name) continue;
                ++found;
                acc.e2d += s.e2d;
                acc.e3d += s.e3d;
                acc.floor_hit += s.floor_hit;
                acc.building_hit += s.building_hit;
                acc.phi += s.phi;
                if (s.ne2d) {
                    ne2d_sum += *s.ne2d;
                    ++ne2d_cnt;
                }
                if (s.ne3d) {
                    ne3d_sum += *s.ne3d;
                    ++ne3d_cnt;
                }
            }
        }
        if (found != static_cast<int>(reports.size()))
            throw ProvenanceError("system '" + s0.name +
                                  "' missing from a merged report");
        acc.e2d /= found;
        acc.e3d /= found;
        acc.floor_hit /= found;
        acc.building_hit /= found;
        if (ne2d_cnt == found) acc.ne2d = ne2d_sum / found;
        if (ne3d_cnt == found) acc.ne3d = ne3d_sum / found;
        avg.systems.push_back(std::move(acc));
    }
    return avg;
}

nlohmann::ordered_json EvalReport::to_json() const {
    nlohmann::ordered_json j;
    j["schema_version"] = schema_version;
    j["dataset"] = dataset;
    j["seed"] = seed;
    j["test_fingerprint"] = hex64(test_fingerprint);
    j["systems"] = nlohmann::ordered_json::array();
    for (const auto& s : systems) {
        nlohmann::ordered_json js;
        js["name"] = s.name;
        js["e2d_m"] = s.e2d;
        js["e3d_m"] = s.e3d;
        js["ne2d"] = s.ne2d ? nlohmann::ordered_json(*s.ne2d)
                            : nlohmann::ordered_json(nullptr);
        js["ne3d"] = s.ne3d ? nlohmann::ordered_json(*s.ne3d)
                            : nlohmann::ordered_json(nullptr);
        js["floor_hit_pct"] = s.floor_hit;
        js["building_hit_pct"] = s.building_hit;
        js["phi"] = s.phi;
        j["systems"].push_back(std::move(js));
    }
    j["config"] = config_echo;
    return j;
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
    EvalReport rep;
    rep.schema_version = j.at("schema_version").get<int>();
    rep.dataset = j.at("dataset").get<std::string>();
    rep.seed = j.at("seed").get<std::uint64_t>();
    rep.test_fingerprint =
        std::stoull(j.at("test_fingerprint").get<std::string>(), nullptr, 16);
    rep.config_echo = j.value("config", nlohmann::json::object());
    for (const auto& js : j.at("systems")) {
        SystemResult s;
        s.name = js.at("name").get<std::string>();
        s.e2d = js.at("e2d_m").get<double>();
        s.e3d = js.at("e3d_m").get<double>();
        if (!js.at("ne2d").is_null()) s.ne2d = js.at("ne2d").get<double>();
        if (!js.at("ne3d").is_null()) s.ne3d = js.at("ne3d").get<double>();
        s.floor_hit = js.at("floor_hit_pct").get<double>();
        s.building_hit = js.at("building_hit_pct").get<double>();
        s.phi = js.at("phi").get<long long>();
        rep.systems.push_back(std::move(s));
    }
    return rep;
}

namespace {

std::string fmt(double v, int prec = 2) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

}  // namespace

std::string EvalReport::to_text_table() const {
    std::ostringstream out;
    out << "Dataset: " << dataset << "\n";
    const char* hdr[] = {"System",  "e2D[m]", "e3D[m]", "ne2D",
                         "ne3D",    "gamma[%]", "bldg[%]", "phi"};
    std::vector<std::vector<std::string>> rows;
    rows.emplace_back(hdr, hdr + 8);
    for (const auto& s : systems) {
        rows.push_back({s.name, fmt(s.e2d), fmt(s.e3d),
                        s.ne2d ? fmt(*s.ne2d) : "n/a",
                        s.ne3d ? fmt(*s.ne3d) : "n/a", fmt(s.floor_hit),
                        fmt(s.building_hit), std::to_string(s.phi)});
    }
    std::vector<std::size_t> width(8, 0);
    for (const auto& r : rows)
        for (std::size_t c = 0; c < 8; ++c)
            width[c] = std::max(width[c], r[c].size());
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < 8; ++c) {
            out << r[c] << std::string(width[c] - r[c].size() + 2, ' ');
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace surimi
