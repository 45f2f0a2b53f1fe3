#include "doctest.h"

#include <cmath>

#include "surimi/evaluation.hpp"
#include "surimi/rng.hpp"

using namespace surimi;

namespace {

RadioMap make_map(const std::vector<std::vector<double>>& rss,
                  const std::vector<std::array<double, 3>>& xyz,
                  const std::vector<int>& floor, const std::vector<int>& building,
                  int cf, int cb) {
    RadioMap rm;
    rm.representation = Representation::powed;
    for (std::size_t j = 0; j < rss[0].size(); ++j)
        rm.ap_ids.push_back("AP" + std::to_string(j + 1));
    for (const auto& row : rss)
        rm.rss.insert(rm.rss.end(), row.begin(), row.end());
    for (std::size_t i = 0; i < xyz.size(); ++i) {
        rm.labels.x.push_back(xyz[i][0]);
        rm.labels.y.push_back(xyz[i][1]);
        rm.labels.z.push_back(xyz[i][2]);
        rm.labels.floor.push_back(floor[i]);
        rm.labels.building.push_back(building[i]);
    }
    for (int f = 0; f < cf; ++f) rm.labels.floor_values.push_back(f);
    for (int b = 0; b < cb; ++b) rm.labels.building_values.push_back(b);
    return rm;
}

RadioMap random_map(Rng& rng, std::size_t m, std::size_t n, int cf, int cb) {
    std::vector<std::vector<double>> rss(m, std::vector<double>(n));
    std::vector<std::array<double, 3>> xyz(m);
    std::vector<int> floor(m), building(m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) rss[i][j] = rng.uniform();
        xyz[i] = {rng.uniform(0, 50), rng.uniform(0, 30), rng.uniform(0, 12)};
        floor[i] = static_cast<int>(rng.uniform_index((std::uint64_t)cf));
        building[i] = static_cast<int>(rng.uniform_index((std::uint64_t)cb));
    }
    return make_map(rss, xyz, floor, building, cf, cb);
}

}  // namespace

TEST_CASE("1-NN copies the labels of an exact match") {
    auto train = make_map({{0.1, 0.9}, {0.8, 0.2}, {0.5, 0.5}},
                          {{1, 2, 0}, {3, 4, 4}, {5, 6, 8}}, {0, 1, 2},
                          {0, 0, 0}, 3, 1);
    auto test = make_map({{0.8, 0.2}}, {{0, 0, 0}}, {0}, {0}, 3, 1);
    auto preds = knn_predict(train, test, 1);
    REQUIRE(preds.size() == 1);
    CHECK(preds[0].x == 3);
    CHECK(preds[0].y == 4);
    CHECK(preds[0].z == 4);
    CHECK(preds[0].floor == 1);
    CHECK(preds[0].building == 0);
    CHECK(preds[0].floor_probs == std::vector<double>{0, 1, 0});
}

TEST_CASE("1-NN equals an exhaustive-search oracle on 100 random instances") {
    Rng rng(404);
    for (int t = 0; t < 100; ++t) {
        const std::size_t m = 2 + rng.uniform_index(48);
        const std::size_t n = 1 + rng.uniform_index(10);
        auto train = random_map(rng, m, n, 3, 2);
        auto test = random_map(rng, 5, n, 3, 2);
        auto preds = knn_predict(train, test, 1);
        for (std::size_t q = 0; q < test.m(); ++q) {
            // independent oracle: all-pairs distances, first minimum
            double best = 1e300;
            std::size_t best_i = 0;
            for (std::size_t i = 0; i < m; ++i) {
                double acc = 0;
                for (std::size_t j = 0; j < n; ++j) {
                    const double d = test.rss[q * n + j] - train.rss[i * n + j];
                    acc += d * d;
                }
                if (acc < best) {
                    best = acc;
                    best_i = i;
                }
            }
            CHECK(preds[q].x == train.labels.x[best_i]);
            CHECK(preds[q].y == train.labels.y[best_i]);
            CHECK(preds[q].floor == train.labels.floor[best_i]);
            CHECK(preds[q].building == train.labels.building[best_i]);
        }
    }
}

TEST_CASE("k = m_train degenerates to global centroid and global majority") {
    auto train = make_map({{0.1, 0.2}, {0.9, 0.8}, {0.4, 0.6}},
                          {{0, 0, 0}, {6, 3, 0}, {3, 0, 3}}, {0, 0, 1},
                          {0, 1, 1}, 2, 2);
    auto test = make_map({{0.5, 0.5}}, {{0, 0, 0}}, {0}, {0}, 2, 2);
    auto preds = knn_predict(train, test, 3);
    CHECK(preds[0].x == doctest::Approx(3.0));
    CHECK(preds[0].y == doctest::Approx(1.0));
    CHECK(preds[0].z == doctest::Approx(1.0));
    CHECK(preds[0].floor == 0);  // 2 votes floor 0
    CHECK(preds[0].building == 1);
}

TEST_CASE("majority tie falls back to the nearest neighbour's class") {
    // two floors with one vote each: nearest row wins
    auto train = make_map({{0.0, 0.0}, {1.0, 1.0}}, {{0, 0, 0}, {10, 0, 0}},
                          {1, 0}, {0, 0}, 2, 1);
    auto test = make_map({{0.1, 0.1}}, {{0, 0, 0}}, {0}, {0}, 2, 1);
    auto preds = knn_predict(train, test, 2);
    CHECK(preds[0].floor == 1);
}

TEST_CASE("knn rejects mismatched representations and bad k") {
    auto train = make_map({{0.1}}, {{0, 0, 0}}, {0}, {0}, 1, 1);
    auto test = make_map({{0.2}}, {{0, 0, 0}}, {0}, {0}, 1, 1);
    test.representation = Representation::raw_dbm;
    CHECK_THROWS_AS(static_cast<void>(knn_predict(train, test, 1)),
                    InvalidStateError);
    test.representation = Representation::powed;
    CHECK_THROWS_AS(static_cast<void>(knn_predict(train, test, 0)), DomainError);
    CHECK_THROWS_AS(static_cast<void>(knn_predict(train, test, 2)), DomainError);
}

TEST_CASE("positioning error definitions") {
    LabelSet truth;
    truth.x = {0, 0};
    truth.y = {0, 0};
    truth.z = {0, 0};
    truth.floor = {0, 1};
    truth.building = {0, 0};
    truth.floor_values = {0, 1};
    truth.building_values = {0};

    SUBCASE("perfect prediction") {
        std::vector<PredictedLabels> preds(2);
        preds[0].floor = 0;
        preds[1].floor = 1;
        auto e = positioning_errors(preds, truth);
        CHECK(e.e2d == 0.0);
        CHECK(e.e3d == 0.0);
        CHECK(e.floor_hit == 100.0);
        CHECK(e.building_hit == 100.0);
    }
    SUBCASE("3 m and 5 m planar errors average to 4") {
        std::vector<PredictedLabels> preds(2);
        preds[0].x = 3;
        preds[1].y = 5;
        preds[0].floor = 0;
        preds[1].floor = 0;  // one floor miss
        auto e = positioning_errors(preds, truth);
        CHECK(e.e2d == doctest::Approx(4.0));
        CHECK(e.e3d == doctest::Approx(4.0));
        CHECK(e.floor_hit == 50.0);
    }
    SUBCASE("empty input is a domain error") {
        std::vector<PredictedLabels> preds;
        LabelSet empty;
        CHECK_THROWS_AS(static_cast<void>(positioning_errors(preds, empty)),
                        DomainError);
    }
}

TEST_CASE("errors match an independent mean-of-norms oracle on 100 cases") {
    Rng rng(777);
    for (int t = 0; t < 100; ++t) {
        const std::size_t m = 1 + rng.uniform_index(20);
        LabelSet truth;
        std::vector<PredictedLabels> preds(m);
        double s2 = 0, s3 = 0, hits = 0, bhits = 0;
        for (std::size_t i = 0; i < m; ++i) {
            truth.x.push_back(rng.uniform(-50, 50));
            truth.y.push_back(rng.uniform(-50, 50));
            truth.z.push_back(rng.uniform(0, 12));
            truth.floor.push_back(static_cast<int>(rng.uniform_index(3)));
            truth.building.push_back(static_cast<int>(rng.uniform_index(2)));
            preds[i].x = rng.uniform(-50, 50);
            preds[i].y = rng.uniform(-50, 50);
            preds[i].z = rng.uniform(0, 12);
            preds[i].floor = static_cast<int>(rng.uniform_index(3));
            preds[i].building = static_cast<int>(rng.uniform_index(2));
            // oracle accumulation, written independently
            const double ddx = preds[i].x - truth.x[i];
            const double ddy = preds[i].y - truth.y[i];
            const double ddz = preds[i].z - truth.z[i];
            s2 += std::hypot(ddx, ddy);
            s3 += std::sqrt(ddx * ddx + ddy * ddy + ddz * ddz);
            hits += preds[i].floor == truth.floor[i];
            bhits += preds[i].building == truth.building[i];
        }
        truth.floor_values = {0, 1, 2};
        truth.building_values = {0, 1};
        auto e = positioning_errors(preds, truth);
        const double md = static_cast<double>(m);
        CHECK(std::abs(e.e2d - s2 / md) < 1e-9);
        CHECK(std::abs(e.e3d - s3 / md) < 1e-9);
        CHECK(e.e3d >= e.e2d);
        CHECK(std::abs(e.floor_hit - 100.0 * hits / md) < 1e-9);
        CHECK(std::abs(e.building_hit - 100.0 * bhits / md) < 1e-9);
    }
}

namespace {

SystemEval sys(const std::string& name, double e2d, double e3d, double fh,
               long long phi = 0, std::uint64_t fp = 42) {
    SystemEval s;
    s.name = name;
    s.errors.e2d = e2d;
    s.errors.e3d = e3d;
    s.errors.floor_hit = fh;
    s.errors.building_hit = 100.0;
    s.phi = phi;
    s.test_fingerprint = fp;
    return s;
}

}  // namespace

TEST_CASE("report normalization") {
    auto rep = build_report(
        "toy", {sys("1-NN", 4.97, 4.97, 100), sys("SURIMI-M2", 3.68, 3.70, 100, 25712)},
        nlohmann::json::object(), 9);
    CHECK(rep.systems[0].ne2d == 1.0);
    CHECK(rep.systems[0].ne3d == 1.0);
    // Table-IV-style ratio: 3.68 / 4.97 ~ 0.74
    CHECK(*rep.systems[1].ne2d == doctest::Approx(0.74).epsilon(0.01));
    CHECK(rep.systems[1].phi == 25712);

    SUBCASE("system equal to baseline normalizes to exactly 1") {
        auto r2 = build_report("toy",
                               {sys("1-NN", 2.5, 3.0, 90), sys("same", 2.5, 3.0, 90)},
                               nlohmann::json::object(), 0);
        CHECK(*r2.systems[1].ne2d == 1.0);
        CHECK(*r2.systems[1].ne3d == 1.0);
    }
    SUBCASE("normalization homogeneity: doubling errors doubles the ratio") {
        auto r2 = build_report("toy",
                               {sys("1-NN", 2.0, 2.0, 90), sys("a", 3.0, 3.0, 90),
                                sys("b", 6.0, 6.0, 90)},
                               nlohmann::json::object(), 0);
        CHECK(*r2.systems[2].ne2d == doctest::Approx(2.0 * *r2.systems[1].ne2d));
    }
    SUBCASE("zero baseline error flags not-normalizable") {
        auto r2 = build_report("toy",
                               {sys("1-NN", 0.0, 0.0, 100), sys("a", 1.0, 1.0, 90)},
                               nlohmann::json::object(), 0);
        CHECK_FALSE(r2.systems[1].ne2d.has_value());
        auto j = r2.to_json();
        CHECK(j["systems"][1]["ne2d"].is_null());
    }
    SUBCASE("mixed test splits raise a provenance error") {
        CHECK_THROWS_AS(
            static_cast<void>(build_report(
                "toy", {sys("1-NN", 1, 1, 9, 0, 42), sys("a", 1, 1, 9, 0, 43)},
                nlohmann::json::object(), 0)),
            ProvenanceError);
    }
}

TEST_CASE("normalization anti-symmetry under swapping baseline and system") {
    auto ab = build_report("d", {sys("A", 2.0, 4.0, 90), sys("B", 5.0, 6.0, 90)},
                           nlohmann::json::object(), 0);
    auto ba = build_report("d", {sys("B", 5.0, 6.0, 90), sys("A", 2.0, 4.0, 90)},
                           nlohmann::json::object(), 0);
    CHECK(*ab.systems[1].ne2d * *ba.systems[1].ne2d == doctest::Approx(1.0));
    CHECK(*ab.systems[1].ne3d * *ba.systems[1].ne3d == doctest::Approx(1.0));
}

TEST_CASE("average row equals hand-computed means") {
    auto r1 = build_report("d1", {sys("1-NN", 2.0, 2.5, 90), sys("S", 1.0, 1.5, 95)},
                           nlohmann::json::object(), 0);
    auto r2 = build_report("d2", {sys("1-NN", 4.0, 4.5, 80), sys("S", 3.0, 3.0, 85)},
                           nlohmann::json::object(), 0);
    auto avg = average_reports({r1, r2});
    CHECK(avg.dataset == "Avg.");
    CHECK(avg.systems[0].e2d == doctest::Approx(3.0));
    CHECK(avg.systems[1].e2d == doctest::Approx(2.0));
    CHECK(avg.systems[1].e3d == doctest::Approx(2.25));
    CHECK(*avg.systems[1].ne2d ==
          doctest::Approx((1.0 / 2.0 + 3.0 / 4.0) / 2.0));
    CHECK(avg.systems[0].floor_hit == doctest::Approx(85.0));
}

TEST_CASE("report JSON round-trips bit-stably") {
    auto rep = build_report(
        "toy", {sys("1-NN", 4.97, 5.03, 92.5, 0), sys("S", 3.6881, 3.7, 93.1, 155)},
        nlohmann::json{{"k", 1}}, 1234);
    const std::string dump1 = rep.to_json().dump(2);
    auto back = EvalReport::from_json(nlohmann::json::parse(dump1));
    const std::string dump2 = back.to_json().dump(2);
    CHECK(dump1 == dump2);
    CHECK(back.systems[1].phi == 155);
    CHECK(back.seed == 1234);
}

TEST_CASE("gamma is invariant under a consistent relabeling bijection") {
    Rng rng(31);
    LabelSet truth;
    std::vector<PredictedLabels> preds(30);
    for (std::size_t i = 0; i < 30; ++i) {
        truth.x.push_back(0);
        truth.y.push_back(0);
        truth.z.push_back(0);
        truth.floor.push_back(static_cast<int>(rng.uniform_index(3)));
        truth.building.push_back(0);
        preds[i].floor = static_cast<int>(rng.uniform_index(3));
    }
    truth.floor_values = {0, 1, 2};
    truth.building_values = {0};
    const double g1 = positioning_errors(preds, truth).floor_hit;
    // bijection 0->2, 1->0, 2->1 applied to both sides
    const int perm[3] = {2, 0, 1};
    for (std::size_t i = 0; i < 30; ++i) {
        truth.floor[i] = perm[truth.floor[i]];
        preds[i].floor = perm[preds[i].floor];
    }
    const double g2 = positioning_errors(preds, truth).floor_hit;
    CHECK(g1 == g2);
}
