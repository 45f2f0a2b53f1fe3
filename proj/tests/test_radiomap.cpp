#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "surimi/csv.hpp"
#include "surimi/radiomap.hpp"
#include "surimi/rng.hpp"

using namespace surimi;

namespace {

const std::string kDir = "/tmp/surimi_radiomap_tests";

std::string write_tmp(const std::string& name, const std::string& content) {
    std::filesystem::create_directories(kDir);
    const std::string path = kDir + "/" + name;
    csv::write_file(path, content);
    return path;
}

const char* kThreeRows =
    "AP001,AP002,LONGITUDE,LATITUDE,FLOOR,BUILDINGID\n"
    "-60,100,1.5,2.5,0,0\n"
    "100,-75,3,4,1,0\n"
    "-80,-40,5.5,6,3,1\n";

}  // namespace

TEST_CASE("load_dataset parses the canonical layout") {
    auto path = write_tmp("three.csv", kThreeRows);
    DatasetSchema schema;
    RadioMap rm = load_dataset(path, schema);
    CHECK(rm.m() == 3);
    CHECK(rm.n() == 2);
    CHECK(rm.representation == Representation::raw_dbm);
    CHECK(rm.rss_at(0, 0) == -60.0);
    CHECK_FALSE(rm.is_detected(0, 1));
    CHECK_FALSE(rm.is_detected(1, 0));
    CHECK(rm.is_detected(2, 1));
    // z derived from dense floor index x default height 4 m
    CHECK(rm.labels.z[0] == 0.0);
    CHECK(rm.labels.z[1] == 4.0);
    CHECK(rm.labels.z[2] == 8.0);
}

TEST_CASE("floor labels {1,3,5} re-index densely with the mapping recorded") {
    auto path = write_tmp("floors.csv",
                          "AP001,LONGITUDE,LATITUDE,FLOOR,BUILDINGID\n"
                          "-50,0,0,5,7\n"
                          "-51,1,0,1,7\n"
                          "-52,2,0,3,9\n"
                          "-53,3,0,1,9\n");
    RadioMap rm = load_dataset(path, DatasetSchema{});
    CHECK(rm.labels.floor == std::vector<int>{2, 0, 1, 0});
    CHECK(rm.labels.floor_values == std::vector<long long>{1, 3, 5});
    CHECK(rm.labels.building == std::vector<int>{0, 0, 1, 1});
    CHECK(rm.labels.building_values == std::vector<long long>{7, 9});
    // partition preserved: same dense index iff same source label
    for (std::size_t i = 0; i < rm.m(); ++i)
        for (std::size_t j = 0; j < rm.m(); ++j)
            CHECK((rm.labels.floor[i] == rm.labels.floor[j]) ==
                  (rm.labels.floor_values[rm.labels.floor[i]] ==
                   rm.labels.floor_values[rm.labels.floor[j]]));
}

TEST_CASE("load_dataset error paths") {
    DatasetSchema schema;
    SUBCASE("missing column") {
        auto p = write_tmp("missing.csv",
                           "AP001,LONGITUDE,FLOOR,BUILDINGID\n-50,0,0,0\n");
        CHECK_THROWS_WITH_AS(static_cast<void>(load_dataset(p, schema)),
                             doctest::Contains("LATITUDE"), SchemaError);
    }
    SUBCASE("extra column") {
        auto p = write_tmp(
            "extra.csv",
            "AP001,LONGITUDE,LATITUDE,FLOOR,BUILDINGID,USERID\n-50,0,0,0,0,3\n");
        CHECK_THROWS_WITH_AS(static_cast<void>(load_dataset(p, schema)),
                             doctest::Contains("USERID"), SchemaError);
    }
    SUBCASE("non-numeric RSS cell carries row and column") {
        auto p = write_tmp("badcell.csv",
                           "AP001,AP002,LONGITUDE,LATITUDE,FLOOR,BUILDINGID\n"
                           "-50,-60,0,0,0,0\n"
                           "-50,abc,0,0,0,0\n");
        CHECK_THROWS_WITH_AS(static_cast<void>(load_dataset(p, schema)),
                             doctest::Contains("row 2"), ParseError);
    }
    SUBCASE("empty file") {
        auto p = write_tmp("empty.csv", "");
        CHECK_THROWS_AS(static_cast<void>(load_dataset(p, schema)), DomainError);
    }
    SUBCASE("header only") {
        auto p = write_tmp("headeronly.csv",
                           "AP001,LONGITUDE,LATITUDE,FLOOR,BUILDINGID\n");
        CHECK_THROWS_AS(static_cast<void>(load_dataset(p, schema)), DomainError);
    }
    SUBCASE("wrong AP count against explicit schema") {
        auto p = write_tmp("apcount.csv", kThreeRows);
        DatasetSchema s2;
        s2.n_aps = 5;
        CHECK_THROWS_AS(static_cast<void>(load_dataset(p, s2)), SchemaError);
    }
}

TEST_CASE("to_powed endpoints and clamping") {
    auto path = write_tmp("powed.csv",
                          "AP001,AP002,AP003,LONGITUDE,LATITUDE,FLOOR,BUILDINGID\n"
                          "-100,-50,100,0,0,0,0\n"
                          "-100,0,-50,0,0,0,0\n");
    RadioMap rm = load_dataset(path, DatasetSchema{});
    RadioMap p = to_powed(rm, M_E);
    CHECK(p.representation == Representation::powed);
    // RSS = min -> 0
    CHECK(p.rss_at(0, 0) == 0.0);
    // non-detected -> 0
    CHECK(p.rss_at(0, 2) == 0.0);
    // 0.5^e, evaluated independently at high precision
    CHECK(p.rss_at(0, 1) == doctest::Approx(0.151955223257913).epsilon(1e-12));
    // RSS = 0 dBm -> exactly 1 (second branch with numerator -min)
    CHECK(p.rss_at(1, 1) == 1.0);

    CHECK_THROWS_AS(static_cast<void>(to_powed(p, M_E)), InvalidStateError);
}

TEST_CASE("to_powed clamps corrupt positive-dBm cells to 1") {
    auto path = write_tmp("clamp.csv",
                          "AP001,AP002,LONGITUDE,LATITUDE,FLOOR,BUILDINGID\n"
                          "-90,7,0,0,0,0\n");
    RadioMap rm = load_dataset(path, DatasetSchema{});
    RadioMap p = to_powed(rm, M_E);
    CHECK(p.rss_at(0, 1) == 1.0);
    for (double v : p.rss) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("to_powed rejects an all-nonnegative map") {
    auto path = write_tmp("nonneg.csv",
                          "AP001,LONGITUDE,LATITUDE,FLOOR,BUILDINGID\n"
                          "5,0,0,0,0\n");
    RadioMap rm = load_dataset(path, DatasetSchema{});
    CHECK_THROWS_AS(static_cast<void>(to_powed(rm, M_E)), DomainError);
}

TEST_CASE("powed transform is monotone on detected values") {
    auto path = write_tmp("mono.csv",
                          "AP001,AP002,AP003,AP004,LONGITUDE,LATITUDE,FLOOR,"
                          "BUILDINGID\n"
                          "-97,-64,-31,-8,0,0,0,0\n");
    RadioMap rm = load_dataset(path, DatasetSchema{});
    RadioMap p = to_powed(rm, M_E);
    for (std::size_t j = 1; j < 4; ++j)
        CHECK(p.rss_at(0, j) > p.rss_at(0, j - 1));
}

TEST_CASE("load -> powed -> save -> load round-trips bit-exactly") {
    Rng rng(1234);
    std::string body = "AP001,AP002,AP003,LONGITUDE,LATITUDE,FLOOR,BUILDINGID\n";
    for (int i = 0; i < 25; ++i) {
        for (int j = 0; j < 3; ++j)
            body += rng.uniform() < 0.2
                        ? "100,"
                        : csv::format_double(-30.0 - 70.0 * rng.uniform()) + ",";
        body += csv::format_double(rng.uniform(0, 50)) + "," +
                csv::format_double(rng.uniform(0, 30)) + "," +
                std::to_string(static_cast<int>(rng.uniform_index(4))) + "," +
                std::to_string(static_cast<int>(rng.uniform_index(2))) + "\n";
    }
    auto path = write_tmp("roundtrip.csv", body);
    RadioMap rm = load_dataset(path, DatasetSchema{});
    RadioMap p = to_powed(rm, M_E);

    const std::string out1 = kDir + "/roundtrip_powed.csv";
    save_dataset(p, out1);
    DatasetSchema powed_schema;
    powed_schema.representation = Representation::powed;
    powed_schema.has_altitude = true;
    RadioMap p2 = load_dataset(out1, powed_schema);
    CHECK(p2.rss == p.rss);
    CHECK(p2.labels.x == p.labels.x);
    CHECK(p2.labels.z == p.labels.z);
    CHECK(p2.labels.floor == p.labels.floor);

    const std::string out2 = kDir + "/roundtrip_powed2.csv";
    save_dataset(p2, out2);
    CHECK(csv::read_file(out1) == csv::read_file(out2));
}

TEST_CASE("label scaler endpoints, midpoint, degenerate axis") {
    LabelSet labels;
    labels.x = {0.0, 10.0, 5.0};
    labels.y = {-4.0, 4.0, 0.0};
    labels.z = {2.0, 2.0, 2.0};
    labels.floor = {0, 0, 0};
    labels.building = {0, 0, 0};
    LabelScaler ls = fit_label_scaler(labels);

    auto s0 = ls.scale({0.0, -4.0, 2.0});
    CHECK(s0[0] == 0.0);
    CHECK(s0[1] == 0.0);
    CHECK(s0[2] == 0.0);  // degenerate axis maps to 0
    auto s1 = ls.scale({10.0, 4.0, 2.0});
    CHECK(s1[0] == 1.0);
    CHECK(s1[1] == 1.0);
    auto sm = ls.scale({5.0, 0.0, 2.0});
    CHECK(sm[0] == 0.5);
    CHECK(sm[1] == 0.5);
    auto u = ls.unscale({0.0, 1.0, 0.7});
    CHECK(u[0] == 0.0);
    CHECK(u[1] == 4.0);
    CHECK(u[2] == 2.0);  // degenerate axis unscales to min

    CHECK_THROWS_AS(static_cast<void>(ls.scale({std::nan(""), 0.0, 0.0})),
                    DomainError);
}

TEST_CASE("scale then unscale is the identity within 1e-9 on random points") {
    Rng rng(999);
    LabelSet labels;
    for (int i = 0; i < 40; ++i) {
        labels.x.push_back(rng.uniform(-300, 300));
        labels.y.push_back(rng.uniform(0, 80));
        labels.z.push_back(rng.uniform(-5, 25));
        labels.floor.push_back(0);
        labels.building.push_back(0);
    }
    LabelScaler ls = fit_label_scaler(labels);
    for (int t = 0; t < 100; ++t) {
        std::array<double, 3> v = {rng.uniform(-300, 300), rng.uniform(0, 80),
                                   rng.uniform(-5, 25)};
        auto back = ls.unscale(ls.scale(v));
        for (int k = 0; k < 3; ++k) {
            const double scale = std::max(1.0, std::abs(v[k]));
            CHECK(std::abs(back[k] - v[k]) / scale < 1e-9);
        }
    }
}

TEST_CASE("one_hot") {
    CHECK(one_hot(0, 3) == std::vector<double>{1, 0, 0});
    CHECK(one_hot(2, 3) == std::vector<double>{0, 0, 1});
    Rng rng(7);
    for (int t = 0; t < 20; ++t) {
        const int n = 1 + static_cast<int>(rng.uniform_index(8));
        const int i = static_cast<int>(rng.uniform_index((std::uint64_t)n));
        auto v = one_hot(i, n);
        double sum = 0.0;
        for (double e : v) sum += e;
        CHECK(sum == 1.0);
    }
    CHECK_THROWS_AS(static_cast<void>(one_hot(3, 3)), DomainError);
    CHECK_THROWS_AS(static_cast<void>(one_hot(-1, 3)), DomainError);
}

TEST_CASE("UJI-shaped header is accepted") {
    std::string header;
    for (int j = 1; j <= 520; ++j) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "WAP%03d,", j);
        header += buf;
    }
    header += "LONGITUDE,LATITUDE,FLOOR,BUILDINGID\n";
    std::string row;
    for (int j = 0; j < 520; ++j) row += "100,";
    row += "-7300.5,4864900.25,2,1\n";
    std::string row2;
    for (int j = 0; j < 520; ++j) row2 += (j % 7 == 0) ? "-65," : "100,";
    row2 += "-7310,4864890,0,0\n";
    auto path = write_tmp("uji_shaped.csv", header + row + row2);
    DatasetSchema schema;
    schema.ap_prefix = "WAP";
    RadioMap rm = load_dataset(path, schema);
    CHECK(rm.n() == 520);
    CHECK(rm.m() == 2);
}
