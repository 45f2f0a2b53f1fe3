#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "surimi/evaluation.hpp"
#include "surimi/positioning.hpp"
#include "surimi/synthgen.hpp"
#include "testutil.hpp"

using namespace surimi;

TEST_CASE("table-1 model widths for a UJI-shaped problem") {
    auto plans = build_table1_models(520, 5, 3);
    CHECK(plans.position.spec.input_shapes[0] == nn::Shape{520, 1});
    CHECK(plans.position.spec.nodes.back().spec.units == 3);
    CHECK(plans.floor.spec.nodes.back().spec.units == 5);
    REQUIRE(plans.building.has_value());
    CHECK(plans.building->spec.nodes.back().spec.units == 3);
    // training rows of Table I
    CHECK(plans.position.config.learning_rate == 0.0005);
    CHECK(plans.position.config.batch_size == 256);
    CHECK(plans.floor.config.learning_rate == 0.0001);
    CHECK(plans.floor.config.batch_size == 100);
    CHECK(plans.position.config.epochs == 100);
    CHECK(plans.position.config.early_stopping_patience == 5);
}

TEST_CASE("single-building problems omit the building net") {
    auto plans = build_table1_models(16, 3, 1);
    CHECK_FALSE(plans.building.has_value());
}

TEST_CASE("position net parameter count matches a hand tally for n = 4") {
    auto plans = build_table1_models(4, 2, 1);
    nn::Network net = nn::Network::build(plans.position.spec, 1);
    // conv1d(8,k=1,Cin=1): 1*1*8 + 8
    const std::size_t conv1 = 8 + 8;
    // conv1d(8,k=1,Cin=8,same): 1*8*8 + 8
    const std::size_t conv2 = 64 + 8;
    // flatten width: 4*8 = 32 (pool sizes are 1)
    // lstm(40): Wx 32*160, Wh 40*160, b 160
    const std::size_t lstm = 32 * 160 + 40 * 160 + 160;
    // dense(3): 40*3 + 3
    const std::size_t dense = 123;
    CHECK(net.param_count() == conv1 + conv2 + lstm + dense);
}

namespace {

// five memorable fingerprints 10 m apart on a line
RadioMap toy_map() {
    RadioMap rm;
    rm.representation = Representation::powed;
    rm.ap_ids = {"AP1", "AP2", "AP3", "AP4"};
    const double rows[5][4] = {{0.9, 0.1, 0.1, 0.1},
                               {0.1, 0.9, 0.1, 0.1},
                               {0.1, 0.1, 0.9, 0.1},
                               {0.1, 0.1, 0.1, 0.9},
                               {0.9, 0.9, 0.1, 0.1}};
    for (int i = 0; i < 5; ++i) {
        rm.rss.insert(rm.rss.end(), rows[i], rows[i] + 4);
        rm.labels.x.push_back(10.0 * i);
        rm.labels.y.push_back(5.0 * (i % 2));
        rm.labels.z.push_back(0.0);
        rm.labels.floor.push_back(0);
        rm.labels.building.push_back(0);
    }
    rm.labels.floor_values = {0};
    rm.labels.building_values = {0};
    return rm;
}

}  // namespace

TEST_CASE("overfit sanity: memorizing a 5-point toy set") {
    RadioMap rm = toy_map();
    TrainOverrides ov;
    ov.epochs = 1500;
    ov.batch_size = 5;
    ov.learning_rate = 0.005;
    ov.patience = 0;  // disable early stopping
    PositioningModel model = train_positioning(rm, 11, ov);
    auto preds = predict(model, rm);
    auto err = positioning_errors(preds, rm.labels);
    CHECK(err.e2d < 10.0);  // below the 10 m point spacing
    CHECK(err.floor_hit == 100.0);
    CHECK(preds.size() == 5);
}

TEST_CASE("prediction is pure and checks widths") {
    RadioMap rm = toy_map();
    TrainOverrides ov;
    ov.epochs = 2;
    ov.patience = 0;
    PositioningModel model = train_positioning(rm, 3, ov);

    auto a = predict(model, rm);
    auto b = predict(model, rm);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].x == b[i].x);
        CHECK(a[i].floor == b[i].floor);
        CHECK(std::isfinite(a[i].x));
        CHECK(std::isfinite(a[i].z));
    }
    // single fingerprint in, single prediction out
    auto single = predict(model, rm.fingerprint(0), 1);
    CHECK(single.size() == 1);

    RadioMap wrong = rm;
    wrong.ap_ids.pop_back();
    for (std::size_t i = 0; i < 5; ++i) wrong.rss.pop_back();
    CHECK_THROWS_AS(static_cast<void>(predict(model, wrong)), ShapeError);

    // probability vectors sum to one; argmax consistency
    for (const auto& p : a) {
        double s = 0;
        for (double v : p.floor_probs) s += v;
        CHECK(std::abs(s - 1.0) < 1e-6);
        int best = 0;
        for (std::size_t c = 1; c < p.floor_probs.size(); ++c)
            if (p.floor_probs[c] > p.floor_probs[best]) best = static_cast<int>(c);
        CHECK(p.floor == best);
        CHECK(p.building == 0);
        CHECK(p.building_probs == std::vector<double>{1.0});
    }
}

TEST_CASE("training twice with one seed matches; raw input is rejected") {
    SynthConfig cfg;
    cfg.train_points = 80;
    cfg.test_points = 10;
    cfg.n_aps = 8;
    cfg.seed = 5;
    auto [train_raw, test_raw] = synth_generate(cfg);
    CHECK_THROWS_AS(static_cast<void>(train_positioning(train_raw, 1)),
                    InvalidStateError);

    RadioMap train = to_powed(train_raw, M_E);
    TrainOverrides ov;
    ov.epochs = 4;
    PositioningModel m1 = train_positioning(train, 9, ov);
    PositioningModel m2 = train_positioning(train, 9, ov);
    CHECK(m1.position_net.flat_params() == m2.position_net.flat_params());
    CHECK(m1.floor_net.flat_params() == m2.floor_net.flat_params());

    // loss histories are finite everywhere
    for (double l : m1.position_history.train_loss) CHECK(std::isfinite(l));
    for (double l : m1.position_history.val_loss) CHECK(std::isfinite(l));
    for (double l : m1.floor_history.train_loss) CHECK(std::isfinite(l));
}

TEST_CASE("unscale(scale(x)) inverse property holds on predictions") {
    RadioMap rm = toy_map();
    TrainOverrides ov;
    ov.epochs = 2;
    ov.patience = 0;
    PositioningModel model = train_positioning(rm, 3, ov);
    auto preds = predict(model, rm);
    for (const auto& p : preds) {
        const auto back = model.scaler.unscale(
            model.scaler.scale({p.x, p.y, p.z}));
        CHECK(back[0] == doctest::Approx(p.x).epsilon(1e-12));
        CHECK(back[1] == doctest::Approx(p.y).epsilon(1e-12));
    }
}

TEST_CASE("bundle save/load reproduces predictions exactly") {
    SynthConfig cfg;
    cfg.train_points = 60;
    cfg.test_points = 12;
    cfg.n_aps = 8;
    cfg.buildings = 2;
    cfg.seed = 6;
    auto [train_raw, test_raw] = synth_generate(cfg);
    RadioMap train = to_powed(train_raw, M_E);
    RadioMap test = to_powed(test_raw, M_E);
    TrainOverrides ov;
    ov.epochs = 3;
    PositioningModel model = train_positioning(train, 21, ov);

    const std::string dir = "/tmp/surimi_bundle_test";
    std::filesystem::remove_all(dir);
    save_bundle(model, dir);
    PositioningModel back = load_bundle(dir);
    CHECK(back.cf == model.cf);
    CHECK(back.cb == model.cb);
    CHECK(back.train_fingerprint == model.train_fingerprint);
    REQUIRE(back.building_net.has_value());

    auto p1 = predict(model, test);
    auto p2 = predict(back, test);
    for (std::size_t i = 0; i < p1.size(); ++i) {
        CHECK(p1[i].x == p2[i].x);
        CHECK(p1[i].y == p2[i].y);
        CHECK(p1[i].z == p2[i].z);
        CHECK(p1[i].floor == p2[i].floor);
        CHECK(p1[i].building == p2[i].building);
    }
}

TEST_CASE("fixture run reaches the floor-hit and relative-error bars") {
    // full Table-I defaults on the desk fixture
    SynthConfig cfg;
    auto [train_raw, test_raw] = synth_generate(cfg);
    RadioMap train = to_powed(train_raw, M_E);
    RadioMap test = to_powed(test_raw, M_E);
    PositioningModel model = train_positioning(train, 42);
    auto err = positioning_errors(predict(model, test), test.labels);
    auto kerr = positioning_errors(knn_predict(train, test, 1), test.labels);
    CHECK(err.floor_hit >= 95.0);
    CHECK(err.e2d <= 1.5 * kerr.e2d);
}
