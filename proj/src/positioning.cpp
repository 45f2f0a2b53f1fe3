#include "surimi/positioning.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "surimi/csv.hpp"

namespace surimi {

using nn::Activation;
using nn::LayerSpec;
using nn::NetworkSpec;
using nn::Padding;

void TrainOverrides::apply(nn::TrainConfig& cfg) const {
    if (epochs) cfg.epochs = *epochs;
    if (batch_size) cfg.batch_size = *batch_size;
    if (learning_rate) cfg.learning_rate = *learning_rate;
    if (patience) {
        if (*patience <= 0)
            cfg.early_stopping_patience.reset();
        else
            cfg.early_stopping_patience = *patience;
    }
    if (validation_fraction) cfg.validation_fraction = *validation_fraction;
}

Table1Models build_table1_models(int n, int cf, int cb) {
    if (n < 1 || cf < 1 || cb < 1)
        throw DomainError("build_table1_models: n, CF, CB must be >= 1");

    Table1Models out;

    out.position.spec = NetworkSpec::sequential(
        {n, 1}, {LayerSpec::conv1d(8, 1, Activation::elu),
                 LayerSpec::max_pool1d(1), LayerSpec::dropout(0.5),
                 LayerSpec::conv1d(8, 1, Activation::elu, Padding::same),
                 LayerSpec::max_pool1d(1), LayerSpec::dropout(0.5),
                 LayerSpec::flatten(), LayerSpec::lstm(40, Activation::elu),
                 LayerSpec::dense(3, Activation::elu)});
    out.position.config.learning_rate = 0.0005;
    out.position.config.epochs = 100;
    out.position.config.batch_size = 256;
    out.position.config.loss = nn::Loss::mse;
    out.position.config.early_stopping_patience = 5;

    out.floor.spec = NetworkSpec::sequential(
        {n, 1}, {LayerSpec::conv1d(16, 1, Activation::relu),
                 LayerSpec::max_pool1d(2), LayerSpec::dropout(0.5),
                 LayerSpec::conv1d(32, 1, Activation::relu, Padding::same),
                 LayerSpec::max_pool1d(1), LayerSpec::dropout(0.5),
                 LayerSpec::flatten(), LayerSpec::lstm(50, Activation::relu),
                 LayerSpec::dense(cf, Activation::softmax)});
    out.floor.config.learning_rate = 0.0001;
    out.floor.config.epochs = 100;
    out.floor.config.batch_size = 100;
    out.floor.config.loss = nn::Loss::categorical_ce;
    out.floor.config.early_stopping_patience = 5;

    if (cb > 1) {
        ModelPlan building;
        building.spec = NetworkSpec::sequential(
            {n, 1}, {LayerSpec::conv1d(16, 1, Activation::relu),
                     LayerSpec::max_pool1d(2), LayerSpec::dropout(0.5),
                     LayerSpec::flatten(), LayerSpec::lstm(40, Activation::relu),
                     LayerSpec::dense(cb, Activation::softmax)});
        building.config.learning_rate = 0.0001;
        building.config.epochs = 100;
        building.config.batch_size = 100;
        building.config.loss = nn::Loss::categorical_ce;
        building.config.early_stopping_patience = 5;
        out.building = std::move(building);
    }
    return out;
}

int PositioningModel::input_width() const {
    return position_net.spec().input_shapes[0][0];
}

namespace {

nn::Tensor features_tensor(const std::vector<double>& fingerprints,
                           std::size_t rows, int n) {
    if (fingerprints.size() != rows * static_cast<std::size_t>(n))
        throw ShapeError("fingerprint matrix is not rows x n");
    nn::Tensor t({static_cast<int>(rows), n, 1});
    t.data = fingerprints;
    return t;
}

nn::Tensor features_tensor(const RadioMap& rm) {
    return features_tensor(rm.rss, rm.m(), static_cast<int>(rm.n()));
}

int argmax_row(const nn::Tensor& t, int row) {
    int best = 0;
    for (int c = 1; c < t.dim(1); ++c)
        if (t(row, c) > t(row, best)) best = c;  // ties keep the lowest index
    return best;
}

}  // namespace

PositioningModel train_positioning(const RadioMap& rm_train, std::uint64_t seed,
                                   const TrainOverrides& overrides) {
    if (rm_train.representation != Representation::powed)
        throw InvalidStateError("train_positioning expects a powed radio map");
    rm_train.validate();

    const int n = static_cast<int>(rm_train.n());
    const int cf = rm_train.labels.num_floors();
    const int cb = rm_train.labels.num_buildings();
    const std::size_t m = rm_train.m();

    Table1Models plans = build_table1_models(n, cf, cb);
    overrides.apply(plans.position.config);
    overrides.apply(plans.floor.config);
    if (plans.building) overrides.apply(plans.building->config);

    PositioningModel model;
    model.scaler = fit_label_scaler(rm_train.labels);
    model.cf = cf;
    model.cb = cb;
    model.floor_values = rm_train.labels.floor_values;
    model.building_values = rm_train.labels.building_values;
    model.train_fingerprint = radiomap_fingerprint(rm_train);
    model.seed = seed;

    const nn::Tensor inputs = features_tensor(rm_train);

    // scaled coordinate targets
    nn::Tensor pos_targets({static_cast<int>(m), 3});
    for (std::size_t i = 0; i < m; ++i) {
        const auto s = model.scaler.scale(
            {rm_train.labels.x[i], rm_train.labels.y[i], rm_train.labels.z[i]});
        for (int k = 0; k < 3; ++k) pos_targets(static_cast<int>(i), k) = s[k];
    }
    nn::Tensor floor_targets({static_cast<int>(m), cf});
    for (std::size_t i = 0; i < m; ++i)
        floor_targets(static_cast<int>(i), rm_train.labels.floor[i]) = 1.0;

    model.position_net =
        nn::Network::build(plans.position.spec, derive_seed(seed, "position"));
    plans.position.config.seed = derive_seed(seed, "position-train");
    model.position_history =
        nn::train(model.position_net, inputs, pos_targets, plans.position.config);

    model.floor_net =
        nn::Network::build(plans.floor.spec, derive_seed(seed, "floor"));
    plans.floor.config.seed = derive_seed(seed, "floor-train");
    model.floor_history =
        nn::train(model.floor_net, inputs, floor_targets, plans.floor.config);

    if (plans.building) {
        nn::Tensor building_targets({static_cast<int>(m), cb});
        for (std::size_t i = 0; i < m; ++i)
            building_targets(static_cast<int>(i), rm_train.labels.building[i]) =
                1.0;
        model.building_net =
            nn::Network::build(plans.building->spec, derive_seed(seed, "building"));
        plans.building->config.seed = derive_seed(seed, "building-train");
        model.building_history = nn::train(*model.building_net, inputs,
                                           building_targets,
                                           plans.building->config);
    }
    return model;
}

std::vector<PredictedLabels> predict(PositioningModel& model,
                                     const std::vector<double>& fingerprints,
                                     std::size_t rows) {
    const int n = model.input_width();
    const nn::Tensor inputs = features_tensor(fingerprints, rows, n);

    const nn::Tensor pos = model.position_net.forward(inputs);
    const nn::Tensor floor = model.floor_net.forward(inputs);
    nn::Tensor building;
    if (model.building_net) building = model.building_net->forward(inputs);

    std::vector<PredictedLabels> out(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        const int r = static_cast<int>(i);
        PredictedLabels& p = out[i];
        const auto xyz =
            model.scaler.unscale({pos(r, 0), pos(r, 1), pos(r, 2)});
        p.x = xyz[0];
        p.y = xyz[1];
        p.z = xyz[2];
        p.floor_probs.resize(static_cast<std::size_t>(model.cf));
        for (int c = 0; c < model.cf; ++c)
            p.floor_probs[static_cast<std::size_t>(c)] = floor(r, c);
        p.floor = argmax_row(floor, r);
        if (model.building_net) {
            p.building_probs.resize(static_cast<std::size_t>(model.cb));
            for (int c = 0; c < model.cb; ++c)
                p.building_probs[static_cast<std::size_t>(c)] = building(r, c);
            p.building = argmax_row(building, r);
        } else {
            p.building_probs = {1.0};
            p.building = 0;
        }
    }
    return out;
}

std::vector<PredictedLabels> predict(PositioningModel& model, const RadioMap& rm) {
    if (rm.representation != Representation::powed)
        throw InvalidStateError("predict expects powed fingerprints");
    if (static_cast<int>(rm.n()) != model.input_width())
        throw ShapeError("fingerprint width " + std::to_string(rm.n()) +
                         " does not match model input " +
                         std::to_string(model.input_width()));
    return predict(model, rm.rss, rm.m());
}

// ---------------------------------------------------------------------------
// bundle io

namespace {

nlohmann::json history_to_json(const nn::TrainHistory& h) {
    nlohmann::json j;
    j["train_loss"] = h.train_loss;
    j["val_loss"] = h.val_loss;
    j["best_epoch"] = h.best_epoch;
    j["epochs_run"] = h.epochs_run;
    return j;
}

nn::TrainHistory history_from_json(const nlohmann::json& j) {
    nn::TrainHistory h;
    h.train_loss = j.value("train_loss", std::vector<double>{});
    h.val_loss = j.value("val_loss", std::vector<double>{});
    h.best_epoch = j.value("best_epoch", -1);
    h.epochs_run = j.value("epochs_run", 0);
    return h;
}

}  // namespace

void save_bundle(const PositioningModel& model, const std::string& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["schema_version"] = 1;
    manifest["format"] = "surimi-bundle";
    manifest["cf"] = model.cf;
    manifest["cb"] = model.cb;
    manifest["floor_values"] = model.floor_values;
    manifest["building_values"] = model.building_values;
    manifest["train_fingerprint"] = hex64(model.train_fingerprint);
    manifest["seed"] = model.seed;
    manifest["scaler"] = {{"mins", model.scaler.mins}, {"maxs", model.scaler.maxs}};
    manifest["history"] = {{"position", history_to_json(model.position_history)},
                           {"floor", history_to_json(model.floor_history)},
                           {"building", history_to_json(model.building_history)}};
    csv::write_file(dir + "/bundle.json", manifest.dump(2) + "\n");

    const_cast<nn::Network&>(model.position_net).save(dir + "/position", {});
    const_cast<nn::Network&>(model.floor_net).save(dir + "/floor", {});
    if (model.building_net)
        const_cast<nn::Network&>(*model.building_net).save(dir + "/building", {});
}

PositioningModel load_bundle(const std::string& dir) {
    nlohmann::json manifest =
        nlohmann::json::parse(csv::read_file(dir + "/bundle.json"));
    if (manifest.value("format", "") != "surimi-bundle")
        throw SchemaError(dir + "/bundle.json is not a model bundle");
    PositioningModel model;
    model.cf = manifest.at("cf").get<int>();
    model.cb = manifest.at("cb").get<int>();
    model.floor_values =
        manifest.at("floor_values").get<std::vector<long long>>();
    model.building_values =
        manifest.at("building_values").get<std::vector<long long>>();
    model.train_fingerprint =
        std::stoull(manifest.at("train_fingerprint").get<std::string>(), nullptr,
                    16);
    model.seed = manifest.at("seed").get<std::uint64_t>();
    model.scaler.mins = manifest.at("scaler").at("mins");
    model.scaler.maxs = manifest.at("scaler").at("maxs");
    model.position_history =
        history_from_json(manifest.at("history").at("position"));
    model.floor_history = history_from_json(manifest.at("history").at("floor"));
    model.building_history =
        history_from_json(manifest.at("history").at("building"));
    model.position_net = nn::Network::load(dir + "/position");
    model.floor_net = nn::Network::load(dir + "/floor");
    if (model.cb > 1) model.building_net = nn::Network::load(dir + "/building");
    return model;
}

}  // namespace surimi
