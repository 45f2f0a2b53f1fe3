// surimi: radio-map augmentation pipeline front-end.
//
// Subcommands: synth, convert, train, augment, evaluate, export-coords.
// Exit codes: 0 ok, 2 schema/config error, 3 parse/numeric input error,
// 4 non-finite training loss, 5 no fingerprints accepted, 6 evaluation
// provenance error (mixed splits, empty test set).

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "surimi/augmentation.hpp"
#include "surimi/csv.hpp"
#include "surimi/evaluation.hpp"
#include "surimi/positioning.hpp"
#include "surimi/synthgen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace surimi;

namespace {

constexpr int kExitSchema = 2;
constexpr int kExitParse = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitNoAccepted = 5;
constexpr int kExitProvenance = 6;

struct RunConfig {
    std::string train_csv;
    std::string test_csv;
    DatasetSchema schema;  // for the converted (powed) CSVs
    double beta = M_E;
    TrainOverrides table1;
    GanMethod method = GanMethod::M3;
    GanTrainOptions gan;
    SelectionConfig selection;
    int knn_k = 1;
    bool knn_raw = false;
    std::string raw_train_csv;  // only needed when knn_raw is set
    std::string raw_test_csv;
    std::string out = "out";
    std::uint64_t seed = 1;
    json echo;  // parsed document, for manifests and reports

    static RunConfig load(const std::string& path);
};

RunConfig RunConfig::load(const std::string& path) {
    json j;
    try {
        j = json::parse(csv::read_file(path));
    } catch (const json::exception& e) {
        throw SchemaError("config " + path + ": " + e.what());
    }
    RunConfig cfg;
    cfg.echo = j;
    cfg.train_csv = j.value("train_csv", "");
    cfg.test_csv = j.value("test_csv", "");
    cfg.schema.has_altitude = true;
    cfg.schema.representation = Representation::powed;
    if (j.contains("schema"))
        cfg.schema = DatasetSchema::from_json_text(j["schema"].dump());
    cfg.beta = j.value("beta", M_E);
    if (j.contains("table1")) {
        const json& t = j["table1"];
        if (t.contains("epochs")) cfg.table1.epochs = t["epochs"].get<int>();
        if (t.contains("batch_size"))
            cfg.table1.batch_size = t["batch_size"].get<int>();
        if (t.contains("learning_rate"))
            cfg.table1.learning_rate = t["learning_rate"].get<double>();
        if (t.contains("patience")) cfg.table1.patience = t["patience"].get<int>();
        if (t.contains("validation_fraction"))
            cfg.table1.validation_fraction =
                t["validation_fraction"].get<double>();
    }
    if (j.contains("cgan")) {
        const json& g = j["cgan"];
        if (g.contains("method"))
            cfg.method = gan_method_from_string(g["method"].get<std::string>());
        cfg.gan.epochs = g.value("epochs", cfg.gan.epochs);
        cfg.gan.batch_size = g.value("batch_size", cfg.gan.batch_size);
        cfg.gan.learning_rate = g.value("learning_rate", cfg.gan.learning_rate);
    }
    if (j.contains("selection")) {
        const json& s = j["selection"];
        if (s.contains("distances"))
            cfg.selection.distances = s["distances"].get<std::vector<double>>();
        cfg.selection.candidates_per_iteration =
            s.value("candidates_per_iteration",
                    cfg.selection.candidates_per_iteration);
        cfg.selection.iterations =
            s.value("iterations", cfg.selection.iterations);
        cfg.selection.dedupe = s.value("dedupe", cfg.selection.dedupe);
        cfg.selection.fresh_per_distance =
            s.value("fresh_per_distance", cfg.selection.fresh_per_distance);
        cfg.selection.compare_whole_dataset = s.value(
            "compare_whole_dataset", cfg.selection.compare_whole_dataset);
    }
    if (j.contains("evaluation")) {
        const json& e = j["evaluation"];
        cfg.knn_k = e.value("k", cfg.knn_k);
        cfg.knn_raw = e.value("raw_dbm", cfg.knn_raw);
        cfg.raw_train_csv = e.value("raw_train_csv", "");
        cfg.raw_test_csv = e.value("raw_test_csv", "");
    }
    cfg.out = j.value("out", cfg.out);
    cfg.seed = j.value("seed", cfg.seed);
    return cfg;
}

void write_manifest(const RunConfig& cfg) {
    fs::create_directories(cfg.out);
    nlohmann::ordered_json m;
    m["surimi_version"] = kVersion;
    m["schema_versions"] = {{"bundle", 1}, {"network", 1}, {"report", 1}};
    m["config_hash"] = hex64(fnv1a64(cfg.echo.dump()));
    m["config"] = cfg.echo;
    csv::write_file(cfg.out + "/manifest.json", m.dump(2) + "\n");
}

RadioMap load_powed(const RunConfig& cfg, const std::string& path) {
    RadioMap rm = load_dataset(path, cfg.schema);
    if (rm.representation != Representation::powed)
        throw SchemaError(path + " is not a powed dataset (run convert first)");
    return rm;
}

void write_history_csv(const PositioningModel& model, const std::string& path) {
    std::string out = "net,epoch,train_loss,val_loss\n";
    auto emit = [&](const char* name, const nn::TrainHistory& h) {
        for (std::size_t e = 0; e < h.train_loss.size(); ++e) {
            out += std::string(name) + "," + std::to_string(e + 1) + "," +
                   csv::format_double(h.train_loss[e]) + ",";
            if (e < h.val_loss.size()) out += csv::format_double(h.val_loss[e]);
            out += "\n";
        }
    };
    emit("position", model.position_history);
    emit("floor", model.floor_history);
    if (model.building_net) emit("building", model.building_history);
    csv::write_file(path, out);
}

long long read_phi(const std::string& out_dir) {
    const std::string path = out_dir + "/augment_stats.json";
    if (!fs::exists(path)) return -1;
    json j = json::parse(csv::read_file(path));
    return j.value("phi", -1ll);
}

int cmd_synth(const SynthConfig& cfg, const std::string& out) {
    fs::create_directories(out);
    SynthWorld world = synth_generate_world(cfg);
    save_dataset(world.train, out + "/train_raw.csv");
    save_dataset(world.test, out + "/test_raw.csv");
    csv::write_file(out + "/synth_world.json",
                    synth_sidecar(cfg, world).dump(2) + "\n");
    std::cout << "wrote " << out << "/train_raw.csv (" << world.train.m()
              << " rows), test_raw.csv (" << world.test.m() << " rows)\n";
    return 0;
}

int cmd_convert(const std::string& input, const std::string& schema_path,
                const std::string& output, double beta) {
    DatasetSchema schema;
    if (!schema_path.empty()) schema = DatasetSchema::from_json_file(schema_path);
    RadioMap rm = load_dataset(input, schema);
    RadioMap powed = to_powed(rm, beta);
    save_dataset(powed, output);
    std::cout << "wrote " << output << " (" << powed.m() << " x " << powed.n()
              << ", powed beta=" << beta << ")\n";
    return 0;
}

int cmd_train(const RunConfig& cfg) {
    if (cfg.train_csv.empty())
        throw SchemaError("config needs train_csv for the train command");
    write_manifest(cfg);
    RadioMap train = load_powed(cfg, cfg.train_csv);
    PositioningModel model =
        train_positioning(train, derive_seed(cfg.seed, "positioning"),
                          cfg.table1);
    save_bundle(model, cfg.out + "/bundle");
    write_history_csv(model, cfg.out + "/history.csv");
    std::cout << "bundle written to " << cfg.out << "/bundle"
              << " (position epochs " << model.position_history.epochs_run
              << ", floor epochs " << model.floor_history.epochs_run << ")\n";
    return 0;
}

int cmd_augment(const RunConfig& cfg) {
    if (cfg.train_csv.empty())
        throw SchemaError("config needs train_csv for the augment command");
    RadioMap train = load_powed(cfg, cfg.train_csv);
    if (cfg.method == GanMethod::M1 && train.labels.num_buildings() < 2)
        throw SchemaError("method M1 trains per building and needs a "
                          "multi-building dataset");
    write_manifest(cfg);
    PositioningModel model = load_bundle(cfg.out + "/bundle");
    if (model.train_fingerprint != radiomap_fingerprint(train))
        throw ProvenanceError(
            "bundle was trained on different data than train_csv");

    auto gans =
        train_cgan(train, cfg.method, cfg.gan, derive_seed(cfg.seed, "cgan"));
    AugmentedSet aug = select_fingerprints(gans, model, train, cfg.selection,
                                           derive_seed(cfg.seed, "selection"));

    nlohmann::ordered_json stats;
    stats["phi"] = static_cast<long long>(aug.size());
    stats["candidates_evaluated"] = aug.candidates_evaluated;
    stats["accepted_before_dedupe"] = aug.accepted_before_dedupe;
    nlohmann::ordered_json per = nlohmann::ordered_json::array();
    for (const auto& [dist, count] : aug.per_distance_accepted)
        per.push_back({{"distance_m", dist}, {"accepted", count}});
    stats["per_distance"] = per;
    stats["method"] = to_string(cfg.method);
    csv::write_file(cfg.out + "/augment_stats.json", stats.dump(2) + "\n");

    for (const auto& [dist, count] : aug.per_distance_accepted)
        std::cout << "dist " << dist << " m: accepted " << count << "\n";
    std::cout << "phi = " << aug.size() << " (of " << aug.candidates_evaluated
              << " candidates)\n";
    if (aug.size() == 0) {
        std::cerr << "no fingerprints accepted at any threshold\n";
        return kExitNoAccepted;
    }

    save_augmented_csv(train, aug, cfg.out + "/augmented_provenance.csv");
    RadioMap merged = augment_radiomap(train, aug);
    save_dataset(merged, cfg.out + "/augmented.csv");

    PositioningModel retrained = train_positioning(
        merged, derive_seed(cfg.seed, "positioning-augmented"), cfg.table1);
    save_bundle(retrained, cfg.out + "/bundle_augmented");
    write_history_csv(retrained, cfg.out + "/history_augmented.csv");
    std::cout << "retrained bundle written to " << cfg.out
              << "/bundle_augmented\n";
    return 0;
}

int cmd_evaluate(const RunConfig& cfg) {
    if (cfg.test_csv.empty())
        throw SchemaError("config needs test_csv for the evaluate command");
    write_manifest(cfg);
    RadioMap train = load_powed(cfg, cfg.train_csv);
    RadioMap test = load_powed(cfg, cfg.test_csv);
    const std::uint64_t test_fp = radiomap_fingerprint(test);

    std::vector<SystemEval> systems;
    {
        SystemEval knn;
        knn.name = cfg.knn_k == 1 ? "1-NN" : std::to_string(cfg.knn_k) + "-NN";
        if (cfg.knn_raw) {
            if (cfg.raw_train_csv.empty() || cfg.raw_test_csv.empty())
                throw SchemaError(
                    "raw-dBm k-NN needs evaluation.raw_train_csv and "
                    "evaluation.raw_test_csv");
            DatasetSchema raw_schema = cfg.schema;
            raw_schema.representation = Representation::raw_dbm;
            RadioMap rtrain = load_dataset(cfg.raw_train_csv, raw_schema);
            RadioMap rtest = load_dataset(cfg.raw_test_csv, raw_schema);
            knn.errors = positioning_errors(knn_predict(rtrain, rtest, cfg.knn_k),
                                            test.labels);
        } else {
            knn.errors = positioning_errors(knn_predict(train, test, cfg.knn_k),
                                            test.labels);
        }
        knn.test_fingerprint = test_fp;
        systems.push_back(std::move(knn));
    }
    {
        PositioningModel model = load_bundle(cfg.out + "/bundle");
        SystemEval cnn;
        cnn.name = "CNN-LSTM";
        cnn.errors = positioning_errors(predict(model, test), test.labels);
        cnn.test_fingerprint = test_fp;
        systems.push_back(std::move(cnn));
    }
    if (fs::exists(cfg.out + "/bundle_augmented/bundle.json")) {
        PositioningModel model = load_bundle(cfg.out + "/bundle_augmented");
        SystemEval sur;
        sur.name = std::string("SURIMI-") + to_string(cfg.method);
        sur.errors = positioning_errors(predict(model, test), test.labels);
        sur.phi = read_phi(cfg.out);
        sur.test_fingerprint = test_fp;
        systems.push_back(std::move(sur));
    }

    EvalReport report = build_report(
        fs::path(cfg.train_csv).stem().string(), systems, cfg.echo, cfg.seed);
    csv::write_file(cfg.out + "/report.json", report.to_json().dump(2) + "\n");
    csv::write_file(cfg.out + "/report.txt", report.to_text_table());
    std::cout << report.to_text_table();
    return 0;
}

int cmd_export_coords(const std::string& augmented_csv,
                      const std::string& output,
                      std::optional<long long> building,
                      std::optional<long long> floor) {
    const auto lines = csv::read_lines(augmented_csv);
    if (lines.empty()) throw DomainError("empty provenance CSV");
    const auto header = csv::split_line(lines[0]);
    auto col = [&](const std::string& name) {
        for (std::size_t c = 0; c < header.size(); ++c)
            if (header[c] == name) return c;
        throw SchemaError("provenance CSV lacks column " + name);
    };
    const std::size_t cx = col("LONGITUDE"), cy = col("LATITUDE"),
                      cf = col("FLOOR"), cb = col("BUILDINGID"),
                      cs = col("SOURCE");
    std::string out = "X,Y,FLOOR,BUILDING,SOURCE\n";
    std::size_t kept = 0;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto cells = csv::split_line(lines[i]);
        const long long f = std::stoll(cells[cf]);
        const long long b = std::stoll(cells[cb]);
        if (building && *building != b) continue;
        if (floor && *floor != f) continue;
        out += cells[cx] + "," + cells[cy] + "," + cells[cf] + "," + cells[cb] +
               "," + cells[cs] + "\n";
        ++kept;
    }
    csv::write_file(output, out);
    std::cout << "wrote " << kept << " coordinate rows to " << output << "\n";
    return 0;
}

int dispatch(int argc, char** argv) {
    CLI::App app{"SURIMI radio-map augmentation pipeline"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic fixture");
    SynthConfig synth_cfg;
    std::string synth_out = "out";
    std::string synth_config_path;
    synth->add_option("--config", synth_config_path, "synth config JSON");
    synth->add_option("--out", synth_out, "output directory");
    synth->add_option("--n-aps", synth_cfg.n_aps);
    synth->add_option("--floors", synth_cfg.floors);
    synth->add_option("--buildings", synth_cfg.buildings);
    synth->add_option("--train-points", synth_cfg.train_points);
    synth->add_option("--test-points", synth_cfg.test_points);
    synth->add_option("--noise-std", synth_cfg.noise_std_db);
    synth->add_option("--seed", synth_cfg.seed);

    // convert
    auto* convert = app.add_subcommand("convert", "raw CSV to powed CSV");
    std::string conv_in, conv_schema, conv_out;
    double conv_beta = M_E;
    convert->add_option("--input", conv_in)->required();
    convert->add_option("--schema", conv_schema, "dataset schema JSON");
    convert->add_option("--output", conv_out)->required();
    convert->add_option("--beta", conv_beta, "powed exponent (default e)");

    // config-driven commands
    std::string config_path;
    std::optional<std::uint64_t> seed_override;
    std::optional<std::string> out_override, method_override;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "run config JSON")->required();
        cmd->add_option("--seed", seed_override, "override config seed");
        cmd->add_option("--out", out_override, "override output directory");
    };
    auto* train = app.add_subcommand("train", "train the positioning bundle");
    add_common(train);
    auto* augment =
        app.add_subcommand("augment", "cGAN augmentation and retraining");
    add_common(augment);
    augment->add_option("--method", method_override, "M1 / M2 / M3");
    auto* evaluate =
        app.add_subcommand("evaluate", "baseline-vs-models report");
    add_common(evaluate);
    evaluate->add_option("--method", method_override,
                         "method label for the SURIMI row");

    // export-coords
    auto* expc =
        app.add_subcommand("export-coords", "plot data from a provenance CSV");
    std::string exp_aug, exp_out;
    std::optional<long long> exp_building, exp_floor;
    expc->add_option("--augmented", exp_aug, "augmented provenance CSV")
        ->required();
    expc->add_option("--output", exp_out)->required();
    expc->add_option("--building", exp_building, "filter by source building id");
    expc->add_option("--floor", exp_floor, "filter by source floor id");

    CLI11_PARSE(app, argc, argv);

    if (synth->parsed()) {
        if (!synth_config_path.empty()) {
            json j = json::parse(csv::read_file(synth_config_path));
            SynthConfig from_file = SynthConfig::from_json(j);
            // explicit flags win over file values
            if (synth->count("--n-aps") == 0) synth_cfg.n_aps = from_file.n_aps;
            if (synth->count("--floors") == 0)
                synth_cfg.floors = from_file.floors;
            if (synth->count("--buildings") == 0)
                synth_cfg.buildings = from_file.buildings;
            if (synth->count("--train-points") == 0)
                synth_cfg.train_points = from_file.train_points;
            if (synth->count("--test-points") == 0)
                synth_cfg.test_points = from_file.test_points;
            if (synth->count("--noise-std") == 0)
                synth_cfg.noise_std_db = from_file.noise_std_db;
            if (synth->count("--seed") == 0) synth_cfg.seed = from_file.seed;
            synth_cfg.area_x = from_file.area_x;
            synth_cfg.area_y = from_file.area_y;
            synth_cfg.building_gap = from_file.building_gap;
            synth_cfg.floor_height = from_file.floor_height;
            synth_cfg.tx_power_dbm = from_file.tx_power_dbm;
            synth_cfg.path_loss_exponent = from_file.path_loss_exponent;
            synth_cfg.floor_attenuation_db = from_file.floor_attenuation_db;
            synth_cfg.detection_threshold_dbm =
                from_file.detection_threshold_dbm;
        }
        return cmd_synth(synth_cfg, synth_out);
    }
    if (convert->parsed())
        return cmd_convert(conv_in, conv_schema, conv_out, conv_beta);
    if (expc->parsed())
        return cmd_export_coords(exp_aug, exp_out, exp_building, exp_floor);

    RunConfig cfg = RunConfig::load(config_path);
    if (seed_override) cfg.seed = *seed_override;
    if (out_override) cfg.out = *out_override;
    if (method_override) cfg.method = gan_method_from_string(*method_override);

    if (train->parsed()) return cmd_train(cfg);
    if (augment->parsed()) return cmd_augment(cfg);
    if (evaluate->parsed()) return cmd_evaluate(cfg);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    const bool evaluating = argc > 1 && std::string(argv[1]) == "evaluate";
    try {
        return dispatch(argc, argv);
    } catch (const SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitSchema;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitParse;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const ProvenanceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitProvenance;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return evaluating ? kExitProvenance : kExitParse;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
