#include "surimi/augmentation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "surimi/csv.hpp"
#include "surimi/optimizer.hpp"

namespace surimi {

using nn::Activation;
using nn::LayerSpec;
using nn::NetworkSpec;
using nn::Padding;
using nn::Tensor;

const char* to_string(GanMethod m) {
    switch (m) {
        case GanMethod::M1: return "M1";
        case GanMethod::M2: return "M2";
        case GanMethod::M3: return "M3";
    }
    return "?";
}

GanMethod gan_method_from_string(const std::string& s) {
    if (s == "M1" || s == "m1") return GanMethod::M1;
    if (s == "M2" || s == "m2") return GanMethod::M2;
    if (s == "M3" || s == "m3") return GanMethod::M3;
    throw SchemaError("unknown cGAN method '" + s + "' (expected M1/M2/M3)");
}

NetworkSpec discriminator_spec(int n, int conditional_classes) {
    NetworkSpec s;
    s.input_shapes = {{n}, {}};
    s.nodes.push_back({LayerSpec::reshape({n, 1}), {nn::input_ref(0)}});      // 0
    s.nodes.push_back(
        {LayerSpec::embedding(conditional_classes, 50), {nn::input_ref(1)}}); // 1
    s.nodes.push_back({LayerSpec::dense(n, Activation::linear), {1}});        // 2
    s.nodes.push_back({LayerSpec::reshape({n, 1}), {2}});                     // 3
    s.nodes.push_back({LayerSpec::concat(), {0, 3}});                         // 4
    s.nodes.push_back({LayerSpec::conv1d(64, 3, Activation::leaky_relu,
                                         Padding::same), {4}});               // 5
    s.nodes.push_back({LayerSpec::dropout(0.4), {5}});                        // 6
    s.nodes.push_back({LayerSpec::conv1d(64, 3, Activation::leaky_relu,
                                         Padding::same), {6}});               // 7
    s.nodes.push_back({LayerSpec::dropout(0.4), {7}});                        // 8
    s.nodes.push_back({LayerSpec::flatten(), {8}});                           // 9
    s.nodes.push_back({LayerSpec::dense(1, Activation::sigmoid), {9}});       // 10
    return s;
}

NetworkSpec generator_spec(int n, int conditional_classes) {
    const int base = (n + 3) / 4;  // two stride-2 upsamplings reach >= n
    NetworkSpec s;
    s.input_shapes = {{n}, {}};
    s.nodes.push_back(
        {LayerSpec::dense(base, Activation::leaky_relu), {nn::input_ref(0)}}); // 0
    s.nodes.push_back({LayerSpec::reshape({base, 1}), {0}});                   // 1
    s.nodes.push_back(
        {LayerSpec::embedding(conditional_classes, 50), {nn::input_ref(1)}});  // 2
    s.nodes.push_back({LayerSpec::dense(base, Activation::linear), {2}});      // 3
    s.nodes.push_back({LayerSpec::reshape({base, 1}), {3}});                   // 4
    s.nodes.push_back({LayerSpec::concat(), {1, 4}});                          // 5
    s.nodes.push_back({LayerSpec::conv1d_transpose(
                           64, 3, Activation::leaky_relu, Padding::same, 2),
                       {5}});                                                  // 6
    s.nodes.push_back({LayerSpec::conv1d_transpose(
                           64, 3, Activation::leaky_relu, Padding::same, 2),
                       {6}});                                                  // 7
    s.nodes.push_back(
        {LayerSpec::conv1d(1, 3, Activation::sigmoid, Padding::same), {7}});   // 8
    s.nodes.push_back({LayerSpec::flatten(), {8}});                            // 9
    if (4 * base != n) s.nodes.push_back({LayerSpec::crop(n), {9}});
    return s;
}

CGan build_cgan(int n, int conditional_classes, std::uint64_t seed) {
    if (n < 4)
        throw DomainError("cGAN needs n >= 4 (generator upsampling undefined)");
    if (conditional_classes < 1)
        throw DomainError("cGAN needs at least one conditional class");
    CGan cgan;
    cgan.n = n;
    cgan.conditional_classes = conditional_classes;
    cgan.generator = nn::Network::build(generator_spec(n, conditional_classes),
                                        derive_seed(seed, "generator"));
    cgan.discriminator =
        nn::Network::build(discriminator_spec(n, conditional_classes),
                           derive_seed(seed, "discriminator"));
    return cgan;
}

Latent sample_latent(int count, int n, int conditional_classes,
                     std::uint64_t seed) {
    if (count < 1) throw DomainError("sample_latent: count must be >= 1");
    Rng rng(seed);
    Latent l;
    l.z = Tensor({count, n});
    for (double& v : l.z.data) v = rng.normal();
    l.labels = Tensor({count});
    for (double& v : l.labels.data)
        v = static_cast<double>(
            rng.uniform_index(static_cast<std::uint64_t>(conditional_classes)));
    return l;
}

double discriminator_step(CGan& cgan, const Tensor& fingerprints,
                          const Tensor& labels, const Tensor& targets,
                          double lr, nn::AdamState& state, Rng* dropout_rng) {
    auto params = cgan.discriminator.params();
    auto grads = cgan.discriminator.grads();
    cgan.discriminator.zero_grad();
    const Tensor out =
        cgan.discriminator.forward({&fingerprints, &labels}, true, dropout_rng);
    const double loss = nn::loss_value(nn::Loss::binary_ce, out, targets);
    cgan.discriminator.backward(nn::loss_grad(nn::Loss::binary_ce, out, targets));
    nn::adam_step(params, grads, state, lr);
    return loss;
}

namespace {

std::vector<std::vector<std::size_t>> partition_rows(const RadioMap& rm,
                                                     GanMethod method) {
    std::vector<std::vector<std::size_t>> parts;
    switch (method) {
        case GanMethod::M1:
            parts.resize(static_cast<std::size_t>(rm.labels.num_buildings()));
            for (std::size_t i = 0; i < rm.m(); ++i)
                parts[static_cast<std::size_t>(rm.labels.building[i])].push_back(i);
            break;
        case GanMethod::M2:
            parts.resize(static_cast<std::size_t>(rm.labels.num_floors()));
            for (std::size_t i = 0; i < rm.m(); ++i)
                parts[static_cast<std::size_t>(rm.labels.floor[i])].push_back(i);
            break;
        case GanMethod::M3:
            parts.resize(1);
            for (std::size_t i = 0; i < rm.m(); ++i) parts[0].push_back(i);
            break;
    }
    return parts;
}

int conditional_of(const RadioMap& rm, GanMethod method, std::size_t row) {
    return method == GanMethod::M2 ? rm.labels.building[row]
                                   : rm.labels.floor[row];
}

}  // namespace

std::vector<CGan> train_cgan(const RadioMap& rm, GanMethod method,
                             const GanTrainOptions& opts, std::uint64_t seed) {
    if (rm.representation != Representation::powed)
        throw InvalidStateError("train_cgan expects a powed radio map");
    if (opts.epochs < 1 || opts.batch_size < 1)
        throw DomainError("cGAN epochs and batch size must be >= 1");
    const int n = static_cast<int>(rm.n());
    const int classes = method == GanMethod::M2 ? rm.labels.num_buildings()
                                                : rm.labels.num_floors();

    auto parts = partition_rows(rm, method);
    std::vector<CGan> out;
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
        const auto& rows = parts[pi];
        if (rows.empty())
            throw DomainError("cGAN partition " + std::to_string(pi) +
                              " has no fingerprints");
        const std::uint64_t pseed = derive_seed(seed, "cgan-partition", pi);
        CGan cgan = build_cgan(n, classes, pseed);
        cgan.method = method;
        cgan.partition = static_cast<int>(pi);
        cgan.partition_rows = rows;

        const std::size_t m_p = rows.size();
        std::size_t half = static_cast<std::size_t>(opts.batch_size) / 2;
        std::size_t steps;
        if (m_p < static_cast<std::size_t>(opts.batch_size)) {
            log_warn("cGAN partition " + std::to_string(pi) + " has " +
                     std::to_string(m_p) + " rows, fewer than batch size " +
                     std::to_string(opts.batch_size) +
                     "; training on the full partition per step");
            half = m_p;
            steps = 1;
        } else {
            steps = m_p / static_cast<std::size_t>(opts.batch_size);
        }
        if (half == 0) half = 1;

        Rng data_rng(derive_seed(pseed, "data"));
        Rng latent_rng(derive_seed(pseed, "latent"));
        Rng dropout_rng(derive_seed(pseed, "dropout"));

        auto d_params = cgan.discriminator.params();
        auto d_grads = cgan.discriminator.grads();
        auto g_params = cgan.generator.params();
        auto g_grads = cgan.generator.grads();
        nn::AdamState d_state = nn::AdamState::for_params(d_params);
        nn::AdamState g_state = nn::AdamState::for_params(g_params);

        const int gen_batch = static_cast<int>(
            std::min<std::size_t>(static_cast<std::size_t>(opts.batch_size), 2 * half));

        for (int epoch = 0; epoch < opts.epochs; ++epoch) {
            const auto perm = data_rng.permutation(m_p);
            std::size_t cursor = 0;
            for (std::size_t step = 0; step < steps; ++step) {
                // discriminator: half real (label 1), half generated (label 0)
                const std::size_t take = std::min(half, m_p - cursor);
                std::vector<std::size_t> real_rows;
                for (std::size_t i = 0; i < take; ++i)
                    real_rows.push_back(rows[perm[cursor + i]]);
                cursor += take;
                if (cursor >= m_p) cursor = 0;

                const int nb = static_cast<int>(real_rows.size());
                Tensor dx({2 * nb, n});
                Tensor dl({2 * nb});
                Tensor dt({2 * nb, 1});
                for (int i = 0; i < nb; ++i) {
                    const std::size_t r = real_rows[static_cast<std::size_t>(i)];
                    for (int j = 0; j < n; ++j)
                        dx(i, j) = rm.rss[r * static_cast<std::size_t>(n) +
                                          static_cast<std::size_t>(j)];
                    dl(i) = conditional_of(rm, method, r);
                    dt(i, 0) = 1.0;
                }
                Latent lat = sample_latent(nb, n, classes, latent_rng.next_u64());
                const Tensor fake =
                    cgan.generator.forward({&lat.z, &lat.labels}, false, nullptr);
                for (int i = 0; i < nb; ++i) {
                    for (int j = 0; j < n; ++j) dx(nb + i, j) = fake(i, j);
                    dl(nb + i) = lat.labels(i);
                    dt(nb + i, 0) = 0.0;
                }
                const double d_loss = discriminator_step(
                    cgan, dx, dl, dt, opts.learning_rate, d_state, &dropout_rng);

                // generator through the frozen discriminator, target 1
                Latent glat =
                    sample_latent(gen_batch, n, classes, latent_rng.next_u64());
                cgan.generator.zero_grad();
                const Tensor gen_out =
                    cgan.generator.forward({&glat.z, &glat.labels}, true, nullptr);
                const Tensor d_out = cgan.discriminator.forward(
                    {&gen_out, &glat.labels}, true, &dropout_rng);
                Tensor ones({gen_batch, 1});
                ones.fill(1.0);
                const double g_loss =
                    nn::loss_value(nn::Loss::binary_ce, d_out, ones);
                const auto d_input_grads = cgan.discriminator.backward(
                    nn::loss_grad(nn::Loss::binary_ce, d_out, ones));
                cgan.generator.backward(d_input_grads[0]);
                nn::adam_step(g_params, g_grads, g_state, opts.learning_rate);

                if (!std::isfinite(d_loss) || !std::isfinite(g_loss))
                    throw NumericError("non-finite cGAN loss at epoch " +
                                       std::to_string(epoch + 1));
                cgan.d_loss_history.push_back(d_loss);
                cgan.g_loss_history.push_back(g_loss);
            }
        }
        out.push_back(std::move(cgan));
    }
    return out;
}

void SelectionConfig::validate() const {
    if (distances.empty()) throw DomainError("selection needs distances");
    double prev = 0.0;
    for (double d : distances) {
        if (d <= prev)
            throw DomainError("distances must be strictly positive ascending");
        prev = d;
    }
    if (candidates_per_iteration < 1)
        throw DomainError("candidates_per_iteration must be >= 1");
    if (iterations < 1) throw DomainError("iterations must be >= 1");
}

DistanceSelection select_by_distance(const std::vector<Position3>& candidates,
                                     const std::vector<Position3>& references,
                                     double dist) {
    if (references.empty())
        throw DomainError("selection has no reference positions");
    DistanceSelection sel;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_row = 0;
        for (std::size_t r = 0; r < references.size(); ++r) {
            const double dx = candidates[c].x - references[r].x;
            const double dy = candidates[c].y - references[r].y;
            const double dz = candidates[c].z - references[r].z;
            const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
            if (d < best) {
                best = d;
                best_row = r;
            }
        }
        if (best <= dist) {
            sel.accepted.push_back(static_cast<int>(c));
            sel.nearest_index.push_back(best_row);
            sel.nearest_distance.push_back(best);
        }
    }
    return sel;
}

AugmentedSet select_fingerprints(std::vector<CGan>& cgans,
                                 PositioningModel& model,
                                 const RadioMap& rm_train,
                                 const SelectionConfig& cfg,
                                 std::uint64_t seed) {
    cfg.validate();
    if (rm_train.m() == 0) throw DomainError("empty training set");
    if (cgans.empty()) throw DomainError("no trained cGANs");
    const int n = static_cast<int>(rm_train.n());
    for (const CGan& c : cgans)
        if (c.n != n)
            throw ShapeError("cGAN width does not match the radio map");

    AugmentedSet aug;
    aug.n = n;
    aug.labels.floor_values = rm_train.labels.floor_values;
    aug.labels.building_values = rm_train.labels.building_values;
    for (double d : cfg.distances) aug.per_distance_accepted.push_back({d, 0});

    std::set<std::vector<double>> seen;
    const std::uint64_t latent_root = derive_seed(seed, "selection-latent");

    for (std::size_t di = 0; di < cfg.distances.size(); ++di) {
        const double dist = cfg.distances[di];
        for (std::size_t ci = 0; ci < cgans.size(); ++ci) {
            CGan& cgan = cgans[ci];
            const bool whole = cfg.compare_whole_dataset;
            std::vector<Position3> references;
            std::vector<std::size_t> ref_rows;  // reference -> global row
            const std::size_t cmp_count =
                whole ? rm_train.m() : cgan.partition_rows.size();
            if (cmp_count == 0)
                throw DomainError("selection has no comparison rows");
            for (std::size_t q = 0; q < cmp_count; ++q) {
                const std::size_t r = whole ? q : cgan.partition_rows[q];
                references.push_back({rm_train.labels.x[r], rm_train.labels.y[r],
                                      rm_train.labels.z[r]});
                ref_rows.push_back(r);
            }

            for (int iter = 0; iter < cfg.iterations; ++iter) {
                std::uint64_t s = derive_seed(latent_root, "p", ci);
                if (cfg.fresh_per_distance) s = derive_seed(s, "d", di);
                s = derive_seed(s, "i", static_cast<std::uint64_t>(iter));

                Latent lat = sample_latent(cfg.candidates_per_iteration, n,
                                           cgan.conditional_classes, s);
                const Tensor fps =
                    cgan.generator.forward({&lat.z, &lat.labels}, false, nullptr);
                std::vector<double> flat = fps.data;
                const auto preds = predict(
                    model, flat,
                    static_cast<std::size_t>(cfg.candidates_per_iteration));
                aug.candidates_evaluated += cfg.candidates_per_iteration;

                std::vector<Position3> cand;
                cand.reserve(preds.size());
                for (const auto& p : preds) cand.push_back({p.x, p.y, p.z});
                const DistanceSelection sel =
                    select_by_distance(cand, references, dist);

                for (std::size_t a = 0; a < sel.accepted.size(); ++a) {
                    const int c = sel.accepted[a];
                    const PredictedLabels& p = preds[static_cast<std::size_t>(c)];
                    aug.accepted_before_dedupe += 1;
                    aug.per_distance_accepted[di].second += 1;

                    std::vector<double> row(
                        flat.begin() + static_cast<long>(c) * n,
                        flat.begin() + static_cast<long>(c + 1) * n);
                    if (cfg.dedupe && !seen.insert(row).second) continue;

                    aug.fingerprints.insert(aug.fingerprints.end(), row.begin(),
                                            row.end());
                    aug.labels.x.push_back(p.x);
                    aug.labels.y.push_back(p.y);
                    aug.labels.z.push_back(p.z);
                    aug.labels.floor.push_back(p.floor);
                    aug.labels.building.push_back(p.building);
                    const int cond = static_cast<int>(lat.labels(c));
                    aug.conditional_label.push_back(cond);
                    aug.accepted_distance.push_back(dist);
                    aug.seed_fingerprint_index.push_back(
                        static_cast<long long>(ref_rows[sel.nearest_index[a]]));
                    const int predicted_class =
                        cgan.method == GanMethod::M2 ? p.building : p.floor;
                    aug.label_mismatch.push_back(predicted_class != cond ? 1 : 0);
                }
            }
        }
    }
    return aug;
}

RadioMap augment_radiomap(const RadioMap& rm_train, const AugmentedSet& augset) {
    if (rm_train.representation != Representation::powed)
        throw InvalidStateError(
            "augment_radiomap mixes synthetic powed rows with a raw map");
    if (augset.size() > 0 && augset.n != static_cast<int>(rm_train.n()))
        throw ShapeError("augmented set width does not match the radio map");

    RadioMap out = rm_train;
    out.synthetic.assign(rm_train.m(), 0);
    out.rss.insert(out.rss.end(), augset.fingerprints.begin(),
                   augset.fingerprints.end());
    for (std::size_t i = 0; i < augset.size(); ++i) {
        out.labels.x.push_back(augset.labels.x[i]);
        out.labels.y.push_back(augset.labels.y[i]);
        out.labels.z.push_back(augset.labels.z[i]);
        out.labels.floor.push_back(augset.labels.floor[i]);
        out.labels.building.push_back(augset.labels.building[i]);
        out.synthetic.push_back(1);
    }
    out.validate();
    return out;
}

void save_augmented_csv(const RadioMap& rm_train, const AugmentedSet& augset,
                        const std::string& path) {
    std::string out;
    for (std::size_t j = 0; j < rm_train.n(); ++j) {
        out += rm_train.ap_ids[j];
        out += ',';
    }
    out += "LONGITUDE,LATITUDE,ALTITUDE,FLOOR,BUILDINGID,SOURCE,CONDLABEL,"
           "SEEDIDX,DIST,MISMATCH\n";
    const auto& L = rm_train.labels;
    for (std::size_t i = 0; i < rm_train.m(); ++i) {
        for (std::size_t j = 0; j < rm_train.n(); ++j) {
            out += csv::format_double(rm_train.rss_at(i, j));
            out += ',';
        }
        out += csv::format_double(L.x[i]) + ',' + csv::format_double(L.y[i]) +
               ',' + csv::format_double(L.z[i]) + ',' +
               std::to_string(L.floor_values[L.floor[i]]) + ',' +
               std::to_string(L.building_values[L.building[i]]) +
               ",real,-1,-1,-1,0\n";
    }
    const auto& A = augset.labels;
    for (std::size_t i = 0; i < augset.size(); ++i) {
        for (int j = 0; j < augset.n; ++j) {
            out += csv::format_double(
                augset.fingerprints[i * static_cast<std::size_t>(augset.n) +
                                    static_cast<std::size_t>(j)]);
            out += ',';
        }
        out += csv::format_double(A.x[i]) + ',' + csv::format_double(A.y[i]) +
               ',' + csv::format_double(A.z[i]) + ',' +
               std::to_string(A.floor_values[A.floor[i]]) + ',' +
               std::to_string(A.building_values[A.building[i]]) + ",synthetic," +
               std::to_string(augset.conditional_label[i]) + ',' +
               std::to_string(augset.seed_fingerprint_index[i]) + ',' +
               csv::format_double(augset.accepted_distance[i]) + ',' +
               std::to_string(static_cast<int>(augset.label_mismatch[i])) + "\n";
    }
    csv::write_file(path, out);
}

}  // namespace surimi
