#ifndef SURIMI_AUGMENTATION_HPP
#define SURIMI_AUGMENTATION_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "surimi/network.hpp"
#include "surimi/optimizer.hpp"
#include "surimi/positioning.hpp"
#include "surimi/radiomap.hpp"

namespace surimi {

/// cGAN training scope: per building with floor condition (M1), per floor
/// with building condition (M2), whole dataset with floor condition (M3).
enum class GanMethod { M1, M2, M3 };

const char* to_string(GanMethod m);
GanMethod gan_method_from_string(const std::string& s);

struct CGan {
    nn::Network generator;      // (latent n, class) -> fingerprint n
    nn::Network discriminator;  // (fingerprint n, class) -> (0,1)
    int n = 0;
    int conditional_classes = 1;
    GanMethod method = GanMethod::M3;
    int partition = 0;                      // building (M1) / floor (M2) / 0
    std::vector<std::size_t> partition_rows;  // training rows of the partition
    std::vector<double> d_loss_history;     // per step
    std::vector<double> g_loss_history;
};

/// Builds the paired generator/discriminator for width-n fingerprints.
CGan build_cgan(int n, int conditional_classes, std::uint64_t seed);

nn::NetworkSpec generator_spec(int n, int conditional_classes);
nn::NetworkSpec discriminator_spec(int n, int conditional_classes);

struct Latent {
    nn::Tensor z;       // (count, n) standard normal
    nn::Tensor labels;  // (count,) class indices
};

Latent sample_latent(int count, int n, int conditional_classes,
                     std::uint64_t seed);

struct GanTrainOptions {
    int epochs = 14;
    int batch_size = 64;
    double learning_rate = 0.0002;
};

/// Adversarial training: per batch one discriminator step on half real /
/// half generated rows, then one generator step through the frozen
/// discriminator with target 1.
std::vector<CGan> train_cgan(const RadioMap& rm, GanMethod method,
                             const GanTrainOptions& opts, std::uint64_t seed);

/// One discriminator update on an explicit batch; exposed for the
/// single-step descent property.
double discriminator_step(CGan& cgan, const nn::Tensor& fingerprints,
                          const nn::Tensor& labels, const nn::Tensor& targets,
                          double lr, nn::AdamState& state, Rng* dropout_rng);

struct SelectionConfig {
    std::vector<double> distances = {1, 2, 3, 4, 5};  // meters, ascending
    int candidates_per_iteration = 200;               // aleph_nfs
    int iterations = 10;                              // aleph_i
    bool dedupe = true;
    /// true: fresh candidates per (distance, iteration); false: the same
    /// per-iteration candidates are re-examined at every distance.
    bool fresh_per_distance = true;
    /// false: candidates compare against their partition's rows only.
    bool compare_whole_dataset = false;

    void validate() const;
};

/// Accepted synthetic fingerprints with full acceptance provenance.
struct AugmentedSet {
    int n = 0;
    std::vector<double> fingerprints;  // rows x n, powed space
    LabelSet labels;                   // predicted positions and classes
    std::vector<int> conditional_label;
    std::vector<double> accepted_distance;        // meters
    std::vector<long long> seed_fingerprint_index;  // nearest real row
    std::vector<std::uint8_t> label_mismatch;  // predicted class != condition
    long long candidates_evaluated = 0;
    long long accepted_before_dedupe = 0;
    std::vector<std::pair<double, long long>> per_distance_accepted;

    std::size_t size() const { return accepted_distance.size(); }
};

struct Position3 {
    double x = 0, y = 0, z = 0;
};

struct DistanceSelection {
    std::vector<int> accepted;               // candidate indices, ascending
    std::vector<std::size_t> nearest_index;  // per accepted candidate
    std::vector<double> nearest_distance;    // meters
};

/// Candidates whose position lies within `dist` meters (3D Euclidean) of at
/// least one reference position; each carries its nearest reference.
DistanceSelection select_by_distance(const std::vector<Position3>& candidates,
                                     const std::vector<Position3>& references,
                                     double dist);

/// Algorithm-1 selection: generate candidates, predict their positions, and
/// accept a candidate iff a real training position lies within the distance
/// threshold (3D Euclidean, meters).
AugmentedSet select_fingerprints(std::vector<CGan>& cgans,
                                 PositioningModel& model,
                                 const RadioMap& rm_train,
                                 const SelectionConfig& cfg, std::uint64_t seed);

/// Real rows followed by accepted synthetic rows, synthetic-flagged.
RadioMap augment_radiomap(const RadioMap& rm_train, const AugmentedSet& augset);

/// Canonical CSV plus provenance columns SOURCE, CONDLABEL, SEEDIDX, DIST,
/// MISMATCH covering real and synthetic rows.
void save_augmented_csv(const RadioMap& rm_train, const AugmentedSet& augset,
                        const std::string& path);

}  // namespace surimi

#endif
