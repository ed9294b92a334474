#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "kicl/priorgen/dataset.hpp"

// Synthetic training tasks: Gaussian-mixture inputs labelled by a randomly
// initialised MLP, plus the two-dimensional toy problems used for validation.
namespace kicl {

struct PriorConfig {
    std::size_t d_min = 3;
    std::size_t d_max = 10;
    std::size_t min_samples = 32;
    std::size_t max_samples = 128;
    double train_min = 0.6;
    double train_max = 0.8;
    std::size_t datasets_per_batch = 8;
    std::size_t classes = 2;
    // Probability that the label function only reads a random subset of the
    // features; the remaining columns are pure distractors.
    double irrelevant_probability = 0.5;
    std::uint64_t seed = 0;

    void validate() const;

    // 64 datasets per batch, 5..100 features, up to 1024 samples.
    static PriorConfig paper_scale();
};

// Deterministic in (seed, batch_index, dataset_index).
Dataset sample_prior_dataset(const PriorConfig& config, std::uint64_t batch_index, std::size_t dataset_index);
std::vector<Dataset> sample_prior_batch(const PriorConfig& config, std::uint64_t batch_index);

enum class ToyKind { moons, circles, linear };

std::string to_string(ToyKind kind);
ToyKind parse_toy_kind(const std::string& s);

struct ToyConfig {
    ToyKind kind = ToyKind::moons;
    std::size_t n_total = 200;
    std::size_t noise_features = 18;
    double noise_std = 1.0;
    // Jitter on the two signal coordinates (moons and circles).
    double signal_noise = 0.1;
    // Inner radius relative to outer for circles.
    double circle_factor = 0.5;
    // Distance between blob centres for linear, in units of blob std.
    double separation = 4.0;
    double train_fraction = 0.6;
    std::uint64_t seed = 0;
};

// Two signal columns first, then the noise columns. The split is stratified,
// so 200 balanced samples at 0.6 give 120 train and 80 test.
Dataset generate_toy(const ToyConfig& config);

}  // namespace kicl
