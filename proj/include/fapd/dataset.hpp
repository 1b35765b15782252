#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fapd/linalg.hpp"

namespace fapd {

struct Sample {
    Vector x;            // input, dim input_dim
    std::uint32_t y = 0; // class index in [0, num_classes)
    Vector zt;           // precomputed teacher feature, dim teacher_dim

    friend bool operator==(const Sample&, const Sample&) = default;
};

struct FederatedDataset {
    std::vector<Sample> samples;
    std::size_t num_classes = 0;
    std::size_t input_dim = 0;
    std::size_t teacher_dim = 0;

    std::size_t size() const noexcept { return samples.size(); }
    std::vector<std::uint32_t> labels() const;

    // Throws InvalidInput naming the first violated invariant.
    void validate() const;

    friend bool operator==(const FederatedDataset&, const FederatedDataset&) = default;
};

struct Partition {
    std::vector<std::vector<std::size_t>> assignments;  // per-client sorted sample indices
    double alpha = 0.0;
    std::uint64_t seed = 0;

    std::size_t num_clients() const noexcept { return assignments.size(); }
};

struct SyntheticSpec {
    std::size_t num_classes = 10;
    std::size_t input_dim = 16;
    std::size_t teacher_dim = 32;
    std::size_t n_train = 2000;
    std::size_t n_test = 1000;
    double noise_sigma = 2.5;
    double class_mean_scale = 3.0;
    double teacher_scale = 1.0;   // leading singular value of the teacher map
    double teacher_decay = 0.9;   // geometric singular-value decay
    std::uint64_t seed = 0;
};

struct SyntheticData {
    FederatedDataset train;
    FederatedDataset test;
    Matrix class_means;  // K x input_dim
    Matrix teacher_map;  // teacher_dim x input_dim
};

// Gaussian class clusters with a fixed linear teacher z_T = W_T x whose
// singular values decay geometrically, so leading principal directions of
// the teacher features carry most of the class signal. Labels cycle
// through the classes (sample i has label i mod K).
SyntheticData generate_synthetic(const SyntheticSpec& spec);

// Per class, proportions ~ Dir(alpha * 1_C) split that class's (shuffled)
// indices with largest-remainder rounding. Draws leaving a client empty are
// retried with a new stream, at most 100 times.
Partition dirichlet_partition(std::span<const std::uint32_t> labels, std::size_t num_clients, double alpha,
                              std::uint64_t seed);

// Indices of the first `m` entries of a seeded shuffle of [0, n).
std::vector<std::size_t> calibration_indices(std::size_t n, std::size_t m, std::uint64_t seed);

// M x teacher_dim matrix of teacher features chosen by calibration_indices().
Matrix sample_calibration(const FederatedDataset& dataset, std::size_t m, std::uint64_t seed);

FederatedDataset subset(const FederatedDataset& dataset, std::span<const std::size_t> indices);

// Directory layout: meta.json, x.f64, zt.f64, y.u32 (little-endian, row-major).
void save_dataset(const FederatedDataset& dataset, const std::filesystem::path& dir);
FederatedDataset load_dataset(const std::filesystem::path& dir);

}  // namespace fapd
