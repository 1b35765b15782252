#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fapd/curriculum.hpp"
#include "fapd/dataset.hpp"
#include "fapd/distill.hpp"
#include "fapd/model.hpp"
#include "fapd/rng.hpp"

namespace fapd {

enum class StrategyKind {
    FedAvg,          // cross-entropy only, no curriculum
    Fapd,            // full method
    FapdNoAdapt,     // distillation at a fixed dimension, controller off
    FapdNoContrast,  // controller on, contrastive term off
};

struct Strategy {
    StrategyKind kind = StrategyKind::Fapd;
    std::size_t fixed_k = 0;  // FapdNoAdapt only; 0 means the full teacher dimension

    bool uses_controller() const noexcept;
    bool uses_kd() const noexcept;
    bool uses_contrastive() const noexcept;
};

Strategy parse_strategy(std::string_view name);
std::string_view to_string(StrategyKind kind) noexcept;

enum class CalibrationSource { Train, Test };

CalibrationSource parse_calibration_source(std::string_view name);
std::string_view to_string(CalibrationSource source) noexcept;

struct FederationConfig {
    std::size_t num_clients = 10;
    std::size_t clients_per_round = 5;
    std::size_t rounds = 100;
    std::size_t local_epochs = 10;
    std::size_t batch_size = 64;
    double lr = 0.01;
    double momentum = 0.9;
    LossWeights weights;
    KdDirection kd_direction = KdDirection::TeacherStudent;
    std::size_t k0 = 8;
    std::size_t delta_k = 5;
    double epsilon = 0.005;
    std::size_t window = 3;
    double alpha = 0.5;
    std::uint64_t seed = 0;
    std::size_t hidden_dim = 64;
    std::size_t calib_size = 1024;
    CalibrationSource calib_source = CalibrationSource::Train;
    std::size_t workers = 1;

    // Checks every invariant against the dataset's teacher dimension.
    void validate(std::size_t teacher_dim) const;
    CurriculumParams curriculum(std::size_t teacher_dim) const;
};

struct LossBreakdown {
    double total = 0.0;
    double ce = 0.0;
    double kd = 0.0;
    double cl = 0.0;
};

struct ClientResult {
    Parameters params;
    std::size_t num_samples = 0;
    LossBreakdown losses;  // averaged over every sample visit of every epoch
};

// What the server sends each selected client for one round.
struct RoundBroadcast {
    ModelDims dims;
    std::vector<std::uint8_t> payload;  // global parameters, params.f64 layout
    std::size_t k = 0;
    Matrix projection;      // k x D
    Matrix anchors;         // K x k, already projected
    const RotationMatrix* rotation = nullptr;
};

struct RoundMetrics {
    std::size_t round = 0;  // 1-based
    std::size_t k = 0;      // dimension used during this round
    double accuracy = 0.0;
    LossBreakdown losses;   // mean over the cohort
    bool consensus = false; // k grew at the end of this round
    std::vector<std::size_t> clients;
};

ClientResult client_update(const RoundBroadcast& broadcast, std::span<const Sample> data,
                           const FederationConfig& config, const Strategy& strategy, Stream stream);

std::vector<double> aggregation_weights(std::span<const std::size_t> sample_counts);

// Sample-count weighted mean of the cohort's parameters.
Parameters aggregate(std::span<const ClientResult> results);

// Fraction of samples whose argmax logit (lowest index on ties) is the label.
double evaluate(const StudentModel& model, const FederatedDataset& test);

// Uniform selection without replacement, returned sorted.
std::vector<std::size_t> select_clients(std::uint64_t seed, std::size_t round, std::size_t num_clients,
                                        std::size_t count);

struct ExperimentState {
    FederationConfig config;
    Strategy strategy;
    FederatedDataset train;
    FederatedDataset test;
    Partition partition;
    RotationMatrix rotation;
    ClassAnchors anchors;
    StudentModel model;
    CurriculumState curriculum;
    std::size_t rounds_done = 0;
};

// Partition, calibration, rotation, anchors, model init, curriculum at k0.
ExperimentState prepare_experiment(const FederationConfig& config, const Strategy& strategy, FederatedDataset train,
                                   FederatedDataset test);

RoundMetrics run_round(ExperimentState& state);

struct DataSource {
    std::optional<std::filesystem::path> data_dir;  // contains train/ and test/
    SyntheticSpec synthetic;
};

std::pair<FederatedDataset, FederatedDataset> load_data(const DataSource& source);

struct ExperimentResult {
    std::vector<RoundMetrics> metrics;
    StudentModel model;
    CurriculumState curriculum;
};

using RoundCallback = std::function<void(const RoundMetrics&)>;

ExperimentResult run_experiment(const FederationConfig& config, const Strategy& strategy, FederatedDataset train,
                                 FederatedDataset test, const RoundCallback& on_round = {});
ExperimentResult run_experiment(const FederationConfig& config, const Strategy& strategy, const DataSource& source,
                                const RoundCallback& on_round = {});

}  // namespace fapd
