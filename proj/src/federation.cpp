#include "fapd/federation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <string>
#include <thread>

#include "fapd/error.hpp"

namespace fapd {

namespace {

[[noreturn]] void rethrow_with_context(const std::string& context) {
    try {
        throw;
    } catch (const Error& e) {
        throw Error(e.kind(), context + ": " + e.what());
    }
}

std::size_t round_dimension(const ExperimentState& state) {
    if (state.strategy.kind == StrategyKind::FapdNoAdapt) {
        return state.strategy.fixed_k == 0 ? state.rotation.dim() : state.strategy.fixed_k;
    }
    return state.curriculum.k;
}

}  // namespace

bool Strategy::uses_controller() const noexcept {
    return kind == StrategyKind::Fapd || kind == StrategyKind::FapdNoContrast;
}

bool Strategy::uses_kd() const noexcept { return kind != StrategyKind::FedAvg; }

bool Strategy::uses_contrastive() const noexcept {
    return kind == StrategyKind::Fapd || kind == StrategyKind::FapdNoAdapt;
}

Strategy parse_strategy(std::string_view name) {
    if (name == "fedavg") return {StrategyKind::FedAvg};
    if (name == "fapd") return {StrategyKind::Fapd};
    if (name == "fapd_nadpt") return {StrategyKind::FapdNoAdapt};
    if (name == "fapd_ncont") return {StrategyKind::FapdNoContrast};
    fail(ErrorKind::InvalidInput,
         "unknown strategy '" + std::string(name) + "' (expected fedavg, fapd, fapd_nadpt or fapd_ncont)");
}

std::string_view to_string(StrategyKind kind) noexcept {
    switch (kind) {
        case StrategyKind::FedAvg: return "fedavg";
        case StrategyKind::Fapd: return "fapd";
        case StrategyKind::FapdNoAdapt: return "fapd_nadpt";
        case StrategyKind::FapdNoContrast: return "fapd_ncont";
    }
    return "unknown";
}

CalibrationSource parse_calibration_source(std::string_view name) {
    if (name == "train") return CalibrationSource::Train;
    if (name == "test") return CalibrationSource::Test;
    fail(ErrorKind::InvalidInput, "unknown calibration source '" + std::string(name) + "' (expected train or test)");
}

std::string_view to_string(CalibrationSource source) noexcept {
    return source == CalibrationSource::Train ? "train" : "test";
}

void FederationConfig::validate(std::size_t teacher_dim) const {
    require(num_clients >= 1, "num_clients must be >= 1");
    require(clients_per_round >= 1 && clients_per_round <= num_clients,
            "clients_per_round must be in [1, num_clients]");
    require(rounds >= 1, "rounds must be >= 1");
    require(local_epochs >= 1, "local_epochs must be >= 1");
    require(batch_size >= 1, "batch_size must be >= 1");
    require(std::isfinite(lr) && lr >= 0.0, "lr must be >= 0");
    require(momentum >= 0.0 && momentum < 1.0, "momentum must be in [0, 1)");
    require(std::isfinite(alpha) && alpha > 0.0, "alpha must be > 0");
    require(hidden_dim >= 1, "hidden_dim must be >= 1");
    require(calib_size >= 2, "calib_size must be >= 2");
    require(workers >= 1, "workers must be >= 1");
    weights.validate();
    curriculum(teacher_dim).validate();
}

CurriculumParams FederationConfig::curriculum(std::size_t teacher_dim) const {
    return CurriculumParams{k0, delta_k, epsilon, window, teacher_dim};
}

ClientResult client_update(const RoundBroadcast& broadcast, std::span<const Sample> data,
                           const FederationConfig& config, const Strategy& strategy, Stream stream) {
    require(!data.empty(), "client_update: client has no data");
    StudentModel model{broadcast.dims, 0, decode_parameters(broadcast.dims, broadcast.payload)};
    OptimizerState opt = OptimizerState::for_model(model, config.lr, config.momentum);

    const bool use_kd = strategy.uses_kd();
    const bool use_cl = strategy.uses_contrastive();
    const double lambda_kd = use_kd ? config.weights.lambda_kd : 0.0;
    const double lambda_cl = use_cl ? config.weights.lambda_cl : 0.0;
    if (use_kd) {
        require(broadcast.rotation != nullptr, "client_update: distillation needs the rotation");
        require(broadcast.projection.cols() == model.dims.feature_dim,
                "client_update: projection does not match the model feature dimension");
    }

    // Projected teacher features are fixed for the whole local update.
    std::vector<Vector> teacher_k;
    if (use_kd) {
        teacher_k.reserve(data.size());
        for (const auto& s : data) teacher_k.push_back(project_features(*broadcast.rotation, broadcast.projection, s.zt));
    }

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    LossBreakdown sums;
    Gradients grads{Parameters::zeros(model.dims)};
    const Vector no_feature_grad(model.dims.feature_dim);

    for (std::size_t epoch = 0; epoch < config.local_epochs; ++epoch) {
        stream.shuffle(std::span<std::size_t>(order));
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(start + config.batch_size, order.size());
            const double scale = 1.0 / static_cast<double>(stop - start);
            grads.values.for_each([](std::span<double> s) { std::fill(s.begin(), s.end(), 0.0); });

            for (std::size_t b = start; b < stop; ++b) {
                const std::size_t idx = order[b];
                const Sample& sample = data[idx];
                const Activations act = forward(model, sample.x);
                const LossGrad ce = ce_loss(act.logits, sample.y);
                double kd = 0.0;
                double cl = 0.0;
                Vector d_features = no_feature_grad;

                if (use_kd) {
                    const Vector student_k = project_features(*broadcast.rotation, broadcast.projection, act.features);
                    const LossGrad kd_term = kd_loss(student_k, teacher_k[idx], config.kd_direction);
                    kd = kd_term.loss;
                    Vector d_student_k(student_k.size());
                    for (std::size_t i = 0; i < d_student_k.size(); ++i) d_student_k[i] = lambda_kd * kd_term.grad[i];
                    if (use_cl) {
                        const LossGrad cl_term =
                            infonce_loss(student_k, broadcast.anchors, sample.y, config.weights.tau);
                        cl = cl_term.loss;
                        for (std::size_t i = 0; i < d_student_k.size(); ++i) d_student_k[i] += lambda_cl * cl_term.grad[i];
                    }
                    d_features = project_adjoint(broadcast.projection, d_student_k);
                }

                const double total = ce.loss + lambda_kd * kd + lambda_cl * cl;
                if (!std::isfinite(total)) fail(ErrorKind::Numeric, "non-finite local loss");
                sums.total += total;
                sums.ce += ce.loss;
                sums.kd += kd;
                sums.cl += cl;
                accumulate_gradients(model, act, ce.grad, d_features, grads, scale);
            }
            sgd_step(model, opt, grads);
        }
    }
    if (!model.params.finite()) fail(ErrorKind::Numeric, "non-finite parameters after local training");

    const double visits = static_cast<double>(config.local_epochs * data.size());
    ClientResult result;
    result.num_samples = data.size();
    result.losses = {sums.total / visits, sums.ce / visits, sums.kd / visits, sums.cl / visits};
    // Round-trip through the wire layout, as a networked client would reply.
    result.params = decode_parameters(model.dims, encode_parameters(model.params));
    return result;
}

std::vector<double> aggregation_weights(std::span<const std::size_t> sample_counts) {
    require(!sample_counts.empty(), "aggregation_weights: no clients");
    const double total = static_cast<double>(std::accumulate(sample_counts.begin(), sample_counts.end(), std::size_t{0}));
    require(total > 0.0, "aggregation_weights: cohort holds no samples");
    std::vector<double> weights;
    weights.reserve(sample_counts.size());
    for (std::size_t n : sample_counts) weights.push_back(static_cast<double>(n) / total);
    return weights;
}

Parameters aggregate(std::span<const ClientResult> results) {
    require(!results.empty(), "aggregate: no client results");
    std::vector<std::size_t> counts;
    for (const auto& r : results) {
        require(r.params.same_shape(results.front().params), "aggregate: parameter shapes differ across clients");
        counts.push_back(r.num_samples);
    }
    const auto weights = aggregation_weights(counts);

    Parameters out = results.front().params;
    std::vector<std::span<double>> dst;
    out.for_each([&](std::span<double> s) {
        std::fill(s.begin(), s.end(), 0.0);
        dst.push_back(s);
    });
    for (std::size_t c = 0; c < results.size(); ++c) {
        std::size_t t = 0;
        results[c].params.for_each([&](std::span<const double> s) {
            for (std::size_t i = 0; i < s.size(); ++i) dst[t][i] += weights[c] * s[i];
            ++t;
        });
    }
    return out;
}

double evaluate(const StudentModel& model, const FederatedDataset& test) {
    require(test.size() > 0, "evaluate: empty test set");
    std::size_t correct = 0;
    for (const auto& s : test.samples) {
        const Activations act = forward(model, s.x);
        std::size_t best = 0;
        for (std::size_t j = 1; j < act.logits.size(); ++j)
            if (act.logits[j] > act.logits[best]) best = j;
        if (best == s.y) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(test.size());
}

std::vector<std::size_t> select_clients(std::uint64_t seed, std::size_t round, std::size_t num_clients,
                                        std::size_t count) {
    require(count >= 1 && count <= num_clients, "select_clients: count outside [1, num_clients]");
    std::vector<std::size_t> ids(num_clients);
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    Stream stream(hash64(seed, tag64("client-selection"), round));
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(stream.index(num_clients - i));
        std::swap(ids[i], ids[j]);
    }
    ids.resize(count);
    std::sort(ids.begin(), ids.end());
    return ids;
}

ExperimentState prepare_experiment(const FederationConfig& config, const Strategy& strategy, FederatedDataset train,
                                   FederatedDataset test) {
    train.validate();
    test.validate();
    require(train.size() > 0 && test.size() > 0, "prepare_experiment: empty train or test split");
    require(train.teacher_dim == test.teacher_dim && train.input_dim == test.input_dim &&
                train.num_classes == test.num_classes,
            "prepare_experiment: train and test splits disagree on dimensions");
    const std::size_t teacher_dim = train.teacher_dim;
    config.validate(teacher_dim);
    if (strategy.kind == StrategyKind::FapdNoAdapt)
        require(strategy.fixed_k <= teacher_dim, "fixed_k must be in [1, teacher_dim]");

    ExperimentState state;
    state.config = config;
    state.strategy = strategy;
    state.partition = dirichlet_partition(train.labels(), config.num_clients, config.alpha,
                                          hash64(config.seed, tag64("partition")));

    const FederatedDataset& calib_source = config.calib_source == CalibrationSource::Train ? train : test;
    const std::size_t m = std::min(config.calib_size, calib_source.size());
    const std::uint64_t calib_seed = hash64(config.seed, tag64("calibration"));
    state.rotation = build_rotation(sample_calibration(calib_source, m, calib_seed));
    state.anchors = build_class_anchors(subset(calib_source, calibration_indices(calib_source.size(), m, calib_seed)));

    const ModelDims dims{train.input_dim, config.hidden_dim, teacher_dim, train.num_classes};
    state.model = init_model(dims, hash64(config.seed, tag64("model")));
    state.curriculum = CurriculumState::start(config.curriculum(teacher_dim));
    state.train = std::move(train);
    state.test = std::move(test);
    return state;
}

RoundMetrics run_round(ExperimentState& state) {
    const auto& config = state.config;
    const std::size_t round = state.rounds_done + 1;
    RoundMetrics metrics;
    metrics.round = round;
    metrics.clients = select_clients(config.seed, round, config.num_clients, config.clients_per_round);

    const std::size_t k = round_dimension(state);
    metrics.k = k;

    RoundBroadcast broadcast;
    broadcast.dims = state.model.dims;
    broadcast.payload = encode_parameters(state.model.params);
    broadcast.k = k;
    broadcast.rotation = &state.rotation;
    if (state.strategy.uses_kd()) {
        broadcast.projection = projection_for(state.rotation, k);
        broadcast.anchors = project_anchors(state.rotation, broadcast.projection, state.anchors.anchors);
    }

    // Client updates share only immutable inputs; each writes its own slot.
    const std::size_t cohort = metrics.clients.size();
    std::vector<ClientResult> results(cohort);
    std::vector<std::exception_ptr> errors(cohort);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t slot = next.fetch_add(1); slot < cohort; slot = next.fetch_add(1)) {
            const std::size_t client = metrics.clients[slot];
            try {
                try {
                    const FederatedDataset local = subset(state.train, state.partition.assignments[client]);
                    Stream stream(hash64(config.seed, round, client));
                    results[slot] = client_update(broadcast, local.samples, config, state.strategy, stream);
                } catch (...) {
                    rethrow_with_context("round " + std::to_string(round) + " client " + std::to_string(client));
                }
            } catch (...) {
                errors[slot] = std::current_exception();
            }
        }
    };
    const std::size_t threads = std::min(config.workers, cohort);
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    state.model.params = aggregate(results);
    metrics.accuracy = evaluate(state.model, state.test);

    for (const auto& r : results) {
        metrics.losses.total += r.losses.total;
        metrics.losses.ce += r.losses.ce;
        metrics.losses.kd += r.losses.kd;
        metrics.losses.cl += r.losses.cl;
    }
    const double inv = 1.0 / static_cast<double>(cohort);
    metrics.losses = {metrics.losses.total * inv, metrics.losses.ce * inv, metrics.losses.kd * inv,
                      metrics.losses.cl * inv};

    if (state.strategy.uses_controller()) {
        const std::size_t before = state.curriculum.k;
        state.curriculum = advance(record_accuracy(std::move(state.curriculum), metrics.accuracy));
        metrics.consensus = state.curriculum.k > before;
    }
    state.rounds_done = round;
    return metrics;
}

std::pair<FederatedDataset, FederatedDataset> load_data(const DataSource& source) {
    if (source.data_dir) {
        return {load_dataset(*source.data_dir / "train"), load_dataset(*source.data_dir / "test")};
    }
    SyntheticData data = generate_synthetic(source.synthetic);
    return {std::move(data.train), std::move(data.test)};
}

ExperimentResult run_experiment(const FederationConfig& config, const Strategy& strategy, FederatedDataset train,
                                 FederatedDataset test, const RoundCallback& on_round) {
    ExperimentState state = prepare_experiment(config, strategy, std::move(train), std::move(test));
    ExperimentResult result;
    result.metrics.reserve(config.rounds);
    for (std::size_t t = 0; t < config.rounds; ++t) {
        result.metrics.push_back(run_round(state));
        if (on_round) on_round(result.metrics.back());
    }
    result.model = std::move(state.model);
    result.curriculum = std::move(state.curriculum);
    return result;
}

ExperimentResult run_experiment(const FederationConfig& config, const Strategy& strategy, const DataSource& source,
                                const RoundCallback& on_round) {
    auto [train, test] = load_data(source);
    return run_experiment(config, strategy, std::move(train), std::move(test), on_round);
}

}  // namespace fapd
