// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fapd/binary_io.hpp"
#include "fapd/commands.hpp"
#include "fapd/config.hpp"
#include "fapd/curriculum.hpp"
#include "fapd/distill.hpp"
#include "fapd/error.hpp"
#include "fapd/federation.hpp"
#include "fapd/linalg.hpp"
#include "fapd/model.hpp"
#include "oracles.hpp"

using namespace fapd;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            if (pass) detail = what;
            pass = false;
        }
    }
};

double max_abs(const Matrix& m) {
    double worst = 0.0;
    for (double v : m.span()) worst = std::max(worst, std::abs(v));
    return worst;
}

double orthogonality_error(const Matrix& r) {
    Matrix e = multiply(r, transpose(r));
    for (std::size_t i = 0; i < e.rows(); ++i) e(i, i) -= 1.0;
    return max_abs(e);
}

double variance_along(const Matrix& samples, std::span<const double> dir) {
    const std::size_t m = samples.rows();
    std::vector<double> p(m);
    double mean = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < samples.cols(); ++c) s += samples(r, c) * dir[c];
        p[r] = s;
        mean += s;
    }
    mean /= static_cast<double>(m);
    double var = 0.0;
    for (double v : p) var += (v - mean) * (v - mean);
    return var / static_cast<double>(m - 1);
}

std::string fmt(const char* format, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

// 1. Eigenvalues against the high-precision reference; reconstruction up to D=64.
Outcome eigensolver_oracle() {
    Outcome out;
    const auto start = Clock::now();
    double worst_value = 0.0;
    for (std::uint64_t i = 0; i < 100; ++i) {
        const std::size_t d = 1 + i % 6;
        const Matrix a = oracle::random_symmetric(d, 1.0 + static_cast<double>(i % 4), 1000 + i);
        const auto eig = eig_sym(a);
        const auto ref = oracle::reference_eigenvalues(a);
        for (std::size_t j = 0; j < d; ++j) worst_value = std::max(worst_value, std::abs(eig.eigenvalues[j] - ref[j]));
    }
    out.require(worst_value < 1e-8, fmt("eigenvalue error %.3g", worst_value));

    double worst_recon = 0.0;
    for (std::uint64_t i = 0; i < 40; ++i) {
        const std::size_t d = 1 + (i * 13) % 64;
        const std::size_t dim = i < 4 ? 64 : d;
        const Matrix a = oracle::random_symmetric(dim, 3.0, 2000 + i);
        const auto eig = eig_sym(a);
        Matrix vl = eig.eigenvectors;
        for (std::size_t r = 0; r < dim; ++r)
            for (std::size_t c = 0; c < dim; ++c) vl(r, c) *= eig.eigenvalues[c];
        Matrix diff = multiply(vl, transpose(eig.eigenvectors));
        for (std::size_t k = 0; k < diff.size(); ++k) diff.span()[k] -= a.span()[k];
        worst_recon = std::max(worst_recon, norm_inf(diff) / std::max(1.0, norm_inf(a)));
    }
    out.require(worst_recon < 1e-8, fmt("reconstruction error %.3g", worst_recon));
    const double elapsed = seconds_since(start);
    out.require(elapsed < 10.0, fmt("runtime %.2f s", elapsed));
    if (out.pass)
        out.detail = fmt("max eigenvalue error %.2e, max relative reconstruction %.2e, %.2f s", worst_value, worst_recon,
                         elapsed);
    return out;
}

// M x d samples whose sample covariance is exactly diag(variances).
Matrix exact_spectrum_samples(std::size_t m, const std::vector<double>& variances, std::uint64_t seed) {
    const std::size_t d = variances.size();
    Matrix x = oracle::random_matrix(m, d, 1.0, seed);
    const Vector mu = column_mean(x);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < d; ++c) x(r, c) -= mu[c];
    x = orthonormalize_columns(x);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < d; ++c) x(r, c) *= std::sqrt(variances[c] * static_cast<double>(m - 1));
    return x;
}

// 2. Rotation orthogonality, variance per direction, planted rotation recovery.
Outcome hkd_correctness() {
    Outcome out;
    double worst_orth = 0.0;
    double worst_var = 0.0;

    std::vector<Matrix> calibrations;
    {
        SyntheticSpec spec;
        spec.input_dim = 32;
        spec.teacher_dim = 32;
        spec.n_train = 1024;
        spec.n_test = 10;
        spec.seed = 7;
        const auto data = generate_synthetic(spec);
        calibrations.push_back(sample_calibration(data.train, 1024, 3));
    }
    for (std::uint64_t s = 0; s < 3; ++s) {
        const std::size_t d = 16 << s;  // 16, 32, 64
        Matrix mix = oracle::random_matrix(d, d, 1.0, 40 + s);
        for (std::size_t r = 0; r < d; ++r)
            for (std::size_t c = 0; c < d; ++c) mix(r, c) *= std::pow(0.93, static_cast<double>(c));
        calibrations.push_back(multiply(oracle::random_matrix(4 * d, d, 1.0, 50 + s), transpose(mix)));
    }
    for (const auto& calib : calibrations) {
        const auto rot = build_rotation(calib);
        worst_orth = std::max(worst_orth, orthogonality_error(rot.rotation));
        for (std::size_t i = 0; i < rot.dim(); ++i) {
            const double var = variance_along(calib, rot.rotation.row(i));
            worst_var = std::max(worst_var, std::abs(var - rot.eigenvalues[i]) / rot.eigenvalues[i]);
        }
    }
    out.require(worst_orth < 1e-8, fmt("orthogonality error %.3g", worst_orth));
    out.require(worst_var < 1e-6, fmt("variance relative error %.3g", worst_var));

    double worst_planted = 0.0;
    for (double angle : {0.3, 0.7, 1.2, 2.5}) {
        const Matrix q = Matrix::from_rows({{std::cos(angle), -std::sin(angle)}, {std::sin(angle), std::cos(angle)}});
        const Matrix rotated = multiply(exact_spectrum_samples(10000, {4.0, 1.0}, 60), transpose(q));
        const auto rot = build_rotation(rotated);
        for (std::size_t i = 0; i < 2; ++i) {
            const double sign = rot.rotation(i, 0) * q(0, i) + rot.rotation(i, 1) * q(1, i) > 0 ? 1.0 : -1.0;
            for (std::size_t j = 0; j < 2; ++j)
                worst_planted = std::max(worst_planted, std::abs(rot.rotation(i, j) - sign * q(j, i)));
        }
    }
    out.require(worst_planted < 1e-6, fmt("planted rotation error %.3g", worst_planted));
    if (out.pass)
        out.detail = fmt("orthogonality %.2e, variance %.2e, planted rotation %.2e", worst_orth, worst_var, worst_planted);
    return out;
}

// 3. Finite-difference checks of every loss term and the weighted total through the model.
Outcome gradient_suite() {
    Outcome out;
    const auto start = Clock::now();
    double worst = 0.0;
    int cases = 0;
    struct Term {
        const char* name;
        double ce, kd, cl;
    };
    const Term terms[] = {{"ce", 1, 0, 0}, {"kd", 0, 1, 0}, {"cl", 0, 0, 1}, {"total", 1, 0.5, 0.5}};
    for (std::size_t classes : {2u, 10u}) {
        const ModelDims dims{5, 4, 8, classes};
        for (std::size_t k : {1u, 2u, 8u}) {
            for (std::uint64_t seed = 0; seed < 3; ++seed) {
                const std::uint64_t base = 1000 * classes + 100 * k + 10 * seed;
                StudentModel model = init_model(dims, base);
                model.params.b1 = oracle::random_vector(dims.hidden_dim, 0.3, base + 1);
                model.params.b2 = oracle::random_vector(dims.feature_dim, 0.3, base + 2);
                model.params.b3 = oracle::random_vector(dims.num_classes, 0.3, base + 3);
                // Draw an input away from ReLU kinks so central differences are valid.
                Vector x;
                for (std::uint64_t attempt = 0;; ++attempt) {
                    x = oracle::random_vector(dims.input_dim, 1.0, base + 4 + 1000000 * attempt);
                    const auto act = forward(model, x);
                    if (std::all_of(act.hidden_pre.begin(), act.hidden_pre.end(),
                                    [](double v) { return std::abs(v) > 1e-3; }))
                        break;
                }
                const auto y = static_cast<std::uint32_t>(seed % classes);
                const Vector zt = oracle::random_vector(dims.feature_dim, 1.0, base + 5);
                const auto rot = build_rotation(oracle::random_matrix(50, dims.feature_dim, 1.0, base + 6));
                const Matrix anchors = oracle::random_matrix(classes, dims.feature_dim, 1.0, base + 7);
                const Matrix p = projection_for(rot, k);
                const Vector zt_k = project_features(rot, p, zt);
                const Matrix anchors_k = project_anchors(rot, p, anchors);
                const double tau = 0.04;

                for (const Term& term : terms) {
                    auto value = [&](const StudentModel& m) {
                        const auto act = forward(m, x);
                        const Vector zs_k = project_features(rot, p, act.features);
                        return term.ce * ce_loss(act.logits, y).loss + term.kd * kd_loss(zs_k, zt_k).loss +
                               term.cl * infonce_loss(zs_k, anchors_k, y, tau).loss;
                    };
                    const auto act = forward(model, x);
                    const Vector zs_k = project_features(rot, p, act.features);
                    Vector d_logits = ce_loss(act.logits, y).grad;
                    for (double& v : d_logits) v *= term.ce;
                    const auto kd = kd_loss(zs_k, zt_k);
                    const auto cl = infonce_loss(zs_k, anchors_k, y, tau);
                    Vector upstream(k);
                    for (std::size_t i = 0; i < k; ++i) upstream[i] = term.kd * kd.grad[i] + term.cl * cl.grad[i];
                    const auto analytic = backward(model, act, d_logits, project_adjoint(p, upstream)).values.flatten();

                    StudentModel probe = model;
                    const auto numeric = oracle::central_difference(
                        [&](std::span<const double> theta) {
                            probe.params.assign(theta);
                            return value(probe);
                        },
                        model.params.flatten(), 1e-5);
                    const double err = oracle::max_relative_error(analytic, numeric, 1e-6);
                    worst = std::max(worst, err);
                    ++cases;
                    out.require(err < 1e-4, fmt("%s k=%zu K=%zu seed=%llu error %.3g", term.name, k, classes,
                                                static_cast<unsigned long long>(seed), err));
                }
            }
        }
    }
    const double elapsed = seconds_since(start);
    out.require(elapsed < 30.0, fmt("runtime %.2f s", elapsed));
    if (out.pass) out.detail = fmt("%d cases, max relative error %.2e, %.2f s", cases, worst, elapsed);
    return out;
}

// 4. Controller on random accuracy traces against a brute-force window check.
Outcome curriculum_state_machine() {
    Outcome out;
    std::mt19937_64 rng(2024);
    std::size_t advances = 0;
    std::size_t steps = 0;
    for (int trace = 0; trace < 1000; ++trace) {
        std::uniform_int_distribution<std::size_t> dim_dist(4, 64);
        const std::size_t d = dim_dist(rng);
        CurriculumParams params;
        params.max_dim = d;
        params.k0 = std::uniform_int_distribution<std::size_t>(1, d)(rng);
        params.delta_k = std::uniform_int_distribution<std::size_t>(1, 8)(rng);
        params.window = std::uniform_int_distribution<std::size_t>(2, 5)(rng);
        params.epsilon = std::uniform_real_distribution<double>(0.001, 0.02)(rng);
        const double jitter = std::uniform_real_distribution<double>(0.0005, 0.02)(rng);
        auto state = CurriculumState::start(params);
        double level = std::uniform_real_distribution<double>(0.1, 0.9)(rng);
        const std::size_t rounds = std::uniform_int_distribution<std::size_t>(1, 120)(rng);
        for (std::size_t t = 0; t < rounds; ++t) {
            level = std::clamp(level + std::normal_distribution<double>(0.0, jitter)(rng), 0.0, 1.0);
            state = record_accuracy(std::move(state), level);
            const auto& h = state.history;
            bool brute = h.size() >= params.window;
            for (std::size_t b = 1; brute && b < params.window; ++b)
                brute = std::abs(h.back() - h[h.size() - 1 - b]) < params.epsilon;
            const bool stable = stability(state);
            out.require(stable == brute, fmt("trace %d round %zu: stability disagrees with window re-check", trace, t));
            const std::size_t before = state.k;
            state = advance(std::move(state));
            out.require(state.k >= before, fmt("trace %d: k decreased", trace));
            out.require(state.k <= d, fmt("trace %d: k exceeded D", trace));
            out.require((state.k > before) == (brute && before < d), fmt("trace %d: advance rule violated", trace));
            advances += state.k > before;
            ++steps;
        }
    }
    out.require(advances > 0, "no trace ever advanced");
    if (out.pass) out.detail = fmt("1000 traces, %zu steps, %zu advances", steps, advances);
    return out;
}

// 5. Hand-derived loss values.
Outcome loss_point_values() {
    Outcome out;
    const double kd = kd_loss(Vector{1.0, 0.0}, Vector{0.0, 1.0}).loss;
    out.require(std::abs(kd - 0.46212) <= 1e-5, fmt("kd %.8f", kd));
    double worst = 0.0;
    for (std::size_t classes : {2u, 3u, 10u, 100u}) {
        Matrix anchors(classes, 3);
        for (std::size_t j = 0; j < classes; ++j) anchors.row(j)[1] = 0.5 + static_cast<double>(j);
        const double nce = infonce_loss(Vector{0.2, 2.0, -1.0}, anchors, 0, 0.04).loss;
        const double ce = ce_loss(Vector(classes, -0.7), static_cast<std::uint32_t>(classes - 1)).loss;
        const double ln_k = std::log(static_cast<double>(classes));
        worst = std::max({worst, std::abs(nce - ln_k), std::abs(ce - ln_k)});
    }
    out.require(worst <= 1e-12, fmt("uniform-case error %.3g", worst));
    if (out.pass) out.detail = fmt("kd=%.6f, uniform-case max error %.2e", kd, worst);
    return out;
}

// 6. Partition invariants and Dirichlet statistics.
Outcome partition_statistics() {
    Outcome out;
    std::mt19937_64 rng(99);
    auto labels_for = [&](std::size_t n, std::size_t classes) {
        std::vector<std::uint32_t> labels(n);
        for (auto& y : labels) y = static_cast<std::uint32_t>(rng() % classes);
        return labels;
    };
    std::size_t successes = 0;
    std::size_t failures = 0;
    for (int run = 0; run < 300; ++run) {
        const std::size_t classes = 2 + rng() % 10;
        const std::size_t clients = 1 + rng() % 12;
        const double alpha = std::pow(10.0, std::uniform_real_distribution<double>(-1.0, 3.0)(rng));
        const auto labels = labels_for(50 + rng() % 1000, classes);
        Partition p;
        try {
            p = dirichlet_partition(labels, clients, alpha, rng());
        } catch (const Error& e) {
            out.require(e.kind() == ErrorKind::PartitionFailure, "unexpected partition error kind");
            ++failures;
            continue;
        }
        ++successes;
        std::vector<int> seen(labels.size(), 0);
        for (const auto& client : p.assignments) {
            out.require(!client.empty(), "empty client");
            for (auto i : client) ++seen[i];
        }
        out.require(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }), "not disjoint/complete");
    }

    const auto labels = labels_for(2000, 10);
    auto max_share = [&](const Partition& p) {
        double total = 0.0;
        for (const auto& client : p.assignments) {
            std::vector<double> counts(10, 0.0);
            for (auto i : client) counts[labels[i]] += 1.0;
            total += *std::max_element(counts.begin(), counts.end()) / static_cast<double>(client.size());
        }
        return total / static_cast<double>(p.num_clients());
    };
    double skew_low = 0.0;
    double skew_high = 0.0;
    double tv_mean = 0.0;
    std::vector<double> global(10, 0.0);
    for (auto y : labels) global[y] += 1.0 / static_cast<double>(labels.size());
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        skew_low += max_share(dirichlet_partition(labels, 10, 0.1, seed)) / 20.0;
        skew_high += max_share(dirichlet_partition(labels, 10, 1.0, seed)) / 20.0;
        const auto iid = dirichlet_partition(labels, 10, 1000.0, seed);
        double tv_seed = 0.0;
        for (const auto& client : iid.assignments) {
            std::vector<double> local(10, 0.0);
            for (auto i : client) local[labels[i]] += 1.0 / static_cast<double>(client.size());
            double tv = 0.0;
            for (std::size_t k = 0; k < 10; ++k) tv += 0.5 * std::abs(local[k] - global[k]);
            tv_seed += tv / static_cast<double>(iid.num_clients());
        }
        tv_mean += tv_seed / 20.0;
    }
    out.require(skew_low > skew_high, fmt("max-class-share %.4f (0.1) vs %.4f (1.0)", skew_low, skew_high));
    out.require(tv_mean < 0.1, fmt("alpha=1000 TV distance %.4f", tv_mean));
    if (out.pass)
        out.detail = fmt("%zu/%zu runs valid (%zu redraw failures), share %.3f > %.3f, TV %.4f", successes,
                         successes + failures, failures, skew_low, skew_high, tv_mean);
    return out;
}

RunConfig synthetic_run(const std::string& strategy, std::uint64_t seed, std::size_t rounds) {
    return parse_config(std::nullopt, {{"strategy", strategy},
                                       {"num_classes", "10"},
                                       {"input_dim", "16"},
                                       {"teacher_dim", "32"},
                                       {"hidden_dim", "64"},
                                       {"num_clients", "10"},
                                       {"clients_per_round", "5"},
                                       {"rounds", std::to_string(rounds)},
                                       {"local_epochs", "5"},
                                       {"alpha", "0.5"},
                                       {"k0", "4"},
                                       {"delta_k", "4"},
                                       {"epsilon", "0.005"},
                                       {"window", "3"},
                                       {"seed", std::to_string(seed)}});
}

// 7. FAPD against FedAvg on the synthetic analogue, five seeds.
Outcome end_to_end() {
    Outcome out;
    const auto start = Clock::now();
    int not_worse = 0;
    int reached = 0;
    std::string rows;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto fapd_cfg = synthetic_run("fapd", seed, 60);
        const auto avg_cfg = synthetic_run("fedavg", seed, 60);
        const auto fapd = run_experiment(fapd_cfg.federation, fapd_cfg.strategy, fapd_cfg.data);
        const auto avg = run_experiment(avg_cfg.federation, avg_cfg.strategy, avg_cfg.data);
        const double a = fapd.metrics.back().accuracy;
        const double b = avg.metrics.back().accuracy;
        not_worse += a >= b - 0.005;
        reached += fapd.curriculum.k == 32;
        rows += fmt(" s%llu:%.3f/%.3f/k%zu", static_cast<unsigned long long>(seed), a, b, fapd.curriculum.k);
    }
    const double elapsed = seconds_since(start);
    out.require(not_worse >= 4, fmt("FAPD >= FedAvg - 0.5pt in only %d/5 seeds;%s", not_worse, rows.c_str()));
    out.require(reached >= 4, fmt("k reached D in only %d/5 seeds;%s", reached, rows.c_str()));
    out.require(elapsed < 300.0, fmt("runtime %.1f s", elapsed));
    if (out.pass)
        out.detail = fmt("not worse %d/5, k=D %d/5, %.1f s; fapd/fedavg/k:%s", not_worse, reached, elapsed, rows.c_str());
    return out;
}

// 8. Byte-identical metrics.csv across reruns and worker counts.
Outcome determinism() {
    Outcome out;
    const fs::path root = fs::temp_directory_path() / "fapd_acceptance_determinism";
    fs::remove_all(root);
    std::vector<std::string> files;
    for (const std::string& strategy : {"fapd", "fedavg"}) {
        for (std::size_t workers : {1u, 1u, 2u, 5u}) {
            auto config = synthetic_run(strategy, 3, 12);
            config.federation.workers = workers;
            config.output_dir = root / (strategy + std::to_string(files.size()));
            std::ostringstream quiet;
            cmd_run(config, quiet);
            files.push_back(io::read_text(config.output_dir / "metrics.csv"));
        }
    }
    for (std::size_t i = 1; i < 4; ++i) out.require(files[i] == files[0], "fapd metrics.csv differs");
    for (std::size_t i = 5; i < 8; ++i) out.require(files[i] == files[4], "fedavg metrics.csv differs");
    out.require(files[0] != files[4], "strategies produced identical traces");
    fs::remove_all(root);
    if (out.pass) out.detail = "2 strategies x {1, 1, 2, 5} workers, byte-identical";
    return out;
}

// 9. Weighted averaging against hand-computed weights.
Outcome aggregation_oracle() {
    Outcome out;
    double worst = 0.0;
    const ModelDims dims{2, 3, 2, 2};
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
        std::mt19937_64 rng(trial);
        std::vector<ClientResult> results;
        std::vector<double> n;
        for (int c = 0; c < 3; ++c) {
            Parameters p = Parameters::zeros(dims);
            p.assign(oracle::random_vector(p.count(), 5.0, 100 * trial + c).values());
            const std::size_t count = 1 + rng() % 500;
            n.push_back(static_cast<double>(count));
            results.push_back({p, count, {}});
        }
        const double total = n[0] + n[1] + n[2];
        const auto avg = aggregate(results).flatten();
        for (std::size_t i = 0; i < avg.size(); ++i) {
            double expect = 0.0;
            for (int c = 0; c < 3; ++c) expect += n[c] / total * results[c].params.flatten()[i];
            worst = std::max(worst, std::abs(avg[i] - expect));
        }
    }
    const ModelDims scalar{1, 1, 1, 1};
    Parameters zero = Parameters::zeros(scalar);
    Parameters four = Parameters::zeros(scalar);
    four.for_each([](std::span<double> s) { std::fill(s.begin(), s.end(), 4.0); });
    const std::vector<ClientResult> hand{{zero, 1, {}}, {four, 3, {}}};
    for (double v : aggregate(hand).flatten()) worst = std::max(worst, std::abs(v - 3.0));
    out.require(worst < 1e-12, fmt("aggregation error %.3g", worst));
    if (out.pass) out.detail = fmt("max error %.2e", worst);
    return out;
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> check;
    };
    const std::vector<Criterion> criteria = {
        {1, "eigensolver oracle", eigensolver_oracle},
        {2, "rotation correctness", hkd_correctness},
        {3, "gradient suite", gradient_suite},
        {4, "curriculum state machine", curriculum_state_machine},
        {5, "loss point values", loss_point_values},
        {6, "partition statistics", partition_statistics},
        {7, "end-to-end synthetic analogue", end_to_end},
        {8, "determinism", determinism},
        {9, "aggregation oracle", aggregation_oracle},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        Outcome outcome;
        try {
            outcome = c.check();
        } catch (const std::exception& e) {
            outcome.pass = false;
            outcome.detail = std::string("exception: ") + e.what();
        }
        failed += !outcome.pass;
        std::printf("[%s] criterion %d %s: %s\n", outcome.pass ? "PASS" : "FAIL", c.id, c.name, outcome.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
