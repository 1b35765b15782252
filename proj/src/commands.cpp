#include "fapd/commands.hpp"

#include <charconv>
#include <ostream>
#include <sstream>

#include "fapd/binary_io.hpp"
#include "fapd/error.hpp"

namespace fapd {

namespace {

using json = nlohmann::ordered_json;

void ensure_directory(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail(ErrorKind::Io, "cannot create output directory " + dir.string() + ": " + ec.message());
}

void print_progress(std::ostream& out, const std::string& label, std::size_t total, const RoundMetrics& m) {
    out << "[" << label << "] round " << m.round << "/" << total << " k=" << m.k
        << " acc=" << format_real(m.accuracy) << " loss=" << format_real(m.losses.total)
        << (m.consensus ? " consensus" : "") << "\n";
    out.flush();
}

struct RunOutcome {
    ExperimentResult result;
    std::size_t teacher_dim = 0;
};

RunOutcome execute(const RunConfig& config, std::ostream& progress, const std::string& label) {
    auto [train, test] = load_data(config.data);
    const std::size_t teacher_dim = train.teacher_dim;
    const std::size_t total = config.federation.rounds;
    auto result = run_experiment(config.federation, config.strategy, std::move(train), std::move(test),
                                 [&](const RoundMetrics& m) { print_progress(progress, label, total, m); });
    return {std::move(result), teacher_dim};
}

void write_run_outputs(const RunConfig& config, const RunOutcome& outcome, const std::filesystem::path& dir) {
    ensure_directory(dir);
    const auto& metrics = outcome.result.metrics;
    io::write_text(dir / "metrics.csv", metrics_csv(metrics));
    save_checkpoint(outcome.result.model, dir / "checkpoint");

    const auto& cur = outcome.result.curriculum;
    json summary;
    summary["strategy"] = std::string(to_string(config.strategy.kind));
    summary["seed"] = config.federation.seed;
    summary["alpha"] = config.federation.alpha;
    summary["rounds"] = metrics.size();
    summary["final_accuracy"] = metrics.back().accuracy;
    double best = 0.0;
    for (const auto& m : metrics) best = std::max(best, m.accuracy);
    summary["best_accuracy"] = best;
    summary["rounds_to_95"] = rounds_to_95(metrics);
    summary["completion_round"] = completion_round(metrics, outcome.teacher_dim);
    summary["final_k"] = config.strategy.uses_controller() ? cur.k : metrics.back().k;
    json curriculum;
    curriculum["k"] = cur.k;
    curriculum["k0"] = cur.params.k0;
    curriculum["delta_k"] = cur.params.delta_k;
    curriculum["epsilon"] = cur.params.epsilon;
    curriculum["window"] = cur.params.window;
    curriculum["max_dim"] = cur.params.max_dim;
    curriculum["history"] = cur.history;
    summary["curriculum"] = std::move(curriculum);
    summary["config"] = config.resolved;
    io::write_text(dir / "summary.json", summary.dump(2) + "\n");
}

}  // namespace

std::string format_real(double value) {
    char buffer[64];
    const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    if (ec != std::errc()) fail(ErrorKind::Numeric, "cannot format real value");
    return std::string(buffer, ptr);
}

std::string metrics_csv(std::span<const RoundMetrics> metrics) {
    std::ostringstream out;
    out << kMetricsHeader << "\n";
    for (const auto& m : metrics) {
        out << m.round << "," << m.k << "," << format_real(m.accuracy) << "," << format_real(m.losses.total) << ","
            << format_real(m.losses.ce) << "," << format_real(m.losses.kd) << "," << format_real(m.losses.cl) << ","
            << (m.consensus ? 1 : 0) << ",";
        for (std::size_t i = 0; i < m.clients.size(); ++i) out << (i ? ";" : "") << m.clients[i];
        out << "\n";
    }
    return out.str();
}

std::size_t rounds_to_95(std::span<const RoundMetrics> metrics) {
    require(!metrics.empty(), "rounds_to_95: empty trace");
    const double target = 0.95 * metrics.back().accuracy;
    for (const auto& m : metrics)
        if (m.accuracy >= target) return m.round;
    return metrics.back().round;
}

long completion_round(std::span<const RoundMetrics> metrics, std::size_t max_dim) {
    for (const auto& m : metrics)
        if (m.k == max_dim) return static_cast<long>(m.round);
    return -1;
}

int cmd_run(const RunConfig& config, std::ostream& progress) {
    ensure_directory(config.output_dir);
    const RunOutcome outcome = execute(config, progress, std::string(to_string(config.strategy.kind)));
    write_run_outputs(config, outcome, config.output_dir);
    return 0;
}

int cmd_compare(std::span<const RunConfig> configs, const std::filesystem::path& out_dir, std::ostream& progress) {
    if (configs.size() < 2) fail(ErrorKind::Config, "compare needs at least 2 configs");
    static const std::set<std::string> kMayDiffer = {"strategy", "fixed_k", "alpha", "seed", "output_dir", "workers"};
    const json& reference = configs.front().resolved;
    for (std::size_t i = 1; i < configs.size(); ++i) {
        for (const auto& [key, value] : configs[i].resolved.items()) {
            if (kMayDiffer.contains(key)) continue;
            if (reference[key] != value)
                fail(ErrorKind::Config, "compare: config " + std::to_string(i) + " differs in key '" + key +
                                            "' (only strategy, fixed_k, alpha, seed, workers and output_dir may vary)");
        }
    }

    ensure_directory(out_dir);
    std::ostringstream csv;
    csv << "strategy,alpha,seed,final_accuracy,rounds_to_95,completion_round\n";
    for (std::size_t i = 0; i < configs.size(); ++i) {
        const auto& c = configs[i];
        const std::string name = std::string(to_string(c.strategy.kind));
        const std::string label = name + " a=" + format_real(c.federation.alpha) + " s=" + std::to_string(c.federation.seed);
        const RunOutcome outcome = execute(c, progress, label);
        const std::string run_name = "run" + std::to_string(i) + "_" + name + "_a" + format_real(c.federation.alpha) +
                                     "_s" + std::to_string(c.federation.seed);
        write_run_outputs(c, outcome, out_dir / run_name);
        const auto& metrics = outcome.result.metrics;
        csv << name << "," << format_real(c.federation.alpha) << "," << c.federation.seed << ","
            << format_real(metrics.back().accuracy) << "," << rounds_to_95(metrics) << ","
            << completion_round(metrics, outcome.teacher_dim) << "\n";
    }
    io::write_text(out_dir / "compare.csv", csv.str());
    return 0;
}

int cmd_dump_embeddings(const RunConfig& config, const std::filesystem::path& checkpoint,
                        const std::filesystem::path& out) {
    const StudentModel model = load_checkpoint(checkpoint);
    const auto [train, test] = load_data(config.data);
    const ModelDims expected{test.input_dim, config.federation.hidden_dim, test.teacher_dim, test.num_classes};
    if (!(model.dims == expected)) {
        fail(ErrorKind::InvalidInput,
             "checkpoint dims (input " + std::to_string(model.dims.input_dim) + ", hidden " +
                 std::to_string(model.dims.hidden_dim) + ", feature " + std::to_string(model.dims.feature_dim) +
                 ", classes " + std::to_string(model.dims.num_classes) + ") do not match the config (input " +
                 std::to_string(expected.input_dim) + ", hidden " + std::to_string(expected.hidden_dim) +
                 ", feature " + std::to_string(expected.feature_dim) + ", classes " +
                 std::to_string(expected.num_classes) + ")");
    }

    std::ostringstream csv;
    csv << "label";
    for (std::size_t i = 0; i < model.dims.feature_dim; ++i) csv << ",f_" << i;
    csv << "\n";
    for (const auto& s : test.samples) {
        const Activations act = forward(model, s.x);
        csv << s.y;
        for (double v : act.features) csv << "," << format_real(v);
        csv << "\n";
    }
    if (out.has_parent_path()) ensure_directory(out.parent_path());
    io::write_text(out, csv.str());
    return 0;
}

int cmd_gen_data(const RunConfig& config, const std::filesystem::path& out_dir) {
    if (config.data.data_dir) fail(ErrorKind::Config, "config key 'data_dir': gen-data only produces synthetic data");
    const SyntheticData data = generate_synthetic(config.data.synthetic);
    save_dataset(data.train, out_dir / "train");
    save_dataset(data.test, out_dir / "test");
    return 0;
}

}  // namespace fapd
