#include "fapd/config.hpp"

#include <charconv>
#include <cstdlib>

#include "fapd/binary_io.hpp"
#include "fapd/error.hpp"

namespace fapd {

namespace {

using json = nlohmann::ordered_json;

const std::set<std::string> kSyntheticKeys = {"num_classes", "input_dim",        "teacher_dim",   "n_train",
                                              "n_test",      "noise_sigma",      "class_mean_scale",
                                              "teacher_scale", "teacher_decay"};

[[noreturn]] void config_error(const std::string& key, const std::string& message) {
    fail(ErrorKind::Config, "config key '" + key + "': " + message);
}

// Checks `value` against the type of the default and returns it in canonical form.
json coerce(const std::string& key, const json& value, const json& reference) {
    if (reference.is_number_unsigned()) {
        if (value.is_number_unsigned()) return value;
        if (value.is_number_integer()) config_error(key, "must be a non-negative integer");
        if (value.is_number_float()) {
            const double d = value.get<double>();
            if (d >= 0.0 && d == static_cast<double>(static_cast<std::uint64_t>(d)))
                return json(static_cast<std::uint64_t>(d));
        }
        config_error(key, "expected a non-negative integer, got " + value.dump());
    }
    if (reference.is_number_float()) {
        if (value.is_number()) return json(value.get<double>());
        config_error(key, "expected a number, got " + value.dump());
    }
    if (reference.is_string()) {
        if (value.is_string()) return value;
        config_error(key, "expected a string, got " + value.dump());
    }
    config_error(key, "unsupported value type");
}

json parse_override(const std::string& key, const std::string& text, const json& reference) {
    if (reference.is_string()) return json(text);
    if (reference.is_number_unsigned()) {
        std::uint64_t v = 0;
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec != std::errc() || ptr != text.data() + text.size())
            config_error(key, "expected a non-negative integer, got '" + text + "'");
        return json(v);
    }
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
        config_error(key, "expected a number, got '" + text + "'");
    return json(v);
}

template <typename F>
auto with_key(const std::string& key, F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Config) throw;
        config_error(key, e.what());
    }
}

}  // namespace

const nlohmann::ordered_json& config_defaults() {
    static const json defaults = [] {
        json d;
        d["strategy"] = "fapd";
        d["fixed_k"] = 0u;
        d["num_clients"] = 10u;
        d["clients_per_round"] = 5u;
        d["rounds"] = 100u;
        d["local_epochs"] = 10u;
        d["batch_size"] = 64u;
        d["lr"] = 0.01;
        d["momentum"] = 0.9;
        d["lambda_kd"] = 0.5;
        d["lambda_cl"] = 0.5;
        d["tau"] = 0.04;
        d["kd_direction"] = "teacher_student";
        d["k0"] = 8u;
        d["delta_k"] = 5u;
        d["epsilon"] = 0.005;
        d["window"] = 3u;
        d["alpha"] = 0.5;
        d["seed"] = 0u;
        d["hidden_dim"] = 64u;
        d["calib_size"] = 1024u;
        d["calib_source"] = "train";
        d["workers"] = 1u;
        d["data_dir"] = "";
        d["num_classes"] = 10u;
        d["input_dim"] = 16u;
        d["teacher_dim"] = 32u;
        d["n_train"] = 2000u;
        d["n_test"] = 1000u;
        d["noise_sigma"] = SyntheticSpec{}.noise_sigma;
        d["class_mean_scale"] = 3.0;
        d["teacher_scale"] = 1.0;
        d["teacher_decay"] = 0.9;
        d["output_dir"] = "out";
        return d;
    }();
    return defaults;
}

std::optional<std::string> seed_from_environment() {
    if (const char* v = std::getenv("FAPD_SEED")) return std::string(v);
    return std::nullopt;
}

RunConfig parse_config(const std::optional<std::filesystem::path>& path, const Overrides& overrides,
                       const std::optional<std::string>& env_seed) {
    const json& defaults = config_defaults();
    json values = defaults;
    RunConfig config;

    if (path) {
        const std::string text = io::read_text(*path);
        if (text.find_first_not_of(" \t\r\n") != std::string::npos) {
            json file;
            try {
                file = json::parse(text);
            } catch (const json::parse_error& e) {
                fail(ErrorKind::Config, path->string() + ": malformed JSON at byte offset " + std::to_string(e.byte));
            }
            if (!file.is_object()) fail(ErrorKind::Config, path->string() + ": expected a flat JSON object");
            for (const auto& [key, value] : file.items()) {
                if (!defaults.contains(key)) config_error(key, "unknown key");
                values[key] = coerce(key, value, defaults[key]);
                config.explicit_keys.insert(key);
            }
        }
    }
    if (env_seed) {
        values["seed"] = parse_override("seed", *env_seed, defaults["seed"]);
        config.explicit_keys.insert("seed");
    }
    for (const auto& [key, text] : overrides) {
        if (!defaults.contains(key)) config_error(key, "unknown key");
        values[key] = parse_override(key, text, defaults[key]);
        config.explicit_keys.insert(key);
    }

    auto count = [&](const char* key) { return values[key].get<std::size_t>(); };
    auto real = [&](const char* key) { return values[key].get<double>(); };
    auto text = [&](const char* key) { return values[key].get<std::string>(); };

    config.strategy = with_key("strategy", [&] { return parse_strategy(text("strategy")); });
    config.strategy.fixed_k = count("fixed_k");

    auto& f = config.federation;
    f.num_clients = count("num_clients");
    f.clients_per_round = count("clients_per_round");
    f.rounds = count("rounds");
    f.local_epochs = count("local_epochs");
    f.batch_size = count("batch_size");
    f.lr = real("lr");
    f.momentum = real("momentum");
    f.weights = {real("lambda_kd"), real("lambda_cl"), real("tau")};
    f.kd_direction = with_key("kd_direction", [&] { return parse_kd_direction(text("kd_direction")); });
    f.k0 = count("k0");
    f.delta_k = count("delta_k");
    f.epsilon = real("epsilon");
    f.window = count("window");
    f.alpha = real("alpha");
    f.seed = values["seed"].get<std::uint64_t>();
    f.hidden_dim = count("hidden_dim");
    f.calib_size = count("calib_size");
    f.calib_source = with_key("calib_source", [&] { return parse_calibration_source(text("calib_source")); });
    f.workers = count("workers");

    auto& s = config.data.synthetic;
    s.num_classes = count("num_classes");
    s.input_dim = count("input_dim");
    s.teacher_dim = count("teacher_dim");
    s.n_train = count("n_train");
    s.n_test = count("n_test");
    s.noise_sigma = real("noise_sigma");
    s.class_mean_scale = real("class_mean_scale");
    s.teacher_scale = real("teacher_scale");
    s.teacher_decay = real("teacher_decay");
    s.seed = f.seed;

    const std::string data_dir = text("data_dir");
    if (!data_dir.empty()) {
        for (const auto& key : kSyntheticKeys)
            if (config.explicit_keys.contains(key))
                config_error(key, "synthetic data parameters cannot be combined with data_dir");
        config.data.data_dir = data_dir;
    }
    const std::string output_dir = text("output_dir");
    if (output_dir.empty()) config_error("output_dir", "must not be empty");
    config.output_dir = output_dir;

    // Constraint checks, each naming its key.
    if (f.num_clients < 1) config_error("num_clients", "must be >= 1");
    if (f.clients_per_round < 1 || f.clients_per_round > f.num_clients)
        config_error("clients_per_round", "value " + std::to_string(f.clients_per_round) + " outside [1, num_clients=" +
                                              std::to_string(f.num_clients) + "]");
    if (f.rounds < 1) config_error("rounds", "must be >= 1");
    if (f.local_epochs < 1) config_error("local_epochs", "must be >= 1");
    if (f.batch_size < 1) config_error("batch_size", "must be >= 1");
    if (!(f.lr >= 0.0)) config_error("lr", "must be >= 0");
    if (!(f.momentum >= 0.0 && f.momentum < 1.0)) config_error("momentum", "must be in [0, 1)");
    if (!(f.weights.lambda_kd >= 0.0)) config_error("lambda_kd", "must be >= 0");
    if (!(f.weights.lambda_cl >= 0.0)) config_error("lambda_cl", "must be >= 0");
    if (!(f.weights.tau > 0.0)) config_error("tau", "must be > 0");
    if (f.delta_k < 1) config_error("delta_k", "must be >= 1");
    if (!(f.epsilon > 0.0)) config_error("epsilon", "must be > 0");
    if (f.window < 2) config_error("window", "must be >= 2");
    if (!(f.alpha > 0.0)) config_error("alpha", "must be > 0");
    if (f.hidden_dim < 1) config_error("hidden_dim", "must be >= 1");
    if (f.calib_size < 2) config_error("calib_size", "must be >= 2");
    if (f.workers < 1) config_error("workers", "must be >= 1");
    if (!config.data.data_dir) {
        if (s.num_classes < 2) config_error("num_classes", "must be >= 2");
        if (s.input_dim < s.num_classes) config_error("input_dim", "must be >= num_classes");
        if (s.teacher_dim < 2) config_error("teacher_dim", "must be >= 2");
        if (s.n_train < 1) config_error("n_train", "must be >= 1");
        if (s.n_test < 1) config_error("n_test", "must be >= 1");
        if (!(s.noise_sigma > 0.0)) config_error("noise_sigma", "must be > 0");
        if (!(s.teacher_scale > 0.0)) config_error("teacher_scale", "must be > 0");
        if (!(s.teacher_decay > 0.0)) config_error("teacher_decay", "must be > 0");
        if (f.k0 < 1 || f.k0 > s.teacher_dim)
            config_error("k0", "value " + std::to_string(f.k0) + " outside [1, teacher_dim=" +
                                   std::to_string(s.teacher_dim) + "]");
        if (config.strategy.fixed_k > s.teacher_dim)
            config_error("fixed_k", "value " + std::to_string(config.strategy.fixed_k) + " exceeds teacher_dim");
    } else if (f.k0 < 1) {
        config_error("k0", "must be >= 1");
    }

    config.resolved = std::move(values);
    return config;
}

}  // namespace fapd
