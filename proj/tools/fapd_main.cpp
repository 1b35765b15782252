#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fapd/commands.hpp"
#include "fapd/config.hpp"
#include "fapd/error.hpp"

namespace {

// Turns leftover "--key value" / "--key=value" tokens into overrides.
fapd::Overrides collect_overrides(const std::vector<std::string>& extras) {
    fapd::Overrides overrides;
    for (std::size_t i = 0; i < extras.size(); ++i) {
        const std::string& token = extras[i];
        if (token.rfind("--", 0) != 0 || token.size() <= 2)
            fapd::fail(fapd::ErrorKind::Config, "unexpected argument '" + token + "'");
        std::string key = token.substr(2);
        if (const auto eq = key.find('='); eq != std::string::npos) {
            overrides.emplace_back(key.substr(0, eq), key.substr(eq + 1));
            continue;
        }
        if (i + 1 >= extras.size()) fapd::fail(fapd::ErrorKind::Config, "override --" + key + " is missing a value");
        overrides.emplace_back(std::move(key), extras[++i]);
    }
    return overrides;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated adaptive progressive distillation simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> compare_paths;
    std::string compare_out = "compare_out";
    std::string checkpoint_dir;
    std::string out_path;

    auto* run = app.add_subcommand("run", "Run one experiment; extra --key value pairs override the config");
    run->add_option("--config", config_path, "JSON config file")->required();
    run->allow_extras();

    auto* compare = app.add_subcommand("compare", "Run several configs and write compare.csv");
    compare->add_option("--configs", compare_paths, "JSON config files")->required()->expected(2, -1);
    compare->add_option("--out", compare_out, "Directory for compare.csv and per-run outputs");

    auto* dump = app.add_subcommand("dump-embeddings", "Write test-split student features as CSV");
    dump->add_option("--config", config_path, "JSON config file")->required();
    dump->add_option("--checkpoint", checkpoint_dir, "Checkpoint directory")->required();
    dump->add_option("--out", out_path, "Output CSV path")->required();

    auto* gen = app.add_subcommand("gen-data", "Write the synthetic dataset described by a config");
    gen->add_option("--config", config_path, "JSON config file")->required();
    gen->add_option("--out", out_path, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        const auto env_seed = fapd::seed_from_environment();
        if (run->parsed()) {
            const auto config = fapd::parse_config(config_path, collect_overrides(run->remaining()), env_seed);
            return fapd::cmd_run(config, std::cerr);
        }
        if (compare->parsed()) {
            std::vector<fapd::RunConfig> configs;
            for (const auto& p : compare_paths) configs.push_back(fapd::parse_config(p, {}, env_seed));
            return fapd::cmd_compare(configs, compare_out, std::cerr);
        }
        if (dump->parsed()) {
            const auto config = fapd::parse_config(config_path, {}, env_seed);
            return fapd::cmd_dump_embeddings(config, checkpoint_dir, out_path);
        }
        if (gen->parsed()) {
            const auto config = fapd::parse_config(config_path, {}, env_seed);
            return fapd::cmd_gen_data(config, out_path);
        }
    } catch (const fapd::Error& e) {
        std::cerr << "error kind=" << fapd::to_string(e.kind()) << " message=\"" << e.what() << "\"\n";
        return e.kind() == fapd::ErrorKind::Config ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error kind=internal message=\"" << e.what() << "\"\n";
        return 1;
    }
    return 0;
}
