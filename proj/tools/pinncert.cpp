// pinncert: train physics-informed networks on ODE initial value problems,
// certify their prediction error and learn an error indicator.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pinncert/experiment.hpp"

using namespace pinncert;

namespace {

struct Common {
    std::string config;
    std::string preset;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool desk_scale = false;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "experiment configuration (INI)")->check(CLI::ExistingFile);
    cmd->add_option("--preset", c.preset, "decay1d or pendulum")->check(CLI::IsMember({"decay1d", "pendulum"}));
    cmd->add_option("--seed", c.seed, "master seed");
    cmd->add_option("--out", c.out, "output directory");
    cmd->add_flag("--desk-scale", c.desk_scale, "reduced training budget for the pendulum preset");
}

ExperimentConfig resolve(const Common& c) {
    ExperimentConfig config;
    if (!c.config.empty()) {
        config = load_config(c.config);
        if (!c.preset.empty() && c.preset != config.preset)
            throw ConfigError("--preset " + c.preset + " conflicts with preset " + config.preset + " in " + c.config);
        if (c.desk_scale && !config.desk_scale)
            throw ConfigError("--desk-scale conflicts with desk_scale = false in " + c.config);
    } else {
        config = preset_config(c.preset.empty() ? "decay1d" : c.preset, c.desk_scale);
    }
    if (c.seed) config.seed = *c.seed;
    if (!c.out.empty()) config.out = c.out;
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Certified error bounds for physics-informed networks"};
    app.require_subcommand(1);

    Common train_opts, certify_opts, surrogate_opts;
    std::string network, schedule, data;
    bool with_reference = false;
    std::string certs_csv, surrogate_csv;

    auto* train_cmd = app.add_subcommand("train", "train a network and write network.json and loss.csv");
    add_common(train_cmd, train_opts);

    auto* certify_cmd = app.add_subcommand("certify", "write certificates.csv for the preset's query times");
    add_common(certify_cmd, certify_opts);
    certify_cmd->add_option("--network", network, "trained network (default <out>/network.json)");
    certify_cmd->add_option("--schedule", schedule, "control schedule CSV")->check(CLI::ExistingFile);
    certify_cmd->add_flag("--with-reference", with_reference, "add the actual error against a reference solution");

    auto* surrogate_cmd = app.add_subcommand("surrogate", "train the error indicator network");
    add_common(surrogate_cmd, surrogate_opts);
    surrogate_cmd->add_option("--network", network, "trained network (default <out>/network.json)");
    surrogate_cmd->add_option("--schedule", schedule, "control schedule CSV")->check(CLI::ExistingFile);
    surrogate_cmd->add_option("--data", data, "reuse a saved surrogate data set")->check(CLI::ExistingFile);

    auto* compare_cmd = app.add_subcommand("compare", "summarise certificates against references and E_NN");
    compare_cmd->add_option("certificates", certs_csv, "certificates CSV")->required();
    compare_cmd->add_option("surrogate", surrogate_csv, "surrogate grid CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config;
    }

    try {
        CommandOptions options;
        if (!network.empty()) options.network = network;
        if (!schedule.empty()) options.schedule = schedule;
        if (!data.empty()) options.data = data;
        options.with_reference = with_reference;

        if (*train_cmd) {
            cmd_train(resolve(train_opts), std::cout);
        } else if (*certify_cmd) {
            cmd_certify(resolve(certify_opts), options, std::cout);
        } else if (*surrogate_cmd) {
            cmd_surrogate(resolve(surrogate_opts), options, std::cout);
        } else if (*compare_cmd) {
            cmd_compare(certs_csv, surrogate_csv, std::cout);
        }
    } catch (const std::exception& e) {
        return report_failure(e, std::cerr);
    }
    return exit_ok;
}
