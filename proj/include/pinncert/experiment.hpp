#pragma once

// Experiment driver behind the command line tool: configuration files,
// presets, and the train / certify / surrogate / compare commands.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pinncert/certify.hpp"
#include "pinncert/ode.hpp"
#include "pinncert/surrogate.hpp"
#include "pinncert/train.hpp"

namespace pinncert {

// Process exit codes shared by every command.
enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_divergence = 3 };

struct ExperimentConfig {
    std::string preset = "decay1d";  // decay1d | pendulum
    bool desk_scale = false;
    std::uint64_t seed = 0;

    // network
    std::vector<std::size_t> hidden{4, 4};
    Activation activation = Activation::tanh;

    // train
    std::size_t collocation = 200;
    std::size_t data_records = 1;
    double gamma_data = 1.0;
    double gamma_phys = 1.0;
    std::string optimizer = "adam";  // adam | lbfgs
    double learning_rate = 1e-2;
    std::size_t lbfgs_memory = 10;
    std::size_t epochs = 5000;

    // certify
    BoundMode mode = BoundMode::automatic;
    double eps = 0.33;
    std::optional<double> mu;  // explicit mu; default is a tenth of the mean residual
    std::size_t k_grid = 2000;
    double k_safety = 1.5;
    std::optional<double> lipschitz;
    std::optional<std::size_t> subintervals;
    std::size_t max_subintervals = 100000;
    std::size_t query_points = 101;

    // control schedule (problems with a control input)
    std::size_t control_intervals = 50;
    double control_horizon = 4.0;
    std::size_t certified_intervals = 50;
    std::size_t interval_points = 20;
    std::vector<double> schedule_start{0.3, 0.0, 0.0, 0.0};

    // surrogate
    std::size_t surrogate_points = 100;
    std::size_t heldout_points = 200;
    std::vector<std::size_t> surrogate_hidden{4, 4};
    double under_weight = 1000.0;
    std::size_t surrogate_epochs = 5000;
    double surrogate_learning_rate = 1e-2;

    std::filesystem::path out = "out";

    // Derived seeds, one stream per random consumer.
    std::uint64_t network_seed() const { return seed; }
    std::uint64_t collocation_seed() const { return seed + 1; }
    std::uint64_t lipschitz_seed() const { return seed + 2; }
    std::uint64_t surrogate_seed() const { return seed + 3; }
    std::uint64_t heldout_seed() const { return seed + 4; }
    std::uint64_t error_net_seed() const { return seed + 5; }
};

// Preset defaults. The pendulum preset at full scale uses 10000 collocation
// points and 100000 L-BFGS epochs; `desk_scale` swaps in reduced counts that
// finish on a single core in minutes.
ExperimentConfig preset_config(const std::string& name, bool desk_scale = false);

// INI file with sections [experiment], [network], [train], [certify],
// [schedule], [surrogate]. Keys absent from the file keep the preset value
// named by experiment.preset (and experiment.desk_scale). Unknown keys and
// malformed values throw ConfigError.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(std::istream& in);
void write_config(std::ostream& out, const ExperimentConfig& config);

OdeProblem make_problem(const ExperimentConfig& config);
TrainingRun make_training_run(const ExperimentConfig& config);
CertifyConfig make_certify_config(const ExperimentConfig& config);
ErrorNetConfig make_error_net_config(const ExperimentConfig& config);
CollocationSet training_collocation(const ExperimentConfig& config, const OdeProblem& problem);

// One constant control on [t_start, t_start + duration) entered from `x0`.
struct ControlInterval {
    double t_start = 0.0;
    double duration = 0.0;
    std::vector<double> u;
    std::vector<double> x0;
};

// Linear-quadratic stabilisation of the upright pendulum: a discrete LQR gain
// for the zero-order-hold linearisation at the origin, applied once per
// interval with the control clipped to the control box; interval start states
// come from an rk4 simulation of the nonlinear model.
std::vector<ControlInterval> pendulum_schedule(const OdeProblem& problem, std::span<const double> start,
                                               std::size_t intervals, double horizon);

// CSV `k,t_start,u,x0_1..x0_n` (one u column per control input,
// one column per state).
void write_schedule_csv(std::ostream& out, const std::vector<ControlInterval>& schedule);
std::vector<ControlInterval> read_schedule_csv(const std::filesystem::path& path, const OdeProblem& problem,
                                               double duration);

struct CommandOptions {
    std::optional<std::filesystem::path> network;   // default <out>/network.json
    std::optional<std::filesystem::path> schedule;  // control schedule CSV
    std::optional<std::filesystem::path> data;      // saved surrogate data set
    bool with_reference = false;
};

// Each command writes into config.out (created when missing), logs a short
// summary to `log` and returns normally or throws the library error types.
void cmd_train(const ExperimentConfig& config, std::ostream& log);
void cmd_certify(const ExperimentConfig& config, const CommandOptions& options, std::ostream& log);
void cmd_surrogate(const ExperimentConfig& config, const CommandOptions& options, std::ostream& log);

struct ComparisonSummary {
    std::size_t rows = 0;
    std::size_t rigor_violations = 0;  // total < actual_error - 1e-12
    double max_overestimation = 0.0;   // total / actual_error over rows with actual_error > 0
    double mean_overestimation = 0.0;
    double final_overestimation = 0.0;  // at the last row
    double surrogate_overestimation = 0.0;  // fraction of rows with e_nn >= total
    bool has_reference = false;
};

// Aligns a certificates CSV with a surrogate grid CSV (`t,...,e_nn`) on the
// t column. Throws ConfigError for empty or misaligned files.
ComparisonSummary cmd_compare(const std::filesystem::path& certificates, const std::filesystem::path& surrogate,
                              std::ostream& log);

// Maps an exception from the commands above to its exit code after printing it.
int report_failure(const std::exception& e, std::ostream& err);

}  // namespace pinncert
