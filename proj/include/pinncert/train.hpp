#pragma once

// Physics-informed training: data loss, eta-weighted residual loss, collocation
// sampling and the full-batch training loop.

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include "pinncert/network.hpp"
#include "pinncert/ode.hpp"
#include "pinncert/optimizer.hpp"

namespace pinncert {

struct CollocationPoint {
    double t = 0.0;
    std::vector<double> x0;
    std::vector<double> u;
};

struct CollocationSet {
    std::vector<CollocationPoint> points;
    std::uint64_t seed = 0;
    Interval time_box;
    std::vector<Interval> state_box;
    std::vector<Interval> control_box;
};

// Uniform i.i.d. over [0, t_final] x state box x control box. Throws
// ConfigError for count == 0 or an interval with hi < lo.
CollocationSet sample_collocation(const OdeProblem& problem, std::size_t count, std::uint64_t seed);

struct DataRecord {
    double t = 0.0;
    std::vector<double> x0;
    std::vector<double> u;
    std::vector<double> target;
};

struct DataSet {
    std::vector<DataRecord> records;
};

// Records (0, x0, u) -> x0 for the first `count` collocation states: the
// initial-value anchor.
DataSet initial_value_records(const CollocationSet& colloc, std::size_t count);

// Residual weighting eta(t): piecewise linear through (t, weight) breakpoints,
// constant beyond the ends.
class Eta {
public:
    Eta() = default;
    static Eta constant(double weight);
    static Eta table(std::vector<std::pair<double, double>> breakpoints);

    double operator()(double t) const;
    const std::vector<std::pair<double, double>>& breakpoints() const noexcept { return table_; }

private:
    std::vector<std::pair<double, double>> table_{{0.0, 1.0}};
};

struct LossRecord {
    std::size_t epoch = 0;
    double total = 0.0;
    double data = 0.0;
    double physics = 0.0;
};

struct TrainingRun {
    double gamma_data = 1.0;
    double gamma_phys = 1.0;
    Eta eta;
    OptimizerConfig optimizer = AdamConfig{};
    std::size_t epochs = 0;
    std::uint64_t seed = 0;
    std::vector<LossRecord> loss_history;
};

// Mean of ||phi_hat(z.t, z.x0) - z.x||^2. Throws ConfigError when empty.
double loss_data(const Network& net, const OdeProblem& problem, const DataSet& data);

// Mean of eta(y.t) ||R(y.t)||^2 over the collocation points.
double loss_physics(const Network& net, const OdeProblem& problem, const CollocationSet& colloc,
                    const Eta& eta = {});

struct LossEvaluation {
    double total = 0.0;
    double data = 0.0;
    double physics = 0.0;
    std::vector<double> gradient;  // d total / d parameters
};

// gamma_data * L_data + gamma_phys * L_phys and its parameter gradient. An
// empty data set or collocation set contributes zero.
LossEvaluation evaluate_loss(const Network& net, const OdeProblem& problem, const DataSet& data,
                             const CollocationSet& colloc, double gamma_data, double gamma_phys, const Eta& eta);

struct TrainResult {
    Network network;
    LossRecord final_loss;
};

// Full-batch minimisation of the total loss; appends one record per completed
// epoch to run.loss_history. Zero epochs returns the network unchanged.
TrainResult train(Network net, const OdeProblem& problem, const DataSet& data, const CollocationSet& colloc,
                  TrainingRun& run);

// CSV `epoch,loss_total,loss_data,loss_phys`.
void write_loss_csv(std::ostream& out, const std::vector<LossRecord>& history);

}  // namespace pinncert
