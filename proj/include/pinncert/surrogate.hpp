#pragma once

// Error indicator network E_NN trained on certified bounds.
//
// E_NN is an indicator, not a certificate: it is cheap to evaluate but carries
// no guarantee, so nothing here produces Certificate values.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "pinncert/certify.hpp"
#include "pinncert/network.hpp"
#include "pinncert/ode.hpp"
#include "pinncert/optimizer.hpp"

namespace pinncert {

struct SurrogatePoint {
    double t = 0.0;
    std::vector<double> x0;
    std::vector<double> u;
    double target = 0.0;  // certified total at (t, x0, u)
};

struct SurrogateDataset {
    std::vector<SurrogatePoint> points;
    std::uint64_t seed = 0;
};

// Certifies each (t, x0, u) of `inputs`; the targets are Certificate totals.
// Certificate errors are rethrown with the offending point in the message.
SurrogateDataset certify_points(const Network& pinn, const OdeProblem& problem, const CollocationSet& inputs,
                                const CertifyConfig& config);

// `count` seeded uniform points over the problem domain, certified.
SurrogateDataset generate_surrogate_data(const Network& pinn, const OdeProblem& problem, std::size_t count,
                                         std::uint64_t seed, const CertifyConfig& config);

// (pred - target)^2, scaled by under_weight when pred < target.
double asymmetric_loss(double pred, double target, double under_weight);

struct ErrorNetConfig {
    std::vector<std::size_t> hidden{4, 4};
    Activation activation = Activation::tanh;
    OptimizerConfig optimizer = AdamConfig{1e-2};
    std::size_t epochs = 5000;
    double under_weight = 1000.0;
    std::uint64_t seed = 0;
};

// Mean asymmetric loss of `error_net` over the data set and its parameter gradient.
double surrogate_loss(const Network& error_net, const OdeProblem& problem, const SurrogateDataset& data,
                      double under_weight, std::vector<double>* gradient = nullptr);

// Trains an indicator with input layout (t, x0[, u]) and scalar output.
Network train_error_net(const SurrogateDataset& data, const OdeProblem& problem, const ErrorNetConfig& config);

double predict_error(const Network& error_net, const OdeProblem& problem, std::span<const double> x0,
                     std::span<const double> u, double t);

// Fraction of points where E_NN >= target.
double overestimation_fraction(const Network& error_net, const OdeProblem& problem, const SurrogateDataset& data);

// CSV `t,x0_1..x0_n[,u],e_target`.
void write_surrogate_csv(std::ostream& out, const OdeProblem& problem, const SurrogateDataset& data);
SurrogateDataset read_surrogate_csv(const std::filesystem::path& path, const OdeProblem& problem);

// CSV `t,x0_1..x0_n[,u],e_certified,e_nn`.
void write_comparison_csv(std::ostream& out, const Network& error_net, const OdeProblem& problem,
                          const SurrogateDataset& data);

}  // namespace pinncert
