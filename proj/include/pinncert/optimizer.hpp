#pragma once

// Full-batch first-order optimizers over a flat parameter vector.

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <variant>
#include <vector>

namespace pinncert {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct LbfgsConfig {
    std::size_t memory = 10;
    // Armijo backtracking: initial step 1, shrink by `backtrack` until sufficient decrease.
    double armijo = 1e-4;
    double backtrack = 0.5;
    std::size_t max_line_search = 30;
};

using OptimizerConfig = std::variant<AdamConfig, LbfgsConfig>;

class Adam {
public:
    Adam(AdamConfig config, std::size_t parameter_count);

    void step(std::span<double> params, std::span<const double> grad);
    std::size_t iterations() const noexcept { return t_; }

private:
    AdamConfig config_;
    std::vector<double> m_;
    std::vector<double> v_;
    std::size_t t_ = 0;
};

// Objective value; fills `grad` (same length as params).
using Objective = std::function<double(std::span<const double> params, std::span<double> grad)>;

class Lbfgs {
public:
    Lbfgs(LbfgsConfig config, std::size_t parameter_count);

    // One quasi-Newton iteration starting from (value, grad) at params.
    // Returns false when no descent step could be found (converged or stalled).
    bool step(std::span<double> params, double& value, std::vector<double>& grad, const Objective& objective);

private:
    LbfgsConfig config_;
    std::deque<std::vector<double>> s_;
    std::deque<std::vector<double>> y_;
    std::deque<double> rho_;
};

struct EpochLoss {
    std::size_t epoch = 0;
    double value = 0.0;
};

// Runs `epochs` optimizer iterations on `params`. `on_epoch(epoch, value)` sees
// the objective at the start of every epoch. Returns the objective at the
// returned parameters, which are the best visited (never worse than the
// starting point). Throws DivergenceError on a non-finite value or gradient.
double minimize(std::span<double> params, const Objective& objective, const OptimizerConfig& optimizer,
                std::size_t epochs, const std::function<void(std::size_t, double)>& on_epoch = {});

}  // namespace pinncert
