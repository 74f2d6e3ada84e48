#include "pinncert/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pinncert/error.hpp"

namespace pinncert {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

Adam::Adam(AdamConfig config, std::size_t parameter_count)
    : config_(config), m_(parameter_count, 0.0), v_(parameter_count, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grad[i];
        v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * grad[i] * grad[i];
        const double m_hat = m_[i] / c1;
        const double v_hat = v_[i] / c2;
        params[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
}

Lbfgs::Lbfgs(LbfgsConfig config, std::size_t) : config_(config) {
    if (config_.memory == 0) throw ConfigError("L-BFGS memory must be positive");
}

bool Lbfgs::step(std::span<double> params, double& value, std::vector<double>& grad, const Objective& objective) {
    const std::size_t n = params.size();
    // Two-loop recursion for d = -H g.
    std::vector<double> q(grad);
    std::vector<double> alpha(s_.size());
    for (std::size_t k = s_.size(); k-- > 0;) {
        alpha[k] = rho_[k] * dot(s_[k], q);
        for (std::size_t i = 0; i < n; ++i) q[i] -= alpha[k] * y_[k][i];
    }
    double scale = 1.0;
    if (!s_.empty()) {
        scale = dot(s_.back(), y_.back()) / dot(y_.back(), y_.back());
    } else {
        const double gnorm = std::sqrt(dot(grad, grad));
        if (gnorm > 0.0) scale = std::min(1.0, 1.0 / gnorm);
    }
    for (double& v : q) v *= scale;
    for (std::size_t k = 0; k < s_.size(); ++k) {
        const double beta = rho_[k] * dot(y_[k], q);
        for (std::size_t i = 0; i < n; ++i) q[i] += s_[k][i] * (alpha[k] - beta);
    }
    std::vector<double> direction(n);
    for (std::size_t i = 0; i < n; ++i) direction[i] = -q[i];
    double slope = dot(grad, direction);
    if (!(slope < 0.0)) {
        s_.clear();
        y_.clear();
        rho_.clear();
        const double gnorm = std::sqrt(dot(grad, grad));
        if (gnorm == 0.0) return false;
        for (std::size_t i = 0; i < n; ++i) direction[i] = -grad[i] / std::max(1.0, gnorm);
        slope = dot(grad, direction);
    }

    std::vector<double> trial(n);
    std::vector<double> trial_grad(n);
    double step_size = 1.0;
    for (std::size_t attempt = 0; attempt < config_.max_line_search; ++attempt) {
        for (std::size_t i = 0; i < n; ++i) trial[i] = params[i] + step_size * direction[i];
        const double trial_value = objective(trial, trial_grad);
        if (std::isfinite(trial_value) && trial_value <= value + config_.armijo * step_size * slope) {
            std::vector<double> s(n);
            std::vector<double> y(n);
            for (std::size_t i = 0; i < n; ++i) {
                s[i] = trial[i] - params[i];
                y[i] = trial_grad[i] - grad[i];
            }
            const double sy = dot(s, y);
            if (sy > 1e-12 * std::sqrt(dot(s, s) * dot(y, y))) {
                s_.push_back(std::move(s));
                y_.push_back(std::move(y));
                rho_.push_back(1.0 / sy);
                if (s_.size() > config_.memory) {
                    s_.pop_front();
                    y_.pop_front();
                    rho_.pop_front();
                }
            }
            std::copy(trial.begin(), trial.end(), params.begin());
            value = trial_value;
            grad = trial_grad;
            return true;
        }
        step_size *= config_.backtrack;
    }
    return false;
}

double minimize(std::span<double> params, const Objective& objective, const OptimizerConfig& optimizer,
                std::size_t epochs, const std::function<void(std::size_t, double)>& on_epoch) {
    const std::size_t n = params.size();
    std::vector<double> grad(n);
    std::vector<double> best(params.begin(), params.end());
    double best_value = std::numeric_limits<double>::infinity();

    auto check = [&](double value, std::size_t epoch) {
        if (!std::isfinite(value))
            throw DivergenceError("loss became non-finite at epoch " + std::to_string(epoch), double(epoch));
        if (!all_finite(grad))
            throw DivergenceError("gradient became non-finite at epoch " + std::to_string(epoch), double(epoch));
    };
    auto remember = [&](double value) {
        if (value < best_value) {
            best_value = value;
            std::copy(params.begin(), params.end(), best.begin());
        }
    };

    double value = objective(params, grad);
    if (std::holds_alternative<AdamConfig>(optimizer)) {
        Adam adam(std::get<AdamConfig>(optimizer), n);
        for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
            if (epoch > 0) value = objective(params, grad);
            check(value, epoch);
            if (on_epoch) on_epoch(epoch, value);
            remember(value);
            adam.step(params, grad);
        }
        if (epochs > 0) {
            value = objective(params, grad);
            check(value, epochs);
        }
    } else {
        Lbfgs lbfgs(std::get<LbfgsConfig>(optimizer), n);
        for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
            check(value, epoch);
            if (on_epoch) on_epoch(epoch, value);
            remember(value);
            if (!lbfgs.step(params, value, grad, objective)) break;  // stalled
        }
        check(value, epochs);
    }
    if (best_value < value) {
        std::copy(best.begin(), best.end(), params.begin());
        value = best_value;
    }
    return value;
}

}  // namespace pinncert
