#pragma once

// Initial value problems x'(t) = f(t, x, u) with a constant control u, the two
// benchmark systems, and fixed-step reference integrators used for validation.

#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pinncert/dual.hpp"
#include "pinncert/error.hpp"
#include "pinncert/tape.hpp"

namespace pinncert {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double v) const noexcept { return v >= lo && v <= hi; }
    double width() const noexcept { return hi - lo; }
};

template <typename S>
using RhsFn = std::function<std::vector<S>(double t, std::span<const S> x, std::span<const double> u)>;

using JacobianFn = std::function<Eigen::MatrixXd(double t, std::span<const double> x, std::span<const double> u)>;
using ExactFn =
    std::function<std::vector<double>(double t, std::span<const double> x0, std::span<const double> u)>;

struct OdeProblem {
    std::string name;
    std::size_t dimension = 0;
    std::size_t control_dim = 0;

    // The same right-hand side instantiated for plain values, forward-mode
    // tangents (state Jacobians) and tape variables (training).
    RhsFn<double> rhs;
    RhsFn<Dual<double>> rhs_dual;
    RhsFn<Var> rhs_var;

    JacobianFn jacobian;  // analytic d f / d x; empty means forward mode
    ExactFn exact_solution;  // closed form when known; validation only

    // Time horizon [0, t_final]; queries at t_final itself are accepted.
    double t_final = 1.0;
    std::vector<Interval> state_box;
    std::vector<Interval> control_box;

    // Set when f(t, x) = A x.
    std::optional<Eigen::MatrixXd> linear_part;

    // When set, the initial value is not a network input (single-trajectory problems).
    std::optional<std::vector<double>> fixed_initial_state;

    Interval time_domain() const noexcept { return {0.0, t_final}; }
};

// Builds an OdeProblem from one generic callable
// `f(double t, std::span<const S> x, std::span<const double> u) -> std::vector<S>`.
template <typename F>
OdeProblem make_problem(std::string name, std::size_t dimension, std::size_t control_dim, F f) {
    OdeProblem p;
    p.name = std::move(name);
    p.dimension = dimension;
    p.control_dim = control_dim;
    p.rhs = [f](double t, std::span<const double> x, std::span<const double> u) { return f(t, x, u); };
    p.rhs_dual = [f](double t, std::span<const Dual<double>> x, std::span<const double> u) { return f(t, x, u); };
    p.rhs_var = [f](double t, std::span<const Var> x, std::span<const double> u) { return f(t, x, u); };
    return p;
}

// f(t, x, u) with dimension checks.
std::vector<double> evaluate_rhs(const OdeProblem& problem, double t, std::span<const double> x,
                                 std::span<const double> u = {});

// d f / d x: analytic when the problem provides it, forward mode otherwise.
Eigen::MatrixXd rhs_jacobian(const OdeProblem& problem, double t, std::span<const double> x,
                             std::span<const double> u = {});

// Forward-mode Jacobian regardless of an analytic one.
Eigen::MatrixXd rhs_jacobian_autodiff(const OdeProblem& problem, double t, std::span<const double> x,
                                      std::span<const double> u = {});

// Network input layout: (t, x0 unless fixed, u).
std::size_t network_input_dim(const OdeProblem& problem);
std::vector<double> network_input(const OdeProblem& problem, double t, std::span<const double> x0,
                                  std::span<const double> u);

// x' = -2x on [0, 2] with x0 = 2.
OdeProblem decay_1d();

struct PendulumParameters {
    double mass = 0.3553;     // kg
    double arm = 0.42;        // m, pivot to centre of mass
    double inertia = 0.0361;  // kg m^2
    double friction = 0.005;  // N m s
    double gravity = 9.81;    // m / s^2
};

// Pendulum on a cart, state (phi, phi_dot, s, s_dot), control u = cart acceleration.
// phi = 0 is the upright position.
OdeProblem inverted_pendulum(const PendulumParameters& params = {});

enum class Integrator { forward_euler, rk4 };
enum class Producer { reference_solver, pinn };

struct Trajectory {
    std::vector<double> times;
    Eigen::MatrixXd states;  // one row per time
    Producer produced_by = Producer::reference_solver;
};

// Fixed-step integration over t_grid. Each grid interval is split into
// ceil(width / max_step) equal steps (one step with the default).
// Throws DivergenceError at the first non-finite state.
Trajectory solve_reference(const OdeProblem& problem, std::span<const double> x0, std::span<const double> u,
                           std::span<const double> t_grid, Integrator method,
                           double max_step = std::numeric_limits<double>::infinity());

// `count` equally spaced times from lo to hi inclusive.
std::vector<double> linspace(double lo, double hi, std::size_t count);

// CSV `t,x1,...,xn[,u]`.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj, std::span<const double> u = {});

}  // namespace pinncert
