#include "pinncert/ode.hpp"

#include <cmath>
#include <numbers>
#include <ostream>

#include "pinncert/csv.hpp"

namespace pinncert {

namespace {

void check_state(const OdeProblem& problem, std::size_t n, std::size_t m) {
    if (n != problem.dimension)
        throw ShapeError(problem.name + ": state has " + std::to_string(n) + " entries, expected " +
                         std::to_string(problem.dimension));
    if (m != problem.control_dim)
        throw ShapeError(problem.name + ": control has " + std::to_string(m) + " entries, expected " +
                         std::to_string(problem.control_dim));
}

using State = std::vector<double>;

State axpy(const State& x, double a, const State& k) {
    State out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + a * k[i];
    return out;
}

State step(const OdeProblem& p, Integrator method, double t, const State& x, std::span<const double> u, double h) {
    if (method == Integrator::forward_euler) return axpy(x, h, p.rhs(t, x, u));
    const State k1 = p.rhs(t, x, u);
    const State k2 = p.rhs(t + 0.5 * h, axpy(x, 0.5 * h, k1), u);
    const State k3 = p.rhs(t + 0.5 * h, axpy(x, 0.5 * h, k2), u);
    const State k4 = p.rhs(t + h, axpy(x, h, k3), u);
    State out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

}  // namespace

std::vector<double> evaluate_rhs(const OdeProblem& problem, double t, std::span<const double> x,
                                 std::span<const double> u) {
    check_state(problem, x.size(), u.size());
    return problem.rhs(t, x, u);
}

Eigen::MatrixXd rhs_jacobian_autodiff(const OdeProblem& problem, double t, std::span<const double> x,
                                      std::span<const double> u) {
    check_state(problem, x.size(), u.size());
    const std::size_t n = problem.dimension;
    Eigen::MatrixXd jac(n, n);
    std::vector<Dual<double>> seeded(n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) seeded[i] = Dual<double>(x[i], i == j ? 1.0 : 0.0);
        const auto column = problem.rhs_dual(t, seeded, u);
        for (std::size_t i = 0; i < n; ++i) jac(Eigen::Index(i), Eigen::Index(j)) = column[i].deriv;
    }
    return jac;
}

Eigen::MatrixXd rhs_jacobian(const OdeProblem& problem, double t, std::span<const double> x,
                             std::span<const double> u) {
    if (!problem.jacobian) return rhs_jacobian_autodiff(problem, t, x, u);
    check_state(problem, x.size(), u.size());
    return problem.jacobian(t, x, u);
}

std::size_t network_input_dim(const OdeProblem& problem) {
    return 1 + (problem.fixed_initial_state ? 0 : problem.dimension) + problem.control_dim;
}

std::vector<double> network_input(const OdeProblem& problem, double t, std::span<const double> x0,
                                  std::span<const double> u) {
    check_state(problem, x0.size(), u.size());
    std::vector<double> in;
    in.reserve(network_input_dim(problem));
    in.push_back(t);
    if (!problem.fixed_initial_state) in.insert(in.end(), x0.begin(), x0.end());
    in.insert(in.end(), u.begin(), u.end());
    return in;
}

OdeProblem decay_1d() {
    auto p = make_problem("decay1d", 1, 0, [](double, auto x, std::span<const double>) {
        using S = typename decltype(x)::value_type;
        return std::vector<S>{-2.0 * x[0]};
    });
    p.jacobian = [](double, std::span<const double>, std::span<const double>) {
        return Eigen::MatrixXd::Constant(1, 1, -2.0);
    };
    p.exact_solution = [](double t, std::span<const double> x0, std::span<const double>) {
        return std::vector<double>{x0[0] * std::exp(-2.0 * t)};
    };
    p.t_final = 2.0;
    p.state_box = {{2.0, 2.0}};
    p.linear_part = Eigen::MatrixXd::Constant(1, 1, -2.0);
    p.fixed_initial_state = std::vector<double>{2.0};
    return p;
}

OdeProblem inverted_pendulum(const PendulumParameters& params) {
    const double m = params.mass;
    const double a = params.arm;
    const double g = params.gravity;
    const double d = params.friction;
    const double inertia_total = params.inertia + m * a * a;

    auto p = make_problem("pendulum", 4, 1, [=](double, auto x, std::span<const double> u) {
        using S = typename decltype(x)::value_type;
        using std::cos;
        using std::sin;
        const S phi_dd = (m * g * a * sin(x[0]) - d * x[1] + m * a * u[0] * cos(x[0])) / inertia_total;
        return std::vector<S>{x[1], phi_dd, x[3], S(u[0])};
    });
    p.jacobian = [=](double, std::span<const double> x, std::span<const double> u) {
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(4, 4);
        jac(0, 1) = 1.0;
        jac(1, 0) = (m * g * a * std::cos(x[0]) - m * a * u[0] * std::sin(x[0])) / inertia_total;
        jac(1, 1) = -d / inertia_total;
        jac(2, 3) = 1.0;
        return jac;
    };
    p.t_final = 0.1;
    p.state_box = {{-std::numbers::pi, std::numbers::pi}, {-6.0, 6.0}, {-1.0, 1.0}, {-3.0, 3.0}};
    p.control_box = {{-15.0, 15.0}};
    return p;
}

std::vector<double> linspace(double lo, double hi, std::size_t count) {
    std::vector<double> out(count);
    if (count == 1) {
        out[0] = lo;
        return out;
    }
    for (std::size_t i = 0; i < count; ++i)
        out[i] = i + 1 == count ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    return out;
}

Trajectory solve_reference(const OdeProblem& problem, std::span<const double> x0, std::span<const double> u,
                           std::span<const double> t_grid, Integrator method, double max_step) {
    check_state(problem, x0.size(), u.size());
    if (t_grid.empty()) throw ConfigError("time grid is empty");
    if (t_grid.front() != 0.0) throw DomainError("time grid must start at 0");
    for (std::size_t i = 1; i < t_grid.size(); ++i)
        if (!(t_grid[i] > t_grid[i - 1])) throw DomainError("time grid must be strictly increasing");
    if (!(max_step > 0.0)) throw ConfigError("max_step must be positive");

    Trajectory traj;
    traj.times.assign(t_grid.begin(), t_grid.end());
    traj.states.resize(Eigen::Index(t_grid.size()), Eigen::Index(problem.dimension));
    State x(x0.begin(), x0.end());
    for (std::size_t j = 0; j < x.size(); ++j) traj.states(0, Eigen::Index(j)) = x[j];

    for (std::size_t i = 1; i < t_grid.size(); ++i) {
        const double width = t_grid[i] - t_grid[i - 1];
        const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil(width / max_step - 1e-9)));
        const double h = width / static_cast<double>(steps);
        for (std::size_t s = 0; s < steps; ++s) {
            const double t = t_grid[i - 1] + static_cast<double>(s) * h;
            x = step(problem, method, t, x, u, h);
            for (double v : x)
                if (!std::isfinite(v))
                    throw DivergenceError("non-finite state while integrating " + problem.name, t + h);
        }
        for (std::size_t j = 0; j < x.size(); ++j) traj.states(Eigen::Index(i), Eigen::Index(j)) = x[j];
    }
    return traj;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj, std::span<const double> u) {
    out << 't';
    for (Eigen::Index j = 0; j < traj.states.cols(); ++j) out << ",x" << j + 1;
    if (u.size() == 1) {
        out << ",u";
    } else {
        for (std::size_t k = 0; k < u.size(); ++k) out << ",u" << k + 1;
    }
    out << '\n';
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        out << csv::real(traj.times[i]);
        for (Eigen::Index j = 0; j < traj.states.cols(); ++j) out << ',' << csv::real(traj.states(Eigen::Index(i), j));
        for (double v : u) out << ',' << csv::real(v);
        out << '\n';
    }
}

}  // namespace pinncert
