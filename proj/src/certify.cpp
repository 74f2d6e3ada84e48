#include "pinncert/certify.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <ostream>

#include "pinncert/csv.hpp"

namespace pinncert {

namespace {

void check_network(const Network& net, const OdeProblem& problem) {
    if (net.input_dim() != network_input_dim(problem) || net.output_dim() != problem.dimension)
        throw ShapeError("network shape does not match the input layout of " + problem.name);
}

double norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

// ---------------------------------------------------------------------------
// Residual

std::vector<double> residual_unchecked(const Network& net, const OdeProblem& problem, std::span<const double> x0,
                                       std::span<const double> u, double t) {
    check_network(net, problem);
    const auto in = network_input(problem, t, x0, u);
    std::vector<double> direction(in.size(), 0.0);
    direction[0] = 1.0;
    const auto out = forward_tangent(net, in, direction);
    std::vector<double> x_hat(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) x_hat[i] = out[i].value;
    const auto f = problem.rhs(t, x_hat, u);
    std::vector<double> r(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) r[i] = out[i].deriv - f[i];
    return r;
}

std::vector<double> residual(const Network& net, const OdeProblem& problem, std::span<const double> x0,
                             std::span<const double> u, double t) {
    if (!problem.time_domain().contains(t))
        throw DomainError("residual requested at t = " + std::to_string(t) + " outside the time horizon of " +
                          problem.name);
    return residual_unchecked(net, problem, x0, u, t);
}

std::vector<Var> residual_recorded(std::span<const Var> params, const Network& net, const OdeProblem& problem,
                                   std::span<const double> x0, std::span<const double> u, double t) {
    check_network(net, problem);
    if (params.size() != net.parameter_count()) throw ShapeError("parameter vector has the wrong length");
    const auto in = network_input(problem, t, x0, u);
    std::vector<Dual<Var>> seeded;
    seeded.reserve(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) seeded.emplace_back(Var(in[i]), Var(i == 0 ? 1.0 : 0.0));
    const auto out = forward_generic<Var, Dual<Var>>(net.layer_dims(), net.activation(), params,
                                                     std::span<const Dual<Var>>(seeded));
    std::vector<Var> x_hat;
    x_hat.reserve(out.size());
    for (const auto& o : out) x_hat.push_back(o.value);
    const auto f = problem.rhs_var(t, x_hat, u);
    std::vector<Var> r;
    r.reserve(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) r.push_back(out[i].deriv - f[i]);
    return r;
}

ScalarFn residual_norm_fn(const Network& net, const OdeProblem& problem, std::vector<double> x0,
                          std::vector<double> u) {
    check_network(net, problem);
    auto shared_net = std::make_shared<const Network>(net);
    auto shared_problem = std::make_shared<const OdeProblem>(problem);
    return [shared_net, shared_problem, x0 = std::move(x0), u = std::move(u)](double t) {
        return norm(residual_unchecked(*shared_net, *shared_problem, x0, u, t));
    };
}

double mean_residual_norm(const Network& net, const OdeProblem& problem, const CollocationSet& colloc) {
    if (colloc.points.empty()) throw ConfigError("collocation set is empty");
    double sum = 0.0;
    for (const auto& y : colloc.points) sum += norm(residual(net, problem, y.x0, y.u, y.t));
    return sum / static_cast<double>(colloc.points.size());
}

// ---------------------------------------------------------------------------
// Smooth majorant

double MuPolicy::resolve(double mean_residual) const {
    const double mu = kind == Kind::tenth_of_mean ? 0.1 * mean_residual : value;
    if (!(mu >= 0.0)) throw ConfigError("mu must be non-negative");
    return mu;
}

SmoothDelta::SmoothDelta(ScalarFn residual_norm, double mu) : residual_norm_(std::move(residual_norm)), mu_(mu) {
    if (!(mu >= 0.0)) throw ConfigError("mu must be non-negative");
}

double SmoothDelta::operator()(double t) const {
    const double r = residual_norm_(t);
    return std::sqrt(r * r + mu_ * mu_);
}

SmoothDelta make_delta(ScalarFn residual_norm, const MuPolicy& policy, double mean_residual) {
    return SmoothDelta(std::move(residual_norm), policy.resolve(mean_residual));
}

// ---------------------------------------------------------------------------
// Lipschitz constant and linear growth

std::vector<double> symmetric_eigenvalues(Eigen::MatrixXd a, double tolerance) {
    const Eigen::Index n = a.rows();
    if (a.cols() != n) throw ShapeError("matrix must be square");
    auto off_diagonal = [&] {
        double s = 0.0;
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = 0; q < n; ++q)
                if (p != q) s += a(p, q) * a(p, q);
        return std::sqrt(s);
    };
    const double scale = std::max(a.norm(), std::numeric_limits<double>::min());
    for (int sweep = 0; sweep < 100 && off_diagonal() > tolerance * scale; ++sweep) {
        for (Eigen::Index p = 0; p < n - 1; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> eig(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) eig[static_cast<std::size_t>(i)] = a(i, i);
    std::sort(eig.begin(), eig.end());
    return eig;
}

double largest_singular_value(const Eigen::MatrixXd& jac) {
    if (jac.size() == 0) return 0.0;
    const auto eig = symmetric_eigenvalues(jac.transpose() * jac);
    return std::sqrt(std::max(0.0, eig.back()));
}

double estimate_lipschitz(const OdeProblem& problem, const CollocationSet& colloc) {
    if (colloc.points.empty()) throw ConfigError("collocation set is empty");
    double lipschitz = 0.0;
    for (const auto& y : colloc.points) {
        const Eigen::MatrixXd jac = rhs_jacobian(problem, y.t, y.x0, y.u);
        if (!jac.allFinite())
            throw DomainError("non-finite Jacobian of " + problem.name + " at t = " + std::to_string(y.t));
        lipschitz = std::max(lipschitz, largest_singular_value(jac));
    }
    return lipschitz;
}

LinearGrowth linear_growth(const Eigen::MatrixXd& a) {
    if (a.rows() != a.cols() || a.size() == 0) throw ShapeError("linear part must be a non-empty square matrix");
    Eigen::EigenSolver<Eigen::MatrixXd> solver(a);
    if (solver.info() != Eigen::Success) throw DomainError("eigenvalue computation failed");
    LinearGrowth g;
    g.alpha = solver.eigenvalues().real().maxCoeff();
    const double commutator = (a.transpose() * a - a * a.transpose()).norm();
    g.normal = commutator <= 1e-12 * std::max(1.0, a.squaredNorm());
    if (g.normal) return g;

    const Eigen::MatrixXcd v = solver.eigenvectors();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(v);
    const auto& sv = svd.singularValues();
    const double smallest = sv(sv.size() - 1);
    const double condition = smallest > 0.0 ? sv(0) / smallest : std::numeric_limits<double>::infinity();
    g.diagonalizable = condition <= 1e12;
    g.beta = condition;
    return g;
}

// ---------------------------------------------------------------------------
// Quadrature

double estimate_K(const ScalarFn& delta, double rate, double t_end, const KConfig& config) {
    if (config.grid_points < 10) throw ConfigError("K estimation needs at least 10 grid points");
    if (!(config.safety_factor >= 1.0)) throw ConfigError("K safety factor must be at least 1");
    if (!(t_end > 0.0)) return 0.0;
    const double h = t_end / (10.0 * static_cast<double>(config.grid_points));
    auto g = [&](double s) { return std::exp(-rate * s) * delta(s); };
    double largest = 0.0;
    for (std::size_t i = 0; i < config.grid_points; ++i) {
        const double s = t_end * static_cast<double>(i) / static_cast<double>(config.grid_points - 1);
        const double second = (g(s + h) - 2.0 * g(s) + g(s - h)) / (h * h);
        if (!std::isfinite(second))
            throw DomainError("degenerate smoothing: second derivative of the majorant is not finite at s = " +
                              std::to_string(s) + "; choose mu > 0");
        largest = std::max(largest, std::abs(second));
    }
    return config.safety_factor * largest;
}

QuadratureResult trapezoid_bound_integral(const ScalarFn& delta, double rate, double t, std::size_t n, double K,
                                          RemainderScale scale) {
    if (n == 0) throw ConfigError("trapezoidal rule needs at least one subinterval");
    if (t < 0.0) throw DomainError("integration time must be non-negative");
    if (t == 0.0) return {};
    const double width = t / static_cast<double>(n);
    double sum = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
        const double s = i == n ? t : width * static_cast<double>(i);
        const double w = (i == 0 || i == n) ? 0.5 : 1.0;
        sum += w * std::exp(rate * (t - s)) * delta(s);
    }
    QuadratureResult q;
    q.i_hat = width * sum;
    const double growth = std::exp(rate * t);
    const double prefactor = scale == RemainderScale::growth ? growth : std::max(1.0, growth);
    q.e_int = prefactor * K * t * t * t / (12.0 * static_cast<double>(n) * static_cast<double>(n));
    return q;
}

double expected_ml_error(double t, double initial_gap, double lipschitz, double mean_residual) {
    const double growth = std::exp(lipschitz * t);
    const double spread = lipschitz == 0.0 ? t : std::expm1(lipschitz * t) / lipschitz;
    return growth * initial_gap + spread * mean_residual;
}

namespace {

std::size_t count_from(double prefactor, double K, double t, double expected, double eps, std::size_t max_n) {
    if (!(eps > 0.0)) throw ConfigError("eps must be positive");
    if (K == 0.0 || t == 0.0) return 1;
    if (!(expected > 0.0))
        throw ConfigError("expected error is zero, so no finite subinterval count meets the eps target; "
                          "use mu > 0 or an explicit subinterval count");
    const double n = std::ceil(std::sqrt(prefactor * K * t * t * t / (12.0 * expected * eps)));
    if (!(n < static_cast<double>(max_n))) return max_n;
    return std::max<std::size_t>(1, static_cast<std::size_t>(n));
}

}  // namespace

std::size_t subinterval_count(double t, double initial_gap, double lipschitz, double K, double mean_residual,
                              double eps, std::size_t max_n) {
    if (!(lipschitz > 0.0)) throw ConfigError("subinterval count needs L > 0");
    return count_from(std::exp(lipschitz * t), K, t, expected_ml_error(t, initial_gap, lipschitz, mean_residual), eps,
                      max_n);
}

std::size_t subinterval_count_linear(double t, double initial_gap, double alpha, double beta, double K,
                                     double mean_residual, double eps, std::size_t max_n) {
    const double expected = beta * expected_ml_error(t, initial_gap, alpha, mean_residual);
    return count_from(beta * std::max(1.0, std::exp(alpha * t)), K, t, expected, eps, max_n);
}

// ---------------------------------------------------------------------------
// Certificates

Certificate certify_nonlinear(double t, double initial_gap, const ScalarFn& residual_norm,
                              const CertifyConfig& config) {
    if (t < 0.0) throw DomainError("certificate requested for negative time");
    const double lipschitz = config.lipschitz;
    if (!(lipschitz >= 0.0)) throw ConfigError("Lipschitz constant must be non-negative");
    const SmoothDelta delta = make_delta(residual_norm, config.mu, config.mean_residual);
    const ScalarFn delta_fn = [&delta](double s) { return delta(s); };

    Certificate c;
    c.t = t;
    c.constants.mode = BoundMode::nonlinear;
    c.constants.lipschitz = lipschitz;
    c.constants.mu = delta.mu();
    c.constants.K = estimate_K(delta_fn, lipschitz, t, config.k);
    if (config.subintervals) {
        c.constants.subintervals = *config.subintervals;
    } else if (lipschitz > 0.0) {
        c.constants.subintervals = subinterval_count(t, initial_gap, lipschitz, c.constants.K, config.mean_residual,
                                                     config.eps, config.max_subintervals);
    } else {
        c.constants.subintervals = subinterval_count_linear(t, initial_gap, 0.0, 1.0, c.constants.K,
                                                            config.mean_residual, config.eps, config.max_subintervals);
    }
    const auto q = trapezoid_bound_integral(delta_fn, lipschitz, t, c.constants.subintervals, c.constants.K);
    c.e_init = std::exp(lipschitz * t) * initial_gap;
    c.i_hat = q.i_hat;
    c.e_int = q.e_int;
    c.total = c.e_init + c.i_hat + c.e_int;
    return c;
}

Certificate certify_linear(double t, double initial_gap, const ScalarFn& residual_norm, const LinearGrowth& growth,
                           const CertifyConfig& config) {
    if (t < 0.0) throw DomainError("certificate requested for negative time");
    if (!(growth.beta > 0.0)) throw ConfigError("beta must be positive");
    const SmoothDelta delta = make_delta(residual_norm, config.mu, config.mean_residual);
    const ScalarFn delta_fn = [&delta](double s) { return delta(s); };

    Certificate c;
    c.t = t;
    c.constants.mode = BoundMode::linear;
    c.constants.lipschitz = config.lipschitz;
    c.constants.alpha = growth.alpha;
    c.constants.beta = growth.beta;
    c.constants.mu = delta.mu();
    c.constants.K = estimate_K(delta_fn, growth.alpha, t, config.k);
    c.constants.subintervals =
        config.subintervals ? *config.subintervals
                            : subinterval_count_linear(t, initial_gap, growth.alpha, growth.beta, c.constants.K,
                                                       config.mean_residual, config.eps, config.max_subintervals);
    const auto q = trapezoid_bound_integral(delta_fn, growth.alpha, t, c.constants.subintervals, c.constants.K,
                                            RemainderScale::at_least_one);
    c.e_init = growth.beta * std::exp(growth.alpha * t) * initial_gap;
    c.i_hat = growth.beta * q.i_hat;
    c.e_int = growth.beta * q.e_int;
    c.total = c.e_init + c.i_hat + c.e_int;
    return c;
}

CertifyConfig prepare_certification(const Network& net, const OdeProblem& problem, const CollocationSet& training,
                                    CertifyConfig base, std::optional<double> explicit_lipschitz,
                                    std::uint64_t lipschitz_seed) {
    if (explicit_lipschitz) {
        if (!(*explicit_lipschitz >= 0.0)) throw ConfigError("explicit Lipschitz constant must be non-negative");
        base.lipschitz = *explicit_lipschitz;
    } else {
        const auto probe = sample_collocation(problem, 2 * training.points.size(), lipschitz_seed);
        base.lipschitz = estimate_lipschitz(problem, probe);
    }
    base.mean_residual = mean_residual_norm(net, problem, training);
    return base;
}

std::vector<double> predict(const Network& net, const OdeProblem& problem, std::span<const double> x0,
                            std::span<const double> u, double t) {
    check_network(net, problem);
    return forward(net, network_input(problem, t, x0, u));
}

namespace {

double initial_gap(const Network& net, const OdeProblem& problem, std::span<const double> x0,
                   std::span<const double> u) {
    const auto x_hat0 = predict(net, problem, x0, u, 0.0);
    std::vector<double> diff(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i) diff[i] = x0[i] - x_hat0[i];
    return norm(diff);
}

std::vector<double> as_vector(std::span<const double> s) { return {s.begin(), s.end()}; }

}  // namespace

Certificate bound_nonlinear(const Network& net, const OdeProblem& problem, std::span<const double> x0,
                            std::span<const double> u, double t, const CertifyConfig& config) {
    const double gap = initial_gap(net, problem, x0, u);
    return certify_nonlinear(t, gap, residual_norm_fn(net, problem, as_vector(x0), as_vector(u)), config);
}

Certificate bound_linear(const Network& net, const OdeProblem& problem, std::span<const double> x0,
                         std::span<const double> u, double t, const CertifyConfig& config) {
    if (!problem.linear_part) throw ConfigError(problem.name + " has no linear part; use the nonlinear bound");
    const LinearGrowth growth = linear_growth(*problem.linear_part);
    if (!growth.diagonalizable) {
        Certificate c = bound_nonlinear(net, problem, x0, u, t, config);
        c.constants.warning = "linear part is not diagonalizable; nonlinear fallback";
        return c;
    }
    const double gap = initial_gap(net, problem, x0, u);
    return certify_linear(t, gap, residual_norm_fn(net, problem, as_vector(x0), as_vector(u)), growth, config);
}

Certificate certify(const Network& net, const OdeProblem& problem, std::span<const double> x0,
                    std::span<const double> u, double t, const CertifyConfig& config) {
    const bool linear = config.mode == BoundMode::linear ||
                        (config.mode == BoundMode::automatic && problem.linear_part.has_value());
    return linear ? bound_linear(net, problem, x0, u, t, config) : bound_nonlinear(net, problem, x0, u, t, config);
}

std::vector<double> actual_error(const Network& net, const OdeProblem& problem, std::span<const double> x0,
                                 std::span<const double> u, std::span<const double> t_grid, double max_step) {
    std::vector<double> errors;
    errors.reserve(t_grid.size());
    if (problem.exact_solution) {
        for (double t : t_grid) {
            const auto x = problem.exact_solution(t, x0, u);
            const auto x_hat = predict(net, problem, x0, u, t);
            std::vector<double> diff(x.size());
            for (std::size_t i = 0; i < x.size(); ++i) diff[i] = x[i] - x_hat[i];
            errors.push_back(norm(diff));
        }
        return errors;
    }
    // Reference grid: 0 followed by the distinct positive query times.
    std::vector<double> grid{0.0};
    for (double t : t_grid) {
        if (t < 0.0) throw DomainError("negative query time");
        if (t > grid.back()) grid.push_back(t);
        else if (t < grid.back()) throw DomainError("query times must be non-decreasing");
    }
    const Trajectory ref = solve_reference(problem, x0, u, grid, Integrator::rk4, max_step);
    for (double t : t_grid) {
        const auto row = std::size_t(std::lower_bound(grid.begin(), grid.end(), t) - grid.begin());
        const auto x_hat = predict(net, problem, x0, u, t);
        std::vector<double> diff(x_hat.size());
        for (std::size_t i = 0; i < x_hat.size(); ++i)
            diff[i] = ref.states(Eigen::Index(row), Eigen::Index(i)) - x_hat[i];
        errors.push_back(norm(diff));
    }
    return errors;
}

std::string to_string(BoundMode mode) {
    switch (mode) {
        case BoundMode::nonlinear: return "nonlinear";
        case BoundMode::linear: return "linear";
        case BoundMode::automatic: return "auto";
    }
    return "unknown";
}

BoundMode parse_bound_mode(const std::string& name) {
    if (name == "nonlinear") return BoundMode::nonlinear;
    if (name == "linear") return BoundMode::linear;
    if (name == "auto") return BoundMode::automatic;
    throw ConfigError("unknown bound mode '" + name + "'");
}

void write_certificates_csv(std::ostream& out, const std::vector<Certificate>& certs,
                            const std::vector<double>* actual, const std::vector<std::string>& notes) {
    out << "t,e_init,i_hat,e_int,total";
    if (actual) out << ",actual_error";
    out << ",note\n";
    for (std::size_t i = 0; i < certs.size(); ++i) {
        const auto& c = certs[i];
        out << csv::row({c.t, c.e_init, c.i_hat, c.e_int, c.total});
        if (actual) out << ',' << csv::real(actual->at(i));
        out << ',' << (i < notes.size() ? notes[i] : std::string()) << '\n';
    }
}

nlohmann::json constants_to_json(const CertificateConstants& c) {
    nlohmann::json j;
    j["mode"] = to_string(c.mode);
    j["lipschitz"] = c.lipschitz;
    if (c.mode == BoundMode::linear) {
        j["alpha"] = c.alpha;
        j["beta"] = c.beta;
    }
    j["K"] = c.K;
    j["n_subintervals"] = c.subintervals;
    j["mu"] = c.mu;
    if (!c.warning.empty()) j["warning"] = c.warning;
    return j;
}

}  // namespace pinncert
