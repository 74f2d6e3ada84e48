#pragma once

// A posteriori error certificates for a network approximating the flow of an
// initial value problem.
//
// With residual R(t) = d/dt x_hat(t) - f(t, x_hat(t)) and any smooth majorant
// delta(t) >= ||R(t)||, the error obeys
//
//   ||x(t) - x_hat(t)|| <= e^{Lt} ||x0 - x_hat(0)|| + int_0^t e^{L(t-s)} delta(s) ds
//
// (Lipschitz constant L), or with beta, alpha from ||exp(At)|| <= beta e^{alpha t}
// for f = A x. The integral is evaluated with the composite trapezoidal rule
// plus its remainder bound e^{Lt} K t^3 / (12 n^2), where K bounds
// |d^2/ds^2 (e^{-Ls} delta(s))| on [0, t].

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "pinncert/network.hpp"
#include "pinncert/ode.hpp"
#include "pinncert/tape.hpp"
#include "pinncert/train.hpp"

namespace pinncert {

// ---------------------------------------------------------------------------
// Residual

// R(t) for initial value x0 and control u. Throws DomainError outside [0, t_final].
std::vector<double> residual(const Network& net, const OdeProblem& problem, std::span<const double> x0,
                             std::span<const double> u, double t);

// Same without the domain check; the network extends smoothly past the horizon.
std::vector<double> residual_unchecked(const Network& net, const OdeProblem& problem, std::span<const double> x0,
                                       std::span<const double> u, double t);

// R(t) recorded on the tape owning `params` (flat parameters of `net`).
std::vector<Var> residual_recorded(std::span<const Var> params, const Network& net, const OdeProblem& problem,
                                   std::span<const double> x0, std::span<const double> u, double t);

using ScalarFn = std::function<double(double)>;

// t -> ||R(t)|| for one trajectory of the network.
ScalarFn residual_norm_fn(const Network& net, const OdeProblem& problem, std::vector<double> x0,
                          std::vector<double> u);

// (1/|Y|) sum ||R(y.t)|| with each point's own x0 and u.
double mean_residual_norm(const Network& net, const OdeProblem& problem, const CollocationSet& colloc);

// ---------------------------------------------------------------------------
// Smooth majorant delta(t) = sqrt(||R(t)||^2 + mu^2)

struct MuPolicy {
    enum class Kind { tenth_of_mean, explicit_value };
    Kind kind = Kind::tenth_of_mean;
    double value = 0.0;  // explicit mu

    static MuPolicy tenth_of_mean() { return {}; }
    static MuPolicy explicit_mu(double mu) { return {Kind::explicit_value, mu}; }

    // mu for a given mean residual norm. Throws ConfigError for negative mu.
    double resolve(double mean_residual) const;
};

class SmoothDelta {
public:
    SmoothDelta(ScalarFn residual_norm, double mu);

    double operator()(double t) const;
    double mu() const noexcept { return mu_; }
    double residual_norm(double t) const { return residual_norm_(t); }

private:
    ScalarFn residual_norm_;
    double mu_;
};

SmoothDelta make_delta(ScalarFn residual_norm, const MuPolicy& policy, double mean_residual);

// ---------------------------------------------------------------------------
// Lipschitz constant and linear growth bounds

// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
std::vector<double> symmetric_eigenvalues(Eigen::MatrixXd s, double tolerance = 1e-12);

// sqrt(lambda_max(J^T J)) with the Jacobi eigenvalues above.
double largest_singular_value(const Eigen::MatrixXd& jac);

// max over collocation points of the largest singular value of d f / d x.
// Throws DomainError for a non-finite Jacobian entry.
double estimate_lipschitz(const OdeProblem& problem, const CollocationSet& colloc);

struct LinearGrowth {
    double alpha = 0.0;  // spectral abscissa
    double beta = 1.0;   // 1 for normal A, eigenvector condition number otherwise
    bool normal = true;
    bool diagonalizable = true;  // eigenvector condition <= 1e12
};

// Constants with ||exp(At)|| <= beta e^{alpha t}.
LinearGrowth linear_growth(const Eigen::MatrixXd& a);

// ---------------------------------------------------------------------------
// Quadrature

struct KConfig {
    std::size_t grid_points = 2000;
    double safety_factor = 1.5;
};

// safety * max |d^2/ds^2 (e^{-rate s} delta(s))| on a uniform grid over
// [0, t_end], by central differences with step t_end / (10 grid_points).
// Throws ConfigError for fewer than 10 grid points, DomainError when the
// second derivative is not finite.
double estimate_K(const ScalarFn& delta, double rate, double t_end, const KConfig& config = {});

struct QuadratureResult {
    double i_hat = 0.0;
    double e_int = 0.0;
};

enum class RemainderScale {
    growth,       // e^{rate t}
    at_least_one  // max(1, e^{rate t}) for decaying linear systems
};

// Composite trapezoidal approximation of int_0^t e^{rate (t-s)} delta(s) ds
// with n subintervals, and remainder scale * K t^3 / (12 n^2).
// Throws ConfigError for n == 0; t == 0 gives (0, 0).
QuadratureResult trapezoid_bound_integral(const ScalarFn& delta, double rate, double t, std::size_t n, double K,
                                          RemainderScale scale = RemainderScale::growth);

// e^{Lt} gap + (e^{Lt} - 1) mean_residual / L.
double expected_ml_error(double t, double initial_gap, double lipschitz, double mean_residual);

// ceil(sqrt(e^{Lt} K t^3 / (12 E_exp eps))), at least 1, at most max_n.
// Throws ConfigError when eps <= 0, L <= 0, or E_exp = 0 while K > 0.
std::size_t subinterval_count(double t, double initial_gap, double lipschitz, double K, double mean_residual,
                              double eps, std::size_t max_n = 100000);

// Linear-mode counterpart: growth beta e^{alpha t}, remainder prefactor
// beta max(1, e^{alpha t}).
std::size_t subinterval_count_linear(double t, double initial_gap, double alpha, double beta, double K,
                                     double mean_residual, double eps, std::size_t max_n = 100000);

// ---------------------------------------------------------------------------
// Certificates

enum class BoundMode { nonlinear, linear, automatic };

struct CertifyConfig {
    BoundMode mode = BoundMode::automatic;
    double eps = 0.33;
    MuPolicy mu;
    KConfig k;
    std::optional<std::size_t> subintervals;  // overrides the N_SI rule
    std::size_t max_subintervals = 100000;

    // Resolved per network; see prepare_certification.
    double lipschitz = 0.0;
    double mean_residual = 0.0;
};

struct CertificateConstants {
    BoundMode mode = BoundMode::nonlinear;
    double lipschitz = 0.0;
    double alpha = 0.0;
    double beta = 1.0;
    double K = 0.0;
    std::size_t subintervals = 0;
    double mu = 0.0;
    std::string warning;  // e.g. fallback from linear to nonlinear mode
};

struct Certificate {
    double t = 0.0;
    double e_init = 0.0;
    double i_hat = 0.0;
    double e_int = 0.0;
    double total = 0.0;
    CertificateConstants constants;

    // Propagated ODE violation, i_hat + e_int.
    double e_pi() const noexcept { return i_hat + e_int; }
};

// Bounds from the raw ingredients; the network-facing entry points below
// reduce to these. `residual_norm` is t -> ||R(t)||.
Certificate certify_nonlinear(double t, double initial_gap, const ScalarFn& residual_norm, const CertifyConfig& config);
Certificate certify_linear(double t, double initial_gap, const ScalarFn& residual_norm, const LinearGrowth& growth,
                           const CertifyConfig& config);

// Estimates L on a collocation set of twice the training size (seed
// `lipschitz_seed`) unless `explicit_lipschitz` is given, and the mean
// residual over the training collocation set.
CertifyConfig prepare_certification(const Network& net, const OdeProblem& problem, const CollocationSet& training,
                                    CertifyConfig base, std::optional<double> explicit_lipschitz,
                                    std::uint64_t lipschitz_seed);

Certificate bound_nonlinear(const Network& net, const OdeProblem& problem, std::span<const double> x0,
                            std::span<const double> u, double t, const CertifyConfig& config);

// Requires problem.linear_part; falls back to bound_nonlinear with a warning
// when A is not diagonalizable.
Certificate bound_linear(const Network& net, const OdeProblem& problem, std::span<const double> x0,
                         std::span<const double> u, double t, const CertifyConfig& config);

// Dispatches on config.mode (automatic = linear when the problem is linear).
Certificate certify(const Network& net, const OdeProblem& problem, std::span<const double> x0,
                    std::span<const double> u, double t, const CertifyConfig& config);

// ||x(t) - x_hat(t)|| against the closed form when available, otherwise rk4
// with step <= max_step. Validation only.
std::vector<double> actual_error(const Network& net, const OdeProblem& problem, std::span<const double> x0,
                                 std::span<const double> u, std::span<const double> t_grid, double max_step = 1e-4);

// Network prediction x_hat(t) for one trajectory.
std::vector<double> predict(const Network& net, const OdeProblem& problem, std::span<const double> x0,
                            std::span<const double> u, double t);

std::string to_string(BoundMode mode);
BoundMode parse_bound_mode(const std::string& name);

// CSV `t,e_init,i_hat,e_int,total[,actual_error],note`.
void write_certificates_csv(std::ostream& out, const std::vector<Certificate>& certs,
                            const std::vector<double>* actual, const std::vector<std::string>& notes);

nlohmann::json constants_to_json(const CertificateConstants& c);

}  // namespace pinncert
