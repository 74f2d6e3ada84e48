#include "pinncert/surrogate.hpp"

#include <fstream>
#include <stdexcept>
#include <ostream>

#include "pinncert/csv.hpp"

namespace pinncert {

namespace {

std::vector<std::string> input_columns(const OdeProblem& problem) {
    std::vector<std::string> cols{"t"};
    for (std::size_t i = 0; i < problem.dimension; ++i) cols.push_back("x0_" + std::to_string(i + 1));
    if (problem.control_dim == 1) {
        cols.emplace_back("u");
    } else {
        for (std::size_t k = 0; k < problem.control_dim; ++k) cols.push_back("u" + std::to_string(k + 1));
    }
    return cols;
}

void write_inputs(std::ostream& out, const SurrogatePoint& p) {
    out << csv::real(p.t);
    for (double v : p.x0) out << ',' << csv::real(v);
    for (double v : p.u) out << ',' << csv::real(v);
}

}  // namespace

SurrogateDataset certify_points(const Network& pinn, const OdeProblem& problem, const CollocationSet& inputs,
                                const CertifyConfig& config) {
    SurrogateDataset data;
    data.seed = inputs.seed;
    data.points.reserve(inputs.points.size());
    for (std::size_t i = 0; i < inputs.points.size(); ++i) {
        const auto& y = inputs.points[i];
        try {
            const Certificate c = certify(pinn, problem, y.x0, y.u, y.t, config);
            data.points.push_back({y.t, y.x0, y.u, c.total});
        } catch (const std::exception& e) {
            throw std::runtime_error("certificate for surrogate point " + std::to_string(i) + " (t = " +
                                     csv::real(y.t) + ") failed: " + e.what());
        }
    }
    return data;
}

SurrogateDataset generate_surrogate_data(const Network& pinn, const OdeProblem& problem, std::size_t count,
                                         std::uint64_t seed, const CertifyConfig& config) {
    return certify_points(pinn, problem, sample_collocation(problem, count, seed), config);
}

double asymmetric_loss(double pred, double target, double under_weight) {
    const double diff = pred - target;
    return (pred < target ? under_weight : 1.0) * diff * diff;
}

double surrogate_loss(const Network& error_net, const OdeProblem& problem, const SurrogateDataset& data,
                      double under_weight, std::vector<double>* gradient) {
    if (data.points.empty()) throw ConfigError("surrogate data set is empty");
    const double scale = 1.0 / static_cast<double>(data.points.size());
    double sum = 0.0;
    if (!gradient) {
        for (const auto& p : data.points) sum += asymmetric_loss(predict_error(error_net, problem, p.x0, p.u, p.t), p.target, under_weight);
        return sum * scale;
    }
    gradient->assign(error_net.parameter_count(), 0.0);
    Tape tape;
    const auto params = record_parameters(tape, error_net);
    const std::size_t mark = tape.size();
    for (const auto& p : data.points) {
        tape.rewind(mark);
        const auto in = network_input(problem, p.t, p.x0, p.u);
        std::vector<Var> inputs(in.begin(), in.end());
        const auto out = forward_generic<Var, Var>(error_net.layer_dims(), error_net.activation(),
                                                   std::span<const Var>(params), std::span<const Var>(inputs));
        const Var diff = out[0] - Var(p.target);
        const double weight = out[0].value() < p.target ? under_weight : 1.0;
        const Var loss = diff * diff * Var(weight * scale);
        sum += weight * diff.value() * diff.value();
        if (loss.is_constant()) continue;
        tape.backward(loss);
        for (std::size_t i = 0; i < params.size(); ++i) (*gradient)[i] += tape.adjoint(params[i]);
    }
    return sum * scale;
}

Network train_error_net(const SurrogateDataset& data, const OdeProblem& problem, const ErrorNetConfig& config) {
    if (data.points.empty()) throw ConfigError("surrogate data set is empty");
    if (!(config.under_weight >= 1.0)) throw ConfigError("under_weight must be at least 1");
    std::vector<std::size_t> dims{network_input_dim(problem)};
    dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
    dims.push_back(1);
    Network net = Network::glorot(dims, config.activation, config.seed);

    Objective objective = [&](std::span<const double> params, std::span<double> grad) {
        std::copy(params.begin(), params.end(), net.parameters().begin());
        std::vector<double> g;
        const double value = surrogate_loss(net, problem, data, config.under_weight, &g);
        std::copy(g.begin(), g.end(), grad.begin());
        return value;
    };
    std::vector<double> params(net.parameters().begin(), net.parameters().end());
    const double final_loss = minimize(params, objective, config.optimizer, config.epochs);
    std::copy(params.begin(), params.end(), net.parameters().begin());
    net.training_metadata = {{"role", "error_indicator"},
                             {"under_weight", config.under_weight},
                             {"epochs", config.epochs},
                             {"final_loss", final_loss},
                             {"training_points", data.points.size()}};
    return net;
}

double predict_error(const Network& error_net, const OdeProblem& problem, std::span<const double> x0,
                     std::span<const double> u, double t) {
    return forward(error_net, network_input(problem, t, x0, u)).at(0);
}

double overestimation_fraction(const Network& error_net, const OdeProblem& problem, const SurrogateDataset& data) {
    if (data.points.empty()) return 0.0;
    std::size_t over = 0;
    for (const auto& p : data.points)
        if (predict_error(error_net, problem, p.x0, p.u, p.t) >= p.target) ++over;
    return static_cast<double>(over) / static_cast<double>(data.points.size());
}

void write_surrogate_csv(std::ostream& out, const OdeProblem& problem, const SurrogateDataset& data) {
    for (const auto& c : input_columns(problem)) out << c << ',';
    out << "e_target\n";
    for (const auto& p : data.points) {
        write_inputs(out, p);
        out << ',' << csv::real(p.target) << '\n';
    }
}

SurrogateDataset read_surrogate_csv(const std::filesystem::path& path, const OdeProblem& problem) {
    const auto table = csv::read(path);
    auto expected = input_columns(problem);
    expected.emplace_back("e_target");
    if (table.header != expected) throw ConfigError(path.string() + ": unexpected surrogate data header");
    SurrogateDataset data;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        SurrogatePoint p;
        std::size_t c = 0;
        p.t = table.number(r, c++);
        for (std::size_t i = 0; i < problem.dimension; ++i) p.x0.push_back(table.number(r, c++));
        for (std::size_t k = 0; k < problem.control_dim; ++k) p.u.push_back(table.number(r, c++));
        p.target = table.number(r, c);
        if (!(p.target >= 0.0)) throw ConfigError(path.string() + ": negative error target");
        data.points.push_back(std::move(p));
    }
    return data;
}

void write_comparison_csv(std::ostream& out, const Network& error_net, const OdeProblem& problem,
                          const SurrogateDataset& data) {
    for (const auto& c : input_columns(problem)) out << c << ',';
    out << "e_certified,e_nn\n";
    for (const auto& p : data.points) {
        write_inputs(out, p);
        out << ',' << csv::real(p.target) << ',' << csv::real(predict_error(error_net, problem, p.x0, p.u, p.t))
            << '\n';
    }
}

}  // namespace pinncert
