#include "pinncert/network.hpp"

#include <cmath>
#include <fstream>
#include <random>

namespace pinncert {

namespace {
constexpr int kSchemaVersion = 1;
}

Network::Network(std::vector<std::size_t> layer_dims, Activation activation)
    : dims_(std::move(layer_dims)), activation_(activation) {
    if (dims_.size() < 2) throw ShapeError("a network needs at least an input and an output dimension");
    std::size_t count = 0;
    for (std::size_t k = 0; k + 1 < dims_.size(); ++k) {
        if (dims_[k] == 0 || dims_[k + 1] == 0) throw ShapeError("layer dimensions must be positive");
        count += dims_[k] * dims_[k + 1] + dims_[k + 1];
    }
    params_.assign(count, 0.0);
}

Network Network::glorot(std::vector<std::size_t> layer_dims, Activation activation, std::uint64_t seed) {
    Network net(std::move(layer_dims), activation);
    net.seed = seed;
    std::mt19937_64 rng(seed);
    for (std::size_t k = 0; k < net.layer_count(); ++k) {
        const double fan = static_cast<double>(net.dims_[k] + net.dims_[k + 1]);
        const double limit = std::sqrt(6.0 / fan);
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (double& w : net.weights(k)) w = dist(rng);
    }
    return net;
}

std::size_t Network::layer_offset(std::size_t layer) const {
    if (layer >= layer_count()) throw ShapeError("layer index out of range");
    std::size_t offset = 0;
    for (std::size_t k = 0; k < layer; ++k) offset += dims_[k] * dims_[k + 1] + dims_[k + 1];
    return offset;
}

std::span<const double> Network::weights(std::size_t layer) const {
    return std::span<const double>(params_).subspan(layer_offset(layer), dims_[layer] * dims_[layer + 1]);
}

std::span<double> Network::weights(std::size_t layer) {
    return std::span<double>(params_).subspan(layer_offset(layer), dims_[layer] * dims_[layer + 1]);
}

std::span<const double> Network::biases(std::size_t layer) const {
    return std::span<const double>(params_).subspan(layer_offset(layer) + dims_[layer] * dims_[layer + 1],
                                                    dims_[layer + 1]);
}

std::span<double> Network::biases(std::size_t layer) {
    return std::span<double>(params_).subspan(layer_offset(layer) + dims_[layer] * dims_[layer + 1],
                                              dims_[layer + 1]);
}

void check_input(const Network& net, std::size_t input_size) {
    if (input_size != net.input_dim())
        throw ShapeError("network expects " + std::to_string(net.input_dim()) + " inputs, got " +
                         std::to_string(input_size));
}

std::vector<double> forward(const Network& net, std::span<const double> input) {
    check_input(net, input.size());
    return forward_generic<double, double>(net.layer_dims(), net.activation(), net.parameters(), input);
}

std::vector<Dual<double>> forward_tangent(const Network& net, std::span<const double> input,
                                          std::span<const double> direction) {
    check_input(net, input.size());
    check_input(net, direction.size());
    std::vector<Dual<double>> seeded;
    seeded.reserve(input.size());
    for (std::size_t i = 0; i < input.size(); ++i) seeded.emplace_back(input[i], direction[i]);
    return forward_generic<double, Dual<double>>(net.layer_dims(), net.activation(), net.parameters(),
                                                 std::span<const Dual<double>>(seeded));
}

Eigen::MatrixXd input_jacobian(const Network& net, std::span<const double> input) {
    check_input(net, input.size());
    Eigen::MatrixXd jac(net.output_dim(), net.input_dim());
    std::vector<double> direction(input.size(), 0.0);
    for (std::size_t j = 0; j < input.size(); ++j) {
        direction[j] = 1.0;
        const auto out = forward_tangent(net, input, direction);
        for (std::size_t i = 0; i < out.size(); ++i) jac(Eigen::Index(i), Eigen::Index(j)) = out[i].deriv;
        direction[j] = 0.0;
    }
    return jac;
}

std::vector<Var> record_parameters(Tape& tape, const Network& net) {
    std::vector<Var> vars;
    vars.reserve(net.parameter_count());
    for (double p : net.parameters()) vars.push_back(tape.leaf(p));
    return vars;
}

std::vector<double> parameter_gradient(Tape& tape, std::span<const Var> params, const Var& loss) {
    std::vector<double> grad(params.size(), 0.0);
    if (loss.is_constant()) throw UsageError("loss is a constant; nothing was recorded");
    tape.backward(loss);
    for (std::size_t i = 0; i < params.size(); ++i) grad[i] = tape.adjoint(params[i]);
    return grad;
}

nlohmann::json to_json(const Network& net) {
    nlohmann::json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["layer_dims"] = net.layer_dims();
    doc["activation"] = std::string(to_string(net.activation()));
    nlohmann::json weights = nlohmann::json::array();
    nlohmann::json biases = nlohmann::json::array();
    for (std::size_t k = 0; k < net.layer_count(); ++k) {
        const auto w = net.weights(k);
        const auto b = net.biases(k);
        weights.push_back(std::vector<double>(w.begin(), w.end()));
        biases.push_back(std::vector<double>(b.begin(), b.end()));
    }
    doc["weights"] = std::move(weights);
    doc["biases"] = std::move(biases);
    doc["seed"] = net.seed;
    doc["training"] = net.training_metadata;
    return doc;
}

Network network_from_json(const nlohmann::json& doc) {
    try {
        if (doc.at("schema_version").get<int>() != kSchemaVersion)
            throw ConfigError("unsupported network schema_version");
        Network net(doc.at("layer_dims").get<std::vector<std::size_t>>(),
                    parse_activation(doc.at("activation").get<std::string>()));
        const auto& weights = doc.at("weights");
        const auto& biases = doc.at("biases");
        if (weights.size() != net.layer_count() || biases.size() != net.layer_count())
            throw ShapeError("per-layer arrays do not match layer_dims");
        for (std::size_t k = 0; k < net.layer_count(); ++k) {
            const auto w = weights[k].get<std::vector<double>>();
            const auto b = biases[k].get<std::vector<double>>();
            auto dst_w = net.weights(k);
            auto dst_b = net.biases(k);
            if (w.size() != dst_w.size() || b.size() != dst_b.size())
                throw ShapeError("layer " + std::to_string(k) + " has the wrong number of parameters");
            std::copy(w.begin(), w.end(), dst_w.begin());
            std::copy(b.begin(), b.end(), dst_b.begin());
        }
        net.seed = doc.value("seed", std::uint64_t{0});
        net.training_metadata = doc.value("training", nlohmann::json::object());
        return net;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed network document: ") + e.what());
    }
}

void save_network(const Network& net, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << to_json(net).dump(2) << '\n';
}

Network load_network(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return network_from_json(doc);
}

}  // namespace pinncert
