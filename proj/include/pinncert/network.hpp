#pragma once

// Fully connected feed-forward network with linear output layer.
//
// Parameters are stored flat; layer k occupies dims[k+1]*dims[k] weights
// (row-major, out x in) followed by dims[k+1] biases.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "pinncert/activation.hpp"
#include "pinncert/dual.hpp"
#include "pinncert/error.hpp"
#include "pinncert/tape.hpp"

namespace pinncert {

class Network {
public:
    // All parameters zero. Throws ShapeError for fewer than two dims or a zero dim.
    Network(std::vector<std::size_t> layer_dims, Activation activation);

    // Glorot-uniform weights, zero biases.
    static Network glorot(std::vector<std::size_t> layer_dims, Activation activation, std::uint64_t seed);

    const std::vector<std::size_t>& layer_dims() const noexcept { return dims_; }
    Activation activation() const noexcept { return activation_; }
    std::size_t input_dim() const noexcept { return dims_.front(); }
    std::size_t output_dim() const noexcept { return dims_.back(); }
    std::size_t layer_count() const noexcept { return dims_.size() - 1; }
    std::size_t parameter_count() const noexcept { return params_.size(); }

    std::span<const double> parameters() const noexcept { return params_; }
    std::span<double> parameters() noexcept { return params_; }

    std::span<const double> weights(std::size_t layer) const;
    std::span<double> weights(std::size_t layer);
    std::span<const double> biases(std::size_t layer) const;
    std::span<double> biases(std::size_t layer);

    std::uint64_t seed = 0;
    // Free-form provenance stored alongside the weights (training settings, losses).
    nlohmann::json training_metadata = nlohmann::json::object();

    friend bool operator==(const Network&, const Network&) = default;

private:
    std::size_t layer_offset(std::size_t layer) const;

    std::vector<std::size_t> dims_;
    Activation activation_;
    std::vector<double> params_;
};

// Forward pass for any parameter scalar P and activation scalar X, e.g.
// (double, double), (double, Dual<double>) or (Var, Dual<Var>).
template <typename P, typename X>
std::vector<X> forward_generic(std::span<const std::size_t> dims, Activation act, std::span<const P> params,
                               std::span<const X> input) {
    std::vector<X> current(input.begin(), input.end());
    std::vector<X> next;
    std::size_t offset = 0;
    const std::size_t layers = dims.size() - 1;
    for (std::size_t k = 0; k < layers; ++k) {
        const std::size_t in = dims[k];
        const std::size_t out = dims[k + 1];
        const P* w = params.data() + offset;
        const P* b = w + in * out;
        next.clear();
        next.reserve(out);
        for (std::size_t o = 0; o < out; ++o) {
            X acc(b[o]);
            const P* row = w + o * in;
            for (std::size_t i = 0; i < in; ++i) acc = acc + current[i] * row[i];
            if (k + 1 < layers) acc = activate(act, acc);
            next.push_back(std::move(acc));
        }
        current.swap(next);
        offset += in * out + out;
    }
    return current;
}

void check_input(const Network& net, std::size_t input_size);

// phi_hat(input). Throws ShapeError on a dimension mismatch.
std::vector<double> forward(const Network& net, std::span<const double> input);

// d output / d input, one forward-mode pass per input direction.
Eigen::MatrixXd input_jacobian(const Network& net, std::span<const double> input);

// Outputs and their directional derivatives along `direction`.
std::vector<Dual<double>> forward_tangent(const Network& net, std::span<const double> input,
                                          std::span<const double> direction);

// Records every parameter as an independent tape variable, in flat order.
std::vector<Var> record_parameters(Tape& tape, const Network& net);

// d loss / d parameters for a loss recorded on `tape` from `params`.
// Throws UsageError when `loss` was not recorded on `tape`.
std::vector<double> parameter_gradient(Tape& tape, std::span<const Var> params, const Var& loss);

nlohmann::json to_json(const Network& net);
Network network_from_json(const nlohmann::json& doc);
void save_network(const Network& net, const std::filesystem::path& path);
Network load_network(const std::filesystem::path& path);

}  // namespace pinncert
