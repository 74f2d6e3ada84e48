#include "pinncert/activation.hpp"

#include <cmath>
#include <numbers>

#include "pinncert/error.hpp"

namespace pinncert {
namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

}  // namespace

std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::tanh: return "tanh";
        case Activation::gelu: return "gelu";
        case Activation::silu: return "silu";
        case Activation::sigmoid: return "sigmoid";
    }
    return "unknown";
}

Activation parse_activation(std::string_view name) {
    if (name == "tanh") return Activation::tanh;
    if (name == "gelu") return Activation::gelu;
    if (name == "silu") return Activation::silu;
    if (name == "sigmoid") return Activation::sigmoid;
    throw ConfigError("unknown activation '" + std::string(name) + "'");
}

double activate(Activation a, double x) {
    switch (a) {
        case Activation::tanh: return std::tanh(x);
        case Activation::gelu: return x * normal_cdf(x);
        case Activation::silu: return x * sigmoid(x);
        case Activation::sigmoid: return sigmoid(x);
    }
    return 0.0;
}

double activate_d1(Activation a, double x) {
    switch (a) {
        case Activation::tanh: {
            const double th = std::tanh(x);
            return 1.0 - th * th;
        }
        case Activation::gelu: return normal_cdf(x) + x * normal_pdf(x);
        case Activation::silu: {
            const double s = sigmoid(x);
            return s + x * s * (1.0 - s);
        }
        case Activation::sigmoid: {
            const double s = sigmoid(x);
            return s * (1.0 - s);
        }
    }
    return 0.0;
}

double activate_d2(Activation a, double x) {
    switch (a) {
        case Activation::tanh: {
            const double th = std::tanh(x);
            return -2.0 * th * (1.0 - th * th);
        }
        case Activation::gelu: return normal_pdf(x) * (2.0 - x * x);
        case Activation::silu: {
            const double s = sigmoid(x);
            return s * (1.0 - s) * (2.0 + x * (1.0 - 2.0 * s));
        }
        case Activation::sigmoid: {
            const double s = sigmoid(x);
            return s * (1.0 - s) * (1.0 - 2.0 * s);
        }
    }
    return 0.0;
}

}  // namespace pinncert
