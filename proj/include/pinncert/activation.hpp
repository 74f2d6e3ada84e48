#pragma once

#include <string>
#include <string_view>

#include "pinncert/dual.hpp"
#include "pinncert/tape.hpp"

namespace pinncert {

enum class Activation { tanh, gelu, silu, sigmoid };

std::string_view to_string(Activation a);
// Throws ConfigError for unknown names.
Activation parse_activation(std::string_view name);

// Value, first and second derivative at x. gelu is x * Phi(x) with the exact
// normal CDF, not the tanh approximation.
double activate(Activation a, double x);
double activate_d1(Activation a, double x);
double activate_d2(Activation a, double x);

inline Var activate(Activation a, const Var& x) {
    return apply_unary(x, activate(a, x.value()), activate_d1(a, x.value()));
}

inline Var activate_d1(Activation a, const Var& x) {
    return apply_unary(x, activate_d1(a, x.value()), activate_d2(a, x.value()));
}

template <typename T>
Dual<T> activate(Activation a, const Dual<T>& x) {
    return {activate(a, x.value), x.deriv * activate_d1(a, x.value)};
}

}  // namespace pinncert
