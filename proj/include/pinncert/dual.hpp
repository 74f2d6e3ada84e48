#pragma once

// Forward-mode dual numbers a + b*eps with eps^2 = 0.
//
// The value type T is either double (plain forward mode) or tape::Var
// (forward-over-reverse: the tangent itself is recorded so the time
// derivative of a network output can be differentiated w.r.t. weights).

#include <cmath>
#include <type_traits>

namespace pinncert {

template <typename T>
struct Dual {
    T value{};
    T deriv{};

    Dual() = default;
    Dual(T v) : value(std::move(v)), deriv(0.0) {}  // NOLINT: constants promote implicitly
    Dual(T v, T d) : value(std::move(v)), deriv(std::move(d)) {}

    template <typename U = T>
        requires(!std::is_same_v<U, double>)
    Dual(double v) : value(v), deriv(0.0) {}  // NOLINT
};

template <typename T>
Dual<T> operator+(const Dual<T>& a, const Dual<T>& b) {
    return {a.value + b.value, a.deriv + b.deriv};
}

template <typename T>
Dual<T> operator-(const Dual<T>& a, const Dual<T>& b) {
    return {a.value - b.value, a.deriv - b.deriv};
}

template <typename T>
Dual<T> operator-(const Dual<T>& a) {
    return {-a.value, -a.deriv};
}

template <typename T>
Dual<T> operator*(const Dual<T>& a, const Dual<T>& b) {
    return {a.value * b.value, a.deriv * b.value + a.value * b.deriv};
}

template <typename T>
Dual<T> operator/(const Dual<T>& a, const Dual<T>& b) {
    T q = a.value / b.value;
    return {q, (a.deriv - q * b.deriv) / b.value};
}

// Mixed operations with a scalar of the underlying type (zero tangent).
// These avoid recording the dead products that a promoted constant would create.
template <typename T>
Dual<T> operator+(const Dual<T>& a, const T& b) {
    return {a.value + b, a.deriv};
}
template <typename T>
Dual<T> operator+(const T& b, const Dual<T>& a) {
    return {b + a.value, a.deriv};
}
template <typename T>
Dual<T> operator-(const Dual<T>& a, const T& b) {
    return {a.value - b, a.deriv};
}
template <typename T>
Dual<T> operator-(const T& b, const Dual<T>& a) {
    return {b - a.value, -a.deriv};
}
template <typename T>
Dual<T> operator*(const Dual<T>& a, const T& b) {
    return {a.value * b, a.deriv * b};
}
template <typename T>
Dual<T> operator*(const T& b, const Dual<T>& a) {
    return {b * a.value, b * a.deriv};
}
template <typename T>
Dual<T> operator/(const Dual<T>& a, const T& b) {
    return {a.value / b, a.deriv / b};
}

// double literals when T is not double.
template <typename T>
    requires(!std::is_same_v<T, double>)
Dual<T> operator*(double b, const Dual<T>& a) {
    return {b * a.value, b * a.deriv};
}
template <typename T>
    requires(!std::is_same_v<T, double>)
Dual<T> operator*(const Dual<T>& a, double b) {
    return {a.value * b, a.deriv * b};
}
template <typename T>
    requires(!std::is_same_v<T, double>)
Dual<T> operator+(const Dual<T>& a, double b) {
    return {a.value + b, a.deriv};
}
template <typename T>
    requires(!std::is_same_v<T, double>)
Dual<T> operator-(double b, const Dual<T>& a) {
    return {b - a.value, -a.deriv};
}

template <typename T>
Dual<T> sin(const Dual<T>& a) {
    using std::cos;
    using std::sin;
    return {sin(a.value), a.deriv * cos(a.value)};
}

template <typename T>
Dual<T> cos(const Dual<T>& a) {
    using std::cos;
    using std::sin;
    return {cos(a.value), -(a.deriv * sin(a.value))};
}

template <typename T>
Dual<T> exp(const Dual<T>& a) {
    using std::exp;
    T e = exp(a.value);
    return {e, a.deriv * e};
}

template <typename T>
Dual<T> sqrt(const Dual<T>& a) {
    using std::sqrt;
    T r = sqrt(a.value);
    return {r, a.deriv / (2.0 * r)};
}

}  // namespace pinncert
