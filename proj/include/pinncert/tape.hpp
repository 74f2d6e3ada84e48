#pragma once

// Scalar reverse-mode automatic differentiation.
//
// A Tape records every elementary operation on Var handles as a node with at
// most two parents and the local partial derivative towards each parent. A
// reverse sweep from one output accumulates adjoints for every recorded node.
//
// Node 0 is a sink: operations with a single live parent point their second
// edge at it, which keeps the sweep branch free. Vars without a tape are
// constants and never create nodes.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "pinncert/error.hpp"

namespace pinncert {

class Tape;

class Var {
public:
    Var() = default;
    Var(double v) : value_(v) {}  // NOLINT: constants promote implicitly

    double value() const noexcept { return value_; }
    bool is_constant() const noexcept { return tape_ == nullptr; }
    Tape* tape() const noexcept { return tape_; }
    std::uint32_t index() const noexcept { return index_; }

private:
    friend class Tape;
    Var(Tape* tape, std::uint32_t index, double value) : tape_(tape), index_(index), value_(value) {}

    Tape* tape_ = nullptr;
    std::uint32_t index_ = 0;
    double value_ = 0.0;
};

class Tape {
public:
    Tape() { clear(); }
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Independent variable.
    Var leaf(double value) {
        nodes_.push_back({0, 0, 0.0, 0.0});
        return {this, static_cast<std::uint32_t>(nodes_.size() - 1), value};
    }

    // Record `value` as a function of one parent with d value / d parent = partial.
    Var unary(const Var& x, double value, double partial) {
        if (x.is_constant()) return Var(value);
        check_owner(x);
        nodes_.push_back({x.index_, 0, partial, 0.0});
        return {this, static_cast<std::uint32_t>(nodes_.size() - 1), value};
    }

    Var binary(const Var& x, const Var& y, double value, double dx, double dy) {
        if (x.is_constant()) return y.is_constant() ? Var(value) : y.tape_->unary(y, value, dy);
        if (y.is_constant()) return unary(x, value, dx);
        check_owner(x);
        check_owner(y);
        nodes_.push_back({x.index_, y.index_, dx, dy});
        return {this, static_cast<std::uint32_t>(nodes_.size() - 1), value};
    }

    // Reverse sweep seeded with d output / d output = 1. Afterwards adjoint(v)
    // returns d output / d v for every v recorded before `output`.
    void backward(const Var& output) {
        if (output.is_constant() || output.tape_ != this)
            throw UsageError("gradient requested for a scalar not recorded on this tape");
        adjoints_.assign(output.index_ + 1, 0.0);
        adjoints_[output.index_] = 1.0;
        for (std::uint32_t i = output.index_; i > 0; --i) {
            const double a = adjoints_[i];
            if (a == 0.0) continue;
            const Node& n = nodes_[i];
            adjoints_[n.first] += a * n.d_first;
            adjoints_[n.second] += a * n.d_second;
        }
    }

    double adjoint(const Var& v) const {
        if (v.is_constant()) return 0.0;
        if (v.tape_ != this) throw UsageError("adjoint requested for a scalar of another tape");
        return v.index_ < adjoints_.size() ? adjoints_[v.index_] : 0.0;
    }

    // Forget every node recorded after the first `size` ones; Vars created
    // before that point stay valid.
    void rewind(std::size_t size) {
        if (size == 0 || size > nodes_.size()) throw UsageError("invalid tape rewind position");
        nodes_.resize(size);
    }

    // Drop all nodes but keep capacity for the next recording.
    void clear() {
        nodes_.clear();
        nodes_.push_back({0, 0, 0.0, 0.0});
        adjoints_.clear();
    }

    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        std::uint32_t first;
        std::uint32_t second;
        double d_first;
        double d_second;
    };

    void check_owner(const Var& v) const {
        if (v.tape_ != this) throw UsageError("mixing scalars from different tapes");
    }

    std::vector<Node> nodes_;
    std::vector<double> adjoints_;
};

namespace detail {
inline Tape* owner(const Var& a, const Var& b) { return a.is_constant() ? b.tape() : a.tape(); }
}  // namespace detail

inline Var operator+(const Var& a, const Var& b) {
    if (a.is_constant() && a.value() == 0.0) return b;
    if (b.is_constant() && b.value() == 0.0) return a;
    const double v = a.value() + b.value();
    Tape* t = detail::owner(a, b);
    return t ? t->binary(a, b, v, 1.0, 1.0) : Var(v);
}

inline Var operator-(const Var& a, const Var& b) {
    const double v = a.value() - b.value();
    Tape* t = detail::owner(a, b);
    return t ? t->binary(a, b, v, 1.0, -1.0) : Var(v);
}

inline Var operator-(const Var& a) {
    return a.is_constant() ? Var(-a.value()) : a.tape()->unary(a, -a.value(), -1.0);
}

inline Var operator*(const Var& a, const Var& b) {
    // Exact zeros from constant tangents would otherwise record dead nodes.
    if ((a.is_constant() && a.value() == 0.0) || (b.is_constant() && b.value() == 0.0)) return Var(0.0);
    const double v = a.value() * b.value();
    Tape* t = detail::owner(a, b);
    return t ? t->binary(a, b, v, b.value(), a.value()) : Var(v);
}

inline Var operator/(const Var& a, const Var& b) {
    const double v = a.value() / b.value();
    Tape* t = detail::owner(a, b);
    return t ? t->binary(a, b, v, 1.0 / b.value(), -v / b.value()) : Var(v);
}

inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }

// Elementary function of one argument given its value and derivative at x.
inline Var apply_unary(const Var& x, double value, double partial) {
    return x.is_constant() ? Var(value) : x.tape()->unary(x, value, partial);
}

inline Var sin(const Var& x) { return apply_unary(x, std::sin(x.value()), std::cos(x.value())); }
inline Var cos(const Var& x) { return apply_unary(x, std::cos(x.value()), -std::sin(x.value())); }
inline Var exp(const Var& x) {
    const double e = std::exp(x.value());
    return apply_unary(x, e, e);
}
inline Var sqrt(const Var& x) {
    const double r = std::sqrt(x.value());
    return apply_unary(x, r, 0.5 / r);
}
inline Var tanh(const Var& x) {
    const double th = std::tanh(x.value());
    return apply_unary(x, th, 1.0 - th * th);
}

}  // namespace pinncert
