#pragma once

// Scalar automatic differentiation used to differentiate the mean value
// coordinate kernel with respect to cage geometry.
//
// Reverse mode: `Var` values record elementary operations on the calling
// thread's active `Tape` (see TapeScope). Each node keeps at most two parents
// with their local partials; node 0 is a sink that absorbs partials of
// constants. Forward mode: `Dual` carries one directional derivative.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace cagewarp::ad {

/// Arguments of asin are clamped to this band when differentiating.
inline constexpr double kAsinDerivativeClamp = 1.0 - 1e-12;

class Tape {
public:
    struct Node {
        std::int32_t a;
        std::int32_t b;
        double da;
        double db;
    };

    Tape() { clear(); }

    void clear() {
        nodes_.clear();
        nodes_.push_back({0, 0, 0.0, 0.0});
    }
    void reserve(std::size_t n) { nodes_.reserve(n); }

    std::int32_t push(std::int32_t a, double da, std::int32_t b = 0, double db = 0.0) {
        nodes_.push_back({a, b, da, db});
        return static_cast<std::int32_t>(nodes_.size() - 1);
    }
    std::int32_t new_input() { return push(0, 0.0); }

    [[nodiscard]] std::size_t size() const { return nodes_.size(); }

    /// Propagates `adjoint` (sized size(), outputs pre-seeded) back to inputs.
    void reverse(std::vector<double>& adjoint) const {
        for (std::size_t i = nodes_.size() - 1; i > 0; --i) {
            const double g = adjoint[i];
            if (g == 0.0) continue;
            const Node& n = nodes_[i];
            adjoint[n.a] += n.da * g;
            adjoint[n.b] += n.db * g;
        }
    }

private:
    std::vector<Node> nodes_;
};

inline Tape*& active_tape() {
    thread_local Tape* tape = nullptr;
    return tape;
}

/// Makes `tape` the recording target of the current thread for its lifetime.
class TapeScope {
public:
    explicit TapeScope(Tape& tape) : previous_(active_tape()) { active_tape() = &tape; }
    ~TapeScope() { active_tape() = previous_; }
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* previous_;
};

class Var {
public:
    Var(double value = 0.0) : value_(value), id_(0) {}  // NOLINT: constants convert implicitly

    static Var input(double value) { return Var(value, active_tape()->new_input()); }

    [[nodiscard]] double value() const { return value_; }
    [[nodiscard]] std::int32_t id() const { return id_; }
    [[nodiscard]] bool is_constant() const { return id_ == 0; }

    static Var node(double value, std::int32_t a, double da, std::int32_t b = 0, double db = 0.0) {
        if (a == 0 && b == 0) return Var(value);
        return Var(value, active_tape()->push(a, da, b, db));
    }

private:
    Var(double value, std::int32_t id) : value_(value), id_(id) {}
    double value_;
    std::int32_t id_;
};

inline Var operator+(const Var& x, const Var& y) { return Var::node(x.value() + y.value(), x.id(), 1.0, y.id(), 1.0); }
inline Var operator-(const Var& x, const Var& y) { return Var::node(x.value() - y.value(), x.id(), 1.0, y.id(), -1.0); }
inline Var operator*(const Var& x, const Var& y) {
    return Var::node(x.value() * y.value(), x.id(), y.value(), y.id(), x.value());
}
inline Var operator/(const Var& x, const Var& y) {
    const double q = x.value() / y.value();
    return Var::node(q, x.id(), 1.0 / y.value(), y.id(), -q / y.value());
}
inline Var operator-(const Var& x) { return Var::node(-x.value(), x.id(), -1.0); }
inline Var operator+(const Var& x, double c) { return Var::node(x.value() + c, x.id(), 1.0); }
inline Var operator+(double c, const Var& x) { return Var::node(c + x.value(), x.id(), 1.0); }
inline Var operator-(const Var& x, double c) { return Var::node(x.value() - c, x.id(), 1.0); }
inline Var operator-(double c, const Var& x) { return Var::node(c - x.value(), x.id(), -1.0); }
inline Var operator*(const Var& x, double c) { return Var::node(x.value() * c, x.id(), c); }
inline Var operator*(double c, const Var& x) { return Var::node(c * x.value(), x.id(), c); }
inline Var operator/(const Var& x, double c) { return Var::node(x.value() / c, x.id(), 1.0 / c); }
inline Var operator/(double c, const Var& x) {
    const double q = c / x.value();
    return Var::node(q, x.id(), -q / x.value());
}
inline Var& operator+=(Var& x, const Var& y) { return x = x + y; }
inline Var& operator-=(Var& x, const Var& y) { return x = x - y; }

inline Var sqrt(const Var& x) {
    const double r = std::sqrt(x.value());
    return Var::node(r, x.id(), 0.5 / r);
}
inline Var sin(const Var& x) { return Var::node(std::sin(x.value()), x.id(), std::cos(x.value())); }
inline Var cos(const Var& x) { return Var::node(std::cos(x.value()), x.id(), -std::sin(x.value())); }

/// Forward-mode dual number.
struct Dual {
    double v = 0.0;
    double d = 0.0;
    Dual(double value = 0.0, double deriv = 0.0) : v(value), d(deriv) {}  // NOLINT
};

inline Dual operator+(const Dual& x, const Dual& y) { return {x.v + y.v, x.d + y.d}; }
inline Dual operator-(const Dual& x, const Dual& y) { return {x.v - y.v, x.d - y.d}; }
inline Dual operator*(const Dual& x, const Dual& y) { return {x.v * y.v, x.d * y.v + x.v * y.d}; }
inline Dual operator/(const Dual& x, const Dual& y) {
    const double q = x.v / y.v;
    return {q, (x.d - q * y.d) / y.v};
}
inline Dual operator-(const Dual& x) { return {-x.v, -x.d}; }
inline Dual& operator+=(Dual& x, const Dual& y) { return x = x + y; }
inline Dual& operator-=(Dual& x, const Dual& y) { return x = x - y; }
inline Dual sqrt(const Dual& x) {
    const double r = std::sqrt(x.v);
    return {r, 0.5 * x.d / r};
}
inline Dual sin(const Dual& x) { return {std::sin(x.v), std::cos(x.v) * x.d}; }
inline Dual cos(const Dual& x) { return {std::cos(x.v), -std::sin(x.v) * x.d}; }

// Primal access and asin with a clamped argument, uniform over scalar types.
inline double value(double x) { return x; }
inline double value(const Var& x) { return x.value(); }
inline double value(const Dual& x) { return x.v; }

inline double asin_derivative(double x) {
    const double c = std::clamp(x, -kAsinDerivativeClamp, kAsinDerivativeClamp);
    return 1.0 / std::sqrt(1.0 - c * c);
}
inline double clamped_asin(double x) { return std::asin(std::clamp(x, -1.0, 1.0)); }
inline Var clamped_asin(const Var& x) {
    return Var::node(clamped_asin(x.value()), x.id(), asin_derivative(x.value()));
}
inline Dual clamped_asin(const Dual& x) { return {clamped_asin(x.v), asin_derivative(x.v) * x.d}; }

}  // namespace cagewarp::ad
