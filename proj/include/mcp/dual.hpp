/**
 * @file dual.hpp
 * @brief Forward-mode dual numbers over a fixed bank of partial derivatives.
 *
 * Every model routine is a template over its scalar type. Instantiating it
 * with `double` gives the plain simulation; instantiating it with `Dual`
 * propagates the derivatives of every intermediate with respect to up to
 * `kMaxPartials` seed variables in a single forward pass.
 */

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <type_traits>

namespace mcp {

inline constexpr std::size_t kMaxPartials = 16;

struct Dual {
    double v = 0.0;
    std::array<double, kMaxPartials> d{};

    Dual() = default;
    Dual(double value) : v(value) {}  // NOLINT: implicit lift of constants

    /// Seed variable `index` with unit derivative.
    static Dual variable(double value, std::size_t index) {
        Dual x(value);
        x.d[index] = 1.0;
        return x;
    }

    Dual& operator+=(const Dual& o) {
        v += o.v;
        for (std::size_t i = 0; i < kMaxPartials; ++i) d[i] += o.d[i];
        return *this;
    }
    Dual& operator-=(const Dual& o) {
        v -= o.v;
        for (std::size_t i = 0; i < kMaxPartials; ++i) d[i] -= o.d[i];
        return *this;
    }
    Dual& operator*=(const Dual& o) {
        for (std::size_t i = 0; i < kMaxPartials; ++i) d[i] = d[i] * o.v + v * o.d[i];
        v *= o.v;
        return *this;
    }
    Dual& operator/=(const Dual& o) {
        const double inv = 1.0 / o.v;
        const double q = v * inv;
        for (std::size_t i = 0; i < kMaxPartials; ++i) d[i] = (d[i] - q * o.d[i]) * inv;
        v = q;
        return *this;
    }
    Dual& operator+=(double c) { v += c; return *this; }
    Dual& operator-=(double c) { v -= c; return *this; }
    Dual& operator*=(double c) {
        v *= c;
        for (auto& x : d) x *= c;
        return *this;
    }
    Dual& operator/=(double c) { return *this *= (1.0 / c); }
};

/// Derivative a'(x) applied via chain rule: returns f with value fv and df = slope * dx.
inline Dual chain(const Dual& x, double fv, double slope) {
    Dual r(fv);
    for (std::size_t i = 0; i < kMaxPartials; ++i) r.d[i] = slope * x.d[i];
    return r;
}

inline Dual operator-(const Dual& a) { return chain(a, -a.v, -1.0); }
inline Dual operator+(Dual a, const Dual& b) { return a += b; }
inline Dual operator-(Dual a, const Dual& b) { return a -= b; }
inline Dual operator*(Dual a, const Dual& b) { return a *= b; }
inline Dual operator/(Dual a, const Dual& b) { return a /= b; }
inline Dual operator+(Dual a, double c) { return a += c; }
inline Dual operator+(double c, Dual a) { return a += c; }
inline Dual operator-(Dual a, double c) { return a -= c; }
inline Dual operator-(double c, const Dual& a) { return chain(a, c - a.v, -1.0); }
inline Dual operator*(Dual a, double c) { return a *= c; }
inline Dual operator*(double c, Dual a) { return a *= c; }
inline Dual operator/(Dual a, double c) { return a /= c; }
inline Dual operator/(double c, const Dual& a) { return chain(a, c / a.v, -c / (a.v * a.v)); }

inline bool operator<(const Dual& a, const Dual& b) { return a.v < b.v; }
inline bool operator>(const Dual& a, const Dual& b) { return a.v > b.v; }
inline bool operator<=(const Dual& a, const Dual& b) { return a.v <= b.v; }
inline bool operator>=(const Dual& a, const Dual& b) { return a.v >= b.v; }

template <class S>
inline constexpr bool is_dual_v = std::is_same_v<std::remove_cvref_t<S>, Dual>;

inline double value(double x) { return x; }
inline double value(const Dual& x) { return x.v; }

// Plain overloads so unqualified calls resolve identically for both scalars.
inline double exp(double x) { return std::exp(x); }
inline double log(double x) { return std::log(x); }
inline double sqrt(double x) { return std::sqrt(x); }
inline double abs(double x) { return std::fabs(x); }

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline Dual sigmoid(const Dual& x) {
    const double s = sigmoid(x.v);
    return chain(x, s, s * (1.0 - s));
}

inline Dual exp(const Dual& x) {
    const double e = std::exp(x.v);
    return chain(x, e, e);
}

inline Dual log(const Dual& x) { return chain(x, std::log(x.v), 1.0 / x.v); }

inline Dual sqrt(const Dual& x) {
    const double r = std::sqrt(x.v);
    return chain(x, r, r > 0.0 ? 0.5 / r : 0.0);
}

inline Dual abs(const Dual& x) { return x.v < 0.0 ? -x : x; }

/// base^exponent for base in [0, inf). At base == 0 the result and all
/// partials are taken as 0 (the subgradient the bounded states use).
inline double pow_nonneg(double base, double exponent) {
    if (base <= 0.0) return 0.0;
    return std::pow(base, exponent);
}

inline Dual pow_nonneg(const Dual& base, const Dual& exponent) {
    if (base.v <= 0.0) return Dual(0.0);
    const double p = std::pow(base.v, exponent.v);
    const double dbase = exponent.v * p / base.v;
    const double dexp = p * std::log(base.v);
    Dual r(p);
    for (std::size_t i = 0; i < kMaxPartials; ++i) r.d[i] = dbase * base.d[i] + dexp * exponent.d[i];
    return r;
}

inline Dual pow_nonneg(const Dual& base, double exponent) {
    if (base.v <= 0.0) return Dual(0.0);
    const double p = std::pow(base.v, exponent);
    return chain(base, p, exponent * p / base.v);
}

/// Selection by value; the derivative follows the selected branch.
template <class S>
inline S min_value(const S& a, const S& b) { return b < a ? b : a; }

template <class S>
inline S max_value(const S& a, const S& b) { return a < b ? b : a; }

inline bool all_finite(const Dual& x) {
    if (!std::isfinite(x.v)) return false;
    return std::all_of(x.d.begin(), x.d.end(), [](double g) { return std::isfinite(g); });
}

/**
 * Records how close a Dual evaluation came to the kinks of its min/max
 * clamps. For each partial i it keeps the smallest first-order distance
 * |margin| / |d margin / d x_i| (in units of x_i) to any observed clamp
 * switch. A margin that does not move with x_i contributes no distance.
 */
class KinkMonitor {
public:
    KinkMonitor() { distance_.fill(std::numeric_limits<double>::infinity()); }

    void observe(const Dual& margin) {
        const double m = std::fabs(margin.v);
        for (std::size_t i = 0; i < kMaxPartials; ++i) {
            const double slope = std::fabs(margin.d[i]);
            if (slope == 0.0) continue;
            const double dist = m / slope;
            if (dist < distance_[i]) distance_[i] = dist;
        }
    }

    /// Distance along x_i to the nearest clamp switch (infinity if none moves).
    double distance(std::size_t i) const { return distance_[i]; }

private:
    std::array<double, kMaxPartials> distance_;
};

/// Clamp bookkeeping: no-op for plain doubles.
template <class S>
inline void observe_kink(KinkMonitor* monitor, const S& margin) {
    if constexpr (is_dual_v<S>) {
        if (monitor != nullptr) monitor->observe(margin);
    } else {
        (void)monitor;
        (void)margin;
    }
}

}  // namespace mcp
