#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace opaug {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shapes do not match between two objects that must agree.
struct DimensionError : Error {
    using Error::Error;
};

// A value violates a documented precondition (bad probability row,
// nonpositive sample count, non-SPD norm matrix, ...).
struct InvalidArgument : Error {
    using Error::Error;
};

// The augmentation factor is undefined for this instance (b = 0 or a
// nonpositive denominator). Carries the offending scalars for diagnosis.
struct DegenerateInstance : Error {
    DegenerateInstance(const std::string& msg, double g, double h, double t)
        : Error(msg), g(g), h(h), t(t) {}
    explicit DegenerateInstance(const std::string& msg) : Error(msg), g(0), h(0), t(0) {}
    double g, h, t;
};

// Bad or inconsistent configuration file / CLI input.
struct ConfigError : Error {
    using Error::Error;
};

// Combinatorial or numeric guard tripped (enumeration too large, eigensolver
// failure, ...).
struct GuardError : Error {
    using Error::Error;
};

// Summation in a fixed binary-tree order. Used for Monte-Carlo reductions so
// that serial and parallel runs reduce identically.
inline double pairwise_sum(const double* x, std::size_t len) {
    if (len == 0) return 0.0;
    if (len <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < len; ++i) s += x[i];
        return s;
    }
    const std::size_t half = len / 2;
    return pairwise_sum(x, half) + pairwise_sum(x + half, len - half);
}

inline double pairwise_sum(const std::vector<double>& x) {
    return pairwise_sum(x.data(), x.size());
}

// Ordinary least squares fit of y = a + b*x; returns {intercept, slope}.
inline std::pair<double, double> linear_fit(const std::vector<double>& x,
                                            const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw InvalidArgument("linear_fit: need at least two matching points");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double denom = n * sxx - sx * sx;
    if (denom == 0.0) throw InvalidArgument("linear_fit: degenerate abscissae");
    const double slope = (n * sxy - sx * sy) / denom;
    const double intercept = (sy - slope * sx) / n;
    return {intercept, slope};
}

}  // namespace opaug
