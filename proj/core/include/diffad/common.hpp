#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace diffad {

// One patch's latent coordinates (z_0 or z_t), or a noise draw of the same shape.
using Latent = std::vector<double>;

// User/configuration mistakes; mapped to exit code 1 by the CLI.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input files; also exit code 1.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Broken internal invariant; exit code 2.
struct InvariantError : std::logic_error {
    using std::logic_error::logic_error;
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(const std::vector<double>& a) {
    return std::sqrt(dot(a, a));
}

inline double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline bool all_finite(const std::vector<double>& a) {
    for (double x : a)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace diffad
