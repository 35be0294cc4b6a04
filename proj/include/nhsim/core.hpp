#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace nhsim {

using cd = std::complex<double>;

template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXc = Matrix<cd>;
using VectorXc = Vector<cd>;

inline constexpr cd I{0.0, 1.0};
inline constexpr const char* kVersion = "0.3.1";

// bad input that a user can fix (cli maps it to exit code 2)
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// an iterative method or a convergence check gave up (exit code 3)
struct ConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline int popcount(std::uint64_t v) { return __builtin_popcountll(v); }

}  // namespace nhsim
