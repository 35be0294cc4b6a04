#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nhsim/core.hpp"
#include "nhsim/engine.hpp"

namespace nhsim {

// nearest point (l2) on {x >= 0, sum x = total}; sort-and-threshold
template <class Derived>
Vector<typename Derived::Scalar> project_simplex(const Eigen::MatrixBase<Derived>& v,
                                                 typename Derived::Scalar total = 1) {
    using Scalar = typename Derived::Scalar;
    const Eigen::Index n = v.size();
    if (n == 0) throw std::invalid_argument("project_simplex: empty input");
    if (!(total > 0)) throw std::invalid_argument("project_simplex: total must be positive");
    std::vector<Scalar> u(v.derived().data(), v.derived().data() + n);
    std::sort(u.begin(), u.end(), std::greater<Scalar>());
    Scalar cum = 0, theta = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
        cum += u[j];
        const Scalar t = (cum - total) / static_cast<Scalar>(j + 1);
        if (u[j] - t > 0) theta = t;
    }
    return (v.array() - theta).cwiseMax(Scalar(0)).matrix();
}

struct CalibrationSet {
    std::vector<std::vector<int>> sub_registers;
    std::vector<Eigen::MatrixXd> matrices;  // column-stochastic, column = prepared state
    std::size_t circuits = 0;               // preparation circuits executed

    void validate() const;
    // M[I] on the given qubits, marginalized from the tensored calibration
    Eigen::MatrixXd marginal(const std::vector<int>& qubits) const;
};

CalibrationSet calibrate(const NoiseModel* noise, int n_qubits, const std::vector<std::vector<int>>& sub_registers,
                         std::size_t shots, std::uint64_t seed);

// contiguous sub-registers of at most `max_size` qubits
std::vector<std::vector<int>> default_sub_registers(int n_qubits, int max_size = 5);

std::string calibration_to_json(const CalibrationSet& cal);
CalibrationSet calibration_from_json(const std::string& text);

// counts keyed by bit strings; layer l owns the next |layers[l]| characters
std::map<std::string, double> mitigate_counts(const std::map<std::string, std::uint64_t>& counts,
                                              const std::vector<std::vector<int>>& layers, const CalibrationSet& cal);

// post-selected system distribution at a step with `layers` ancilla measurements, readout-inverted,
// projected onto the simplex, restricted to the physical sector
Eigen::VectorXd mitigate_postselected(const LayeredCounts& counts, int layers, int ancilla,
                                      const std::vector<int>& system_qubits, std::size_t dim,
                                      const CalibrationSet& cal);

enum class ObservableKind { occupancy, imaginary_energy, other };

struct ZneInput {
    std::vector<double> lambdas;   // strictly increasing, starts at 1
    Eigen::MatrixXd values;        // observable x lambda
    std::vector<ObservableKind> kinds;
    bool occupancy_bounds = false;
    std::optional<double> number_sum;              // p
    std::optional<std::array<double, 2>> ime_bounds;  // (p, gamma)
};

struct ZneResult {
    Eigen::VectorXd intercepts;
    Eigen::VectorXd gradients;
    double kkt_residual = 0.0;
    int iterations = 0;
};

ZneResult zne(const ZneInput& in);

// min 1/2 x'Gx + c'x  s.t.  Aeq x = beq, Ain x >= bin, from a feasible x0
struct QpResult {
    Eigen::VectorXd x;
    double kkt_residual = 0.0;
    int iterations = 0;
};

QpResult solve_qp(const Eigen::MatrixXd& g, const Eigen::VectorXd& c, const Eigen::MatrixXd& a_eq,
                  const Eigen::VectorXd& b_eq, const Eigen::MatrixXd& a_in, const Eigen::VectorXd& b_in,
                  Eigen::VectorXd x0);

}  // namespace nhsim
