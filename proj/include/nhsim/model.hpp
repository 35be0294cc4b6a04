#pragma once

#include <array>
#include <map>

#include "nhsim/core.hpp"
#include "nhsim/encoding.hpp"
#include "nhsim/pauli.hpp"

namespace nhsim {

enum class Boundary { open, periodic };

struct LadderParams {
    int cells = 1;
    double v1 = 0.0;
    double v2 = 0.0;
    double gamma = 1.0;
    std::map<int, double> interactions;  // range r -> U_r
    bool hardcore = true;
    Boundary boundary = Boundary::open;

    void validate() const;
};

MatrixXc build_single_particle(const LadderParams& params);
MatrixXc build_many_body(const LadderParams& params, const SectorEncoding& enc);

struct BlochResult {
    Eigen::Matrix2cd matrix;
    std::array<cd, 2> energies;
};

BlochResult bloch(const LadderParams& params, double k);

template <class Scalar>
struct HamiltonianSplit {
    Matrix<Scalar> hermitian_part;
    Matrix<Scalar> antihermitian_generator;
    Eigen::Index dimension = 0;
};

template <class Derived>
auto split(const Eigen::MatrixBase<Derived>& h) {
    using Scalar = typename Derived::Scalar;
    if (h.rows() != h.cols()) throw std::invalid_argument("split: matrix not square");
    HamiltonianSplit<Scalar> out;
    out.hermitian_part = (h + h.adjoint()) / Scalar(2);
    out.antihermitian_generator = Scalar(cd{0, 1}) * (h - h.adjoint()) / Scalar(2);
    out.dimension = h.rows();
    return out;
}

struct GapResult {
    double gap = 0.0;
    double max_im = 0.0;
    double min_im = 0.0;
};

GapResult dissipative_gap(const LadderParams& params, int k_samples = 1024);

}  // namespace nhsim
