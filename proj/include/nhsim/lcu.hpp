#pragma once

#include <vector>

#include "nhsim/core.hpp"
#include "nhsim/encoding.hpp"

namespace nhsim {

struct LcuPair {
    double weight = 0.0;  // A_b
    double tau = 0.0;     // delta tau_b
};

// e^{-H_A dt} ~ A0 + sum_b A_b (e^{i R tau_b} + e^{-i R tau_b})
struct LcuSolution {
    double a0 = 0.0;
    std::vector<LcuPair> pairs;
    int order = 2;
    bool exact = false;

    double norm() const;                      // A0 + 2 sum A_b
    double response(double lambda) const;     // scalar map at R^2 = lambda
};

LcuSolution solve_expansion(int order, int pairs, double dt, bool pin_a0 = true);

enum class AuxKind { root, exact_onsite };
enum class OnsiteForm { per_state, scalar_angle };

struct AuxGenerator {
    MatrixXc matrix;
    AuxKind kind = AuxKind::root;
    double eta = 1.0;
};

AuxGenerator hermitian_root(const MatrixXc& h_a);

// diagonal arccos generator on the sector basis; (1/eta) cos(H_aux) = e^{-H_A dt}
AuxGenerator exact_onsite(double gamma, double dt, const SectorEncoding& enc,
                          OnsiteForm form = OnsiteForm::per_state);

// A0 + 2 sum A_b cos(R tau_b) for Hermitian R
MatrixXc realized_operator(const LcuSolution& sol, const MatrixXc& root);

}  // namespace nhsim
