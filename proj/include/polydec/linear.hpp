#pragma once

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>

namespace polydec {

struct LqrError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// largest real part over the eigenvalues of M
double spectral_abscissa(const Eigen::MatrixXd& M);

bool is_hurwitz(const Eigen::MatrixXd& M, double margin = 0.0);

// Solves A'X + XA + C = 0 for symmetric C and Hurwitz A (Schur form plus
// column back-substitution). Throws LqrError when A is not Hurwitz.
Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& A, const Eigen::MatrixXd& C);

struct LqrSolution {
    Eigen::MatrixXd P;  // quadratic value coefficient
    Eigen::MatrixXd K;  // u = -K x
    double residual = 0.0;
};

// Infinite-horizon LQR with exponential cost discount lambda: the Riccati
// equation is solved for the shifted matrix A - (lambda/2) I via the stable
// invariant subspace of the Hamiltonian matrix, then polished by a few
// Newton steps (each one a Lyapunov solve). Throws LqrError when no
// stabilizing solution exists (undetectable/unstabilizable shifted pair) or
// the residual check fails.
LqrSolution solve_discounted_lqr(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                 const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                                 double lambda);

double care_residual(const Eigen::MatrixXd& A_shift, const Eigen::MatrixXd& B,
                     const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                     const Eigen::MatrixXd& P);

// Central-difference Jacobians of xdot = f(x, u) around (x, u).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> finite_difference_jacobians(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, const Eigen::VectorXd& u);

}  // namespace polydec
