#include "polydec/linear.hpp"

#include <complex>

namespace polydec {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

double spectral_abscissa(const MatrixXd& M) {
    Eigen::EigenSolver<MatrixXd> es(M, false);
    return es.eigenvalues().real().maxCoeff();
}

bool is_hurwitz(const MatrixXd& M, double margin) {
    return spectral_abscissa(M) < -margin;
}

MatrixXd solve_lyapunov(const MatrixXd& A, const MatrixXd& C) {
    const long n = A.rows();
    Eigen::ComplexSchur<MatrixXcd> schur(A.cast<std::complex<double>>());
    if (schur.info() != Eigen::Success) throw LqrError("Schur decomposition failed");
    const MatrixXcd T = schur.matrixT();
    const MatrixXcd U = schur.matrixU();
    // the value integral this solve stands for diverges for non-Hurwitz A,
    // even when every eigenvalue pairing below happens to be nonsingular
    for (long k = 0; k < n; ++k)
        if (T(k, k).real() >= 0.0) throw LqrError("Lyapunov solve needs a Hurwitz matrix");
    const MatrixXcd D = U.adjoint() * C.cast<std::complex<double>>() * U;

    // T^H Y + Y T = -D, solved column by column; T^H + T_kk I is lower
    // triangular so each column is a forward substitution
    MatrixXcd Y = MatrixXcd::Zero(n, n);
    const double scale = T.norm() + 1.0;
    for (long k = 0; k < n; ++k) {
        VectorXcd rhs = -D.col(k);
        for (long i = 0; i < k; ++i) rhs -= T(i, k) * Y.col(i);
        const std::complex<double> shift = T(k, k);
        for (long row = 0; row < n; ++row) {
            std::complex<double> acc = rhs(row);
            for (long j = 0; j < row; ++j) acc -= std::conj(T(j, row)) * Y(j, k);
            const std::complex<double> diag = std::conj(T(row, row)) + shift;
            if (std::abs(diag) < 1e-12 * scale)
                throw LqrError("Lyapunov solve: eigenvalue pairing is singular (matrix not Hurwitz)");
            Y(row, k) = acc / diag;
        }
    }
    MatrixXd X = (U * Y * U.adjoint()).real();
    return 0.5 * (X + X.transpose());
}

double care_residual(const MatrixXd& A_shift, const MatrixXd& B, const MatrixXd& Q,
                     const MatrixXd& R, const MatrixXd& P) {
    const MatrixXd G = B * R.llt().solve(B.transpose());
    return (A_shift.transpose() * P + P * A_shift - P * G * P + Q).norm();
}

LqrSolution solve_discounted_lqr(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q,
                                 const MatrixXd& R, double lambda) {
    if (lambda < 0) throw std::invalid_argument("discount must be nonnegative");
    const long n = A.rows();
    const long m = B.cols();
    if (B.rows() != n || Q.rows() != n || Q.cols() != n || R.rows() != m || R.cols() != m)
        throw std::invalid_argument("solve_discounted_lqr: dimension mismatch");

    Eigen::LLT<MatrixXd> rllt(R);
    if (rllt.info() != Eigen::Success) throw LqrError("input cost matrix is not positive definite");

    const MatrixXd As = A - 0.5 * lambda * MatrixXd::Identity(n, n);
    const MatrixXd G = B * rllt.solve(B.transpose());
    const MatrixXd Qs = 0.5 * (Q + Q.transpose());

    MatrixXd Ham(2 * n, 2 * n);
    Ham << As, -G, -Qs, -As.transpose();

    Eigen::ComplexEigenSolver<MatrixXcd> es(Ham.cast<std::complex<double>>());
    if (es.info() != Eigen::Success) throw LqrError("Hamiltonian eigendecomposition failed");

    const double axis_tol = 1e-9 * (1.0 + Ham.norm());
    MatrixXcd basis(2 * n, n);
    long found = 0;
    for (long i = 0; i < 2 * n; ++i) {
        const double re = es.eigenvalues()(i).real();
        if (std::abs(re) < axis_tol)
            throw LqrError("Hamiltonian spectrum touches the imaginary axis (no stabilizing solution)");
        if (re < 0) {
            if (found == n) throw LqrError("stable subspace dimension exceeds state count");
            basis.col(found++) = es.eigenvectors().col(i);
        }
    }
    if (found != n) throw LqrError("stable subspace dimension mismatch (unstabilizable pair)");

    const MatrixXcd V1 = basis.topRows(n);
    const MatrixXcd V2 = basis.bottomRows(n);
    Eigen::FullPivLU<MatrixXcd> lu(V1);
    lu.setThreshold(1e-12);
    if (lu.rank() < n) throw LqrError("stable subspace is not a graph over the state space");
    MatrixXd P = (V2 * lu.inverse()).real();
    P = 0.5 * (P + P.transpose());

    // Newton polish: each step re-solves the closed-loop Lyapunov equation
    double best_res = care_residual(As, B, Qs, R, P);
    MatrixXd best_P = P;
    for (int it = 0; it < 8; ++it) {
        const MatrixXd K = rllt.solve(B.transpose() * P);
        const MatrixXd Acl = As - B * K;
        if (!is_hurwitz(Acl)) break;
        MatrixXd Pn;
        try {
            Pn = solve_lyapunov(Acl, Qs + K.transpose() * R * K);
        } catch (const LqrError&) {
            break;
        }
        const double res = care_residual(As, B, Qs, R, Pn);
        P = Pn;
        if (res < best_res) {
            best_res = res;
            best_P = Pn;
        }
        if (res < 1e-13 * (1.0 + Pn.norm())) break;
    }
    P = best_P;

    const double res_tol = 1e-8 * (1.0 + P.norm());
    if (best_res > res_tol) throw LqrError("Riccati residual above tolerance");
    Eigen::SelfAdjointEigenSolver<MatrixXd> pe(P);
    if (pe.eigenvalues().minCoeff() < -1e-8 * (1.0 + P.norm()))
        throw LqrError("Riccati solution is not positive semidefinite");

    LqrSolution sol;
    sol.P = P;
    sol.K = rllt.solve(B.transpose() * P);
    sol.residual = best_res;
    if (!is_hurwitz(As - B * sol.K)) throw LqrError("computed gain does not stabilize the shifted system");
    return sol;
}

std::pair<MatrixXd, MatrixXd> finite_difference_jacobians(
    const std::function<VectorXd(const VectorXd&, const VectorXd&)>& f, const VectorXd& x,
    const VectorXd& u) {
    const long n = x.size();
    const long m = u.size();
    const VectorXd f0 = f(x, u);
    const long nf = f0.size();
    MatrixXd A(nf, n), B(nf, m);
    for (long i = 0; i < n; ++i) {
        const double h = 1e-6 * std::max(1.0, std::abs(x(i)));
        VectorXd xp = x, xm = x;
        xp(i) += h;
        xm(i) -= h;
        A.col(i) = (f(xp, u) - f(xm, u)) / (2 * h);
    }
    for (long j = 0; j < m; ++j) {
        const double h = 1e-6 * std::max(1.0, std::abs(u(j)));
        VectorXd up = u, um = u;
        up(j) += h;
        um(j) -= h;
        B.col(j) = (f(x, up) - f(x, um)) / (2 * h);
    }
    return {A, B};
}

}  // namespace polydec
