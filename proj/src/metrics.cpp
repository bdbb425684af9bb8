#include "polydec/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace polydec {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

MatrixXd pick(const MatrixXd& M, const std::vector<int>& rows, const std::vector<int>& cols) {
    MatrixXd out(rows.size(), cols.size());
    for (size_t i = 0; i < rows.size(); ++i)
        for (size_t j = 0; j < cols.size(); ++j) out(i, j) = M(rows[i], cols[j]);
    return out;
}

// child-first order of real node ids
void postorder(const InputTree& tree, int node, std::vector<int>& out) {
    for (int c : tree.nodes[node].children) postorder(tree, c, out);
    if (node != 0) out.push_back(node);
}

}  // namespace

LinearModel linearize(const SystemModel& sys) {
    const double tol = 1e-6 * (1.0 + sys.x_goal.lpNorm<Eigen::Infinity>());
    if (!(sys.trim_residual() <= tol))
        throw std::runtime_error("goal is not an equilibrium of " + sys.name +
                                 ": trim residual " + std::to_string(sys.trim_residual()));
    LinearModel lin;
    lin.x_goal = sys.x_goal;
    lin.u_trim = sys.u_trim;
    if (sys.jacobians) {
        sys.jacobians(sys.x_goal, sys.u_trim, lin.A, lin.B);
    } else {
        auto fd = finite_difference_jacobians(
            [&sys](const VectorXd& x, const VectorXd& u) { return sys.f(x, u); }, sys.x_goal,
            sys.u_trim);
        lin.A = fd.first;
        lin.B = fd.second;
    }
    if (!lin.A.allFinite() || !lin.B.allFinite())
        throw std::runtime_error("linearization of " + sys.name + " is not finite");
    return lin;
}

GainAssembly decomposed_gains(const InputTree& tree, const LinearModel& lin, const MatrixXd& Q,
                              const MatrixXd& R, double lambda) {
    const int n = static_cast<int>(lin.A.rows());
    const int m = static_cast<int>(lin.B.cols());
    GainAssembly ga;
    ga.K = MatrixXd::Zero(m, n);
    std::vector<int> order;
    postorder(tree, 0, order);
    for (int node : order) {
        SubsystemSpec sub = subsystem_of(tree, node);
        const auto& xs = sub.states;
        const auto& us = sub.inputs;
        MatrixXd A_i = pick(lin.A, xs, xs);
        MatrixXd B_i = pick(lin.B, xs, us);
        MatrixXd Q_i = pick(Q, xs, xs);
        for (int uc : sub.cascaded) {
            // substitute the already-computed policy of the cascaded input:
            // u_c = -K_c x, nonzero only on columns inside this subsystem
            MatrixXd Kc(1, xs.size());
            for (size_t j = 0; j < xs.size(); ++j) Kc(0, j) = ga.K(uc, xs[j]);
            A_i -= pick(lin.B, xs, {uc}) * Kc;
            Q_i += Kc.transpose() * R(uc, uc) * Kc;
        }
        MatrixXd R_i = pick(R, us, us);
        try {
            LqrSolution sol = solve_discounted_lqr(A_i, B_i, Q_i, R_i, lambda);
            for (size_t r = 0; r < us.size(); ++r)
                for (size_t c = 0; c < xs.size(); ++c) ga.K(us[r], xs[c]) = sol.K(r, c);
        } catch (const LqrError&) {
            ga.stable = false;  // rows stay zero; the closed loop check will reject
        }
    }
    return ga;
}

MatrixXd box_second_moment(const std::vector<AxisSpec>& box, const VectorXd& x_goal) {
    const int n = static_cast<int>(box.size());
    VectorXd offset(n), var(n);
    for (int i = 0; i < n; ++i) {
        const double half = 0.5 * (box[i].hi - box[i].lo);
        const double center = 0.5 * (box[i].hi + box[i].lo);
        offset(i) = center - x_goal(i);
        var(i) = half * half / 3.0;
    }
    MatrixXd M = offset * offset.transpose();
    M.diagonal() += var;
    return M;
}

namespace {

double closed_loop_error(const GainAssembly& ga, const LinearModel& lin, const MatrixXd& Q,
                         const MatrixXd& R, double lambda, const MatrixXd& P_star,
                         const MatrixXd& moment) {
    if (!ga.stable) return kInf;
    const int n = static_cast<int>(lin.A.rows());
    MatrixXd A_shift =
        lin.A - lin.B * ga.K - 0.5 * lambda * MatrixXd::Identity(n, n);
    if (spectral_abscissa(A_shift) >= 0.0) return kInf;
    MatrixXd P_delta;
    try {
        P_delta = solve_lyapunov(A_shift, Q + ga.K.transpose() * R * ga.K);
    } catch (const LqrError&) {
        return kInf;
    }
    double err = ((P_delta - P_star) * moment).trace();
    return err < 0.0 ? 0.0 : err;
}

}  // namespace

double value_error_estimate(const InputTree& tree, const LinearModel& lin, const MatrixXd& Q,
                            const MatrixXd& R, double lambda, const std::vector<AxisSpec>& box) {
    LqrSolution joint = solve_discounted_lqr(lin.A, lin.B, Q, R, lambda);
    GainAssembly ga = decomposed_gains(tree, lin, Q, R, lambda);
    return closed_loop_error(ga, lin, Q, R, lambda, joint.P, box_second_moment(box, lin.x_goal));
}

double compute_cost_ratio(const InputTree& tree, const GridSpec& grid) {
    auto node_flops = [&grid](const std::vector<int>& states, const std::vector<int>& inputs) {
        double cells = 1.0;
        for (int s : states) {
            if (s >= static_cast<int>(grid.state_axes.size()))
                throw std::invalid_argument("grid has no axis for state " + std::to_string(s));
            cells *= grid.state_axes[s].points;
        }
        double actions = 1.0;
        for (int u : inputs) {
            if (u >= static_cast<int>(grid.input_axes.size()))
                throw std::invalid_argument("grid has no axis for input " + std::to_string(u));
            actions *= grid.input_axes[u].points;
        }
        const double weights = std::pow(2.0, static_cast<double>(states.size()));
        return grid.policy_rounds * cells *
               (grid.flops.eval_backup * grid.eval_sweeps + grid.flops.action_backup * actions) *
               weights;
    };
    double total = 0.0;
    std::vector<int> all_states, all_inputs;
    for (size_t id = 1; id < tree.nodes.size(); ++id) {
        SubsystemSpec sub = subsystem_of(tree, static_cast<int>(id));
        total += node_flops(sub.states, sub.inputs);
    }
    for (int i = 0; i < tree.n_states; ++i) all_states.push_back(i);
    for (int i = 0; i < tree.m_inputs; ++i) all_inputs.push_back(i);
    return total / node_flops(all_states, all_inputs);
}

int64_t parameter_count(const InputTree& tree, const GridSpec& grid) {
    int64_t total = 0;
    for (size_t id = 1; id < tree.nodes.size(); ++id) {
        SubsystemSpec sub = subsystem_of(tree, static_cast<int>(id));
        int64_t cells = 1;
        for (int s : sub.states) cells *= grid.state_axes[s].points;
        total += static_cast<int64_t>(sub.inputs.size()) * cells;
    }
    return total;
}

FitnessModel::FitnessModel(const SystemModel& sys)
    : sys_(sys),
      lin_(linearize(sys)),
      joint_(solve_discounted_lqr(lin_.A, lin_.B, sys.Q, sys.R, sys.lambda)),
      moment_(box_second_moment(sys.grid.state_axes, sys.x_goal)) {}

DecompositionMetrics FitnessModel::evaluate(const InputTree& tree) const {
    DecompositionMetrics dm;
    if (tree.is_undecomposed()) {
        dm.err = 0.0;
        dm.F_err = 0.0;
        dm.F_comp = 1.0;
        dm.F = 0.0;
        return dm;
    }
    GainAssembly ga = decomposed_gains(tree, lin_, sys_.Q, sys_.R, sys_.lambda);
    dm.err = closed_loop_error(ga, lin_, sys_.Q, sys_.R, sys_.lambda, joint_.P, moment_);
    dm.F_err = dm.err < kErrFloor ? 0.0 : -std::expm1(-dm.err);
    dm.F_comp = compute_cost_ratio(tree, sys_.grid);
    dm.F = dm.F_err * dm.F_comp;
    return dm;
}

}  // namespace polydec
