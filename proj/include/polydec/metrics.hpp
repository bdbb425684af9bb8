#pragma once

#include <Eigen/Dense>
#include <vector>

#include "polydec/input_tree.hpp"
#include "polydec/linear.hpp"
#include "polydec/systems.hpp"

namespace polydec {

struct LinearModel {
    Eigen::MatrixXd A, B;
    Eigen::VectorXd x_goal, u_trim;  // deviation coordinates are taken about these
};

// Linearizes about the goal; throws std::runtime_error when the goal is not an
// equilibrium (trim residual above 1e-6). Uses analytic jacobians when available.
LinearModel linearize(const SystemModel& sys);

struct GainAssembly {
    Eigen::MatrixXd K;   // m x n; the row block of u_i is zero outside the columns of x_i
    bool stable = true;  // false if any subsystem was non-stabilizable
};

// Child-first gain computation: cascaded descendants are substituted into the
// subsystem dynamics and their control effort folded into the state cost;
// decoupled complement inputs are zero in deviation coordinates.
GainAssembly decomposed_gains(const InputTree& tree, const LinearModel& lin,
                              const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R, double lambda);

// E[(x - x_goal)(x - x_goal)^T] for x uniform over the box
Eigen::MatrixXd box_second_moment(const std::vector<AxisSpec>& box,
                                  const Eigen::VectorXd& x_goal);

double value_error_estimate(const InputTree& tree, const LinearModel& lin,
                            const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R, double lambda,
                            const std::vector<AxisSpec>& box);

double compute_cost_ratio(const InputTree& tree, const GridSpec& grid);

int64_t parameter_count(const InputTree& tree, const GridSpec& grid);

struct DecompositionMetrics {
    double err = 0.0;  // value-error estimate, may be +infinity
    double F_err = 0.0;
    double F_comp = 1.0;
    double F = 0.0;
};

// Shared immutable context for scoring many trees against one system: caches
// the linearization, the joint LQR solution, and the box moments.
class FitnessModel {
public:
    explicit FitnessModel(const SystemModel& sys);

    DecompositionMetrics evaluate(const InputTree& tree) const;

    const SystemModel& system() const { return sys_; }
    const LinearModel& linear() const { return lin_; }
    const LqrSolution& joint() const { return joint_; }

    // errs below this count as exact so that equivalent-to-optimal trees tie at F = 0
    static constexpr double kErrFloor = 1e-9;

private:
    SystemModel sys_;
    LinearModel lin_;
    LqrSolution joint_;
    Eigen::MatrixXd moment_;
};

}  // namespace polydec
