#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "polydec/grid.hpp"
#include "polydec/input_tree.hpp"
#include "polydec/systems.hpp"

namespace polydec {

// One sub-policy: control values over the subsystem lattice, plus the value
// table the solve converged to. Controls are read back with clamped
// multilinear interpolation, so queries slightly outside the box stay sane.
struct TabularPolicy {
    SubsystemSpec spec;
    Lattice lattice;                  // over spec.states, in listed order
    std::vector<double> control;      // cells x |spec.inputs|, row-major per cell
    std::vector<double> value;        // cells

    int64_t parameters() const {
        return lattice.cells() * static_cast<int64_t>(spec.inputs.size());
    }
    // writes this policy's inputs into u, reading its states out of the full x
    void eval(const Eigen::VectorXd& x, Eigen::VectorXd& u) const;
    double value_at(const Eigen::VectorXd& x) const;
};

struct SolveStats {
    int node = -1;
    int rounds = 0;
    double policy_change = 0.0;        // last improvement sweep, max |u' - u|
    double seconds = 0.0;
    int64_t parameters = 0;
    bool converged = false;            // policy change fell under tolerance
    std::vector<double> value_deltas;  // per round, max |V' - V| over the round
};

struct PolicyAssembly {
    InputTree tree;
    std::vector<TabularPolicy> policies;  // child-first solve order
    std::vector<SolveStats> stats;        // aligned with policies
    int64_t total_parameters = 0;
    double total_seconds = 0.0;

    // full controller: every input is owned by exactly one sub-policy
    Eigen::VectorXd control(const Eigen::VectorXd& x) const;
    const TabularPolicy* policy_for_node(int node_id) const;
};

// Policy iteration on one subsystem. Complement states are frozen at the
// goal, decoupled inputs at trim (or zero, per grid.decoupled_at_trim),
// cascaded inputs come from the already-solved policies in `lower`.
TabularPolicy solve_policy(const SystemModel& sys, const InputTree& tree, int node,
                           const GridSpec& grid, const std::vector<const TabularPolicy*>& lower,
                           int workers = 1, SolveStats* stats = nullptr);

// Solves every real node child-first and assembles the full controller.
PolicyAssembly solve_decomposition(const SystemModel& sys, const InputTree& tree,
                                   const GridSpec& grid, int workers = 1);

using Controller = std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& u)>;

Controller assembly_controller(const PolicyAssembly& assembly);
Controller gain_controller(Eigen::MatrixXd K, Eigen::VectorXd x_goal, Eigen::VectorXd u_trim);

struct SimConfig {
    double duration = 10.0;
    double dt = -1.0;            // < 0: use the model's sim_dt
    double conv_tol = 0.05;      // final box-weighted deviation to count as converged
    double blowup_factor = 10.0; // deviation beyond this many box half-diagonals diverges
    int sample_stride = 1;       // record every k-th step
};

struct SimResult {
    std::vector<double> times;
    std::vector<Eigen::VectorXd> states;
    std::vector<Eigen::VectorXd> inputs;
    bool converged = false;
    bool diverged = false;
    double diverged_at = -1.0;
    std::string guard_reason;     // nonempty when a model guard stopped the run
    double final_deviation = 0.0; // box-weighted infinity norm at the last sample
    int64_t steps = 0;
};

// Fixed-step RK4 with the control held over each step and saturated to the
// input limits.
SimResult simulate(const SystemModel& sys, const Controller& controller,
                   const Eigen::VectorXd& x0, const SimConfig& cfg);

struct BasinSpec {
    std::vector<int> dims;       // varied state indices
    std::vector<AxisSpec> axes;  // one per dim; empty = state box at its grid counts
    Eigen::VectorXd base;        // start point for fixed coordinates; empty = goal
    SimConfig sim;
};

struct BasinField {
    std::vector<int> dims;
    std::vector<AxisSpec> axes;
    std::vector<uint8_t> converged;  // row-major, last dim fastest
    std::vector<double> final_dev;
    int64_t converged_count = 0;
};

BasinField basin_sweep(const SystemModel& sys, const Controller& controller,
                       const BasinSpec& spec, int workers = 1);

}  // namespace polydec
