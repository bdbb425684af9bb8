#include "polydec/dp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

#include "polydec/util.hpp"

namespace polydec {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Clock = std::chrono::steady_clock;

MatrixXd slice(const MatrixXd& M, const std::vector<int>& rows, const std::vector<int>& cols) {
    MatrixXd out(rows.size(), cols.size());
    for (size_t i = 0; i < rows.size(); ++i)
        for (size_t j = 0; j < cols.size(); ++j) out(i, j) = M(rows[i], cols[j]);
    return out;
}

// joint action lattice over the node's own inputs, row-major last input fastest
struct ActionSet {
    int arity = 0;                 // inputs per action
    int64_t count = 1;             // total joint actions
    std::vector<double> values;    // count x arity

    ActionSet(const GridSpec& grid, const std::vector<int>& inputs) {
        arity = static_cast<int>(inputs.size());
        std::vector<const AxisSpec*> axes;
        for (int u : inputs) {
            const AxisSpec& ax = grid.input_axes[static_cast<size_t>(u)];
            if (ax.points < 2) throw std::invalid_argument("input axis needs at least 2 samples");
            axes.push_back(&ax);
            count *= ax.points;
        }
        values.resize(static_cast<size_t>(count) * arity);
        for (int64_t a = 0; a < count; ++a) {
            int64_t rest = a;
            for (int d = arity; d-- > 0;) {
                int i = static_cast<int>(rest % axes[static_cast<size_t>(d)]->points);
                rest /= axes[static_cast<size_t>(d)]->points;
                values[static_cast<size_t>(a * arity + d)] = axes[static_cast<size_t>(d)]->value(i);
            }
        }
    }
};

int subtree_height(const InputTree& t, int id) {
    int h = 0;
    for (int c : t.nodes[static_cast<size_t>(id)].children)
        h = std::max(h, 1 + subtree_height(t, c));
    return h;
}

}  // namespace

void TabularPolicy::eval(const VectorXd& x, VectorXd& u) const {
    VectorXd xs(spec.states.size());
    for (size_t d = 0; d < spec.states.size(); ++d) xs(static_cast<long>(d)) = x(spec.states[d]);
    const int ki = static_cast<int>(spec.inputs.size());
    for (int j = 0; j < ki; ++j)
        u(spec.inputs[static_cast<size_t>(j)]) = lattice.interpolate(control, ki, j, xs);
}

double TabularPolicy::value_at(const VectorXd& x) const {
    VectorXd xs(spec.states.size());
    for (size_t d = 0; d < spec.states.size(); ++d) xs(static_cast<long>(d)) = x(spec.states[d]);
    return lattice.interpolate(value, 1, 0, xs);
}

VectorXd PolicyAssembly::control(const VectorXd& x) const {
    VectorXd u = VectorXd::Zero(tree.m_inputs);
    for (const TabularPolicy& p : policies) p.eval(x, u);
    return u;
}

const TabularPolicy* PolicyAssembly::policy_for_node(int node_id) const {
    for (const TabularPolicy& p : policies)
        if (p.spec.node_id == node_id) return &p;
    return nullptr;
}

TabularPolicy solve_policy(const SystemModel& sys, const InputTree& tree, int node,
                           const GridSpec& grid, const std::vector<const TabularPolicy*>& lower,
                           int workers, SolveStats* stats) {
    if (grid.state_axes.size() != static_cast<size_t>(sys.n) ||
        grid.input_axes.size() != static_cast<size_t>(sys.m))
        throw std::invalid_argument("grid axes do not match the model dimensions");
    if (!(grid.dt > 0.0)) throw std::invalid_argument("grid time step must be positive");

    TabularPolicy pol;
    pol.spec = subsystem_of(tree, node);
    const std::vector<int>& gs = pol.spec.states;
    const std::vector<int>& gu = pol.spec.inputs;
    const int ks = static_cast<int>(gs.size());
    const int ki = static_cast<int>(gu.size());

    std::vector<AxisSpec> axes;
    for (int s : gs) {
        const AxisSpec& ax = grid.state_axes[static_cast<size_t>(s)];
        if (ax.points < 2) throw std::invalid_argument("state axis needs at least 2 points");
        if (!(sys.x_goal(s) >= ax.lo && sys.x_goal(s) <= ax.hi))
            throw std::invalid_argument("goal lies outside the grid box");
        axes.push_back(ax);
    }
    pol.lattice = Lattice(axes);
    const int64_t cells = pol.lattice.cells();
    const ActionSet actions(grid, gu);

    // cascaded inputs must each be owned by one already-solved policy
    for (int u : pol.spec.cascaded) {
        bool covered = false;
        for (const TabularPolicy* lp : lower)
            for (int lu : lp->spec.inputs) covered = covered || lu == u;
        if (!covered) throw std::invalid_argument("cascaded input has no solved sub-policy");
    }

    const double lambda = grid.lambda_override >= 0.0 ? grid.lambda_override : sys.lambda;
    const double h = grid.dt;
    const double beta = std::exp(-lambda * h);
    // discounted trapezoid weights for the running cost: w0*c(start) + w1*c(landing)
    // integrates int_0^h exp(-lambda*tau) c(tau) dtau exactly for c linear in tau.
    // The rectangle rule c*h is biased by O(lambda*h) + O(h) and misses the
    // refinement tolerances on fine grids.
    const double gamma_c = lambda > 0.0 ? (1.0 - beta) / lambda : h;
    const double lam_h = lambda * h;
    double tau1 = 0.5 * h * h;  // int_0^h tau exp(-lambda tau) dtau
    if (lambda > 0.0)
        tau1 = lam_h < 1e-4 ? h * h * (0.5 - lam_h / 3.0)
                            : (1.0 - beta * (1.0 + lam_h)) / (lambda * lambda);
    const double w1 = tau1 / h;
    const double w0 = gamma_c - w1;

    // cost terms: subsystem state slice, own+cascaded input slice
    std::vector<int> oc = gu;
    oc.insert(oc.end(), pol.spec.cascaded.begin(), pol.spec.cascaded.end());
    std::sort(oc.begin(), oc.end());
    const MatrixXd Qs = slice(sys.Q, gs, gs);
    const MatrixXd Roc = slice(sys.R, oc, oc);
    VectorXd goal_s(ks), trim_oc(oc.size());
    for (int d = 0; d < ks; ++d) goal_s(d) = sys.x_goal(gs[static_cast<size_t>(d)]);
    for (size_t j = 0; j < oc.size(); ++j) trim_oc(static_cast<long>(j)) = sys.u_trim(oc[j]);

    // frozen complement template: states at goal, inputs at trim or zero
    VectorXd x_base = sys.x_goal;
    VectorXd u_base = sys.u_trim;
    if (!grid.decoupled_at_trim)
        for (int u : pol.spec.decoupled) u_base(u) = 0.0;

    std::vector<double> v_old(static_cast<size_t>(cells), 0.0);
    std::vector<double> v_new(static_cast<size_t>(cells), 0.0);
    std::vector<int64_t> act(static_cast<size_t>(cells), 0);
    pol.control.assign(static_cast<size_t>(cells) * std::max(ki, 1), 0.0);
    std::vector<double> ctrl_new = pol.control;

    const Clock::time_point t0 = Clock::now();

    // per-cell scratch for the backup: stage states, slopes, landing, cost terms
    struct Scratch {
        VectorXd xs, x_full, u_full, dxf, x_st, u_land, k1, k2, k3, k4, xn, dxs, du0, du1;
        Scratch(int n, int ks, long noc)
            : xs(ks), x_full(n), u_full(n), dxf(n), x_st(n), u_land(n), k1(ks), k2(ks), k3(ks),
              k4(ks), xn(ks), dxs(ks), du0(noc), du1(noc) {}
    };
    const bool has_cascade = oc.size() > static_cast<size_t>(ki);

    // one backup for a fixed joint action, reading values from v.
    // Landing by an RK4 step over the subsystem dims with the complement pinned
    // and all inputs held: Euler's O(h^2) per-step drift is amplified by
    // 1/(1-beta) in the fixed point and dominates the error on refined grids.
    auto backup = [&](const std::vector<double>& v, int64_t a, Scratch& sc) {
        for (int j = 0; j < ki; ++j)
            sc.u_full(gu[static_cast<size_t>(j)]) =
                actions.values[static_cast<size_t>(a * ki + j)];
        auto slope = [&](const VectorXd& z, VectorXd& k) {
            sc.x_st = sc.x_full;
            for (int d = 0; d < ks; ++d) sc.x_st(gs[static_cast<size_t>(d)]) = z(d);
            sys.rate(sc.x_st, sc.u_full, sc.dxf);
            for (int d = 0; d < ks; ++d) k(d) = sc.dxf(gs[static_cast<size_t>(d)]);
        };
        slope(sc.xs, sc.k1);
        sc.xn = sc.xs + (0.5 * h) * sc.k1;
        slope(sc.xn, sc.k2);
        sc.xn = sc.xs + (0.5 * h) * sc.k2;
        slope(sc.xn, sc.k3);
        sc.xn = sc.xs + h * sc.k3;
        slope(sc.xn, sc.k4);
        sc.xn = sc.xs + (h / 6.0) * (sc.k1 + 2.0 * sc.k2 + 2.0 * sc.k3 + sc.k4);
        for (int d = 0; d < ks; ++d)
            if (!std::isfinite(sc.xn(d)))
                throw std::runtime_error("non-finite dynamics at a grid point (" + sys.name + ")");

        for (size_t j = 0; j < oc.size(); ++j) sc.du0(static_cast<long>(j)) = sc.u_full(oc[j]);
        sc.du0 -= trim_oc;
        sc.dxs = sc.xs - goal_s;
        const double cu0 = sc.du0.dot(Roc * sc.du0);
        const double c0 = sc.dxs.dot(Qs * sc.dxs) + cu0;
        double cu1 = cu0;
        if (has_cascade) {
            // cascaded gains re-read at the landing point for the endpoint cost
            sc.x_st = sc.x_full;
            for (int d = 0; d < ks; ++d) sc.x_st(gs[static_cast<size_t>(d)]) = sc.xn(d);
            sc.u_land = sc.u_full;
            for (const TabularPolicy* lp : lower) lp->eval(sc.x_st, sc.u_land);
            for (size_t j = 0; j < oc.size(); ++j)
                sc.du1(static_cast<long>(j)) = sc.u_land(oc[j]);
            sc.du1 -= trim_oc;
            cu1 = sc.du1.dot(Roc * sc.du1);
        }
        sc.dxs = sc.xn - goal_s;
        const double c1 = sc.dxs.dot(Qs * sc.dxs) + cu1;
        return w0 * c0 + w1 * c1 + beta * pol.lattice.interpolate(v, 1, 0, sc.xn);
    };

    int round = 0;
    bool converged = false;
    double policy_change = 0.0;
    std::vector<double> deltas;
    for (round = 1; round <= grid.policy_rounds; ++round) {
        std::vector<double> v_round_start = v_old;

        // improvement sweep: argmin over the action lattice, first index wins
        parallel_for(cells, workers, [&](int64_t cell) {
            Scratch sc(sys.n, ks, static_cast<long>(oc.size()));
            sc.x_full = x_base;
            sc.u_full = u_base;
            pol.lattice.cell_coords(cell, sc.xs);
            for (int d = 0; d < ks; ++d) sc.x_full(gs[static_cast<size_t>(d)]) = sc.xs(d);
            for (const TabularPolicy* lp : lower) lp->eval(sc.x_full, sc.u_full);
            double best = std::numeric_limits<double>::infinity();
            int64_t best_a = 0;
            for (int64_t a = 0; a < actions.count; ++a) {
                const double q = backup(v_old, a, sc);
                if (q < best) {
                    best = q;
                    best_a = a;
                }
            }
            if (!std::isfinite(best))
                throw std::runtime_error("non-finite backup at a grid point (" + sys.name + ")");
            v_new[static_cast<size_t>(cell)] = best;
            act[static_cast<size_t>(cell)] = best_a;
            for (int j = 0; j < ki; ++j)
                ctrl_new[static_cast<size_t>(cell * ki + j)] =
                    actions.values[static_cast<size_t>(best_a * ki + j)];
        });
        v_old.swap(v_new);
        policy_change = 0.0;
        for (size_t i = 0; i < pol.control.size(); ++i)
            policy_change = std::max(policy_change, std::fabs(ctrl_new[i] - pol.control[i]));
        pol.control.swap(ctrl_new);

        // evaluation sweeps for the fixed policy; round 1's change is
        // measured against the zero placeholder table, so it never stops
        const bool stable = round > 1 && policy_change < grid.policy_tol;
        const int sweeps = stable ? 0 : grid.eval_sweeps;
        for (int sweep = 0; sweep < sweeps; ++sweep) {
            parallel_for(cells, workers, [&](int64_t cell) {
                Scratch sc(sys.n, ks, static_cast<long>(oc.size()));
                sc.x_full = x_base;
                sc.u_full = u_base;
                pol.lattice.cell_coords(cell, sc.xs);
                for (int d = 0; d < ks; ++d) sc.x_full(gs[static_cast<size_t>(d)]) = sc.xs(d);
                for (const TabularPolicy* lp : lower) lp->eval(sc.x_full, sc.u_full);
                v_new[static_cast<size_t>(cell)] =
                    backup(v_old, act[static_cast<size_t>(cell)], sc);
            });
            v_old.swap(v_new);
        }

        double dv = 0.0;
        for (int64_t i = 0; i < cells; ++i)
            dv = std::max(dv, std::fabs(v_old[static_cast<size_t>(i)] -
                                        v_round_start[static_cast<size_t>(i)]));
        deltas.push_back(dv);
        if (stable) {
            converged = true;
            break;
        }
    }

    pol.value = std::move(v_old);
    if (stats) {
        stats->node = node;
        stats->rounds = std::min(round, grid.policy_rounds);
        stats->policy_change = policy_change;
        stats->seconds = std::chrono::duration<double>(Clock::now() - t0).count();
        stats->parameters = pol.parameters();
        stats->converged = converged;
        stats->value_deltas = std::move(deltas);
    }
    return pol;
}

PolicyAssembly solve_decomposition(const SystemModel& sys, const InputTree& tree,
                                   const GridSpec& grid, int workers) {
    const ValidationReport check = validate(tree);
    if (!check.ok)
        throw std::invalid_argument("invalid tree: " +
                                    (check.issues.empty() ? "unspecified" : check.issues.front()));

    PolicyAssembly out;
    out.tree = tree;

    // height order: leaves first, parents once every descendant is solved
    std::vector<int> order;
    for (size_t id = 1; id < tree.nodes.size(); ++id) order.push_back(static_cast<int>(id));
    std::vector<int> height(tree.nodes.size(), 0);
    for (int id : order) height[static_cast<size_t>(id)] = subtree_height(tree, id);
    std::stable_sort(order.begin(), order.end(),
                     [&height](int a, int b) { return height[static_cast<size_t>(a)] <
                                                      height[static_cast<size_t>(b)]; });

    for (int id : order) {
        // the already-solved policies of this node's strict descendants
        std::vector<const TabularPolicy*> lower;
        const SubsystemSpec spec = subsystem_of(tree, id);
        for (const TabularPolicy& p : out.policies)
            for (int u : spec.cascaded)
                if (std::find(p.spec.inputs.begin(), p.spec.inputs.end(), u) !=
                    p.spec.inputs.end()) {
                    lower.push_back(&p);
                    break;
                }
        SolveStats st;
        out.policies.push_back(solve_policy(sys, tree, id, grid, lower, workers, &st));
        out.stats.push_back(st);
        out.total_parameters += st.parameters;
        out.total_seconds += st.seconds;
    }
    return out;
}

Controller assembly_controller(const PolicyAssembly& assembly) {
    return [&assembly](const VectorXd& x, VectorXd& u) {
        for (const TabularPolicy& p : assembly.policies) p.eval(x, u);
    };
}

Controller gain_controller(MatrixXd K, VectorXd x_goal, VectorXd u_trim) {
    return [K = std::move(K), x_goal = std::move(x_goal),
            u_trim = std::move(u_trim)](const VectorXd& x, VectorXd& u) {
        u = u_trim - K * (x - x_goal);
    };
}

SimResult simulate(const SystemModel& sys, const Controller& controller, const VectorXd& x0,
                   const SimConfig& cfg) {
    if (x0.size() != sys.n || !x0.allFinite())
        throw std::invalid_argument("initial state must be finite with the model's dimension");
    const double dt = cfg.dt > 0.0 ? cfg.dt : sys.sim_dt;
    const int64_t steps = std::max<int64_t>(1, static_cast<int64_t>(std::ceil(cfg.duration / dt)));
    const int stride = std::max(1, cfg.sample_stride);

    VectorXd weights(sys.n);
    for (int i = 0; i < sys.n; ++i) {
        const AxisSpec& ax = sys.grid.state_axes[static_cast<size_t>(i)];
        weights(i) = std::max(0.5 * (ax.hi - ax.lo), 1e-12);
    }
    auto deviation = [&](const VectorXd& x) {
        double d = 0.0;
        for (int i = 0; i < sys.n; ++i) d = std::max(d, std::fabs(x(i) - sys.x_goal(i)) / weights(i));
        return d;
    };

    SimResult res;
    VectorXd x = x0, u = VectorXd::Zero(sys.m);
    VectorXd k1(sys.n), k2(sys.n), k3(sys.n), k4(sys.n), xt(sys.n);
    auto record = [&](double t) {
        res.times.push_back(t);
        res.states.push_back(x);
        res.inputs.push_back(u);
    };

    for (int64_t k = 0; k < steps; ++k) {
        const double t = k * dt;
        if (sys.guard) {
            const char* reason = sys.guard(x);
            if (reason) {
                res.guard_reason = reason;
                controller(x, u);
                u = sys.saturate(u);
                record(t);
                break;
            }
        }
        controller(x, u);
        u = sys.saturate(u);
        if (k % stride == 0) record(t);

        sys.rate(x, u, k1);
        xt = x + (0.5 * dt) * k1;
        sys.rate(xt, u, k2);
        xt = x + (0.5 * dt) * k2;
        sys.rate(xt, u, k3);
        xt = x + dt * k3;
        sys.rate(xt, u, k4);
        x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        ++res.steps;

        if (!x.allFinite() || deviation(x) > cfg.blowup_factor) {
            res.diverged = true;
            res.diverged_at = t + dt;
            if (!x.allFinite()) x = res.states.empty() ? x0 : res.states.back();
            record(t + dt);
            break;
        }
        if (k + 1 == steps) {
            controller(x, u);
            u = sys.saturate(u);
            record(t + dt);
        }
    }

    res.final_deviation = deviation(res.states.empty() ? x : res.states.back());
    res.converged =
        !res.diverged && res.guard_reason.empty() && res.final_deviation < cfg.conv_tol;
    return res;
}

BasinField basin_sweep(const SystemModel& sys, const Controller& controller,
                       const BasinSpec& spec, int workers) {
    if (spec.dims.empty()) throw std::invalid_argument("basin sweep needs at least one axis");
    BasinField field;
    field.dims = spec.dims;
    field.axes = spec.axes;
    if (field.axes.empty())
        for (int d : spec.dims) field.axes.push_back(sys.grid.state_axes[static_cast<size_t>(d)]);
    if (field.axes.size() != field.dims.size())
        throw std::invalid_argument("basin axes do not match the varied dimensions");

    const Lattice lat(field.axes);
    const VectorXd base = spec.base.size() ? spec.base : sys.x_goal;
    if (base.size() != sys.n) throw std::invalid_argument("basin base state has wrong dimension");

    field.converged.assign(static_cast<size_t>(lat.cells()), 0);
    field.final_dev.assign(static_cast<size_t>(lat.cells()), 0.0);
    parallel_for(lat.cells(), workers, [&](int64_t cell) {
        VectorXd coords(field.dims.size());
        lat.cell_coords(cell, coords);
        VectorXd x0 = base;
        for (size_t d = 0; d < field.dims.size(); ++d)
            x0(field.dims[d]) = coords(static_cast<long>(d));
        SimResult res = simulate(sys, controller, x0, spec.sim);
        field.converged[static_cast<size_t>(cell)] = res.converged ? 1 : 0;
        field.final_dev[static_cast<size_t>(cell)] = res.final_deviation;
    });
    for (uint8_t c : field.converged) field.converged_count += c;
    return field;
}

}  // namespace polydec
