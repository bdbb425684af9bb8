#include "polydec/systems.hpp"

#include <cmath>
#include <stdexcept>

namespace polydec {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kGravity = 9.81;

double clamp1(double v) { return v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v); }

std::vector<AxisSpec> axes_from(std::initializer_list<AxisSpec> list) { return {list}; }

void finish(SystemModel& sys, const KV& kv) {
    sys.lambda = kv_num(kv, "lambda", sys.lambda);
    sys.grid.dt = kv_num(kv, "dt", sys.grid.dt);
    sys.grid.policy_rounds = kv_int(kv, "rounds", sys.grid.policy_rounds);
    sys.grid.eval_sweeps = kv_int(kv, "sweeps", sys.grid.eval_sweeps);
    sys.grid.policy_tol = kv_num(kv, "tol", sys.grid.policy_tol);
    sys.grid.decoupled_at_trim = kv_int(kv, "decoupled_zero", 0) == 0;
    int pts = kv_int(kv, "points", 0);
    if (pts > 0)
        for (auto& ax : sys.grid.state_axes) ax.points = pts;
    int acts = kv_int(kv, "actions", 0);
    if (acts > 0)
        for (auto& ax : sys.grid.input_axes) ax.points = acts;
    if (sys.state_names.empty())
        for (int i = 0; i < sys.n; ++i) sys.state_names.push_back("x" + std::to_string(i + 1));
    if (sys.input_names.empty())
        for (int i = 0; i < sys.m; ++i) sys.input_names.push_back("u" + std::to_string(i + 1));
    for (int i = 0; i < sys.m; ++i) {
        AxisSpec ax{sys.u_min(i), sys.u_max(i), sys.grid.input_axes.empty()
                                                    ? 9
                                                    : sys.grid.input_axes[0].points};
        if (static_cast<int>(sys.grid.input_axes.size()) <= i) sys.grid.input_axes.push_back(ax);
        sys.grid.input_axes[i].lo = sys.u_min(i);
        sys.grid.input_axes[i].hi = sys.u_max(i);
    }
}

// Q_ii = 1/halfwidth^2 from the state box, R_ii = 0.1/halfrange^2 from limits
void default_costs(SystemModel& sys) {
    sys.Q = MatrixXd::Zero(sys.n, sys.n);
    for (int i = 0; i < sys.n; ++i) {
        double w = 0.5 * (sys.grid.state_axes[i].hi - sys.grid.state_axes[i].lo);
        sys.Q(i, i) = 1.0 / (w * w);
    }
    sys.R = MatrixXd::Zero(sys.m, sys.m);
    for (int i = 0; i < sys.m; ++i) {
        double w = 0.5 * (sys.u_max(i) - sys.u_min(i));
        sys.R(i, i) = 0.1 / (w * w);
    }
}

void linear_system(SystemModel& sys, const MatrixXd& A, const MatrixXd& B) {
    sys.rate = [A, B](const VectorXd& x, const VectorXd& u, VectorXd& dx) { dx = A * x + B * u; };
    sys.jacobians = [A, B](const VectorXd&, const VectorXd&, MatrixXd& Ja, MatrixXd& Jb) {
        Ja = A;
        Jb = B;
    };
}

SystemModel make_scalar1d(const KV& kv) {
    SystemModel sys;
    sys.name = "scalar1d";
    sys.n = 1;
    sys.m = 1;
    sys.x_goal = VectorXd::Zero(1);
    sys.u_trim = VectorXd::Zero(1);
    sys.u_min = VectorXd::Constant(1, -1.0);
    sys.u_max = VectorXd::Constant(1, 1.0);
    linear_system(sys, MatrixXd::Zero(1, 1), MatrixXd::Ones(1, 1));
    sys.Q = MatrixXd::Ones(1, 1);
    sys.R = MatrixXd::Ones(1, 1);
    sys.lambda = 3.0;
    sys.grid.state_axes = axes_from({{-1.0, 1.0, 101}});
    sys.grid.input_axes = axes_from({{-1.0, 1.0, 51}});
    sys.grid.dt = 0.02;
    sys.grid.policy_rounds = 80;
    sys.grid.eval_sweeps = 40;
    sys.grid.policy_tol = 1e-10;
    sys.sim_dt = 0.01;
    finish(sys, kv);
    return sys;
}

SystemModel make_lq2d(const KV& kv) {
    SystemModel sys;
    sys.name = "lq2d";
    sys.n = 2;
    sys.m = 1;
    sys.x_goal = VectorXd::Zero(2);
    sys.u_trim = VectorXd::Zero(1);
    sys.u_min = VectorXd::Constant(1, -4.0);
    sys.u_max = VectorXd::Constant(1, 4.0);
    MatrixXd A(2, 2), B(2, 1);
    A << 0.0, 1.0, 0.0, 0.0;
    B << 0.0, 1.0;
    linear_system(sys, A, B);
    sys.Q = MatrixXd::Identity(2, 2);
    sys.R = 0.1 * MatrixXd::Identity(1, 1);
    sys.lambda = 6.0;
    sys.grid.state_axes = axes_from({{-1, 1, 51}, {-1, 1, 51}});
    sys.grid.input_axes = axes_from({{-4, 4, 41}});
    sys.grid.dt = 0.02;
    sys.grid.policy_rounds = 60;
    sys.grid.eval_sweeps = 30;
    sys.grid.policy_tol = 1e-8;
    sys.sim_dt = 0.01;
    finish(sys, kv);
    return sys;
}

SystemModel make_toy2(const KV& kv) {
    SystemModel sys;
    sys.name = "toy2";
    sys.n = 2;
    sys.m = 2;
    sys.x_goal = VectorXd::Zero(2);
    sys.u_trim = VectorXd::Zero(2);
    sys.u_min = VectorXd::Constant(2, -2.0);
    sys.u_max = VectorXd::Constant(2, 2.0);
    MatrixXd A(2, 2), B(2, 2);
    A << 0.0, 1.0, -1.0, -0.8;
    B << 1.0, 0.3, 0.2, 1.0;
    linear_system(sys, A, B);
    sys.Q = MatrixXd::Identity(2, 2);
    sys.R = 0.1 * MatrixXd::Identity(2, 2);
    sys.lambda = 0.5;
    sys.grid.state_axes = axes_from({{-1, 1, 21}, {-1, 1, 21}});
    sys.grid.input_axes = axes_from({{-2, 2, 9}, {-2, 2, 9}});
    sys.grid.dt = 0.05;
    sys.grid.policy_rounds = 60;
    sys.grid.eval_sweeps = 30;
    finish(sys, kv);
    return sys;
}

SystemModel make_toy33(const KV& kv) {
    SystemModel sys;
    sys.name = "toy33";
    sys.n = 3;
    sys.m = 3;
    sys.x_goal = VectorXd::Zero(3);
    sys.u_trim = VectorXd::Zero(3);
    sys.u_min = VectorXd::Constant(3, -2.0);
    sys.u_max = VectorXd::Constant(3, 2.0);
    MatrixXd A(3, 3), B(3, 3);
    A << -0.2, 0.5, 0.0, -0.5, -0.2, 0.3, 0.1, -0.3, -0.4;
    B << 1.0, 0.2, 0.0, 0.0, 1.0, 0.2, 0.2, 0.0, 1.0;
    linear_system(sys, A, B);
    sys.Q = MatrixXd::Identity(3, 3);
    sys.R = 0.1 * MatrixXd::Identity(3, 3);
    sys.lambda = 0.5;
    sys.grid.state_axes = axes_from({{-1, 1, 11}, {-1, 1, 11}, {-1, 1, 11}});
    sys.grid.input_axes = axes_from({{-2, 2, 5}, {-2, 2, 5}, {-2, 2, 5}});
    sys.grid.dt = 0.05;
    finish(sys, kv);
    return sys;
}

SystemModel make_sep_2di(const KV& kv) {
    SystemModel sys;
    sys.name = "sep-2di";
    sys.n = 4;
    sys.m = 2;
    sys.state_names = {"p1", "v1", "p2", "v2"};
    sys.input_names = {"a1", "a2"};
    sys.x_goal = VectorXd::Zero(4);
    sys.u_trim = VectorXd::Zero(2);
    sys.u_min = VectorXd::Constant(2, -2.0);
    sys.u_max = VectorXd::Constant(2, 2.0);
    const double eps = kv_num(kv, "eps", 0.0);
    MatrixXd A = MatrixXd::Zero(4, 4), B = MatrixXd::Zero(4, 2);
    A(0, 1) = 1.0;
    A(2, 3) = 1.0;
    A(1, 2) = eps;
    A(3, 0) = eps;
    B(1, 0) = 1.0;
    B(3, 1) = 1.0;
    linear_system(sys, A, B);
    sys.Q = MatrixXd::Identity(4, 4);
    sys.R = 0.025 * MatrixXd::Identity(2, 2);
    sys.lambda = 0.5;
    sys.grid.state_axes = axes_from({{-1, 1, 21}, {-1, 1, 21}, {-1, 1, 21}, {-1, 1, 21}});
    sys.grid.input_axes = axes_from({{-2, 2, 9}, {-2, 2, 9}});
    sys.grid.dt = 0.05;
    finish(sys, kv);
    return sys;
}

SystemModel make_sep_3p(const KV& kv) {
    SystemModel sys;
    sys.name = "sep-3p";
    sys.n = 6;
    sys.m = 3;
    sys.state_names = {"th1", "om1", "th2", "om2", "th3", "om3"};
    sys.input_names = {"tau1", "tau2", "tau3"};
    const double eps = kv_num(kv, "eps", 0.0);
    const double len[3] = {1.0, 0.8, 0.6}, mass[3] = {1.0, 0.7, 0.5};
    sys.x_goal = VectorXd::Zero(6);
    sys.u_trim = VectorXd::Zero(3);
    sys.u_min = VectorXd(3);
    sys.u_max = VectorXd(3);
    for (int i = 0; i < 3; ++i) {
        sys.u_max(i) = 3.0 * mass[i] * kGravity * len[i];
        sys.u_min(i) = -sys.u_max(i);
    }
    sys.rate = [eps, len, mass](const VectorXd& x, const VectorXd& u, VectorXd& dx) {
        for (int i = 0; i < 3; ++i) {
            double th = x(2 * i), om = x(2 * i + 1);
            double coupling = eps * x(2 * ((i + 1) % 3));
            dx(2 * i) = om;
            dx(2 * i + 1) =
                kGravity / len[i] * std::sin(th) + u(i) / (mass[i] * len[i] * len[i]) + coupling;
        }
    };
    sys.jacobians = [eps, len, mass](const VectorXd& x, const VectorXd&, MatrixXd& Ja,
                                     MatrixXd& Jb) {
        Ja = MatrixXd::Zero(6, 6);
        Jb = MatrixXd::Zero(6, 3);
        for (int i = 0; i < 3; ++i) {
            Ja(2 * i, 2 * i + 1) = 1.0;
            Ja(2 * i + 1, 2 * i) = kGravity / len[i] * std::cos(x(2 * i));
            Ja(2 * i + 1, 2 * ((i + 1) % 3)) = eps;
            Jb(2 * i + 1, i) = 1.0 / (mass[i] * len[i] * len[i]);
        }
    };
    sys.lambda = 0.5;
    sys.grid.state_axes.assign(6, AxisSpec{-0.9, 0.9, 11});
    for (int i = 0; i < 3; ++i) sys.grid.state_axes[2 * i + 1] = AxisSpec{-2.5, 2.5, 11};
    sys.grid.input_axes = axes_from({{sys.u_min(0), sys.u_max(0), 7},
                                     {sys.u_min(1), sys.u_max(1), 7},
                                     {sys.u_min(2), sys.u_max(2), 7}});
    sys.grid.dt = 0.05;
    default_costs(sys);
    finish(sys, kv);
    return sys;
}

SystemModel make_pend1(const KV& kv) {
    SystemModel sys;
    sys.name = "pend1";
    sys.n = 2;
    sys.m = 1;
    sys.state_names = {"th", "om"};
    sys.input_names = {"tau"};
    sys.x_goal = VectorXd::Zero(2);
    sys.u_trim = VectorXd::Zero(1);
    sys.u_min = VectorXd::Constant(1, -4.0);
    sys.u_max = VectorXd::Constant(1, 4.0);
    sys.rate = [](const VectorXd& x, const VectorXd& u, VectorXd& dx) {
        dx(0) = x(1);
        dx(1) = kGravity * std::sin(x(0)) + u(0);  // m = l = 1, angle from upright
    };
    sys.jacobians = [](const VectorXd& x, const VectorXd&, MatrixXd& Ja, MatrixXd& Jb) {
        Ja = MatrixXd::Zero(2, 2);
        Jb = MatrixXd::Zero(2, 1);
        Ja(0, 1) = 1.0;
        Ja(1, 0) = kGravity * std::cos(x(0));
        Jb(1, 0) = 1.0;
    };
    sys.lambda = 0.5;
    sys.grid.state_axes = axes_from({{-M_PI, M_PI, 51}, {-2.0 * M_PI, 2.0 * M_PI, 51}});
    sys.grid.input_axes = axes_from({{-4.0, 4.0, 21}});
    sys.grid.dt = 0.05;
    sys.grid.policy_rounds = 80;
    sys.grid.eval_sweeps = 30;
    default_costs(sys);
    sys.sim_dt = 0.005;
    finish(sys, kv);
    return sys;
}

SystemModel make_biped(const KV& kv) {
    SystemModel sys;
    sys.name = "biped";
    sys.n = 6;
    sys.m = 4;
    sys.state_names = {"l_r", "alpha_r", "vx", "vz", "pitch", "pitch_rate"};
    sys.input_names = {"F_l", "F_r", "tau_l", "tau_r"};
    const double mass = 72.0, inertia = 3.0, d_hip = 0.2, d_f = 0.5, l_max = 1.15;
    const bool drop_broken_leg = kv_str(kv, "leg_break", "flag") == "continue";

    // balance point: hip midway between the footholds at height 1 m
    const double hip_z = 1.0;
    const double lr_d = std::sqrt(0.25 * d_f * d_f + hip_z * hip_z);
    const double ar_d = std::atan2(hip_z, -0.5 * d_f);
    const double force_d = mass * kGravity / (2.0 * std::sin(ar_d));
    sys.x_goal = VectorXd::Zero(6);
    sys.x_goal(0) = lr_d;
    sys.x_goal(1) = ar_d;
    sys.u_trim = VectorXd::Zero(4);
    sys.u_trim(0) = force_d;
    sys.u_trim(1) = force_d;
    sys.u_min = VectorXd(4);
    sys.u_max = VectorXd(4);
    const double tau_lim = 0.25 * mass * kGravity / l_max;
    sys.u_min << 0.0, 0.0, -tau_lim, -tau_lim;
    sys.u_max << 3.0 * mass * kGravity, 3.0 * mass * kGravity, tau_lim, tau_lim;

    sys.rate = [mass, inertia, d_hip, d_f, l_max, drop_broken_leg](
                   const VectorXd& x, const VectorXd& u, VectorXd& dx) {
        const double lr = x(0), ar = x(1), vx = x(2), vz = x(3), th = x(4), thd = x(5);
        if (!(lr > 0.0)) throw std::domain_error("biped: right leg length must be positive");
        const double ll2 = lr * lr + d_f * d_f + 2.0 * lr * d_f * std::cos(ar);
        if (!(ll2 > 0.0)) throw std::domain_error("biped: left leg length must be positive");
        const double ll = std::sqrt(ll2);
        const double al = std::asin(clamp1(lr * std::sin(ar) / ll));
        double Fl = u(0), Fr = u(1), tl = u(2), tr = u(3);
        if (drop_broken_leg) {
            if (lr > l_max) Fr = tr = 0.0;
            if (ll > l_max) Fl = tl = 0.0;
        }
        const double car = std::cos(ar), sar = std::sin(ar);
        const double cal = std::cos(al), sal = std::sin(al);
        const double vhx = vx + d_hip * std::cos(th) * thd;
        const double vhz = vz + d_hip * std::sin(th) * thd;
        dx(0) = vhx * car + vhz * sar;
        dx(1) = (-vhx * sar + vhz * car) / lr;
        dx(2) = (Fr * car + tr / lr * sar + Fl * cal + tl / ll * sal) / mass;
        dx(3) = (Fr * sar - tr / lr * car + Fl * sal - tl / ll * cal) / mass - kGravity;
        dx(4) = thd;
        dx(5) = (tr * (1.0 + d_hip / lr * std::sin(ar - th)) + Fr * d_hip * std::cos(ar - th) +
                 tl * (1.0 + d_hip / ll * std::sin(al - th)) + Fl * d_hip * std::cos(al - th)) /
                inertia;
    };
    if (!drop_broken_leg) {
        sys.guard = [d_f, l_max](const VectorXd& x) -> const char* {
            const double lr = x(0);
            if (lr > l_max) return "right leg contact broken";
            const double ll2 = lr * lr + d_f * d_f + 2.0 * lr * d_f * std::cos(x(1));
            if (ll2 > 0.0 && std::sqrt(ll2) > l_max) return "left leg contact broken";
            return nullptr;
        };
    }
    sys.lambda = 3.0;
    sys.grid.state_axes = axes_from({{0.92, 1.14, 11},
                                     {ar_d - 0.35, ar_d + 0.35, 11},
                                     {-1.0, 1.0, 11},
                                     {-1.0, 1.0, 11},
                                     {-0.8, 0.8, 11},
                                     {-2.0, 2.0, 11}});
    sys.grid.input_axes = axes_from({{sys.u_min(0), sys.u_max(0), 9},
                                     {sys.u_min(1), sys.u_max(1), 9},
                                     {-tau_lim, tau_lim, 9},
                                     {-tau_lim, tau_lim, 9}});
    sys.grid.dt = 0.02;
    default_costs(sys);
    sys.sim_dt = 0.002;
    finish(sys, kv);
    return sys;
}

struct ManipParams {
    double a[4][4];    // mu_ij * l_i * l_j
    double gl[4];      // g * mu_i * l_i
    double len[4], mu[4];
};

ManipParams manip_params() {
    ManipParams p;
    const double m[4] = {5.4, 1.8, 0.6, 0.2};
    const double l[4] = {0.2, 0.5, 0.25, 0.125};
    for (int i = 0; i < 4; ++i) {
        p.len[i] = l[i];
        p.mu[i] = 0.0;
        for (int k = i; k < 4; ++k) p.mu[i] += m[k];
    }
    for (int i = 0; i < 4; ++i) {
        p.gl[i] = kGravity * p.mu[i] * l[i];
        for (int j = 0; j < 4; ++j) p.a[i][j] = p.mu[std::max(i, j)] * l[i] * l[j];
    }
    return p;
}

// absolute link angles measured from the upright vertical
void manip_abs(const VectorXd& x, double* phi, double* phid) {
    phi[0] = x(0);
    phid[0] = x(4);
    for (int i = 1; i < 4; ++i) {
        phi[i] = phi[i - 1] + x(i);
        phid[i] = phid[i - 1] + x(4 + i);
    }
}

SystemModel make_manip4(const KV& kv) {
    SystemModel sys;
    sys.name = "manip4";
    sys.n = 8;
    sys.m = 4;
    sys.state_names = {"q1", "q2", "q3", "q4", "q1d", "q2d", "q3d", "q4d"};
    sys.input_names = {"tau1", "tau2", "tau3", "tau4"};
    sys.x_goal = VectorXd::Zero(8);
    sys.u_trim = VectorXd::Zero(4);
    sys.u_min = VectorXd(4);
    sys.u_max = VectorXd(4);
    sys.u_max << 24.0, 15.0, 7.5, 1.0;
    sys.u_min = -sys.u_max;
    const ManipParams p = manip_params();
    sys.rate = [p](const VectorXd& x, const VectorXd& u, VectorXd& dx) {
        double phi[4], phid[4];
        manip_abs(x, phi, phid);
        Eigen::Matrix4d M;
        Eigen::Vector4d rhs;
        for (int i = 0; i < 4; ++i) {
            double acc = u(i) - (i < 3 ? u(i + 1) : 0.0) + p.gl[i] * std::sin(phi[i]);
            for (int j = 0; j < 4; ++j) {
                const double dphi = phi[i] - phi[j];
                M(i, j) = p.a[i][j] * std::cos(dphi);
                acc -= p.a[i][j] * std::sin(dphi) * phid[j] * phid[j];
            }
            rhs(i) = acc;
        }
        Eigen::Vector4d phidd = M.ldlt().solve(rhs);
        for (int i = 0; i < 4; ++i) {
            dx(i) = x(4 + i);
            dx(4 + i) = phidd(i) - (i > 0 ? phidd(i - 1) : 0.0);
        }
    };
    sys.lambda = 3.0;
    sys.grid.state_axes.assign(8, AxisSpec{-1.0, 1.0, 11});
    for (int i = 4; i < 8; ++i) sys.grid.state_axes[i] = AxisSpec{-3.0, 3.0, 11};
    sys.grid.input_axes = axes_from({{-24, 24, 9}, {-15, 15, 9}, {-7.5, 7.5, 9}, {-1, 1, 9}});
    sys.grid.dt = 0.02;
    default_costs(sys);
    sys.sim_dt = 0.001;
    finish(sys, kv);
    return sys;
}

SystemModel make_quadcopter(const KV& kv) {
    SystemModel sys;
    sys.name = "quadcopter";
    sys.n = 10;
    sys.m = 4;
    sys.state_names = {"z",  "roll",  "pitch",  "yaw",  "vx",
                       "vy", "vz",    "roll_rate", "pitch_rate", "yaw_rate"};
    sys.input_names = {"T", "F_roll", "F_pitch", "F_yaw"};
    const double mass = 0.5, arm = 0.225, k_m = 0.0383;
    const Eigen::Vector3d inertia(4.86e-3, 4.86e-3, 8.8e-3);
    sys.x_goal = VectorXd::Zero(10);
    sys.x_goal(0) = 1.0;
    sys.u_trim = VectorXd::Zero(4);
    sys.u_trim(0) = mass * kGravity;
    sys.u_min = VectorXd(4);
    sys.u_max = VectorXd(4);
    const double mg = mass * kGravity;
    sys.u_min << 0.0, -0.25 * mg, -0.25 * mg, -0.125 * mg;
    sys.u_max << 2.0 * mg, 0.25 * mg, 0.25 * mg, 0.125 * mg;
    sys.rate = [mass, arm, k_m, inertia](const VectorXd& x, const VectorXd& u, VectorXd& dx) {
        const double phi = x(1), th = x(2), psi = x(3);
        const double cphi = std::cos(phi), sphi = std::sin(phi);
        const double cth = std::cos(th), sth = std::sin(th);
        const double cpsi = std::cos(psi), spsi = std::sin(psi);
        const double thrust = u(0) / mass;
        const Eigen::Vector3d tau(arm * u(1), arm * u(2), k_m * u(3));
        const Eigen::Vector3d etad(x(7), x(8), x(9));
        Eigen::Matrix3d W;
        W << 1.0, 0.0, -sth, 0.0, cphi, cth * sphi, 0.0, -sphi, cth * cphi;
        Eigen::Matrix3d Wd;
        Wd << 0.0, 0.0, -cth * x(8), 0.0, -sphi * x(7),
            -sth * sphi * x(8) + cth * cphi * x(7), 0.0, -cphi * x(7),
            -sth * cphi * x(8) - cth * sphi * x(7);
        const Eigen::Vector3d omega = W * etad;
        const Eigen::Vector3d omegad =
            (tau - omega.cross(inertia.asDiagonal() * omega)).cwiseQuotient(inertia);
        const Eigen::Vector3d etadd = W.partialPivLu().solve(omegad - Wd * etad);
        dx(0) = x(6);
        dx(1) = x(7);
        dx(2) = x(8);
        dx(3) = x(9);
        dx(4) = thrust * (cpsi * sth * cphi + spsi * sphi);
        dx(5) = thrust * (spsi * sth * cphi - cpsi * sphi);
        dx(6) = thrust * cth * cphi - kGravity;
        dx(7) = etadd(0);
        dx(8) = etadd(1);
        dx(9) = etadd(2);
    };
    sys.guard = [](const VectorXd& x) -> const char* {
        if (std::abs(x(2)) >= 0.98 * M_PI / 2.0) return "pitch near gimbal singularity";
        return nullptr;
    };
    sys.lambda = 3.0;
    sys.grid.state_axes = axes_from({{0.5, 1.5, 11},
                                     {-0.5, 0.5, 11},
                                     {-0.5, 0.5, 11},
                                     {-0.5, 0.5, 11},
                                     {-1.0, 1.0, 11},
                                     {-1.0, 1.0, 11},
                                     {-1.0, 1.0, 11},
                                     {-2.0, 2.0, 11},
                                     {-2.0, 2.0, 11},
                                     {-2.0, 2.0, 11}});
    sys.grid.input_axes = axes_from({{0.0, 2.0 * mg, 11},
                                     {-0.25 * mg, 0.25 * mg, 11},
                                     {-0.25 * mg, 0.25 * mg, 11},
                                     {-0.125 * mg, 0.125 * mg, 11}});
    sys.grid.dt = 0.02;
    default_costs(sys);
    sys.sim_dt = 0.002;
    finish(sys, kv);
    return sys;
}

}  // namespace

double kv_num(const KV& kv, const std::string& key, double fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    size_t used = 0;
    double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("bad numeric value for " + key);
    return v;
}

int kv_int(const KV& kv, const std::string& key, int fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    size_t used = 0;
    int v = std::stoi(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("bad integer value for " + key);
    return v;
}

std::string kv_str(const KV& kv, const std::string& key, const std::string& fallback) {
    auto it = kv.find(key);
    return it == kv.end() ? fallback : it->second;
}

double manip4_energy(const Eigen::VectorXd& x) {
    const ManipParams p = manip_params();
    double phi[4], phid[4];
    manip_abs(x, phi, phid);
    double kinetic = 0.0, potential = 0.0;
    for (int i = 0; i < 4; ++i) {
        potential += p.gl[i] * std::cos(phi[i]);
        for (int j = 0; j < 4; ++j)
            kinetic += 0.5 * p.a[i][j] * std::cos(phi[i] - phi[j]) * phid[i] * phid[j];
    }
    return kinetic + potential;
}

Eigen::Vector4d quad_rotor_forces(const Eigen::VectorXd& u) {
    const double T = u(0), fphi = u(1), fth = u(2), fpsi = u(3);
    return {0.25 * T - 0.5 * fth - 0.25 * fpsi, 0.25 * T - 0.5 * fphi + 0.25 * fpsi,
            0.25 * T + 0.5 * fth - 0.25 * fpsi, 0.25 * T + 0.5 * fphi + 0.25 * fpsi};
}

SystemModel make_system(const std::string& name, const KV& overrides) {
    if (name == "scalar1d") return make_scalar1d(overrides);
    if (name == "lq2d") return make_lq2d(overrides);
    if (name == "toy2") return make_toy2(overrides);
    if (name == "toy33") return make_toy33(overrides);
    if (name == "sep-2di") return make_sep_2di(overrides);
    if (name == "sep-3p") return make_sep_3p(overrides);
    if (name == "pend1") return make_pend1(overrides);
    if (name == "biped") return make_biped(overrides);
    if (name == "manip4") return make_manip4(overrides);
    if (name == "quadcopter") return make_quadcopter(overrides);
    throw std::invalid_argument("unknown system: " + name);
}

std::vector<std::string> list_systems() {
    return {"biped", "manip4", "quadcopter", "sep-2di", "sep-3p",
            "pend1", "toy2",   "toy33",      "scalar1d", "lq2d"};
}

}  // namespace polydec
