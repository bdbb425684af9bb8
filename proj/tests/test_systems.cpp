#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "polydec/linear.hpp"
#include "polydec/metrics.hpp"
#include "polydec/systems.hpp"
#include "polydec/util.hpp"

using namespace polydec;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd rk4_step(const SystemModel& sys, const VectorXd& x, const VectorXd& u, double dt) {
    VectorXd k1 = sys.f(x, u);
    VectorXd k2 = sys.f(x + 0.5 * dt * k1, u);
    VectorXd k3 = sys.f(x + 0.5 * dt * k2, u);
    VectorXd k4 = sys.f(x + dt * k3, u);
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

TEST_CASE("every registered system is well formed") {
    auto names = list_systems();
    CHECK(names.size() == 10);
    std::set<std::string> uniq(names.begin(), names.end());
    CHECK(uniq.size() == names.size());
    for (const auto& name : names) {
        CAPTURE(name);
        SystemModel sys = make_system(name);
        CHECK(sys.name == name);
        CHECK(sys.n >= 1);
        CHECK(sys.m >= 1);
        CHECK(static_cast<int>(sys.state_names.size()) == sys.n);
        CHECK(static_cast<int>(sys.input_names.size()) == sys.m);
        CHECK(static_cast<int>(sys.grid.state_axes.size()) == sys.n);
        CHECK(static_cast<int>(sys.grid.input_axes.size()) == sys.m);
        CHECK(sys.trim_residual() <= 1e-9);
        CHECK((sys.u_min.array() <= sys.u_trim.array()).all());
        CHECK((sys.u_trim.array() <= sys.u_max.array()).all());
        // the action axes must span exactly the admissible input box
        for (int i = 0; i < sys.m; ++i) {
            CHECK(sys.grid.input_axes[i].lo == sys.u_min(i));
            CHECK(sys.grid.input_axes[i].hi == sys.u_max(i));
        }
        // goal inside the state box, so the policy grid can represent it
        for (int i = 0; i < sys.n; ++i) {
            CHECK(sys.x_goal(i) >= sys.grid.state_axes[i].lo);
            CHECK(sys.x_goal(i) <= sys.grid.state_axes[i].hi);
        }
        CHECK(sys.Q.rows() == sys.n);
        CHECK(sys.R.rows() == sys.m);
        CHECK(sys.lambda > 0.0);
    }
}

TEST_CASE("unknown system names are rejected") {
    CHECK_THROWS_AS(make_system("no-such-system"), std::invalid_argument);
    CHECK_THROWS_AS(make_system(""), std::invalid_argument);
}

TEST_CASE("config overrides reshape the grid and model") {
    KV kv = {{"lambda", "2.5"}, {"dt", "0.005"}, {"points", "13"},  {"actions", "7"},
             {"rounds", "17"},  {"sweeps", "9"}, {"tol", "0.001"},  {"decoupled_zero", "1"}};
    SystemModel sys = make_system("toy2", kv);
    CHECK(sys.lambda == 2.5);
    CHECK(sys.grid.dt == 0.005);
    CHECK(sys.grid.policy_rounds == 17);
    CHECK(sys.grid.eval_sweeps == 9);
    CHECK(sys.grid.policy_tol == 0.001);
    CHECK_FALSE(sys.grid.decoupled_at_trim);
    for (const auto& ax : sys.grid.state_axes) CHECK(ax.points == 13);
    for (const auto& ax : sys.grid.input_axes) {
        CHECK(ax.points == 7);
        CHECK(ax.lo == -2.0);  // resampling never widens the input box
        CHECK(ax.hi == 2.0);
    }
    CHECK_THROWS(make_system("toy2", {{"lambda", "fast"}}));
    CHECK_THROWS(make_system("toy2", {{"points", "2.5"}}));
}

TEST_CASE("pendulum is unstable open loop and stabilizable closed loop") {
    SystemModel sys = make_system("pend1");
    LinearModel lin = linearize(sys);
    CHECK_FALSE(is_hurwitz(lin.A));
    LqrSolution sol = solve_discounted_lqr(lin.A, lin.B, sys.Q, sys.R, sys.lambda);
    MatrixXd Acl = lin.A - lin.B * sol.K;
    CHECK(is_hurwitz(Acl));
}

TEST_CASE("separable chain decouples exactly at zero coupling") {
    SystemModel sys = make_system("sep-3p");
    LinearModel lin = linearize(sys);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j)
            if (i / 2 != j / 2) CHECK(lin.A(i, j) == 0.0);
    SystemModel coupled = make_system("sep-3p", {{"eps", "0.3"}});
    LinearModel linc = linearize(coupled);
    CHECK(linc.A(1, 2) == doctest::Approx(0.3));
    CHECK(linc.A(5, 0) == doctest::Approx(0.3));
}

TEST_CASE("manipulator conserves energy under passive dynamics") {
    SystemModel sys = make_system("manip4");
    VectorXd x(8);
    x << 0.3, -0.2, 0.1, 0.15, 0.0, 0.0, 0.0, 0.0;
    const double e0 = manip4_energy(x);
    VectorXd u = VectorXd::Zero(4);
    for (int k = 0; k < 1000; ++k) x = rk4_step(sys, x, u, 1e-3);
    const double e1 = manip4_energy(x);
    CHECK(std::fabs(e1 - e0) < 1e-6 * (1.0 + std::fabs(e0)));
    CHECK(x.tail<4>().lpNorm<Eigen::Infinity>() > 0.01);  // it actually moved
}

TEST_CASE("manipulator kinetic energy is positive in every direction") {
    SystemModel sys = make_system("manip4");
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        VectorXd x(8);
        for (int i = 0; i < 4; ++i) x(i) = 2.0 * rng.real01() - 1.0;
        for (int i = 4; i < 8; ++i) x(i) = 6.0 * rng.real01() - 3.0;
        if (x.tail<4>().norm() < 0.1) continue;
        VectorXd rest = x;
        rest.tail<4>().setZero();
        CHECK(manip4_energy(x) - manip4_energy(rest) > 0.0);
    }
}

TEST_CASE("rotor mixing recovers collective and differential commands") {
    SystemModel sys = make_system("quadcopter");
    Eigen::Vector4d hover = quad_rotor_forces(sys.u_trim);
    const double mg = 0.5 * 9.81;
    for (int i = 0; i < 4; ++i) CHECK(hover(i) == doctest::Approx(0.25 * mg));
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        VectorXd u(4);
        for (int i = 0; i < 4; ++i)
            u(i) = sys.u_min(i) + (sys.u_max(i) - sys.u_min(i)) * rng.real01();
        Eigen::Vector4d f = quad_rotor_forces(u);
        CHECK(f.sum() == doctest::Approx(u(0)));
        CHECK(f(3) - f(1) == doctest::Approx(u(1)));
        CHECK(f(2) - f(0) == doctest::Approx(u(2)));
        CHECK(-f(0) + f(1) - f(2) + f(3) == doctest::Approx(u(3)));
    }
}

TEST_CASE("hover linearization leaves yaw as an isolated block") {
    SystemModel sys = make_system("quadcopter");
    LinearModel lin = linearize(sys);
    const std::set<int> yaw = {3, 9};  // heading and its rate
    for (int i = 0; i < 10; ++i) {
        for (int j = 0; j < 10; ++j) {
            const bool in_i = yaw.count(i) > 0, in_j = yaw.count(j) > 0;
            if (in_i != in_j) CHECK(std::fabs(lin.A(i, j)) < 1e-7);
        }
        for (int j = 0; j < 4; ++j) {
            if (yaw.count(i) && j != 3) CHECK(std::fabs(lin.B(i, j)) < 1e-7);
            if (!yaw.count(i) && j == 3) CHECK(std::fabs(lin.B(i, j)) < 1e-7);
        }
    }
    CHECK(std::fabs(lin.A(3, 9) - 1.0) < 1e-7);
    CHECK(lin.B(9, 3) > 1.0);  // yaw torque authority
}

TEST_CASE("biped guard reports a stretched leg") {
    SystemModel sys = make_system("biped");
    REQUIRE(bool(sys.guard));
    CHECK(sys.guard(sys.x_goal) == nullptr);
    VectorXd x = sys.x_goal;
    x(0) = 1.2;
    const char* why = sys.guard(x);
    REQUIRE(why != nullptr);
    CHECK(std::string(why).find("leg") != std::string::npos);

    SystemModel tolerant = make_system("biped", {{"leg_break", "continue"}});
    CHECK_FALSE(bool(tolerant.guard));
    // a broken leg produces zero force instead of tripping the guard
    VectorXd u = tolerant.u_trim;
    VectorXd dx_broken = tolerant.f(x, u);
    u(1) = 0.0;  // manually dropping the right leg force must be equivalent
    VectorXd dx_manual = tolerant.f(x, u);
    CHECK((dx_broken - dx_manual).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("biped stance geometry is symmetric at the balance point") {
    SystemModel sys = make_system("biped");
    CHECK(sys.u_trim(0) == sys.u_trim(1));
    CHECK(sys.u_trim(0) > 0.5 * 72.0 * 9.81 / 2.0);  // each leg carries real load
    CHECK(sys.x_goal(1) > M_PI / 2.0);               // right leg leans past vertical
    // pushing the hip straight down shortens neither leg below the guard
    VectorXd x = sys.x_goal;
    x(0) = 0.95;
    CHECK(sys.guard(x) == nullptr);
}

TEST_CASE("quadcopter guard trips near the pitch singularity") {
    SystemModel sys = make_system("quadcopter");
    REQUIRE(bool(sys.guard));
    VectorXd x = sys.x_goal;
    CHECK(sys.guard(x) == nullptr);
    x(2) = 1.56;
    CHECK(sys.guard(x) != nullptr);
}

TEST_CASE("default solver grids keep the documented shapes") {
    SystemModel s1 = make_system("scalar1d");
    CHECK(s1.grid.state_axes[0].points == 101);
    CHECK(s1.lambda == 3.0);
    SystemModel s2 = make_system("lq2d");
    CHECK(s2.grid.state_axes[0].points == 51);
    CHECK(s2.grid.dt == 0.02);
    SystemModel s3 = make_system("toy2");
    CHECK(s3.grid.input_axes[0].points == 9);
}
