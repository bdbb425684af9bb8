#include <doctest.h>

#include <cmath>

#include "polydec/enumeration.hpp"
#include "polydec/input_tree.hpp"
#include "polydec/metrics.hpp"
#include "polydec/systems.hpp"
#include "polydec/util.hpp"

using namespace polydec;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// two independent integrators coupled only through the control cost
SystemModel r_coupled() {
    SystemModel sys;
    sys.name = "rpair";
    sys.n = 2;
    sys.m = 2;
    sys.x_goal = VectorXd::Zero(2);
    sys.u_trim = VectorXd::Zero(2);
    sys.u_min = VectorXd::Constant(2, -5.0);
    sys.u_max = VectorXd::Constant(2, 5.0);
    MatrixXd A = MatrixXd::Zero(2, 2), B = MatrixXd::Identity(2, 2);
    sys.rate = [A, B](const VectorXd& x, const VectorXd& u, VectorXd& dx) {
        dx = A * x + B * u;
    };
    sys.Q = MatrixXd::Identity(2, 2);
    sys.R.resize(2, 2);
    sys.R << 1.0, 0.5, 0.5, 1.0;
    sys.lambda = 0.0;
    sys.grid.state_axes = {{-1, 1, 11}, {-1, 1, 11}};
    sys.grid.input_axes = {{-5, 5, 11}, {-5, 5, 11}};
    return sys;
}

}  // namespace

TEST_CASE("linearize recovers the double integrator") {
    SystemModel lq = make_system("lq2d", {});
    LinearModel lin = linearize(lq);
    MatrixXd Aref(2, 2), Bref(2, 1);
    Aref << 0, 1, 0, 0;
    Bref << 0, 1;
    CHECK((lin.A - Aref).norm() < 1e-9);
    CHECK((lin.B - Bref).norm() < 1e-9);
}

TEST_CASE("linearize rejects a non-equilibrium goal") {
    SystemModel sys = make_system("scalar1d", {});
    sys.u_trim(0) = 2.0;  // x' = u = 2 at the goal
    CHECK_THROWS(linearize(sys));
}

TEST_CASE("analytic jacobians agree with finite differences") {
    for (const char* name : {"pend1", "sep-3p", "toy33"}) {
        SystemModel sys = make_system(name, {});
        REQUIRE(bool(sys.jacobians));
        MatrixXd A, B;
        sys.jacobians(sys.x_goal, sys.u_trim, A, B);
        auto f = [&](const VectorXd& x, const VectorXd& u) {
            VectorXd dx(sys.n);
            sys.rate(x, u, dx);
            return dx;
        };
        auto [Afd, Bfd] = finite_difference_jacobians(f, sys.x_goal, sys.u_trim);
        CHECK((A - Afd).norm() < 2e-5 * (1.0 + A.norm()));
        CHECK((B - Bfd).norm() < 2e-5 * (1.0 + B.norm()));
    }
}

TEST_CASE("box second moment handles off-center goals") {
    std::vector<AxisSpec> box = {{-1, 1, 5}, {0, 2, 5}};
    VectorXd goal(2);
    goal << 0.0, 1.0;
    MatrixXd S = box_second_moment(box, goal);
    CHECK(S(0, 0) == doctest::Approx(1.0 / 3));
    CHECK(S(1, 1) == doctest::Approx(1.0 / 3));
    CHECK(S(0, 1) == doctest::Approx(0.0));
    goal << 1.0, 0.0;  // goal on a box face: E[(x-1)^2] over [-1,1]
    MatrixXd S2 = box_second_moment(box, goal);
    CHECK(S2(0, 0) == doctest::Approx(4.0 / 3));
}

TEST_CASE("value error matches a hand-solved control-coupled pair") {
    // joint: P* = R^(1/2); decoupled tree: closed loop u = -x, value (I+R)/2.
    // err is the box average of x'(Pd - P*)x = (2/3) * (1 - (sqrt(6)+sqrt(2))/4).
    SystemModel sys = r_coupled();
    LinearModel lin = linearize(sys);
    InputTree blocks = parse_tree("[(u1|x1), (u2|x2)]", 2, 2);
    const double err = value_error_estimate(blocks, lin, sys.Q, sys.R, sys.lambda,
                                            sys.grid.state_axes);
    const double expected = (2.0 / 3.0) * (1.0 - (std::sqrt(6.0) + std::sqrt(2.0)) / 4.0);
    CHECK(err == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("trace formula matches Monte-Carlo value averaging") {
    SystemModel sys = r_coupled();
    LinearModel lin = linearize(sys);
    InputTree blocks = parse_tree("[(u1|x1), (u2|x2)]", 2, 2);
    const double err = value_error_estimate(blocks, lin, sys.Q, sys.R, sys.lambda,
                                            sys.grid.state_axes);

    // closed-loop quadratic values, sampled explicitly
    GainAssembly ga = decomposed_gains(blocks, lin, sys.Q, sys.R, sys.lambda);
    LqrSolution joint = solve_discounted_lqr(lin.A, lin.B, sys.Q, sys.R, sys.lambda);
    const MatrixXd Acl = lin.A - lin.B * ga.K;
    const MatrixXd Cd = sys.Q + ga.K.transpose() * sys.R * ga.K;
    const MatrixXd Pd = solve_lyapunov(Acl, Cd);
    Rng rng(77);
    double acc = 0.0;
    const int samples = 200000;
    for (int i = 0; i < samples; ++i) {
        VectorXd x(2);
        x << 2 * rng.real01() - 1, 2 * rng.real01() - 1;
        acc += x.dot((Pd - joint.P) * x);
    }
    acc /= samples;
    CHECK(std::fabs(acc - err) < 0.01 * err);
}

TEST_CASE("separable system block tree is exact and matches the joint gain") {
    SystemModel sys = make_system("sep-2di", {});
    LinearModel lin = linearize(sys);
    InputTree blocks = parse_tree("[(u1|x1,x2), (u2|x3,x4)]", 4, 2);
    const double err = value_error_estimate(blocks, lin, sys.Q, sys.R, sys.lambda,
                                            sys.grid.state_axes);
    CHECK(err <= 1e-10);
    GainAssembly ga = decomposed_gains(blocks, lin, sys.Q, sys.R, sys.lambda);
    LqrSolution joint = solve_discounted_lqr(lin.A, lin.B, sys.Q, sys.R, sys.lambda);
    CHECK((ga.K - joint.K).lpNorm<Eigen::Infinity>() < 1e-8);
    CHECK(ga.stable);
}

TEST_CASE("coupling strength drives the block-tree error monotonically") {
    InputTree blocks = parse_tree("[(u1|x1,x2), (u2|x3,x4)]", 4, 2);
    double prev = -1.0;
    for (double eps : {0.0, 0.05, 0.1, 0.2, 0.4}) {
        SystemModel sys = make_system("sep-2di", {{"eps", std::to_string(eps)}});
        LinearModel lin = linearize(sys);
        const double err = value_error_estimate(blocks, lin, sys.Q, sys.R, sys.lambda,
                                                sys.grid.state_axes);
        CHECK(err > prev);
        prev = err;
    }
    CHECK(prev > 1e-4);  // strong coupling is clearly visible
}

TEST_CASE("unstabilizable decomposition is flagged as infinite error") {
    SystemModel sys = r_coupled();
    LinearModel lin = linearize(sys);
    // u1 only sees x2, which it cannot move
    InputTree crossed = parse_tree("[(u1|x2), (u2|x1)]", 2, 2);
    FitnessModel fm(sys);
    DecompositionMetrics dm = fm.evaluate(crossed);
    CHECK(std::isinf(dm.err));
    CHECK(dm.F_err == 1.0);
    CHECK(dm.F == dm.F_comp);
}

TEST_CASE("gain assembly respects the decomposition sparsity") {
    SystemModel sys = make_system("sep-2di", {{"eps", "0.1"}});
    LinearModel lin = linearize(sys);
    InputTree blocks = parse_tree("[(u1|x1,x2), (u2|x3,x4)]", 4, 2);
    GainAssembly ga = decomposed_gains(blocks, lin, sys.Q, sys.R, sys.lambda);
    // u1's row may only read x1, x2; u2's row only x3, x4
    CHECK(ga.K(0, 2) == 0.0);
    CHECK(ga.K(0, 3) == 0.0);
    CHECK(ga.K(1, 0) == 0.0);
    CHECK(ga.K(1, 1) == 0.0);
    CHECK(ga.K(0, 0) != 0.0);
    CHECK(ga.K(1, 2) != 0.0);
}

TEST_CASE("fitness of the undecomposed tree is exactly neutral") {
    for (const char* name : {"toy2", "sep-2di", "lq2d"}) {
        SystemModel sys = make_system(name, {});
        FitnessModel fm(sys);
        DecompositionMetrics dm = fm.evaluate(InputTree::undecomposed(sys.n, sys.m));
        CHECK(dm.err == 0.0);
        CHECK(dm.F_err == 0.0);
        CHECK(dm.F_comp == 1.0);
        CHECK(dm.F == 0.0);
    }
}

TEST_CASE("fitness scaling is monotone and bounded") {
    SystemModel sys = make_system("toy2", {});
    FitnessModel fm(sys);
    double prev_F_err = -1.0;
    double prev_err = -1.0;
    for (const InputTree& t : enumerate_all(2, 2)) {
        DecompositionMetrics dm = fm.evaluate(t);
        CHECK(dm.F_err >= 0.0);
        CHECK(dm.F_err <= 1.0);
        CHECK(dm.F_comp > 0.0);
        CHECK(dm.F_comp <= 1.0);
        CHECK(dm.F == dm.F_err * dm.F_comp);
        if (std::isfinite(dm.err) && dm.err > prev_err) {
            CHECK(dm.F_err >= prev_F_err);  // same ordering as raw error
            prev_err = dm.err;
            prev_F_err = dm.F_err;
        }
    }
}

TEST_CASE("parameter counting follows the published table rule") {
    GridSpec grid;
    grid.state_axes.assign(4, {-1, 1, 31});
    grid.input_axes.assign(2, {-1, 1, 10});
    InputTree blocks = parse_tree("[(u1|x1,x2), (u2|x3,x4)]", 4, 2);
    CHECK(parameter_count(blocks, grid) == 2 * 31 * 31);
    InputTree whole = InputTree::undecomposed(4, 2);
    CHECK(parameter_count(whole, grid) == int64_t(2) * 31 * 31 * 31 * 31);
    // a cascade's upper node still carries the full subtree state
    InputTree casc = parse_tree("[(u1|x1,x2,x3)->[(u2|x4)]]", 4, 2);
    CHECK(parameter_count(casc, grid) == int64_t(1) * 31 * 31 * 31 * 31 + 31);
}

TEST_CASE("compute cost ratio of the undecomposed tree is one") {
    SystemModel sys = make_system("sep-2di", {});
    CHECK(compute_cost_ratio(InputTree::undecomposed(4, 2), sys.grid) == 1.0);
    InputTree blocks = parse_tree("[(u1|x1,x2), (u2|x3,x4)]", 4, 2);
    const double ratio = compute_cost_ratio(blocks, sys.grid);
    CHECK(ratio > 0.0);
    CHECK(ratio < 1.0);
}
