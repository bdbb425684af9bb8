#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "polydec/grid.hpp"

namespace polydec {

// flat key=value overrides parsed from config files / --config flags
using KV = std::map<std::string, std::string>;

double kv_num(const KV& kv, const std::string& key, double fallback);
int kv_int(const KV& kv, const std::string& key, int fallback);
std::string kv_str(const KV& kv, const std::string& key, const std::string& fallback);

struct SystemModel {
    std::string name;
    int n = 0;
    int m = 0;
    std::vector<std::string> state_names, input_names;

    // dx = rate(x, u); must be reentrant
    std::function<void(const Eigen::VectorXd&, const Eigen::VectorXd&, Eigen::VectorXd&)> rate;
    // optional analytic jacobians at (x, u)
    std::function<void(const Eigen::VectorXd&, const Eigen::VectorXd&, Eigen::MatrixXd&,
                       Eigen::MatrixXd&)>
        jacobians;
    // optional simulation guard; returns nullptr if the state is fine,
    // otherwise a short reason ("leg contact broken", ...)
    std::function<const char*(const Eigen::VectorXd&)> guard;

    Eigen::VectorXd x_goal, u_trim, u_min, u_max;
    Eigen::MatrixXd Q, R;
    double lambda = 1.0;
    double sim_dt = 0.01;
    GridSpec grid;  // state_axes double as the state box S

    Eigen::VectorXd f(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
        Eigen::VectorXd dx(n);
        rate(x, u, dx);
        return dx;
    }
    Eigen::VectorXd saturate(const Eigen::VectorXd& u) const {
        return u.cwiseMax(u_min).cwiseMin(u_max);
    }
    double trim_residual() const { return f(x_goal, u_trim).lpNorm<Eigen::Infinity>(); }
    // running cost in deviation coordinates
    double cost(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
        Eigen::VectorXd dx = x - x_goal, du = u - u_trim;
        return dx.dot(Q * dx) + du.dot(R * du);
    }
};

// registered names: biped, manip4, quadcopter, sep-2di, sep-3p, pend1,
// toy2, toy33, scalar1d, lq2d
SystemModel make_system(const std::string& name, const KV& overrides = {});
std::vector<std::string> list_systems();

// total mechanical energy of the manipulator, for conservation checks
double manip4_energy(const Eigen::VectorXd& x);
// rotor forces (F1..F4) realizing collective/differential thrusts (T,Fphi,Ftheta,Fpsi)
Eigen::Vector4d quad_rotor_forces(const Eigen::VectorXd& u);

}  // namespace polydec
