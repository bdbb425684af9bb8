#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace polydec {

struct AxisSpec {
    double lo = -1.0;
    double hi = 1.0;
    int points = 2;

    double step() const { return points > 1 ? (hi - lo) / (points - 1) : 0.0; }
    double value(int i) const { return lo + step() * i; }
    double clamp(double x) const { return x < lo ? lo : (x > hi ? hi : x); }
};

// relative flop weights of one evaluation backup and one per-action backup
struct FlopConstants {
    double eval_backup = 1.0;
    double action_backup = 1.0;
};

struct GridSpec {
    std::vector<AxisSpec> state_axes;  // one per state variable
    std::vector<AxisSpec> input_axes;  // action samples, one per input
    double dt = 0.02;                  // backup time step
    int policy_rounds = 60;            // improvement rounds
    int eval_sweeps = 40;              // evaluation sweeps per round
    double policy_tol = 1e-6;          // max policy-value change to stop
    double lambda_override = -1.0;     // < 0: use the model's discount
    bool decoupled_at_trim = true;     // false: freeze decoupled inputs at 0 instead of u^d
    FlopConstants flops;
};

// Dense row-major lattice (last axis fastest) over a list of axes, with
// clamped multilinear interpolation.
class Lattice {
public:
    Lattice() = default;

    explicit Lattice(std::vector<AxisSpec> axes) : axes_(std::move(axes)) {
        if (axes_.size() > kMaxDims) throw std::invalid_argument("too many lattice axes");
        cells_ = 1;
        strides_.assign(axes_.size(), 1);
        for (size_t d = axes_.size(); d-- > 0;) {
            if (axes_[d].points < 1) throw std::invalid_argument("axis needs at least one point");
            strides_[d] = cells_;
            cells_ *= axes_[d].points;
        }
    }

    const std::vector<AxisSpec>& axes() const { return axes_; }
    int dims() const { return static_cast<int>(axes_.size()); }
    int64_t cells() const { return cells_; }

    void cell_coords(int64_t cell, Eigen::VectorXd& out) const {
        for (size_t d = axes_.size(); d-- > 0;) {
            int64_t i = cell % axes_[d].points;
            cell /= axes_[d].points;
            out(static_cast<long>(d)) = axes_[d].value(static_cast<int>(i));
        }
    }

    // table has `stride` values per cell; interpolates component comp at x,
    // clamping x into the axis boxes
    double interpolate(const std::vector<double>& table, int stride, int comp,
                       const Eigen::VectorXd& x) const {
        const int d = dims();
        int base[kMaxDims];
        double frac[kMaxDims];
        for (int i = 0; i < d; ++i) {
            const AxisSpec& ax = axes_[static_cast<size_t>(i)];
            double t = 0.0;
            if (ax.points > 1) {
                t = (ax.clamp(x(i)) - ax.lo) / ax.step();
                if (t > ax.points - 1) t = ax.points - 1;
                if (t < 0) t = 0;
            }
            int i0 = static_cast<int>(t);
            if (i0 >= ax.points - 1 && ax.points > 1) i0 = ax.points - 2;
            base[i] = i0;
            frac[i] = (ax.points > 1) ? t - i0 : 0.0;
        }
        double acc = 0.0;
        const int corners = 1 << d;
        for (int c = 0; c < corners; ++c) {
            double w = 1.0;
            int64_t idx = 0;
            for (int i = 0; i < d; ++i) {
                const int bit = (c >> i) & 1;
                const AxisSpec& ax = axes_[static_cast<size_t>(i)];
                int gi = base[i] + bit;
                if (gi > ax.points - 1) gi = ax.points - 1;
                w *= bit ? frac[i] : 1.0 - frac[i];
                idx += strides_[static_cast<size_t>(i)] * gi;
            }
            if (w != 0.0) acc += w * table[static_cast<size_t>(idx * stride + comp)];
        }
        return acc;
    }

    static constexpr int kMaxDims = 16;

private:
    std::vector<AxisSpec> axes_;
    std::vector<int64_t> strides_;
    int64_t cells_ = 0;
};

}  // namespace polydec
