#pragma once

#include "tl2e/tensor.hpp"

#include <functional>
#include <string>

namespace tl2e {

/// Per-coordinate box; +-infinity marks an unbounded side.
struct BoxBounds {
    Vector lower;
    Vector upper;

    static BoxBounds unbounded(int n);
    void validate(Eigen::Index n) const;
    Vector clamp(const Vector& x) const;
};

struct SolverConfig {
    int memory = 10;               // curvature pairs kept
    int max_iters = 1000;
    double grad_tolerance = 1e-8;  // stop on ||projected gradient||_inf
    double f_tolerance = 1e-12;    // stop on relative objective change
    int max_line_search_steps = 30;
};

/// Callable producing (value, gradient) at a point. grad is null for
/// value-only evaluations. Must be deterministic for a fixed input.
using ObjectiveOracle = std::function<double(const Vector& x, Vector* grad)>;

enum class SolveStatus { converged, max_iters, line_search_failure };

std::string to_string(SolveStatus s);

struct SolveResult {
    Vector x_star;                   // clamped into the box
    double f_star = 0.0;
    double projected_grad_norm = 0.0;
    int iterations = 0;
    SolveStatus status = SolveStatus::converged;
};

/// Bound-constrained limited-memory quasi-Newton minimization. Each iteration
/// finds the generalized Cauchy point along the projected steepest-descent
/// path, minimizes the limited-memory quadratic model over the free variables,
/// and line-searches the resulting direction under strong Wolfe conditions.
/// Curvature pairs with s'y <= eps*|s||y| are skipped. With no finite bounds
/// the search direction reduces to the classic two-loop-recursion step.
SolveResult minimize(const ObjectiveOracle& oracle, Vector x0, const BoxBounds& bounds,
                     const SolverConfig& cfg);

/// Central-difference gradient, (f(x+h e_i) - f(x-h e_i)) / 2h per coordinate.
Vector finite_difference_gradient(const ObjectiveOracle& oracle, const Vector& x, double h);

}  // namespace tl2e
