#pragma once

#include "tl2e/baseline.hpp"
#include "tl2e/lbfgsb.hpp"
#include "tl2e/tensor.hpp"

#include <cmath>
#include <span>

namespace tl2e {

/// Data tensor X with a binary observation mask W; masked-out (W=0) value
/// slots are ignored by every objective and gradient.
struct MaskedTensor {
    DenseTensor values;
    DenseTensor mask;

    void validate() const;
    std::size_t observed_count() const;
};

/// Full mask over x.
MaskedTensor fully_observed(DenseTensor x);

/// Fitted model: Tucker factors with the core already on the original data
/// scale, the log-precision eta (tau = e^eta refers to the rescaled data, see
/// scale_s), and the mean-absolute-deviation scale recorded at fit time.
struct L2EModel {
    TuckerFactors factors;
    double eta = 0.0;
    double scale_s = 1.0;
};

enum class InitMethod { hosvd, hooi };

struct FitConfig {
    std::vector<int> rank;
    double eta_max = std::log(50.0);
    double lambda = 1e-8;          // ridge on the low-rank tensor, scaled problem
    double eta0 = std::log(0.01);
    InitMethod init_method = InitMethod::hosvd;
    SolverConfig solver;
};

// ---- criterion --------------------------------------------------------------

/// Univariate L2 criterion for a normal location/precision model:
/// h(mu, tau) = tau/(2*sqrt(pi)) - (tau/n)*sqrt(2/pi) * sum_i exp(-tau^2 (x_i - mu)^2 / 2).
double univariate_l2e(std::span<const double> xs, double mu, double tau);

/// Masked tensor criterion plus ridge:
/// h_W(L, tau) = sum(W) tau/(2 sqrt(pi)) - sqrt(2/pi) tau sum(W * exp(-tau^2 (X-L)^2 / 2))
/// with tau = e^eta, plus (lambda/2) ||L||_F^2.
double l2e_objective(const MaskedTensor& data, const DenseTensor& l, double eta, double lambda);

/// Lower bound of the criterion over all L and eta <= eta_max (each exp term
/// is at most 1 and the per-entry coefficient is negative).
double l2e_lower_bound(double sum_w, double eta_max);

struct L2EGradient {
    DenseTensor core;
    std::vector<DenseMatrix> factors;
    double eta = 0.0;
};

/// Analytic gradients of l2e_objective at L = tucker_to_full(factors) with
/// respect to the core, each factor matrix, and eta.
L2EGradient l2e_gradient(const MaskedTensor& data, const TuckerFactors& factors, double eta,
                         double lambda);

// ---- parameter packing -------------------------------------------------------

/// Shapes needed to map between (factors, eta) and a flat parameter vector.
/// Packing order: vec(core), vec(A^(1)), ..., vec(A^(N)), eta last.
struct PackShapes {
    std::vector<int> dims;
    std::vector<int> rank;

    Eigen::Index packed_length() const;
};

Vector pack(const TuckerFactors& factors, double eta);
void unpack(const Vector& x, const PackShapes& shapes, TuckerFactors& factors, double& eta);

/// Objective oracle over the packed parameters for the given (already scaled)
/// data. Every evaluation is checked against l2e_lower_bound.
ObjectiveOracle make_l2e_oracle(const MaskedTensor& data, const PackShapes& shapes, double lambda,
                                double eta_max);

/// Box for the packed vector: eta (last coordinate) bounded above by eta_max,
/// everything else free.
BoxBounds l2e_bounds(const PackShapes& shapes, double eta_max);

// ---- fitting ----------------------------------------------------------------

struct FitReport {
    L2EModel model;
    SolveStatus status = SolveStatus::converged;
    int iterations = 0;
    double objective = 0.0;            // final value on the scaled problem
    double projected_grad_norm = 0.0;
};

/// Full fitting pipeline: record the MAD s of the observed entries, rescale to
/// MAD 0.1, impute missing entries with the observed mean for initialization
/// only, initialize via HOSVD or HOOI, then minimize the criterion with the
/// bound-constrained solver from eta0. The returned core is multiplied back by
/// 10s so predict() is on the original scale.
FitReport fit_detailed(const MaskedTensor& data, const FitConfig& cfg);

L2EModel fit(const MaskedTensor& data, const FitConfig& cfg);

/// Materialize the fitted low-rank tensor on the original data scale.
DenseTensor predict(const L2EModel& model);

}  // namespace tl2e
