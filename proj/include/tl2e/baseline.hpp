#pragma once

#include "tl2e/tensor.hpp"

#include <optional>

namespace tl2e {

struct SvdResult {
    DenseMatrix u;        // rows x k, orthonormal columns
    Vector singular_values;  // length k, nonincreasing
    DenseMatrix v;        // cols x k, orthonormal columns
};

/// Leading-k singular triplets of m, 1 <= k <= min(rows, cols).
/// u * diag(sigma) * v^T is the best rank-k approximation in Frobenius norm.
/// Singular vectors are sign-fixed (largest-magnitude entry of each left
/// vector positive) so results are deterministic.
SvdResult truncated_svd(const DenseMatrix& m, int k);

struct HooiConfig {
    int max_iters = 50;
    double fit_tolerance = 1e-6;  // stop when the relative-fit change per sweep drops below this
    std::vector<int> rank;
};

/// Factor n = leading r_n left singular vectors of the mode-n matricization;
/// core = X x_1 U^(1)^T ... x_N U^(N)^T.
TuckerFactors hosvd(const DenseTensor& x, const std::vector<int>& rank);

/// Higher-order orthogonal iteration (Tucker-ALS). Defaults to hosvd(x, rank)
/// as the starting point; the Frobenius fit is nonincreasing across sweeps.
TuckerFactors hooi(const DenseTensor& x, const HooiConfig& cfg,
                   std::optional<TuckerFactors> init = std::nullopt);

}  // namespace tl2e
