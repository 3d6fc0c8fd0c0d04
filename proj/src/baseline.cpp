#include "tl2e/baseline.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <stdexcept>
#include <string>

namespace tl2e {

namespace {

void fix_signs(DenseMatrix& u, DenseMatrix& v) {
    for (Eigen::Index j = 0; j < u.cols(); ++j) {
        Eigen::Index imax = 0;
        u.col(j).cwiseAbs().maxCoeff(&imax);
        if (u(imax, j) < 0.0) {
            u.col(j) = -u.col(j);
            if (v.cols() > j) v.col(j) = -v.col(j);
        }
    }
}

/// Thin SVD via eigendecomposition of the small Gram matrix. Used when one
/// side is much shorter than the other (the usual shape of a matricization);
/// falls back to a direct SVD when trailing singular values are too small for
/// the Gram route to resolve the requested k triplets.
bool gram_svd(const DenseMatrix& m, int k, SvdResult& out) {
    const bool wide = m.cols() >= m.rows();
    const DenseMatrix gram = wide ? DenseMatrix(m * m.transpose()) : DenseMatrix(m.transpose() * m);
    Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(gram);
    if (eig.info() != Eigen::Success) return false;
    const Eigen::Index n = gram.rows();
    // eigenvalues ascend; take the top k
    Vector sigma(k);
    DenseMatrix q(n, k);
    for (int j = 0; j < k; ++j) {
        const Eigen::Index src = n - 1 - j;
        sigma[j] = std::sqrt(std::max(eig.eigenvalues()[src], 0.0));
        q.col(j) = eig.eigenvectors().col(src);
    }
    const double cutoff = sigma[0] * 1e-7;
    if (sigma[k - 1] <= cutoff) return false;  // other side would lose accuracy
    DenseMatrix other = (wide ? DenseMatrix(m.transpose() * q) : DenseMatrix(m * q));
    for (int j = 0; j < k; ++j) other.col(j) /= sigma[j];
    if (wide) {
        out.u = std::move(q);
        out.v = std::move(other);
    } else {
        out.u = std::move(other);
        out.v = std::move(q);
    }
    out.singular_values = std::move(sigma);
    return true;
}

}  // namespace

SvdResult truncated_svd(const DenseMatrix& m, int k) {
    const Eigen::Index minmn = std::min(m.rows(), m.cols());
    if (k < 1 || k > minmn)
        throw std::invalid_argument("truncated_svd: k=" + std::to_string(k) +
                                    " out of range for " + std::to_string(m.rows()) + "x" +
                                    std::to_string(m.cols()) + " matrix");
    if (!m.allFinite()) throw std::invalid_argument("truncated_svd: non-finite entries");

    SvdResult out;
    const Eigen::Index maxmn = std::max(m.rows(), m.cols());
    if (maxmn >= 4 * minmn && gram_svd(m, k, out)) {
        fix_signs(out.u, out.v);
        return out;
    }

    Eigen::BDCSVD<DenseMatrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    out.u = svd.matrixU().leftCols(k);
    out.singular_values = svd.singularValues().head(k);
    out.v = svd.matrixV().leftCols(k);
    fix_signs(out.u, out.v);
    return out;
}

namespace {

void check_rank(const DenseTensor& x, const std::vector<int>& rank) {
    if (static_cast<int>(rank.size()) != x.order())
        throw std::invalid_argument("rank tuple length does not match tensor order");
    for (int n = 0; n < x.order(); ++n) {
        const int r = rank[static_cast<std::size_t>(n)];
        if (r < 1 || r > x.dim(n))
            throw std::invalid_argument("rank " + std::to_string(r) + " out of range for mode " +
                                        std::to_string(n + 1) + " (dimension " +
                                        std::to_string(x.dim(n)) + ")");
    }
}

DenseTensor project_core(const DenseTensor& x, const std::vector<DenseMatrix>& factors) {
    DenseTensor g = x;
    for (std::size_t n = 0; n < factors.size(); ++n)
        g = n_mode_product(g, factors[n].transpose(), static_cast<int>(n));
    return g;
}

}  // namespace

TuckerFactors hosvd(const DenseTensor& x, const std::vector<int>& rank) {
    check_rank(x, rank);
    TuckerFactors t;
    t.factors.resize(static_cast<std::size_t>(x.order()));
    for (int n = 0; n < x.order(); ++n) {
        const DenseMatrix unf = matricize(x, n);
        t.factors[static_cast<std::size_t>(n)] =
            truncated_svd(unf, rank[static_cast<std::size_t>(n)]).u;
    }
    t.core = project_core(x, t.factors);
    return t;
}

TuckerFactors hooi(const DenseTensor& x, const HooiConfig& cfg,
                   std::optional<TuckerFactors> init) {
    check_rank(x, cfg.rank);
    if (cfg.max_iters < 1) throw std::invalid_argument("hooi: max_iters must be >= 1");
    if (!x.vec().allFinite()) throw std::invalid_argument("hooi: non-finite input");

    TuckerFactors t = init ? std::move(*init) : hosvd(x, cfg.rank);
    t.validate();
    if (t.ranks() != cfg.rank) throw std::invalid_argument("hooi: init rank mismatch");

    const double norm_x = frobenius_norm(x);
    double prev_fit = frobenius_norm(subtract(x, tucker_to_full(t))) / norm_x;

    for (int sweep = 0; sweep < cfg.max_iters; ++sweep) {
        for (int n = 0; n < x.order(); ++n) {
            // project along every mode but n, then refresh factor n
            DenseTensor y = x;
            for (int k = 0; k < x.order(); ++k) {
                if (k == n) continue;
                y = n_mode_product(y, t.factors[static_cast<std::size_t>(k)].transpose(), k);
            }
            t.factors[static_cast<std::size_t>(n)] =
                truncated_svd(matricize(y, n), cfg.rank[static_cast<std::size_t>(n)]).u;
        }
        t.core = project_core(x, t.factors);
        const double fit = frobenius_norm(subtract(x, tucker_to_full(t))) / norm_x;
        if (prev_fit - fit < cfg.fit_tolerance) {
            prev_fit = fit;
            break;
        }
        prev_fit = fit;
    }
    return t;
}

}  // namespace tl2e
