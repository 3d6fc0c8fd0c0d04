#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "tl2e/baseline.hpp"
#include "tl2e/rng.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace tl2e;

namespace {

DenseTensor random_tensor(const std::vector<int>& dims, Rng& rng) {
    DenseTensor t(dims);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
    return t;
}

DenseMatrix random_matrix(int rows, int cols, Rng& rng) {
    DenseMatrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
    return m;
}

/// Independent eigendecomposition oracle: cyclic Jacobi sweeps on a symmetric
/// matrix, no library solver involved. Returns eigenvalues descending.
std::vector<double> jacobi_eigenvalues(DenseMatrix a) {
    REQUIRE(a.rows() == a.cols());
    const Eigen::Index n = a.rows();
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-30) break;
        for (Eigen::Index p = 0; p < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                if (a(p, q) == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> ev(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) ev[static_cast<std::size_t>(i)] = a(i, i);
    std::sort(ev.begin(), ev.end(), std::greater<>());
    return ev;
}

double rel_error(const DenseTensor& a, const DenseTensor& b) {
    return frobenius_norm(subtract(a, b)) / frobenius_norm(b);
}

DenseTensor exact_tucker_tensor(const std::vector<int>& dims, const std::vector<int>& rank,
                                Rng& rng) {
    TuckerFactors t;
    t.core = random_tensor(rank, rng);
    for (std::size_t n = 0; n < dims.size(); ++n)
        t.factors.push_back(random_matrix(dims[n], rank[n], rng));
    return tucker_to_full(t);
}

}  // namespace

TEST_CASE("truncated_svd on a diagonal matrix") {
    DenseMatrix d = DenseMatrix::Zero(3, 3);
    d(0, 0) = 3.0;
    d(1, 1) = 2.0;
    d(2, 2) = 1.0;
    const SvdResult r = truncated_svd(d, 2);
    CHECK(r.singular_values[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(r.singular_values[1] == doctest::Approx(2.0).epsilon(1e-12));
    const DenseMatrix approx = r.u * r.singular_values.asDiagonal() * r.v.transpose();
    CHECK((d - approx).norm() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("truncated_svd recovers a rank-1 matrix exactly") {
    Rng rng(5);
    const DenseMatrix u = random_matrix(6, 1, rng);
    const DenseMatrix v = random_matrix(4, 1, rng);
    const DenseMatrix m = u * v.transpose();
    const SvdResult r = truncated_svd(m, 1);
    CHECK(r.singular_values[0] == doctest::Approx(u.norm() * v.norm()).epsilon(1e-12));
    const DenseMatrix approx = r.u * r.singular_values.asDiagonal() * r.v.transpose();
    CHECK((m - approx).norm() < 1e-12 * m.norm());
}

TEST_CASE("truncated_svd against the Jacobi eigendecomposition oracle") {
    Rng rng(9);
    const DenseMatrix m = random_matrix(6, 4, rng);
    const SvdResult r = truncated_svd(m, 3);

    const std::vector<double> ev = jacobi_eigenvalues(m.transpose() * m);
    for (int i = 0; i < 3; ++i)
        CHECK(r.singular_values[i] ==
              doctest::Approx(std::sqrt(ev[static_cast<std::size_t>(i)])).epsilon(1e-10));

    // rank-3 reconstruction error equals the trailing singular value
    const DenseMatrix approx = r.u * r.singular_values.asDiagonal() * r.v.transpose();
    CHECK((m - approx).norm() == doctest::Approx(std::sqrt(ev[3])).epsilon(1e-8));

    // orthonormal columns on both sides
    CHECK((r.u.transpose() * r.u - DenseMatrix::Identity(3, 3)).norm() < 1e-10);
    CHECK((r.v.transpose() * r.v - DenseMatrix::Identity(3, 3)).norm() < 1e-10);
}

TEST_CASE("truncated_svd fat-matrix path agrees with the direct path") {
    Rng rng(19);
    const DenseMatrix m = random_matrix(5, 60, rng);  // triggers the Gram route
    const SvdResult r = truncated_svd(m, 4);
    Eigen::JacobiSVD<DenseMatrix> full(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    for (int i = 0; i < 4; ++i)
        CHECK(r.singular_values[i] == doctest::Approx(full.singularValues()[i]).epsilon(1e-9));
    CHECK((r.u.transpose() * r.u - DenseMatrix::Identity(4, 4)).norm() < 1e-9);
    CHECK((r.v.transpose() * r.v - DenseMatrix::Identity(4, 4)).norm() < 1e-9);
    const DenseMatrix approx = r.u * r.singular_values.asDiagonal() * r.v.transpose();
    const DenseMatrix direct = full.matrixU().leftCols(4) *
                               full.singularValues().head(4).asDiagonal() *
                               full.matrixV().leftCols(4).transpose();
    CHECK((approx - direct).norm() < 1e-8 * direct.norm());
}

TEST_CASE("truncated_svd validates its inputs") {
    Rng rng(1);
    const DenseMatrix m = random_matrix(4, 3, rng);
    CHECK_THROWS_AS(truncated_svd(m, 0), std::invalid_argument);
    CHECK_THROWS_AS(truncated_svd(m, 4), std::invalid_argument);
    DenseMatrix bad = m;
    bad(1, 1) = std::nan("");
    CHECK_THROWS_AS(truncated_svd(bad, 2), std::invalid_argument);
}

TEST_CASE("truncated_svd is deterministic under the sign convention") {
    Rng rng(33);
    const DenseMatrix m = random_matrix(8, 5, rng);
    const SvdResult a = truncated_svd(m, 3);
    const SvdResult b = truncated_svd(m, 3);
    CHECK((a.u - b.u).norm() == 0.0);
    for (Eigen::Index j = 0; j < a.u.cols(); ++j) {
        Eigen::Index imax = 0;
        a.u.col(j).cwiseAbs().maxCoeff(&imax);
        CHECK(a.u(imax, j) > 0.0);
    }
}

TEST_CASE("hosvd at full rank reconstructs the tensor") {
    Rng rng(21);
    const DenseTensor x = random_tensor({4, 5, 3}, rng);
    const TuckerFactors t = hosvd(x, {4, 5, 3});
    CHECK(rel_error(tucker_to_full(t), x) < 1e-12);
    for (const auto& a : t.factors)
        CHECK((a.transpose() * a - DenseMatrix::Identity(a.cols(), a.cols())).norm() < 1e-10);
}

TEST_CASE("hosvd recovers a rank-1 tensor at rank (1,1,1)") {
    Rng rng(25);
    KruskalFactors k;
    k.weights = Vector::Ones(1);
    k.factors = {random_matrix(5, 1, rng), random_matrix(4, 1, rng), random_matrix(6, 1, rng)};
    const DenseTensor x = kruskal_to_full(k);
    const TuckerFactors t = hosvd(x, {1, 1, 1});
    CHECK(rel_error(tucker_to_full(t), x) < 1e-12);
}

TEST_CASE("hosvd exactly recovers an exact low-Tucker-rank tensor") {
    Rng rng(27);
    const DenseTensor x = exact_tucker_tensor({6, 6, 6}, {2, 2, 2}, rng);
    const TuckerFactors t = hosvd(x, {2, 2, 2});
    CHECK(rel_error(tucker_to_full(t), x) < 1e-10);
}

TEST_CASE("hosvd rejects out-of-range ranks") {
    Rng rng(2);
    const DenseTensor x = random_tensor({3, 3, 3}, rng);
    CHECK_THROWS_AS(hosvd(x, {4, 1, 1}), std::invalid_argument);
    CHECK_THROWS_AS(hosvd(x, {1, 1}), std::invalid_argument);
}

TEST_CASE("hooi converges on exact low-rank input within two sweeps") {
    Rng rng(31);
    const DenseTensor x = exact_tucker_tensor({6, 6, 6}, {2, 2, 2}, rng);
    HooiConfig cfg;
    cfg.rank = {2, 2, 2};
    cfg.max_iters = 2;
    const TuckerFactors t = hooi(x, cfg);
    CHECK(rel_error(tucker_to_full(t), x) < 1e-10);
}

TEST_CASE("hooi at full rank is exact") {
    Rng rng(35);
    const DenseTensor x = random_tensor({4, 3, 5}, rng);
    HooiConfig cfg;
    cfg.rank = {4, 3, 5};
    const TuckerFactors t = hooi(x, cfg);
    CHECK(rel_error(tucker_to_full(t), x) < 1e-12);
}

TEST_CASE("hooi never fits worse than hosvd and improves monotonically") {
    Rng rng(39);
    for (int trial = 0; trial < 4; ++trial) {
        DenseTensor x = exact_tucker_tensor({7, 6, 5}, {3, 2, 2}, rng);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += 0.3 * rng.normal();

        const std::vector<int> rank{2, 2, 2};  // deliberately tight
        const TuckerFactors ts = hosvd(x, rank);
        const double fit_hosvd = frobenius_norm(subtract(x, tucker_to_full(ts)));

        HooiConfig cfg;
        cfg.rank = rank;
        cfg.fit_tolerance = 0.0;
        cfg.max_iters = 1;
        double prev = fit_hosvd;
        TuckerFactors t = ts;
        for (int sweep = 0; sweep < 6; ++sweep) {
            t = hooi(x, cfg, t);
            const double fit = frobenius_norm(subtract(x, tucker_to_full(t)));
            CHECK(fit <= prev + 1e-12);
            prev = fit;
        }
        CHECK(prev <= fit_hosvd + 1e-12);
        for (const auto& a : t.factors)
            CHECK((a.transpose() * a - DenseMatrix::Identity(a.cols(), a.cols())).norm() < 1e-10);
    }
}

TEST_CASE("hooi rejects non-finite input") {
    Rng rng(3);
    DenseTensor x = random_tensor({3, 3, 3}, rng);
    x[5] = std::nan("");
    HooiConfig cfg;
    cfg.rank = {2, 2, 2};
    CHECK_THROWS_AS(hooi(x, cfg), std::invalid_argument);
}
