#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace tl2e {

/// Dense matrices are Eigen column-major doubles; rows()/cols()/data() expose
/// the first-index-fastest layout shared with DenseTensor.
using DenseMatrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Dense N-way real tensor, N >= 1. Linear layout has the first index varying
/// fastest, so the flat data vector equals vec(X): the stacked columns of the
/// mode-1 matricization. Indices are 0-based in code.
class DenseTensor {
public:
    DenseTensor() = default;

    /// Zero tensor of the given shape.
    explicit DenseTensor(std::vector<int> dims);

    DenseTensor(std::vector<int> dims, std::vector<double> values);

    int order() const { return static_cast<int>(dims_.size()); }
    const std::vector<int>& dims() const { return dims_; }
    int dim(int mode) const { return dims_[static_cast<std::size_t>(mode)]; }
    std::size_t size() const { return values_.size(); }

    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }
    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    double operator[](std::size_t linear) const { return values_[linear]; }
    double& operator[](std::size_t linear) { return values_[linear]; }

    /// Linear offset of a multi-index: sum_k idx[k] * prod_{k'<k} I_{k'}.
    std::size_t offset(std::span<const int> idx) const;
    double at(std::span<const int> idx) const { return values_[offset(idx)]; }
    double& at(std::span<const int> idx) { return values_[offset(idx)]; }

    /// Flat view as an Eigen vector.
    Eigen::Map<const Vector> vec() const {
        return {values_.data(), static_cast<Eigen::Index>(values_.size())};
    }
    Eigen::Map<Vector> vec() {
        return {values_.data(), static_cast<Eigen::Index>(values_.size())};
    }

    bool same_dims(const DenseTensor& other) const { return dims_ == other.dims_; }

private:
    std::vector<int> dims_;
    std::vector<double> values_;
};

/// Tucker parameterization: core of shape (r_1,...,r_N) plus factor matrices
/// A^(n) of shape I_n x r_n. Orthonormal columns are not required.
struct TuckerFactors {
    DenseTensor core;
    std::vector<DenseMatrix> factors;

    std::vector<int> ranks() const { return core.dims(); }
    std::vector<int> dims() const;

    /// Throws std::invalid_argument if factor n does not have r_n columns.
    void validate() const;
};

/// Kruskal (CP) parameterization: weights gamma plus factor matrices sharing
/// a common column count r.
struct KruskalFactors {
    Vector weights;
    std::vector<DenseMatrix> factors;

    int rank() const { return static_cast<int>(weights.size()); }
    void validate() const;
};

// ---- reshaping ------------------------------------------------------------

/// Mode-n matricization (0-based mode): I_n x prod_{k != n} I_k, columns are
/// the mode-n fibers in lexicographic order of the remaining indices with
/// earlier modes varying fastest.
DenseMatrix matricize(const DenseTensor& x, int mode);

/// Inverse of matricize for the given shape and mode.
DenseTensor tensorize(const DenseMatrix& m, std::vector<int> dims, int mode);

// ---- products --------------------------------------------------------------

/// n-mode product X x_n A; cols(A) must equal I_n. Satisfies
/// matricize(result, n) == A * matricize(X, n).
DenseTensor n_mode_product(const DenseTensor& x, const DenseMatrix& a, int mode);

/// Elementwise product of same-shape tensors.
DenseTensor hadamard(const DenseTensor& x, const DenseTensor& y);

DenseTensor add(const DenseTensor& x, const DenseTensor& y);
DenseTensor subtract(const DenseTensor& x, const DenseTensor& y);

// ---- elementwise maps and reductions ---------------------------------------

DenseTensor elementwise(const DenseTensor& x, const std::function<double(double)>& f);

/// X^{*2}: entrywise square.
DenseTensor squared(const DenseTensor& x);

/// Entrywise exponential.
DenseTensor exp(const DenseTensor& x);

/// a*X + b applied entrywise.
DenseTensor affine(const DenseTensor& x, double a, double b);

double sum(const DenseTensor& x);
double frobenius_norm(const DenseTensor& x);
double l1_norm(const DenseTensor& x);

// ---- reconstruction ---------------------------------------------------------

/// G x_1 A^(1) x_2 ... x_N A^(N).
DenseTensor tucker_to_full(const TuckerFactors& t);

/// sum_i gamma_i a_i^(1) o ... o a_i^(N); equals tucker_to_full with a
/// superdiagonal core diag(gamma).
DenseTensor kruskal_to_full(const KruskalFactors& k);

/// Superdiagonal core of shape (r,...,r) with the weights on the diagonal.
DenseTensor superdiagonal_core(const Vector& weights, int order);

}  // namespace tl2e
