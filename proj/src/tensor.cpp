#include "tl2e/tensor.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace tl2e {

namespace {

std::size_t checked_product(const std::vector<int>& dims) {
    if (dims.empty()) throw std::invalid_argument("tensor order must be >= 1");
    std::size_t p = 1;
    for (int d : dims) {
        if (d < 1) throw std::invalid_argument("tensor dimensions must be >= 1");
        p *= static_cast<std::size_t>(d);
    }
    return p;
}

void check_mode(const DenseTensor& x, int mode) {
    if (mode < 0 || mode >= x.order())
        throw std::invalid_argument("mode " + std::to_string(mode + 1) +
                                    " out of range for order " + std::to_string(x.order()));
}

/// Product of dims strictly before `mode` (the stride of the mode index).
std::size_t stride_of(const std::vector<int>& dims, int mode) {
    std::size_t s = 1;
    for (int k = 0; k < mode; ++k) s *= static_cast<std::size_t>(dims[static_cast<std::size_t>(k)]);
    return s;
}

}  // namespace

DenseTensor::DenseTensor(std::vector<int> dims)
    : dims_(std::move(dims)), values_(checked_product(dims_), 0.0) {}

DenseTensor::DenseTensor(std::vector<int> dims, std::vector<double> values)
    : dims_(std::move(dims)), values_(std::move(values)) {
    if (checked_product(dims_) != values_.size())
        throw std::invalid_argument("value count does not match dimension product");
}

std::size_t DenseTensor::offset(std::span<const int> idx) const {
    if (idx.size() != dims_.size()) throw std::invalid_argument("index order mismatch");
    std::size_t off = 0, stride = 1;
    for (std::size_t k = 0; k < dims_.size(); ++k) {
        if (idx[k] < 0 || idx[k] >= dims_[k]) throw std::out_of_range("tensor index out of range");
        off += static_cast<std::size_t>(idx[k]) * stride;
        stride *= static_cast<std::size_t>(dims_[k]);
    }
    return off;
}

std::vector<int> TuckerFactors::dims() const {
    std::vector<int> d(factors.size());
    for (std::size_t n = 0; n < factors.size(); ++n) d[n] = static_cast<int>(factors[n].rows());
    return d;
}

void TuckerFactors::validate() const {
    if (static_cast<int>(factors.size()) != core.order())
        throw std::invalid_argument("factor count does not match core order");
    for (std::size_t n = 0; n < factors.size(); ++n) {
        if (factors[n].cols() != core.dim(static_cast<int>(n)))
            throw std::invalid_argument("factor " + std::to_string(n + 1) +
                                        " column count does not match core dimension");
        if (factors[n].rows() < 1) throw std::invalid_argument("factor with no rows");
    }
}

void KruskalFactors::validate() const {
    if (factors.empty()) throw std::invalid_argument("Kruskal form needs at least one factor");
    for (std::size_t n = 0; n < factors.size(); ++n) {
        if (factors[n].cols() != weights.size())
            throw std::invalid_argument("factor " + std::to_string(n + 1) +
                                        " column count does not match weight count");
    }
}

DenseMatrix matricize(const DenseTensor& x, int mode) {
    check_mode(x, mode);
    const std::size_t s = stride_of(x.dims(), mode);           // prod of dims before mode
    const std::size_t rows = static_cast<std::size_t>(x.dim(mode));
    const std::size_t cols = x.size() / rows;
    DenseMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    const std::size_t block = s * rows;
    const double* src = x.data();
    // linear offset p = a + i*s + b*s*rows with a < s; the column index packs
    // (a, b) as a + b*s, which is exactly the lexicographic fiber order
    for (std::size_t p = 0; p < x.size(); ++p) {
        const std::size_t a = p % s;
        const std::size_t i = (p / s) % rows;
        const std::size_t b = p / block;
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a + b * s)) = src[p];
    }
    return m;
}

DenseTensor tensorize(const DenseMatrix& m, std::vector<int> dims, int mode) {
    const std::size_t total = checked_product(dims);
    if (mode < 0 || mode >= static_cast<int>(dims.size()))
        throw std::invalid_argument("mode out of range");
    const std::size_t rows = static_cast<std::size_t>(dims[static_cast<std::size_t>(mode)]);
    if (static_cast<std::size_t>(m.rows()) != rows ||
        static_cast<std::size_t>(m.cols()) != total / rows)
        throw std::invalid_argument("matrix shape inconsistent with target dims and mode");
    DenseTensor x(std::move(dims));
    const std::size_t s = stride_of(x.dims(), mode);
    const std::size_t block = s * rows;
    double* dst = x.data();
    for (std::size_t p = 0; p < x.size(); ++p) {
        const std::size_t a = p % s;
        const std::size_t i = (p / s) % rows;
        const std::size_t b = p / block;
        dst[p] = m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a + b * s));
    }
    return x;
}

DenseTensor n_mode_product(const DenseTensor& x, const DenseMatrix& a, int mode) {
    check_mode(x, mode);
    if (a.cols() != x.dim(mode))
        throw std::invalid_argument("matrix columns (" + std::to_string(a.cols()) +
                                    ") do not match tensor mode dimension (" +
                                    std::to_string(x.dim(mode)) + ")");
    std::vector<int> out_dims = x.dims();
    out_dims[static_cast<std::size_t>(mode)] = static_cast<int>(a.rows());
    // [X x_n A]_(n) = A X_(n)
    DenseMatrix prod = a * matricize(x, mode);
    return tensorize(prod, std::move(out_dims), mode);
}

DenseTensor hadamard(const DenseTensor& x, const DenseTensor& y) {
    if (!x.same_dims(y)) throw std::invalid_argument("hadamard: shape mismatch");
    DenseTensor out = x;
    const double* ys = y.data();
    double* os = out.data();
    for (std::size_t i = 0; i < out.size(); ++i) os[i] *= ys[i];
    return out;
}

DenseTensor add(const DenseTensor& x, const DenseTensor& y) {
    if (!x.same_dims(y)) throw std::invalid_argument("add: shape mismatch");
    DenseTensor out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[i];
    return out;
}

DenseTensor subtract(const DenseTensor& x, const DenseTensor& y) {
    if (!x.same_dims(y)) throw std::invalid_argument("subtract: shape mismatch");
    DenseTensor out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= y[i];
    return out;
}

DenseTensor elementwise(const DenseTensor& x, const std::function<double(double)>& f) {
    DenseTensor out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(out[i]);
    return out;
}

DenseTensor squared(const DenseTensor& x) {
    DenseTensor out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= out[i];
    return out;
}

DenseTensor exp(const DenseTensor& x) {
    DenseTensor out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(out[i]);
    return out;
}

DenseTensor affine(const DenseTensor& x, double a, double b) {
    DenseTensor out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * out[i] + b;
    return out;
}

double sum(const DenseTensor& x) {
    long double acc = 0.0L;
    for (std::size_t i = 0; i < x.size(); ++i) acc += x[i];
    return static_cast<double>(acc);
}

double frobenius_norm(const DenseTensor& x) {
    long double acc = 0.0L;
    for (std::size_t i = 0; i < x.size(); ++i) acc += static_cast<long double>(x[i]) * x[i];
    return static_cast<double>(std::sqrt(acc));
}

double l1_norm(const DenseTensor& x) {
    long double acc = 0.0L;
    for (std::size_t i = 0; i < x.size(); ++i) acc += std::fabs(x[i]);
    return static_cast<double>(acc);
}

DenseTensor tucker_to_full(const TuckerFactors& t) {
    t.validate();
    DenseTensor out = t.core;
    for (std::size_t n = 0; n < t.factors.size(); ++n)
        out = n_mode_product(out, t.factors[n], static_cast<int>(n));
    return out;
}

DenseTensor superdiagonal_core(const Vector& weights, int order) {
    if (order < 1) throw std::invalid_argument("order must be >= 1");
    const int r = static_cast<int>(weights.size());
    DenseTensor core(std::vector<int>(static_cast<std::size_t>(order), r));
    std::size_t stride = 0, step = 1;
    for (int k = 0; k < order; ++k) {
        stride += step;
        step *= static_cast<std::size_t>(r);
    }
    for (int i = 0; i < r; ++i) core[static_cast<std::size_t>(i) * stride] = weights[i];
    return core;
}

DenseTensor kruskal_to_full(const KruskalFactors& k) {
    k.validate();
    const int order = static_cast<int>(k.factors.size());
    std::vector<int> dims(static_cast<std::size_t>(order));
    for (int n = 0; n < order; ++n) dims[static_cast<std::size_t>(n)] = static_cast<int>(k.factors[static_cast<std::size_t>(n)].rows());
    DenseTensor out(dims);
    std::vector<int> idx(static_cast<std::size_t>(order), 0);
    // accumulate rank-1 terms entry by entry; fine at the sizes this library targets
    for (std::size_t p = 0; p < out.size(); ++p) {
        double v = 0.0;
        for (int i = 0; i < k.rank(); ++i) {
            double term = k.weights[i];
            for (int n = 0; n < order; ++n)
                term *= k.factors[static_cast<std::size_t>(n)](idx[static_cast<std::size_t>(n)], i);
            v += term;
        }
        out[p] = v;
        for (int n = 0; n < order; ++n) {
            auto& in = idx[static_cast<std::size_t>(n)];
            if (++in < dims[static_cast<std::size_t>(n)]) break;
            in = 0;
        }
    }
    return out;
}

}  // namespace tl2e
