#include "tl2e/l2e.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace tl2e {

namespace {

// 1/(2 sqrt(pi)) and sqrt(2/pi)
constexpr double kHalfInvSqrtPi = 0.2820947917738781435;
constexpr double kSqrtTwoOverPi = 0.7978845608028653559;

void check_same_dims(const MaskedTensor& data, const DenseTensor& l) {
    if (!data.values.same_dims(l))
        throw std::invalid_argument("low-rank tensor shape does not match data");
}

}  // namespace

void MaskedTensor::validate() const {
    if (!values.same_dims(mask)) throw std::invalid_argument("mask shape does not match values");
    double s = 0.0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        const double w = mask[i];
        if (w != 0.0 && w != 1.0) throw std::invalid_argument("mask entries must be 0 or 1");
        s += w;
    }
    if (s < 1.0) throw std::invalid_argument("mask has no observed entries");
}

std::size_t MaskedTensor::observed_count() const {
    std::size_t c = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) c += mask[i] != 0.0;
    return c;
}

MaskedTensor fully_observed(DenseTensor x) {
    DenseTensor w(x.dims());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = 1.0;
    return MaskedTensor{std::move(x), std::move(w)};
}

double univariate_l2e(std::span<const double> xs, double mu, double tau) {
    if (xs.empty()) throw std::invalid_argument("univariate_l2e: empty sample");
    if (!(tau > 0.0)) throw std::invalid_argument("univariate_l2e: tau must be positive");
    long double acc = 0.0L;
    for (double x : xs) {
        const double r = x - mu;
        acc += std::exp(-0.5 * tau * tau * r * r);
    }
    const double n = static_cast<double>(xs.size());
    return tau * kHalfInvSqrtPi - (tau / n) * kSqrtTwoOverPi * static_cast<double>(acc);
}

double l2e_lower_bound(double sum_w, double eta_max) {
    return sum_w * std::exp(eta_max) * (kHalfInvSqrtPi - kSqrtTwoOverPi);
}

double l2e_objective(const MaskedTensor& data, const DenseTensor& l, double eta, double lambda) {
    data.validate();
    check_same_dims(data, l);
    if (lambda < 0.0) throw std::invalid_argument("lambda must be nonnegative");
    const double tau = std::exp(eta);
    long double sum_w = 0.0L, sum_we = 0.0L, ridge = 0.0L;
    const double* x = data.values.data();
    const double* w = data.mask.data();
    const double* lv = l.data();
    for (std::size_t i = 0; i < l.size(); ++i) {
        if (w[i] != 0.0) {
            const double r = x[i] - lv[i];
            sum_w += 1.0L;
            sum_we += std::exp(-0.5 * tau * tau * r * r);
        }
        ridge += static_cast<long double>(lv[i]) * lv[i];
    }
    return static_cast<double>(sum_w) * tau * kHalfInvSqrtPi -
           kSqrtTwoOverPi * tau * static_cast<double>(sum_we) +
           0.5 * lambda * static_cast<double>(ridge);
}

namespace {

/// Single pass over the reconstruction: objective value, and when grad_out is
/// set, the analytic gradient blocks as well.
double evaluate_l2e(const MaskedTensor& data, const TuckerFactors& factors, double eta,
                    double lambda, L2EGradient* grad_out) {
    const DenseTensor l = tucker_to_full(factors);
    check_same_dims(data, l);
    const double tau = std::exp(eta);
    const int order = static_cast<int>(factors.factors.size());

    // bracket = -sqrt(2/pi) tau^3 W*exp(-tau^2 R^2/2)*R + lambda L,  R = X - L
    DenseTensor bracket;
    if (grad_out) bracket = DenseTensor(l.dims());
    long double sum_w = 0.0L, sum_we = 0.0L, sum_wet = 0.0L, ridge = 0.0L;
    const double* x = data.values.data();
    const double* w = data.mask.data();
    const double* lv = l.data();
    for (std::size_t i = 0; i < l.size(); ++i) {
        double b = lambda * lv[i];
        ridge += static_cast<long double>(lv[i]) * lv[i];
        if (w[i] != 0.0) {
            const double r = x[i] - lv[i];
            const double e = std::exp(-0.5 * tau * tau * r * r);
            sum_w += 1.0L;
            sum_we += e;
            if (grad_out) {
                b -= kSqrtTwoOverPi * tau * tau * tau * e * r;
                sum_wet += e * (tau * tau * r * r - 1.0);  // T = e^{2 eta} R^2 - 1
            }
        }
        if (grad_out) bracket[i] = b;
    }
    const double f = static_cast<double>(sum_w) * tau * kHalfInvSqrtPi -
                     kSqrtTwoOverPi * tau * static_cast<double>(sum_we) +
                     0.5 * lambda * static_cast<double>(ridge);
    if (!grad_out) return f;

    grad_out->factors.resize(static_cast<std::size_t>(order));

    // core: bracket projected through every factor transpose
    DenseTensor g = bracket;
    for (int n = 0; n < order; ++n)
        g = n_mode_product(g, factors.factors[static_cast<std::size_t>(n)].transpose(), n);
    grad_out->core = std::move(g);

    // factor n: [bracket]_(n) * [core x_{k != n} A^(k)]_(n)^T
    for (int n = 0; n < order; ++n) {
        DenseTensor partial = factors.core;
        for (int k = 0; k < order; ++k) {
            if (k == n) continue;
            partial = n_mode_product(partial, factors.factors[static_cast<std::size_t>(k)], k);
        }
        grad_out->factors[static_cast<std::size_t>(n)] =
            matricize(bracket, n) * matricize(partial, n).transpose();
    }

    grad_out->eta = (static_cast<double>(sum_w) * kHalfInvSqrtPi +
                     kSqrtTwoOverPi * static_cast<double>(sum_wet)) *
                    tau;
    return f;
}

}  // namespace

L2EGradient l2e_gradient(const MaskedTensor& data, const TuckerFactors& factors, double eta,
                         double lambda) {
    data.validate();
    factors.validate();
    if (lambda < 0.0) throw std::invalid_argument("lambda must be nonnegative");
    L2EGradient grad;
    evaluate_l2e(data, factors, eta, lambda, &grad);
    return grad;
}

Eigen::Index PackShapes::packed_length() const {
    Eigen::Index len = 1;  // eta
    Eigen::Index core = 1;
    for (std::size_t n = 0; n < rank.size(); ++n) {
        core *= rank[n];
        len += static_cast<Eigen::Index>(dims[n]) * rank[n];
    }
    return len + core;
}

Vector pack(const TuckerFactors& factors, double eta) {
    factors.validate();
    Eigen::Index len = static_cast<Eigen::Index>(factors.core.size()) + 1;
    for (const auto& a : factors.factors) len += a.size();
    Vector x(len);
    Eigen::Index pos = 0;
    x.segment(pos, static_cast<Eigen::Index>(factors.core.size())) = factors.core.vec();
    pos += static_cast<Eigen::Index>(factors.core.size());
    for (const auto& a : factors.factors) {
        x.segment(pos, a.size()) = Eigen::Map<const Vector>(a.data(), a.size());
        pos += a.size();
    }
    x[pos] = eta;
    return x;
}

void unpack(const Vector& x, const PackShapes& shapes, TuckerFactors& factors, double& eta) {
    if (x.size() != shapes.packed_length())
        throw std::invalid_argument("packed vector length mismatch: got " +
                                    std::to_string(x.size()) + ", expected " +
                                    std::to_string(shapes.packed_length()));
    const std::size_t order = shapes.rank.size();
    Eigen::Index core_len = 1;
    for (int r : shapes.rank) core_len *= r;

    Eigen::Index pos = 0;
    DenseTensor core(shapes.rank);
    Eigen::Map<Vector>(core.data(), core_len) = x.segment(pos, core_len);
    pos += core_len;
    factors.core = std::move(core);
    factors.factors.resize(order);
    for (std::size_t n = 0; n < order; ++n) {
        const Eigen::Index rows = shapes.dims[n], cols = shapes.rank[n];
        factors.factors[n] = Eigen::Map<const DenseMatrix>(x.data() + pos, rows, cols);
        pos += rows * cols;
    }
    eta = x[pos];
}

BoxBounds l2e_bounds(const PackShapes& shapes, double eta_max) {
    BoxBounds b = BoxBounds::unbounded(static_cast<int>(shapes.packed_length()));
    b.upper[shapes.packed_length() - 1] = eta_max;
    return b;
}

ObjectiveOracle make_l2e_oracle(const MaskedTensor& data, const PackShapes& shapes, double lambda,
                                double eta_max) {
    data.validate();
    const double sum_w = static_cast<double>(data.observed_count());
    const double bound = l2e_lower_bound(sum_w, eta_max);
    const double slack = 1e-9 * (1.0 + std::fabs(bound));
    return [data, shapes, lambda, bound, slack](const Vector& x, Vector* grad) {
        TuckerFactors factors;
        double eta = 0.0;
        unpack(x, shapes, factors, eta);
        double f;
        if (grad) {
            L2EGradient g;
            f = evaluate_l2e(data, factors, eta, lambda, &g);
            *grad = pack(TuckerFactors{std::move(g.core), std::move(g.factors)}, g.eta);
        } else {
            f = evaluate_l2e(data, factors, eta, lambda, nullptr);
        }
        if (f < bound - slack)
            throw std::logic_error("criterion fell below its theoretical lower bound");
        return f;
    };
}

namespace {

struct ObservedStats {
    double mean = 0.0;
    double mad = 0.0;
};

ObservedStats observed_stats(const MaskedTensor& data) {
    long double total = 0.0L;
    std::size_t count = 0;
    for (std::size_t i = 0; i < data.values.size(); ++i) {
        if (data.mask[i] != 0.0) {
            total += data.values[i];
            ++count;
        }
    }
    ObservedStats st;
    st.mean = static_cast<double>(total / static_cast<long double>(count));
    long double dev = 0.0L;
    for (std::size_t i = 0; i < data.values.size(); ++i)
        if (data.mask[i] != 0.0) dev += std::fabs(data.values[i] - st.mean);
    st.mad = static_cast<double>(dev / static_cast<long double>(count));
    return st;
}

}  // namespace

FitReport fit_detailed(const MaskedTensor& data, const FitConfig& cfg) {
    data.validate();
    if (static_cast<int>(cfg.rank.size()) != data.values.order())
        throw std::invalid_argument("rank tuple length does not match tensor order");
    for (int n = 0; n < data.values.order(); ++n) {
        const int r = cfg.rank[static_cast<std::size_t>(n)];
        if (r < 1 || r > data.values.dim(n))
            throw std::invalid_argument("rank " + std::to_string(r) + " out of range for mode " +
                                        std::to_string(n + 1) + " (dimension " +
                                        std::to_string(data.values.dim(n)) + ")");
    }
    if (cfg.lambda < 0.0) throw std::invalid_argument("lambda must be nonnegative");

    const ObservedStats st = observed_stats(data);
    if (!(st.mad > 0.0))
        throw std::invalid_argument("all observed entries are identical; nothing to scale");
    const double scale = 10.0 * st.mad;  // observed entries end up with MAD 0.1

    MaskedTensor scaled{affine(data.values, 1.0 / scale, 0.0), data.mask};

    // imputation feeds initialization only; the criterion itself uses the mask
    DenseTensor imputed = scaled.values;
    const double scaled_mean = st.mean / scale;
    for (std::size_t i = 0; i < imputed.size(); ++i)
        if (scaled.mask[i] == 0.0) imputed[i] = scaled_mean;

    TuckerFactors init;
    if (cfg.init_method == InitMethod::hosvd) {
        init = hosvd(imputed, cfg.rank);
    } else {
        HooiConfig hcfg;
        hcfg.rank = cfg.rank;
        init = hooi(imputed, hcfg);
    }

    PackShapes shapes{data.values.dims(), cfg.rank};
    const ObjectiveOracle oracle = make_l2e_oracle(scaled, shapes, cfg.lambda, cfg.eta_max);
    const BoxBounds bounds = l2e_bounds(shapes, cfg.eta_max);
    const Vector x0 = pack(init, std::min(cfg.eta0, cfg.eta_max));

    const SolveResult sol = minimize(oracle, x0, bounds, cfg.solver);

    FitReport rep;
    TuckerFactors fitted;
    double eta_star = 0.0;
    unpack(sol.x_star, shapes, fitted, eta_star);
    fitted.core = affine(fitted.core, scale, 0.0);  // back to the original scale
    rep.model = L2EModel{std::move(fitted), std::min(eta_star, cfg.eta_max), st.mad};
    rep.status = sol.status;
    rep.iterations = sol.iterations;
    rep.objective = sol.f_star;
    rep.projected_grad_norm = sol.projected_grad_norm;
    return rep;
}

L2EModel fit(const MaskedTensor& data, const FitConfig& cfg) {
    return fit_detailed(data, cfg).model;
}

DenseTensor predict(const L2EModel& model) {
    return tucker_to_full(model.factors);
}

}  // namespace tl2e
