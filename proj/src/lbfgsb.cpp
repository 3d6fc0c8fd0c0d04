#include "tl2e/lbfgsb.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace tl2e {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kCurvatureSkip = 1e-10;  // skip pair when s'y <= eps*|s||y|

struct Evaluation {
    double f = kInf;
    Vector g;
    bool grad_finite = false;
};

Evaluation evaluate(const ObjectiveOracle& oracle, const Vector& x) {
    Evaluation ev;
    ev.g.resize(x.size());
    ev.f = oracle(x, &ev.g);
    if (!std::isfinite(ev.f)) ev.f = kInf;
    ev.grad_finite = ev.g.allFinite();
    return ev;
}

/// ||x - P(x - g)||_inf, the bound-aware first-order optimality measure.
double projected_gradient_norm(const Vector& x, const Vector& g, const BoxBounds& b) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double step = std::clamp(x[i] - g[i], b.lower[i], b.upper[i]) - x[i];
        worst = std::max(worst, std::fabs(step));
    }
    return worst;
}

/// Limited-memory model state in the compact representation
/// B = theta*I - W M W^T with W = [Y  theta*S].
struct QuasiNewtonModel {
    int memory;
    double theta = 1.0;
    std::deque<Vector> s_pairs;
    std::deque<Vector> y_pairs;
    DenseMatrix w;  // n x 2l
    DenseMatrix m;  // 2l x 2l

    explicit QuasiNewtonModel(int mem, Eigen::Index n) : memory(mem) {
        w.resize(n, 0);
        m.resize(0, 0);
    }

    int pairs() const { return static_cast<int>(s_pairs.size()); }

    void reset(Eigen::Index n) {
        s_pairs.clear();
        y_pairs.clear();
        theta = 1.0;
        w.resize(n, 0);
        m.resize(0, 0);
    }

    /// Returns false (and leaves the model untouched) when the curvature test
    /// rejects the pair.
    bool update(const Vector& s, const Vector& y) {
        const double sy = s.dot(y);
        if (sy <= kCurvatureSkip * s.norm() * y.norm()) return false;
        if (pairs() == memory) {
            s_pairs.pop_front();
            y_pairs.pop_front();
        }
        s_pairs.push_back(s);
        y_pairs.push_back(y);
        theta = y.dot(y) / sy;
        rebuild();
        return true;
    }

    void rebuild() {
        const int l = pairs();
        const Eigen::Index n = s_pairs.front().size();
        DenseMatrix smat(n, l), ymat(n, l);
        for (int j = 0; j < l; ++j) {
            smat.col(j) = s_pairs[static_cast<std::size_t>(j)];
            ymat.col(j) = y_pairs[static_cast<std::size_t>(j)];
        }
        w.resize(n, 2 * l);
        w << ymat, theta * smat;

        const DenseMatrix sty = smat.transpose() * ymat;
        DenseMatrix minv(2 * l, 2 * l);
        minv.topLeftCorner(l, l) = DenseMatrix((-sty.diagonal()).asDiagonal());
        const DenseMatrix lower = sty.template triangularView<Eigen::StrictlyLower>();
        minv.topRightCorner(l, l) = lower.transpose();
        minv.bottomLeftCorner(l, l) = lower;
        minv.bottomRightCorner(l, l) = theta * smat.transpose() * smat;
        m = minv.partialPivLu().inverse();
    }

    /// Two-loop recursion: r = H g with H the inverse limited-memory Hessian.
    Vector inverse_apply(const Vector& g) const {
        Vector q = g;
        const int l = pairs();
        std::vector<double> alpha(static_cast<std::size_t>(l));
        std::vector<double> rho(static_cast<std::size_t>(l));
        for (int j = 0; j < l; ++j)
            rho[static_cast<std::size_t>(j)] =
                1.0 / y_pairs[static_cast<std::size_t>(j)].dot(s_pairs[static_cast<std::size_t>(j)]);
        for (int j = l - 1; j >= 0; --j) {
            alpha[static_cast<std::size_t>(j)] =
                rho[static_cast<std::size_t>(j)] * s_pairs[static_cast<std::size_t>(j)].dot(q);
            q -= alpha[static_cast<std::size_t>(j)] * y_pairs[static_cast<std::size_t>(j)];
        }
        q /= theta;
        for (int j = 0; j < l; ++j) {
            const double beta =
                rho[static_cast<std::size_t>(j)] * y_pairs[static_cast<std::size_t>(j)].dot(q);
            q += (alpha[static_cast<std::size_t>(j)] - beta) * s_pairs[static_cast<std::size_t>(j)];
        }
        return q;
    }
};

/// Generalized Cauchy point: first local minimizer of the quadratic model
/// along the piecewise-linear projected steepest-descent path.
/// Also returns c = W^T (xc - x) accumulated along the way.
void cauchy_point(const Vector& x, const Vector& g, const BoxBounds& b,
                  const QuasiNewtonModel& model, Vector& xc, Vector& c) {
    const Eigen::Index n = x.size();
    const int twol = static_cast<int>(model.w.cols());
    Vector t(n), d(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (g[i] < 0.0)
            t[i] = std::isfinite(b.upper[i]) ? (x[i] - b.upper[i]) / g[i] : kInf;
        else if (g[i] > 0.0)
            t[i] = std::isfinite(b.lower[i]) ? (x[i] - b.lower[i]) / g[i] : kInf;
        else
            t[i] = kInf;
        d[i] = (t[i] <= 0.0) ? 0.0 : -g[i];
    }

    std::vector<Eigen::Index> order;
    order.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
        if (t[i] > 0.0 && std::isfinite(t[i])) order.push_back(i);
    std::sort(order.begin(), order.end(),
              [&t](Eigen::Index a, Eigen::Index bdx) { return t[a] < t[bdx]; });

    xc = x;
    c = Vector::Zero(twol);
    Vector p = model.w.transpose() * d;
    double fp = -d.dot(d);
    double fpp = model.theta * d.dot(d) - (twol ? p.dot(model.m * p) : 0.0);
    const double fpp_floor = std::numeric_limits<double>::epsilon() * model.theta * d.dot(d);
    if (fpp <= 0.0) fpp = std::max(fpp_floor, std::numeric_limits<double>::min());
    double dt_min = -fp / fpp;
    double t_old = 0.0;

    std::size_t processed = 0;
    for (; processed < order.size(); ++processed) {
        const Eigen::Index bidx = order[processed];
        const double tb = t[bidx];
        const double dt = tb - t_old;
        if (dt_min < dt) break;
        // variable bidx reaches its bound; drop it from the moving set
        xc[bidx] = d[bidx] > 0.0 ? b.upper[bidx] : b.lower[bidx];
        const double zb = xc[bidx] - x[bidx];
        const double gb = g[bidx];
        c += dt * p;
        if (twol) {
            const Vector wb = model.w.row(bidx).transpose();
            const Vector mwb = model.m * wb;
            fp += dt * fpp + gb * gb + model.theta * gb * zb - gb * mwb.dot(c);
            fpp -= model.theta * gb * gb + 2.0 * gb * mwb.dot(p) + gb * gb * mwb.dot(wb);
            p += gb * wb;
        } else {
            fp += dt * fpp + gb * gb + model.theta * gb * zb;
            fpp -= model.theta * gb * gb;
        }
        fpp = std::max(fpp, fpp_floor > 0.0 ? fpp_floor : std::numeric_limits<double>::min());
        d[bidx] = 0.0;
        dt_min = -fp / fpp;
        t_old = tb;
    }

    dt_min = std::max(dt_min, 0.0);
    t_old += dt_min;
    for (Eigen::Index i = 0; i < n; ++i)
        if (d[i] != 0.0) xc[i] = std::clamp(x[i] + t_old * d[i], b.lower[i], b.upper[i]);
    c += dt_min * p;
}

/// Minimize the quadratic model over the variables free at the Cauchy point
/// (direct primal method with Sherman-Morrison-Woodbury). Returns the model
/// minimizer clipped to the box.
Vector subspace_minimize(const Vector& x, const Vector& g, const BoxBounds& b, const Vector& xc,
                         const Vector& c, const QuasiNewtonModel& model) {
    const Eigen::Index n = x.size();
    std::vector<Eigen::Index> free_idx;
    for (Eigen::Index i = 0; i < n; ++i)
        if (xc[i] > b.lower[i] && xc[i] < b.upper[i]) free_idx.push_back(i);
    if (free_idx.empty()) return xc;

    const Eigen::Index nf = static_cast<Eigen::Index>(free_idx.size());
    const int twol = static_cast<int>(model.w.cols());

    // reduced gradient of the model at xc
    Vector rr = g + model.theta * (xc - x);
    if (twol) rr -= model.w * (model.m * c);
    Vector r(nf);
    for (Eigen::Index i = 0; i < nf; ++i) r[i] = rr[free_idx[static_cast<std::size_t>(i)]];

    Vector du;
    const double inv_theta = 1.0 / model.theta;
    if (twol) {
        DenseMatrix wz(nf, twol);
        for (Eigen::Index i = 0; i < nf; ++i)
            wz.row(i) = model.w.row(free_idx[static_cast<std::size_t>(i)]);
        Vector v = model.m * (wz.transpose() * r);
        DenseMatrix cap = DenseMatrix::Identity(twol, twol) -
                          inv_theta * (model.m * (wz.transpose() * wz));
        v = cap.partialPivLu().solve(v);
        du = -inv_theta * r - inv_theta * inv_theta * (wz * v);
    } else {
        du = -inv_theta * r;
    }

    // longest step along du keeping the free block inside the box
    double alpha = 1.0;
    for (Eigen::Index i = 0; i < nf; ++i) {
        const Eigen::Index idx = free_idx[static_cast<std::size_t>(i)];
        if (du[i] > 0.0 && std::isfinite(b.upper[idx]))
            alpha = std::min(alpha, (b.upper[idx] - xc[idx]) / du[i]);
        else if (du[i] < 0.0 && std::isfinite(b.lower[idx]))
            alpha = std::min(alpha, (b.lower[idx] - xc[idx]) / du[i]);
    }
    alpha = std::max(alpha, 0.0);

    Vector xbar = xc;
    for (Eigen::Index i = 0; i < nf; ++i)
        xbar[free_idx[static_cast<std::size_t>(i)]] += alpha * du[i];
    return xbar;
}

struct LineSearchResult {
    double alpha = 0.0;
    Evaluation eval;
    bool sufficient_decrease = false;
    bool wolfe = false;
};

double cubic_step(double a_lo, double f_lo, double d_lo, double a_hi, double f_hi, double d_hi) {
    // minimizer of the cubic interpolant through both endpoint values/slopes
    const double d1 = d_lo + d_hi - 3.0 * (f_lo - f_hi) / (a_lo - a_hi);
    const double disc = d1 * d1 - d_lo * d_hi;
    if (disc < 0.0) return 0.5 * (a_lo + a_hi);
    const double d2 = std::copysign(std::sqrt(disc), a_hi - a_lo);
    const double denom = d_hi - d_lo + 2.0 * d2;
    if (denom == 0.0 || !std::isfinite(denom)) return 0.5 * (a_lo + a_hi);
    double a = a_hi - (a_hi - a_lo) * (d_hi + d2 - d1) / denom;
    const double lo = std::min(a_lo, a_hi), hi = std::max(a_lo, a_hi);
    const double guard = 0.1 * (hi - lo);
    if (!std::isfinite(a) || a < lo + guard || a > hi - guard) a = 0.5 * (a_lo + a_hi);
    return a;
}

/// Strong-Wolfe search along d from x (c1=1e-4, c2=0.9, cubic interpolation).
/// Every trial point is clamped into the box before evaluation.
LineSearchResult line_search(const ObjectiveOracle& oracle, const Vector& x, double f0,
                             const Vector& g0, const Vector& d, const BoxBounds& b,
                             double alpha_max, int max_steps) {
    constexpr double c1 = 1e-4;
    constexpr double c2 = 0.9;
    const double dphi0 = g0.dot(d);

    LineSearchResult best;  // best sufficient-decrease point seen
    int evals = 0;

    auto phi = [&](double alpha, Evaluation& ev) {
        ev = evaluate(oracle, b.clamp(x + alpha * d));
        ++evals;
        return ev.f;
    };
    auto consider = [&](double alpha, const Evaluation& ev) {
        if (ev.f <= f0 + c1 * alpha * dphi0 && ev.grad_finite &&
            (!best.sufficient_decrease || ev.f < best.eval.f)) {
            best.alpha = alpha;
            best.eval = ev;
            best.sufficient_decrease = true;
        }
    };

    auto zoom = [&](double a_lo, double f_lo, double d_lo, double a_hi, double f_hi,
                    double d_hi) -> LineSearchResult {
        while (evals < max_steps) {
            const double a = cubic_step(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi);
            Evaluation ev;
            const double fa = phi(a, ev);
            if (fa > f0 + c1 * a * dphi0 || fa >= f_lo || !ev.grad_finite) {
                a_hi = a;
                f_hi = fa;
                d_hi = ev.grad_finite ? ev.g.dot(d) : 0.0;
                continue;
            }
            consider(a, ev);
            const double da = ev.g.dot(d);
            if (std::fabs(da) <= -c2 * dphi0) {
                best.alpha = a;
                best.eval = ev;
                best.sufficient_decrease = true;
                best.wolfe = true;
                return best;
            }
            if (da * (a_hi - a_lo) >= 0.0) {
                a_hi = a_lo;
                f_hi = f_lo;
                d_hi = d_lo;
            }
            a_lo = a;
            f_lo = fa;
            d_lo = da;
        }
        return best;
    };

    double a_prev = 0.0, f_prev = f0, d_prev = dphi0;
    double alpha = std::min(1.0, alpha_max);
    for (int iter = 0; evals < max_steps; ++iter) {
        Evaluation ev;
        const double fa = phi(alpha, ev);
        if (fa > f0 + c1 * alpha * dphi0 || (iter > 0 && fa >= f_prev) || !ev.grad_finite)
            return zoom(a_prev, f_prev, d_prev, alpha, fa, ev.grad_finite ? ev.g.dot(d) : 0.0);
        consider(alpha, ev);
        const double da = ev.g.dot(d);
        if (std::fabs(da) <= -c2 * dphi0) {
            best.alpha = alpha;
            best.eval = ev;
            best.sufficient_decrease = true;
            best.wolfe = true;
            return best;
        }
        if (da >= 0.0) return zoom(alpha, fa, da, a_prev, f_prev, d_prev);
        if (alpha >= alpha_max) return best;  // slope still negative at the feasibility cap
        a_prev = alpha;
        f_prev = fa;
        d_prev = da;
        alpha = std::min(2.0 * alpha, alpha_max);
    }
    return best;
}

}  // namespace

BoxBounds BoxBounds::unbounded(int n) {
    BoxBounds b;
    b.lower = Vector::Constant(n, -kInf);
    b.upper = Vector::Constant(n, kInf);
    return b;
}

void BoxBounds::validate(Eigen::Index n) const {
    if (lower.size() != n || upper.size() != n)
        throw std::invalid_argument("bounds size does not match problem dimension");
    for (Eigen::Index i = 0; i < n; ++i)
        if (!(lower[i] <= upper[i])) throw std::invalid_argument("lower bound exceeds upper bound");
}

Vector BoxBounds::clamp(const Vector& x) const {
    return x.cwiseMax(lower).cwiseMin(upper);
}

std::string to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::converged: return "converged";
        case SolveStatus::max_iters: return "max_iters";
        case SolveStatus::line_search_failure: return "line_search_failure";
    }
    return "unknown";
}

SolveResult minimize(const ObjectiveOracle& oracle, Vector x0, const BoxBounds& bounds,
                     const SolverConfig& cfg) {
    const Eigen::Index n = x0.size();
    if (n == 0) throw std::invalid_argument("minimize: empty parameter vector");
    bounds.validate(n);
    if (cfg.memory < 1) throw std::invalid_argument("minimize: memory must be >= 1");

    const bool any_bound = bounds.lower.array().isFinite().any() ||
                           bounds.upper.array().isFinite().any();

    Vector x = bounds.clamp(x0);
    Evaluation cur = evaluate(oracle, x);
    if (!std::isfinite(cur.f) || !cur.grad_finite)
        throw std::runtime_error("minimize: objective is not finite at the initial point");

    QuasiNewtonModel model(cfg.memory, n);
    SolveResult res;
    res.status = SolveStatus::max_iters;

    // objective-change stop: total relative decrease over a short window of
    // accepted steps, so a superlinear tail is not cut off one step early
    constexpr int kFlatWindow = 3;
    std::deque<double> recent_f{cur.f};

    int iter = 0;
    for (; iter < cfg.max_iters; ++iter) {
        const double pg = projected_gradient_norm(x, cur.g, bounds);
        if (pg <= cfg.grad_tolerance) {
            res.status = SolveStatus::converged;
            break;
        }

        bool retried = false;
        Vector d;
        while (true) {
            if (any_bound) {
                Vector xc, c;
                cauchy_point(x, cur.g, bounds, model, xc, c);
                d = subspace_minimize(x, cur.g, bounds, xc, c, model) - x;
            } else {
                d = -model.inverse_apply(cur.g);
            }
            if (cur.g.dot(d) < 0.0) break;
            // model produced a non-descent direction; fall back to the
            // steepest-descent model once, then give up
            if (retried || model.pairs() == 0) {
                d.setZero();
                break;
            }
            model.reset(n);
            retried = true;
        }
        if (d.isZero(0.0)) {
            res.status = SolveStatus::line_search_failure;
            break;
        }

        // largest feasible step; at least 1 since x + d is feasible
        double alpha_max = any_bound ? 1.0 : 1e20;
        if (any_bound) {
            alpha_max = kInf;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (d[i] > 0.0 && std::isfinite(bounds.upper[i]))
                    alpha_max = std::min(alpha_max, (bounds.upper[i] - x[i]) / d[i]);
                else if (d[i] < 0.0 && std::isfinite(bounds.lower[i]))
                    alpha_max = std::min(alpha_max, (bounds.lower[i] - x[i]) / d[i]);
            }
            alpha_max = std::max(1.0, std::min(alpha_max, 1e20));
        }

        LineSearchResult ls = line_search(oracle, x, cur.f, cur.g, d, bounds, alpha_max,
                                          std::max(cfg.max_line_search_steps, 4));
        if (!ls.sufficient_decrease || ls.eval.f > cur.f) {
            if (model.pairs() > 0) {
                // stale curvature model can stall the search; restart clean
                model.reset(n);
                continue;
            }
            res.status = SolveStatus::line_search_failure;
            break;
        }

        const Vector x_new = bounds.clamp(x + ls.alpha * d);
        const Vector s = x_new - x;
        const Vector y = ls.eval.g - cur.g;
        x = x_new;
        cur = ls.eval;

        model.update(s, y);

        recent_f.push_back(cur.f);
        if (recent_f.size() > kFlatWindow + 1) recent_f.pop_front();
        if (recent_f.size() == kFlatWindow + 1) {
            const double drop = recent_f.front() - cur.f;
            if (drop <= cfg.f_tolerance *
                            std::max({std::fabs(recent_f.front()), std::fabs(cur.f), 1.0})) {
                ++iter;
                res.status = SolveStatus::converged;
                break;
            }
        }
    }

    res.x_star = x;
    res.f_star = cur.f;
    res.projected_grad_norm = projected_gradient_norm(x, cur.g, bounds);
    res.iterations = iter;
    if (res.status == SolveStatus::max_iters && res.projected_grad_norm <= cfg.grad_tolerance)
        res.status = SolveStatus::converged;
    return res;
}

Vector finite_difference_gradient(const ObjectiveOracle& oracle, const Vector& x, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_difference_gradient: h must be positive");
    Vector g(x.size());
    Vector xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        xp[i] = xi + h;
        const double fp = oracle(xp, nullptr);
        xp[i] = xi - h;
        const double fm = oracle(xp, nullptr);
        xp[i] = xi;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw std::runtime_error("finite_difference_gradient: non-finite evaluation");
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

}  // namespace tl2e
