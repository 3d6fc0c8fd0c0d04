#include "tl2e/sim.hpp"

#include "tl2e/parallel.hpp"
#include "tl2e/rng.hpp"

#include <Eigen/QR>

#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace tl2e {

std::string to_string(GenModel m) { return m == GenModel::cp ? "cp" : "tucker"; }

GenModel gen_model_from_string(const std::string& s) {
    if (s == "cp") return GenModel::cp;
    if (s == "tucker") return GenModel::tucker;
    throw std::invalid_argument("unknown model '" + s + "' (expected cp or tucker)");
}

void CorruptionSpec::validate() const {
    if (outlier_fraction < 0.0 || outlier_fraction > 1.0)
        throw std::invalid_argument("outlier fraction must lie in [0, 1]");
    if (missing_fraction < 0.0 || missing_fraction >= 1.0)
        throw std::invalid_argument("missing fraction must lie in [0, 1)");
    if (dense_noise && dense_noise_ratio <= 0.0)
        throw std::invalid_argument("dense noise ratio must be positive");
    if (outlier_magnitude_mult < 0.0)
        throw std::invalid_argument("outlier magnitude multiplier must be nonnegative");
}

double sample_std(const DenseTensor& x) {
    const std::size_t n = x.size();
    if (n < 2) throw std::invalid_argument("sample_std needs at least two entries");
    long double mean = 0.0L;
    for (std::size_t i = 0; i < n; ++i) mean += x[i];
    mean /= static_cast<long double>(n);
    long double ss = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
        const long double d = x[i] - mean;
        ss += d * d;
    }
    return static_cast<double>(std::sqrt(ss / static_cast<long double>(n - 1)));
}

double relative_error(const DenseTensor& l_hat, const DenseTensor& l) {
    if (!l_hat.same_dims(l)) throw std::invalid_argument("relative_error: shape mismatch");
    const double denom = frobenius_norm(l);
    if (denom == 0.0) throw std::invalid_argument("relative_error: zero ground truth");
    return frobenius_norm(subtract(l_hat, l)) / denom;
}

namespace {

DenseMatrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    DenseMatrix m(rows, cols);
    // column-major fill order, pinned for reproducibility
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
    return m;
}

/// Q of a Gaussian QR with the R diagonal forced positive: a deterministic
/// draw from the orthogonal group.
DenseMatrix random_orthogonal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    const DenseMatrix g = gaussian_matrix(rows, cols, rng);
    Eigen::HouseholderQR<DenseMatrix> qr(g);
    DenseMatrix q = qr.householderQ() * DenseMatrix::Identity(rows, cols);
    const DenseMatrix r = qr.matrixQR().topRows(cols).template triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < cols; ++j)
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    return q;
}

void check_gen_rank(GenModel model, const std::vector<int>& dims, const std::vector<int>& rank) {
    if (model == GenModel::cp) {
        if (rank.size() != 1 || rank[0] < 1)
            throw std::invalid_argument("cp generation takes a single positive rank");
        return;
    }
    if (rank.size() != dims.size())
        throw std::invalid_argument("tucker rank tuple length does not match dims");
    for (std::size_t n = 0; n < dims.size(); ++n)
        if (rank[n] < 1 || rank[n] > dims[n])
            throw std::invalid_argument("rank out of range for mode " + std::to_string(n + 1));
}

std::size_t round_count(double fraction, std::size_t total) {
    return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total)));
}

/// k distinct indices from [0, total), uniform, via partial Fisher-Yates.
std::vector<std::size_t> sample_without_replacement(std::size_t total, std::size_t k, Rng& rng) {
    std::vector<std::size_t> pool(total);
    for (std::size_t i = 0; i < total; ++i) pool[i] = i;
    for (std::size_t i = 0; i < k; ++i)
        std::swap(pool[i], pool[i + rng.below(total - i)]);
    pool.resize(k);
    return pool;
}

}  // namespace

GroundTruth generate_low_rank(GenModel model, const std::vector<int>& dims,
                              const std::vector<int>& rank, std::uint64_t seed) {
    if (dims.empty()) throw std::invalid_argument("empty dims");
    check_gen_rank(model, dims, rank);
    Rng rng(mix_seed(seed, 0x67656e65ULL));

    GroundTruth truth;
    truth.model = model;
    truth.rank = rank;
    if (model == GenModel::cp) {
        KruskalFactors k;
        k.weights = Vector::Ones(rank[0]);
        for (int d : dims) k.factors.push_back(gaussian_matrix(d, rank[0], rng));
        truth.low_rank = kruskal_to_full(k);
    } else {
        TuckerFactors t;
        DenseTensor core(rank);
        for (std::size_t i = 0; i < core.size(); ++i) core[i] = rng.normal();
        t.core = std::move(core);
        for (std::size_t n = 0; n < dims.size(); ++n)
            t.factors.push_back(random_orthogonal(dims[n], rank[n], rng));
        truth.low_rank = tucker_to_full(t);
    }
    truth.noise = DenseTensor(dims);  // zeros until corrupt() adds dense noise
    return truth;
}

MaskedTensor corrupt(GroundTruth& truth, const CorruptionSpec& spec) {
    spec.validate();
    const DenseTensor& l = truth.low_rank;
    const std::size_t total = l.size();
    Rng rng(mix_seed(spec.seed, 0x636f7272ULL));

    DenseTensor x = l;
    truth.noise = DenseTensor(l.dims());

    // additive sparse outliers: S = Unif[-M, M] on a random index set
    const std::size_t n_out = round_count(spec.outlier_fraction, total);
    truth.outlier_magnitude = spec.outlier_magnitude_mult * sample_std(l);
    truth.outlier_indices = sample_without_replacement(total, n_out, rng);
    for (std::size_t idx : truth.outlier_indices)
        x[idx] += rng.uniform(-truth.outlier_magnitude, truth.outlier_magnitude);

    if (spec.dense_noise) {
        DenseTensor raw(l.dims());
        for (std::size_t i = 0; i < total; ++i) raw[i] = rng.normal();
        const double target = spec.dense_noise_ratio * frobenius_norm(l);
        const double c = target / frobenius_norm(raw);
        truth.noise = affine(raw, c, 0.0);
        for (std::size_t i = 0; i < total; ++i) x[i] += truth.noise[i];
    }

    const std::size_t n_miss = round_count(spec.missing_fraction, total);
    truth.missing_indices = sample_without_replacement(total, n_miss, rng);
    DenseTensor mask(l.dims());
    for (std::size_t i = 0; i < total; ++i) mask[i] = 1.0;
    for (std::size_t idx : truth.missing_indices) mask[idx] = 0.0;

    MaskedTensor out{std::move(x), std::move(mask)};
    out.validate();  // rejects specs that mask everything
    return out;
}

FitConfig budgeted_fit(int max_iters) {
    FitConfig cfg;
    cfg.solver.max_iters = max_iters;
    return cfg;
}

std::uint64_t cell_seed(std::uint64_t master_seed, const Condition& c, int replicate) {
    std::uint64_t h = mix_seed(master_seed, c.model == GenModel::cp ? 1u : 2u);
    for (int d : c.dims) h = mix_seed(h, static_cast<std::uint64_t>(d));
    for (int r : c.true_rank) h = mix_seed(h, static_cast<std::uint64_t>(r) + 1000u);
    h = mix_seed(h, static_cast<std::uint64_t>(c.delta * 1e6), static_cast<std::uint64_t>(c.rho * 1e6));
    h = mix_seed(h, c.dense_noise ? 1u : 0u, static_cast<std::uint64_t>(c.mult * 1e3));
    return mix_seed(h, static_cast<std::uint64_t>(replicate));
}

MaskedTensor realize_condition(const Condition& c, std::uint64_t seed, GroundTruth& truth) {
    truth = generate_low_rank(c.model, c.dims, c.true_rank, seed);
    CorruptionSpec spec;
    spec.outlier_fraction = c.delta;
    spec.outlier_magnitude_mult = c.mult;
    spec.dense_noise = c.dense_noise;
    spec.missing_fraction = c.rho;
    spec.seed = mix_seed(seed, 0x73696dULL);
    return corrupt(truth, spec);
}

namespace {

std::vector<int> cubic_rank(int r, std::size_t order) {
    return std::vector<int>(order, r);
}

SweepRow run_cell(const Condition& cond, int replicate, std::uint64_t seed,
                  const FitConfig& fit_template) {
    SweepRow row;
    row.cond = cond;
    row.replicate = replicate;
    row.seed = seed;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        GroundTruth truth;
        const MaskedTensor data = realize_condition(cond, seed, truth);

        FitConfig cfg = fit_template;
        cfg.rank = cond.fit_rank;
        const FitReport rep = fit_detailed(data, cfg);
        row.relative_error = relative_error(predict(rep.model), truth.low_rank);
        row.eta_star = rep.model.eta;
        row.status = to_string(rep.status);
    } catch (const std::exception& err) {
        row.relative_error = std::numeric_limits<double>::quiet_NaN();
        row.eta_star = std::numeric_limits<double>::quiet_NaN();
        row.status = std::string("error: ") + err.what();
    }
    const auto t1 = std::chrono::steady_clock::now();
    row.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    return row;
}

}  // namespace

std::vector<SweepRow> run_grid(const SweepPlan& plan) {
    if (plan.conditions.empty()) throw std::invalid_argument("empty condition grid");
    if (plan.replicates < 1) throw std::invalid_argument("replicates must be >= 1");
    const std::size_t cells = plan.conditions.size() * static_cast<std::size_t>(plan.replicates);
    std::vector<SweepRow> rows(cells);
    parallel_for(cells, plan.jobs, [&](std::size_t i) {
        const std::size_t ci = i / static_cast<std::size_t>(plan.replicates);
        const int rep = static_cast<int>(i % static_cast<std::size_t>(plan.replicates));
        rows[i] = run_cell(plan.conditions[ci], rep,
                           cell_seed(plan.master_seed, plan.conditions[ci], rep), plan.fit);
    });
    return rows;
}

std::vector<SweepRow> run_rank_sweep(const RankSweepConfig& cfg) {
    SweepPlan plan;
    plan.replicates = cfg.replicates;
    plan.master_seed = cfg.master_seed;
    plan.fit = cfg.fit;
    plan.jobs = cfg.jobs;
    for (GenModel model : cfg.models) {
        for (int r : cfg.ranks) {
            for (double delta : cfg.deltas) {
                Condition c;
                c.model = model;
                c.dims = cfg.dims;
                c.true_rank = model == GenModel::cp ? std::vector<int>{r}
                                                    : cubic_rank(r, cfg.dims.size());
                c.fit_rank = cubic_rank(r, cfg.dims.size());
                c.delta = delta;
                c.rho = cfg.rho;
                c.dense_noise = cfg.dense_noise;
                plan.conditions.push_back(std::move(c));
            }
        }
    }
    return run_grid(plan);
}

std::vector<SweepRow> run_phase_grid(const PhaseGridConfig& cfg) {
    SweepPlan plan;
    plan.replicates = cfg.replicates;
    plan.master_seed = cfg.master_seed;
    plan.fit = cfg.fit;
    plan.jobs = cfg.jobs;
    for (GenModel model : cfg.models) {
        for (int r : cfg.ranks) {
            for (double delta : cfg.deltas) {
                Condition c;
                c.model = model;
                c.dims = cfg.dims;
                c.true_rank = model == GenModel::cp ? std::vector<int>{r}
                                                    : cubic_rank(r, cfg.dims.size());
                c.fit_rank = cubic_rank(r, cfg.dims.size());
                c.delta = delta;
                plan.conditions.push_back(std::move(c));
            }
        }
    }
    return run_grid(plan);
}

std::vector<SweepRow> run_misspec_sweep(const MisspecConfig& cfg) {
    SweepPlan plan;
    plan.replicates = cfg.replicates;
    plan.master_seed = cfg.master_seed;
    plan.fit = cfg.fit;
    plan.jobs = cfg.jobs;
    for (int r : cfg.fit_ranks) {
        Condition c;
        c.model = cfg.model;
        c.dims = cfg.dims;
        c.true_rank = cfg.true_rank;
        c.fit_rank = cubic_rank(r, cfg.dims.size());
        c.delta = cfg.delta;
        plan.conditions.push_back(std::move(c));
    }
    return run_grid(plan);
}

namespace {

std::string x_join(const std::vector<int>& v) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) os << 'x';
        os << v[i];
    }
    return os.str();
}

}  // namespace

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
    os << "model,dims,true_rank,fit_rank,delta,rho,dense_noise,mult,replicate,seed,"
          "relative_error,eta_star,wall_ms,status\n";
    for (const SweepRow& r : rows) {
        os << to_string(r.cond.model) << ',' << x_join(r.cond.dims) << ','
           << x_join(r.cond.true_rank) << ',' << x_join(r.cond.fit_rank) << ',' << r.cond.delta
           << ',' << r.cond.rho << ',' << (r.cond.dense_noise ? 1 : 0) << ',' << r.cond.mult << ','
           << r.replicate << ',' << r.seed << ',' << r.relative_error << ',' << r.eta_star << ','
           << r.wall_ms << ',' << r.status << '\n';
    }
}

}  // namespace tl2e
