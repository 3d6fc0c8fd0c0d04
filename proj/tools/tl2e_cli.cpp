#include "tl2e/l2e.hpp"
#include "tl2e/rank_select.hpp"
#include "tl2e/rng.hpp"
#include "tl2e/sim.hpp"
#include "tl2e/tensor_io.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using nlohmann::json;
using namespace tl2e;

constexpr int kExitOk = 0;
constexpr int kExitInputError = 1;
constexpr int kExitNotConverged = 2;

std::vector<int> parse_int_list(const std::string& s, char sep) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, sep)) {
        if (tok.empty()) continue;
        out.push_back(std::stoi(tok));
    }
    if (out.empty()) throw CLI::ValidationError("empty integer list: '" + s + "'");
    return out;
}

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(std::stod(tok));
    }
    if (out.empty()) throw CLI::ValidationError("empty number list: '" + s + "'");
    return out;
}

/// "2,2,2;3,3,3" -> list of rank tuples.
std::vector<std::vector<int>> parse_rank_tuples(const std::string& s) {
    std::vector<std::vector<int>> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ';')) {
        if (tok.empty()) continue;
        out.push_back(parse_int_list(tok, ','));
    }
    if (out.empty()) throw CLI::ValidationError("no rank tuples in '" + s + "'");
    return out;
}

void check_rank_against_dims(const std::vector<int>& rank, const std::vector<int>& dims) {
    if (rank.size() != dims.size())
        throw std::invalid_argument("rank tuple has " + std::to_string(rank.size()) +
                                    " entries but the tensor has order " +
                                    std::to_string(dims.size()));
    for (std::size_t n = 0; n < rank.size(); ++n) {
        if (rank[n] < 1 || rank[n] > dims[n])
            throw std::invalid_argument("rank " + std::to_string(rank[n]) +
                                        " out of range for mode " + std::to_string(n + 1) +
                                        " (dimension " + std::to_string(dims[n]) + ")");
    }
}

struct DecomposeArgs {
    std::string input;
    std::string rank;
    std::string out_prefix;
    double tau_max = 50.0;
    double lambda = 1e-8;
    std::string init = "hosvd";
    int max_iter = 1000;
    std::uint64_t seed = 0;
    std::string preset;
};

int run_decompose(const DecomposeArgs& a) {
    const MaskedTensor data = read_tensor_file(a.input);
    const std::vector<int> rank = parse_int_list(a.rank, ',');
    check_rank_against_dims(rank, data.values.dims());

    FitConfig cfg;
    cfg.rank = rank;
    double tau_max = a.tau_max;
    if (a.preset == "feature-extraction") tau_max = 20.0;
    if (tau_max <= 0.0) throw std::invalid_argument("--eta-max must be a positive tau bound");
    cfg.eta_max = std::log(tau_max);
    cfg.lambda = a.lambda;
    cfg.init_method = a.init == "hooi" ? InitMethod::hooi : InitMethod::hosvd;
    cfg.solver.max_iters = a.max_iter;

    const FitReport rep = fit_detailed(data, cfg);

    write_tensor_file(a.out_prefix + ".Lhat", fully_observed(predict(rep.model)));
    write_model_file(a.out_prefix + ".model", rep.model);
    {
        std::ofstream meta(a.out_prefix + ".meta");
        if (!meta) throw std::runtime_error("cannot write " + a.out_prefix + ".meta");
        meta << "status " << to_string(rep.status) << '\n'
             << "iterations " << rep.iterations << '\n'
             << "objective " << format_double(rep.objective) << '\n'
             << "projected_grad_norm " << format_double(rep.projected_grad_norm) << '\n'
             << "eta_star " << format_double(rep.model.eta) << '\n'
             << "scale " << format_double(rep.model.scale_s) << '\n'
             << "seed " << a.seed << '\n';
    }
    std::cout << "wrote " << a.out_prefix << ".Lhat/.model/.meta (" << to_string(rep.status)
              << ", " << rep.iterations << " iterations)\n";
    return rep.status == SolveStatus::converged ? kExitOk : kExitNotConverged;
}

struct SimulateArgs {
    std::string model = "tucker";
    std::string dims;
    std::string rank;
    double delta = 0.0;
    double rho = 0.0;
    bool dense_noise = false;
    double mult = 5.0;
    double noise_ratio = 0.1;
    std::uint64_t seed = 0;
    std::string out_prefix;
};

int run_simulate(const SimulateArgs& a) {
    const GenModel model = gen_model_from_string(a.model);
    const std::vector<int> dims = parse_int_list(a.dims, ',');
    const std::vector<int> rank = parse_int_list(a.rank, ',');

    GroundTruth truth = generate_low_rank(model, dims, rank, a.seed);
    CorruptionSpec spec;
    spec.outlier_fraction = a.delta;
    spec.outlier_magnitude_mult = a.mult;
    spec.dense_noise = a.dense_noise;
    spec.dense_noise_ratio = a.noise_ratio;
    spec.missing_fraction = a.rho;
    spec.seed = mix_seed(a.seed, 0x73696dULL);
    const MaskedTensor data = corrupt(truth, spec);

    write_tensor_file(a.out_prefix + ".tensor", data);

    json j;
    j["model"] = to_string(model);
    j["dims"] = dims;
    j["rank"] = rank;
    j["seed"] = a.seed;
    j["delta"] = a.delta;
    j["rho"] = a.rho;
    j["dense_noise"] = a.dense_noise;
    j["outlier_magnitude"] = truth.outlier_magnitude;
    j["outlier_indices"] = truth.outlier_indices;
    j["missing_indices"] = truth.missing_indices;
    j["low_rank"] = truth.low_rank.values();
    if (a.dense_noise) j["noise"] = truth.noise.values();
    std::ofstream out(a.out_prefix + ".truth");
    if (!out) throw std::runtime_error("cannot write " + a.out_prefix + ".truth");
    out << j.dump() << '\n';

    std::cout << "wrote " << a.out_prefix << ".tensor and " << a.out_prefix << ".truth ("
              << truth.outlier_indices.size() << " outliers, " << truth.missing_indices.size()
              << " missing)\n";
    return kExitOk;
}

struct SweepArgs {
    std::string preset;
    std::string scale = "desk";
    std::string out_csv;
    std::string dims;
    std::string ranks;
    std::string deltas;
    std::string models;
    double rho = -1.0;
    int replicates = -1;
    std::uint64_t seed = 1;
    int jobs = 1;
    int max_iter = -1;
};

std::vector<GenModel> parse_model_list(const std::string& s) {
    std::vector<GenModel> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) out.push_back(gen_model_from_string(tok));
    }
    if (out.empty()) throw CLI::ValidationError("no models in '" + s + "'");
    return out;
}

int run_sweep(const SweepArgs& a) {
    std::vector<SweepRow> rows;
    const bool paper_scale = a.scale == "paper";
    if (a.preset == "rank-sweep") {
        RankSweepConfig cfg;
        if (paper_scale) {
            cfg.dims = {50, 50, 50};
            cfg.ranks = {5, 10, 15, 20, 25, 30, 35, 40, 45};
            cfg.replicates = 50;
        }
        if (!a.dims.empty()) cfg.dims = parse_int_list(a.dims, ',');
        if (!a.ranks.empty()) cfg.ranks = parse_int_list(a.ranks, ',');
        if (!a.deltas.empty()) cfg.deltas = parse_double_list(a.deltas);
        if (!a.models.empty()) cfg.models = parse_model_list(a.models);
        if (a.rho >= 0.0) cfg.rho = a.rho;
        if (a.replicates > 0) cfg.replicates = a.replicates;
        if (a.max_iter > 0) cfg.fit.solver.max_iters = a.max_iter;
        cfg.master_seed = a.seed;
        cfg.jobs = a.jobs;
        rows = run_rank_sweep(cfg);
    } else if (a.preset == "phase-grid") {
        PhaseGridConfig cfg;
        if (paper_scale) {
            cfg.dims = {50, 50, 50};
            cfg.ranks = {25, 27, 29, 31, 33, 35, 37, 39, 41, 43, 45};
            cfg.deltas = {0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5};
            cfg.replicates = 50;
        }
        if (!a.dims.empty()) cfg.dims = parse_int_list(a.dims, ',');
        if (!a.ranks.empty()) cfg.ranks = parse_int_list(a.ranks, ',');
        if (!a.deltas.empty()) cfg.deltas = parse_double_list(a.deltas);
        if (!a.models.empty()) cfg.models = parse_model_list(a.models);
        if (a.replicates > 0) cfg.replicates = a.replicates;
        if (a.max_iter > 0) cfg.fit.solver.max_iters = a.max_iter;
        cfg.master_seed = a.seed;
        cfg.jobs = a.jobs;
        rows = run_phase_grid(cfg);
    } else if (a.preset == "misspec") {
        MisspecConfig cfg;
        if (paper_scale) {
            cfg.dims = {50, 50, 50};
            cfg.true_rank = {15};
            cfg.fit_ranks = {5, 10, 15, 20, 25, 30, 35, 40, 45};
            cfg.replicates = 50;
        }
        if (!a.dims.empty()) cfg.dims = parse_int_list(a.dims, ',');
        if (!a.ranks.empty()) cfg.fit_ranks = parse_int_list(a.ranks, ',');
        if (!a.models.empty()) cfg.model = parse_model_list(a.models).front();
        if (a.replicates > 0) cfg.replicates = a.replicates;
        if (a.max_iter > 0) cfg.fit.solver.max_iters = a.max_iter;
        cfg.master_seed = a.seed;
        cfg.jobs = a.jobs;
        rows = run_misspec_sweep(cfg);
    } else {
        throw std::invalid_argument("unknown preset '" + a.preset +
                                    "' (expected rank-sweep, phase-grid, or misspec)");
    }

    std::ofstream out(a.out_csv);
    if (!out) throw std::runtime_error("cannot write " + a.out_csv);
    write_sweep_csv(out, rows);
    std::cout << "wrote " << rows.size() << " rows to " << a.out_csv << '\n';
    return kExitOk;
}

struct CvArgs {
    std::string input;
    std::string ranks;
    std::string cubic;
    int k = 10;
    std::uint64_t seed = 0;
    int jobs = 1;
    int max_iter = kOverfitProneBudget;
    std::string out_csv;
};

std::string x_join(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += 'x';
        s += std::to_string(v[i]);
    }
    return s;
}

int run_cv(const CvArgs& a) {
    const MaskedTensor data = read_tensor_file(a.input);

    std::vector<std::vector<int>> ranks;
    if (!a.ranks.empty()) ranks = parse_rank_tuples(a.ranks);
    if (!a.cubic.empty()) {
        // "1-6" expands to (r,...,r) for r in that range
        const auto dash = a.cubic.find('-');
        if (dash == std::string::npos)
            throw CLI::ValidationError("--cubic-ranks expects lo-hi, e.g. 1-6");
        const int lo = std::stoi(a.cubic.substr(0, dash));
        const int hi = std::stoi(a.cubic.substr(dash + 1));
        for (int r = lo; r <= hi; ++r)
            ranks.emplace_back(static_cast<std::size_t>(data.values.order()), r);
    }
    if (ranks.empty()) throw std::invalid_argument("no candidate ranks given");
    for (const auto& r : ranks) check_rank_against_dims(r, data.values.dims());

    if (static_cast<std::size_t>(a.k) > data.observed_count())
        throw std::invalid_argument("--k exceeds the number of observed entries");

    const CvPlan plan = make_plan(data, a.k, a.seed);
    FitConfig cfg;
    cfg.solver.max_iters = a.max_iter;
    const CvResult res = cross_validate(data, ranks, plan, cfg, a.jobs);

    std::ofstream out(a.out_csv);
    if (!out) throw std::runtime_error("cannot write " + a.out_csv);
    out << "rank,fold,heldout,mean_abs_error,status\n";
    for (const auto& f : res.per_fold)
        out << x_join(f.rank) << ',' << f.fold << ',' << f.heldout_count << ','
            << format_double(f.mean_abs_error) << ',' << f.status << '\n';
    for (const auto& r : res.per_rank)
        out << x_join(r.rank) << ",all," << plan.observed.size() << ','
            << format_double(r.cv_error) << ",aggregate\n";
    out << x_join(res.best_rank) << ",argmin,,,\n";

    std::cout << "cv argmin rank: " << x_join(res.best_rank) << " (" << res.per_rank.size()
              << " candidates, K=" << a.k << ")\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robust low-Tucker-rank tensor decomposition (L2 criterion with jointly "
                 "estimated precision), plus simulation and rank-selection tools"};
    app.require_subcommand(1);

    DecomposeArgs dec;
    auto* cmd_dec = app.add_subcommand("decompose", "fit a robust Tucker model to a tensor file");
    cmd_dec->add_option("input", dec.input, "input tensor file (nan marks missing entries)")
        ->required();
    cmd_dec->add_option("--rank", dec.rank, "Tucker rank, e.g. 2,2,2")->required();
    cmd_dec->add_option("--out", dec.out_prefix, "output prefix for .Lhat/.model/.meta")
        ->required();
    cmd_dec->add_option("--eta-max", dec.tau_max,
                        "precision bound tau_max; eta_max = ln(tau_max) (default 50)");
    cmd_dec->add_option("--lambda", dec.lambda, "ridge weight on the scaled problem");
    cmd_dec->add_option("--init", dec.init, "initialization: hosvd (default) or hooi")
        ->check(CLI::IsMember({"hosvd", "hooi"}));
    cmd_dec->add_option("--max-iter", dec.max_iter, "solver iteration cap (default 1000)");
    cmd_dec->add_option("--seed", dec.seed, "recorded in .meta; the fit itself is deterministic");
    cmd_dec->add_option("--preset", dec.preset, "feature-extraction: tau_max=20")
        ->check(CLI::IsMember({"feature-extraction"}));

    SimulateArgs sim;
    auto* cmd_sim = app.add_subcommand("simulate", "generate a corrupted low-rank tensor file");
    cmd_sim->add_option("--model", sim.model, "cp or tucker")
        ->check(CLI::IsMember({"cp", "tucker"}));
    cmd_sim->add_option("--dims", sim.dims, "tensor dimensions, e.g. 20,20,20")->required();
    cmd_sim->add_option("--rank", sim.rank, "generated rank: r for cp, r1,..,rN for tucker")
        ->required();
    cmd_sim->add_option("--delta", sim.delta, "outlier fraction in [0,1]");
    cmd_sim->add_option("--rho", sim.rho, "missing fraction in [0,1)");
    cmd_sim->add_flag("--dense-noise", sim.dense_noise, "add dense Gaussian noise");
    cmd_sim->add_option("--mult", sim.mult, "outlier magnitude = mult * std(vec(L)) (default 5)");
    cmd_sim->add_option("--noise-ratio", sim.noise_ratio,
                        "dense-noise Frobenius ratio ||E||/||L|| (default 0.1)");
    cmd_sim->add_option("--seed", sim.seed, "generation seed");
    cmd_sim->add_option("--out", sim.out_prefix, "output prefix for .tensor/.truth")->required();

    SweepArgs sw;
    auto* cmd_sw = app.add_subcommand("sweep", "run a simulation study and write a CSV");
    cmd_sw->add_option("--preset", sw.preset, "rank-sweep, phase-grid, or misspec")->required();
    cmd_sw->add_option("--scale", sw.scale,
                       "desk (default; 20-30 per dim, 5-10 replicates) or paper (50^3, 50 "
                       "replicates; hours of compute)")
        ->check(CLI::IsMember({"desk", "paper"}));
    cmd_sw->add_option("--out", sw.out_csv, "output CSV path")->required();
    cmd_sw->add_option("--dims", sw.dims, "override tensor dimensions");
    cmd_sw->add_option("--ranks", sw.ranks, "override rank list (comma-separated r values)");
    cmd_sw->add_option("--deltas", sw.deltas, "override outlier fractions");
    cmd_sw->add_option("--models", sw.models, "override models, e.g. tucker or cp,tucker");
    cmd_sw->add_option("--rho", sw.rho, "override missing fraction (rank-sweep only)");
    cmd_sw->add_option("--replicates", sw.replicates, "override replicate count");
    cmd_sw->add_option("--seed", sw.seed, "master seed");
    cmd_sw->add_option("--jobs", sw.jobs, "parallel fit jobs");
    cmd_sw->add_option("--max-iter", sw.max_iter, "override the preset's solver budget");

    CvArgs cv;
    auto* cmd_cv = app.add_subcommand("cv", "cross-validated Tucker-rank selection");
    cmd_cv->add_option("input", cv.input, "input tensor file")->required();
    cmd_cv->add_option("--ranks", cv.ranks, "candidate tuples, e.g. \"2,2,2;3,3,3\"");
    cmd_cv->add_option("--cubic-ranks", cv.cubic, "cubic grid lo-hi, e.g. 1-6");
    cmd_cv->add_option("--k", cv.k, "folds (default 10)");
    cmd_cv->add_option("--seed", cv.seed, "fold assignment seed");
    cmd_cv->add_option("--jobs", cv.jobs, "parallel (rank, fold) jobs");
    cmd_cv->add_option("--max-iter", cv.max_iter, "solver budget per fold fit");
    cmd_cv->add_option("--out", cv.out_csv, "output CSV path")->required();

    try {
        app.parse(argc, argv);
        if (cmd_dec->parsed()) return run_decompose(dec);
        if (cmd_sim->parsed()) return run_simulate(sim);
        if (cmd_sw->parsed()) return run_sweep(sw);
        if (cmd_cv->parsed()) return run_cv(cv);
        return kExitInputError;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInputError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInputError;
    }
}
