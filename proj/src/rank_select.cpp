#include "tl2e/rank_select.hpp"

#include "tl2e/parallel.hpp"
#include "tl2e/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace tl2e {

CvPlan make_plan(const MaskedTensor& data, int k, std::uint64_t seed) {
    data.validate();
    if (k < 2) throw std::invalid_argument("cross-validation needs at least 2 folds");
    CvPlan plan;
    plan.k = k;
    plan.seed = seed;
    for (std::size_t i = 0; i < data.mask.size(); ++i)
        if (data.mask[i] != 0.0) plan.observed.push_back(i);
    if (plan.observed.size() < static_cast<std::size_t>(k))
        throw std::invalid_argument("fewer observed entries than folds");

    // Fisher-Yates with our own stream, then deal round-robin: fold sizes
    // differ by at most one
    Rng rng(mix_seed(seed, 0x6f6c6466ULL));
    std::vector<std::size_t> perm(plan.observed.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    for (std::size_t i = perm.size(); i > 1; --i)
        std::swap(perm[i - 1], perm[rng.below(i)]);

    plan.fold_of.assign(plan.observed.size(), 0);
    for (std::size_t j = 0; j < perm.size(); ++j)
        plan.fold_of[perm[j]] = static_cast<int>(j % static_cast<std::size_t>(k));
    return plan;
}

CvResult cross_validate(const MaskedTensor& data, const std::vector<std::vector<int>>& ranks,
                        const CvPlan& plan, const FitConfig& cfg, int jobs) {
    data.validate();
    if (ranks.empty()) throw std::invalid_argument("no candidate ranks");
    if (plan.observed.empty() || plan.fold_of.size() != plan.observed.size())
        throw std::invalid_argument("invalid cross-validation plan");

    struct Job {
        std::size_t rank_idx;
        int fold;
    };
    std::vector<Job> jobs_list;
    for (std::size_t ri = 0; ri < ranks.size(); ++ri)
        for (int f = 0; f < plan.k; ++f) jobs_list.push_back({ri, f});

    struct FoldFit {
        CvFoldOutcome outcome;
        std::vector<double> predictions;  // aligned with this fold's held-out entries
        std::vector<std::size_t> heldout;  // linear indices
    };
    std::vector<FoldFit> fits(jobs_list.size());

    parallel_for(jobs_list.size(), jobs, [&](std::size_t j) {
        const auto [rank_idx, fold] = jobs_list[j];
        FoldFit& out = fits[j];
        out.outcome.rank = ranks[rank_idx];
        out.outcome.fold = fold;

        MaskedTensor train = data;
        for (std::size_t e = 0; e < plan.observed.size(); ++e) {
            if (plan.fold_of[e] == fold) {
                train.mask[plan.observed[e]] = 0.0;
                out.heldout.push_back(plan.observed[e]);
            }
        }
        out.outcome.heldout_count = out.heldout.size();

        FitConfig fold_cfg = cfg;
        fold_cfg.rank = ranks[rank_idx];
        try {
            const FitReport rep = fit_detailed(train, fold_cfg);
            const DenseTensor pred = predict(rep.model);
            out.predictions.reserve(out.heldout.size());
            double abs_sum = 0.0;
            for (std::size_t idx : out.heldout) {
                out.predictions.push_back(pred[idx]);
                abs_sum += std::fabs(pred[idx] - data.values[idx]);
            }
            out.outcome.mean_abs_error =
                out.heldout.empty() ? 0.0 : abs_sum / static_cast<double>(out.heldout.size());
            out.outcome.status = to_string(rep.status);
            out.outcome.ok = true;
        } catch (const std::exception& err) {
            out.outcome.status = std::string("error: ") + err.what();
            out.outcome.ok = false;
        }
    });

    CvResult result;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t ri = 0; ri < ranks.size(); ++ri) {
        // assemble the predicted tensor for this rank from the held-out fits
        double abs_sum = 0.0;
        std::size_t counted = 0;
        for (std::size_t j = 0; j < jobs_list.size(); ++j) {
            if (jobs_list[j].rank_idx != ri) continue;
            result.per_fold.push_back(fits[j].outcome);
            if (!fits[j].outcome.ok) continue;
            for (std::size_t p = 0; p < fits[j].heldout.size(); ++p) {
                abs_sum += std::fabs(fits[j].predictions[p] - data.values[fits[j].heldout[p]]);
                ++counted;
            }
        }
        CvRankError entry;
        entry.rank = ranks[ri];
        entry.cv_error = counted ? abs_sum / static_cast<double>(counted)
                                 : std::numeric_limits<double>::infinity();
        if (entry.cv_error < best) {
            best = entry.cv_error;
            result.best_rank = entry.rank;
        }
        result.per_rank.push_back(std::move(entry));
    }
    return result;
}

}  // namespace tl2e
