#pragma once

#include "tl2e/l2e.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tl2e {

/// Random partition of the observed entries into K folds of near-equal size
/// (sizes differ by at most one). Deterministic for a fixed seed.
struct CvPlan {
    int k = 10;
    std::uint64_t seed = 0;
    std::vector<std::size_t> observed;  // linear indices of observed entries
    std::vector<int> fold_of;           // fold id in [0, k), aligned with observed
};

CvPlan make_plan(const MaskedTensor& data, int k, std::uint64_t seed);

struct CvFoldOutcome {
    std::vector<int> rank;
    int fold = 0;
    std::size_t heldout_count = 0;
    double mean_abs_error = 0.0;  // over this fold's held-out entries
    std::string status;           // solver status or error:<message>
    bool ok = false;
};

struct CvRankError {
    std::vector<int> rank;
    double cv_error = 0.0;  // mean |prediction - observation| over observed entries
};

struct CvResult {
    std::vector<CvRankError> per_rank;
    std::vector<CvFoldOutcome> per_fold;
    std::vector<int> best_rank;  // argmin of cv_error
};

/// For each candidate rank: fit with each fold's entries treated as missing,
/// predict the held-out entries, and score the assembled predicted tensor by
/// the mean absolute residual against the observed data. Failed (rank, fold)
/// fits are recorded and excluded from the aggregate rather than aborting.
CvResult cross_validate(const MaskedTensor& data, const std::vector<std::vector<int>>& ranks,
                        const CvPlan& plan, const FitConfig& cfg, int jobs = 1);

}  // namespace tl2e
