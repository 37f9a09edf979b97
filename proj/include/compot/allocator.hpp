#pragma once

#include "compot/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace compot {

enum class Grouping { Global, PerType, Custom };

Grouping grouping_from_string(const std::string& s);
std::string to_string(Grouping g);

struct AllocatorConfig {
    double target_cr = 0.2;  // model-wide compression target
    double cr_min = 0.0;     // per-matrix guard: minimum compression (0 disables)
    double cr_max = 0.9;     // per-matrix guard: maximum compression
    Grouping grouping = Grouping::Global;
};

// Singular values of a Frobenius-normalized matrix, non-increasing.
struct Spectrum {
    std::string matrix_id;
    std::int64_t m = 0;
    std::int64_t n = 0;
    VectorXd sv;

    std::int64_t rank_limit() const { return sv.size(); }  // min(m, n)
};

Spectrum compute_spectrum(const WeightMatrix& w);
std::vector<Spectrum> compute_spectra(const std::vector<WeightMatrix>& weights);

// Retained-rank interval induced by the compression guards under the
// low-rank storage model r*(m+n), and the non-beneficial flag.
struct GuardBounds {
    std::int64_t r_min = 0;
    std::int64_t r_max = 0;
    std::int64_t t_min = 0;  // rank_limit - r_max
    std::int64_t t_max = 0;  // rank_limit - r_min
    bool dense = false;      // r_min*(m+n) >= m*n: factorizing cannot pay off
};

GuardBounds guard_bounds(std::int64_t m, std::int64_t n, std::int64_t rank_limit,
                         const AllocatorConfig& cfg);

enum class LayerStatus { Factorize, Dense };

struct PlanEntry {
    std::string name;
    std::int64_t m = 0;
    std::int64_t n = 0;
    LayerStatus status = LayerStatus::Factorize;
    std::int64_t r = 0;   // retained rank (rank_limit for dense layers)
    std::int64_t t = 0;   // truncated singular values
    double cr = 0.0;      // 1 - r(m+n)/(mn); exactly 0 for dense layers
    std::int64_t k = -1;  // dictionary size, filled by plan_to_layer_budgets
    std::int64_t s = -1;  // per-column sparsity, likewise
};

struct AllocationPlan {
    std::vector<PlanEntry> entries;
    std::int64_t pool_truncations = 0;    // K
    std::int64_t params_total = 0;        // P0
    double params_target = 0.0;           // P_tgt = (1 - target_cr) P0
    std::int64_t params_achieved = 0;
    AllocatorConfig config;
};

// One-shot global allocation: mandatory guard truncations first, then the
// globally smallest pooled singular values until the parameter budget is
// met, with the minimal pool size found by bisection. Matrices whose
// retained rank could not pay for itself are reclassified dense and the
// search reruns without them.
AllocationPlan allocate(const std::vector<Spectrum>& specs, const AllocatorConfig& cfg,
                        const std::vector<std::string>& forced_dense = {});

// Same procedure run independently per group with each group's proportional
// parameter share (equivalently, the same target ratio per group).
AllocationPlan allocate_grouped(const std::vector<Spectrum>& specs,
                                const std::vector<std::string>& group_of, const AllocatorConfig& cfg);

// Maps per-matrix ratios onto dictionary/sparsity budgets. A matrix whose
// ratio admits no feasible (k, s) is reclassified dense and the allocation
// is rerun once over the remaining active set (grouped when group_of is
// given).
AllocationPlan plan_to_layer_budgets(const AllocationPlan& plan, const std::vector<Spectrum>& specs,
                                     double ks_ratio,
                                     const std::vector<std::string>* group_of = nullptr);

nlohmann::json plan_to_json(const AllocationPlan& plan);
AllocationPlan plan_from_json(const nlohmann::json& j);

}  // namespace compot
