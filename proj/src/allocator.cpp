#include "compot/allocator.hpp"

#include "compot/factorizer.hpp"
#include "compot/svd.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>

namespace compot {

Grouping grouping_from_string(const std::string& s) {
    if (s == "global") return Grouping::Global;
    if (s == "per-type") return Grouping::PerType;
    if (s == "custom") return Grouping::Custom;
    throw ConfigError("unknown grouping: " + s);
}

std::string to_string(Grouping g) {
    switch (g) {
        case Grouping::Global: return "global";
        case Grouping::PerType: return "per-type";
        case Grouping::Custom: return "custom";
    }
    return "global";
}

namespace {

// Rank thresholds are exact rationals evaluated in doubles; nudge before
// rounding so representable boundaries land on the intended integer.
std::int64_t floor_tol(double x) { return static_cast<std::int64_t>(std::floor(x + 1e-9)); }
std::int64_t ceil_tol(double x) { return static_cast<std::int64_t>(std::ceil(x - 1e-9)); }

void validate_config(const AllocatorConfig& cfg) {
    if (!(cfg.target_cr > 0.0 && cfg.target_cr < 1.0))
        throw ConfigError("target compression ratio must lie in (0, 1)");
    if (cfg.cr_min < 0.0 || cfg.cr_max > 1.0 || cfg.cr_min > cfg.cr_max)
        throw ConfigError("compression guards must satisfy 0 <= cr_min <= cr_max <= 1");
}

}  // namespace

Spectrum compute_spectrum(const WeightMatrix& w) {
    const double fro = w.data.norm();
    if (!(fro > 0.0)) throw NumericalError("cannot normalize zero matrix: " + w.name);
    Spectrum s;
    s.matrix_id = w.name;
    s.m = w.rows();
    s.n = w.cols();
    s.sv = singular_values(w.data / fro);
    return s;
}

std::vector<Spectrum> compute_spectra(const std::vector<WeightMatrix>& weights) {
    std::vector<Spectrum> out(weights.size());
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(weights.size()); ++i) {
        out[static_cast<std::size_t>(i)] = compute_spectrum(weights[static_cast<std::size_t>(i)]);
    }
    return out;
}

GuardBounds guard_bounds(std::int64_t m, std::int64_t n, std::int64_t rank_limit,
                         const AllocatorConfig& cfg) {
    const double mn = static_cast<double>(m) * static_cast<double>(n);
    const double mpn = static_cast<double>(m + n);
    GuardBounds b;
    // cr_min == 0 asks for no minimum compression, which puts no cap on the
    // retained rank; the non-beneficial rule handles rank choices that would
    // inflate storage.
    b.r_max = cfg.cr_min <= 0.0
                  ? rank_limit
                  : std::min(rank_limit, floor_tol((1.0 - cfg.cr_min) * mn / mpn));
    b.r_min = cfg.cr_max >= 1.0
                  ? 0
                  : std::clamp<std::int64_t>(ceil_tol((1.0 - cfg.cr_max) * mn / mpn), 0, rank_limit);
    b.dense = b.r_min * (m + n) >= m * n;
    b.t_min = rank_limit - b.r_max;
    b.t_max = rank_limit - b.r_min;
    return b;
}

namespace {

struct PoolCandidate {
    double sigma;
    std::int64_t mat;
    std::int64_t ell;  // 1-based singular-value index
};

struct Selection {
    std::vector<std::int64_t> trunc;  // per matrix (all matrices; dense stay 0)
    std::int64_t params = 0;
};

}  // namespace

AllocationPlan allocate(const std::vector<Spectrum>& specs, const AllocatorConfig& cfg,
                        const std::vector<std::string>& forced_dense) {
    if (specs.empty()) throw ConfigError("allocation requires at least one matrix");
    validate_config(cfg);

    const std::int64_t count = static_cast<std::int64_t>(specs.size());
    std::set<std::string> forced(forced_dense.begin(), forced_dense.end());

    std::vector<GuardBounds> bounds(specs.size());
    std::vector<bool> dense(specs.size(), false);
    std::int64_t params_total = 0;
    for (std::int64_t i = 0; i < count; ++i) {
        const Spectrum& sp = specs[static_cast<std::size_t>(i)];
        bounds[static_cast<std::size_t>(i)] = guard_bounds(sp.m, sp.n, sp.rank_limit(), cfg);
        dense[static_cast<std::size_t>(i)] =
            bounds[static_cast<std::size_t>(i)].dense || forced.count(sp.matrix_id) > 0;
        params_total += sp.m * sp.n;
    }
    const double params_target = (1.0 - cfg.target_cr) * static_cast<double>(params_total);

    Selection chosen;
    std::int64_t pool_k = 0;
    while (true) {
        std::vector<PoolCandidate> cands;
        std::int64_t k_min = 0, k_max = 0;
        std::int64_t params_dense = 0;
        for (std::int64_t i = 0; i < count; ++i) {
            const Spectrum& sp = specs[static_cast<std::size_t>(i)];
            const GuardBounds& b = bounds[static_cast<std::size_t>(i)];
            if (dense[static_cast<std::size_t>(i)]) {
                params_dense += sp.m * sp.n;
                continue;
            }
            if (b.r_min > b.r_max)
                throw BudgetError("target CR unreachable under guards: no admissible rank for " +
                                  sp.matrix_id);
            k_min += b.t_min;
            k_max += b.t_max;
            for (std::int64_t ell = b.r_min + 1; ell <= b.r_max; ++ell)
                cands.push_back({sp.sv(ell - 1), i, ell});
        }
        // Pooled order: smallest value first; ties prefer the larger matrix,
        // then the lower matrix index, then the deeper tail position.
        std::sort(cands.begin(), cands.end(), [&](const PoolCandidate& a, const PoolCandidate& b) {
            if (a.sigma != b.sigma) return a.sigma < b.sigma;
            const std::int64_t la = specs[static_cast<std::size_t>(a.mat)].rank_limit();
            const std::int64_t lb = specs[static_cast<std::size_t>(b.mat)].rank_limit();
            if (la != lb) return la > lb;
            if (a.mat != b.mat) return a.mat < b.mat;
            return a.ell > b.ell;
        });

        const auto select = [&](std::int64_t k_total) {
            Selection sel;
            sel.trunc.assign(specs.size(), 0);
            for (std::int64_t i = 0; i < count; ++i)
                if (!dense[static_cast<std::size_t>(i)])
                    sel.trunc[static_cast<std::size_t>(i)] = bounds[static_cast<std::size_t>(i)].t_min;
            for (std::int64_t c = 0; c < k_total - k_min; ++c)
                sel.trunc[static_cast<std::size_t>(cands[static_cast<std::size_t>(c)].mat)] += 1;
            sel.params = params_dense;
            for (std::int64_t i = 0; i < count; ++i) {
                if (dense[static_cast<std::size_t>(i)]) continue;
                const Spectrum& sp = specs[static_cast<std::size_t>(i)];
                const std::int64_t r = sp.rank_limit() - sel.trunc[static_cast<std::size_t>(i)];
                sel.params += r * (sp.m + sp.n);
            }
            return sel;
        };

        if (static_cast<double>(select(k_max).params) > params_target)
            throw BudgetError("target CR unreachable under guards");
        if (static_cast<double>(select(k_min).params) <= params_target) {
            pool_k = k_min;
        } else {
            // Smallest k with params(k) <= target; params is non-increasing in k.
            std::int64_t lo = k_min, hi = k_max;
            while (hi - lo > 1) {
                const std::int64_t mid = lo + (hi - lo) / 2;
                if (static_cast<double>(select(mid).params) <= params_target)
                    hi = mid;
                else
                    lo = mid;
            }
            pool_k = hi;
        }
        chosen = select(pool_k);

        bool reclassified = false;
        for (std::int64_t i = 0; i < count; ++i) {
            if (dense[static_cast<std::size_t>(i)]) continue;
            const Spectrum& sp = specs[static_cast<std::size_t>(i)];
            const std::int64_t r = sp.rank_limit() - chosen.trunc[static_cast<std::size_t>(i)];
            if (r * (sp.m + sp.n) >= sp.m * sp.n) {
                dense[static_cast<std::size_t>(i)] = true;
                reclassified = true;
            }
        }
        if (!reclassified) break;
    }

    AllocationPlan plan;
    plan.config = cfg;
    plan.params_total = params_total;
    plan.params_target = params_target;
    plan.params_achieved = chosen.params;
    for (std::int64_t i = 0; i < count; ++i) {
        const Spectrum& sp = specs[static_cast<std::size_t>(i)];
        PlanEntry e;
        e.name = sp.matrix_id;
        e.m = sp.m;
        e.n = sp.n;
        if (dense[static_cast<std::size_t>(i)]) {
            e.status = LayerStatus::Dense;
            e.r = sp.rank_limit();
            e.t = 0;
            e.cr = 0.0;
        } else {
            e.status = LayerStatus::Factorize;
            e.t = chosen.trunc[static_cast<std::size_t>(i)];
            e.r = sp.rank_limit() - e.t;
            e.cr = 1.0 - static_cast<double>(e.r * (sp.m + sp.n)) /
                             (static_cast<double>(sp.m) * static_cast<double>(sp.n));
            plan.pool_truncations += e.t;
        }
        plan.entries.push_back(std::move(e));
    }
    return plan;
}

AllocationPlan allocate_grouped(const std::vector<Spectrum>& specs,
                                const std::vector<std::string>& group_of,
                                const AllocatorConfig& cfg) {
    if (group_of.size() != specs.size())
        throw ConfigError("group labels do not match the matrix count");
    std::map<std::string, std::vector<std::int64_t>> groups;
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(specs.size()); ++i)
        groups[group_of[static_cast<std::size_t>(i)]].push_back(i);

    AllocationPlan merged;
    merged.config = cfg;
    merged.entries.resize(specs.size());
    for (const auto& [tag, idx] : groups) {
        std::vector<Spectrum> sub;
        sub.reserve(idx.size());
        for (std::int64_t i : idx) sub.push_back(specs[static_cast<std::size_t>(i)]);
        // Each group receives its proportional parameter share, which is the
        // same target ratio applied within the group.
        AllocationPlan part = allocate(sub, cfg);
        for (std::size_t j = 0; j < idx.size(); ++j)
            merged.entries[static_cast<std::size_t>(idx[j])] = part.entries[j];
        merged.pool_truncations += part.pool_truncations;
        merged.params_total += part.params_total;
        merged.params_achieved += part.params_achieved;
    }
    merged.params_target = (1.0 - cfg.target_cr) * static_cast<double>(merged.params_total);
    return merged;
}

AllocationPlan plan_to_layer_budgets(const AllocationPlan& plan, const std::vector<Spectrum>& specs,
                                     double ks_ratio, const std::vector<std::string>* group_of) {
    AllocationPlan out = plan;
    for (int pass = 0;; ++pass) {
        std::vector<std::string> failures;
        for (PlanEntry& e : out.entries) {
            if (e.status != LayerStatus::Factorize) continue;
            try {
                const KsBudget b = solve_ks(e.m, e.n, e.cr, ks_ratio);
                e.k = b.k;
                e.s = b.s;
            } catch (const Error&) {
                failures.push_back(e.name);
            }
        }
        if (failures.empty()) return out;
        if (pass >= 1)
            throw BudgetError("target CR unreachable after dense reclassification");
        std::vector<std::string> forced;
        for (const PlanEntry& e : out.entries)
            if (e.status == LayerStatus::Dense) forced.push_back(e.name);
        forced.insert(forced.end(), failures.begin(), failures.end());
        if (group_of == nullptr) {
            out = allocate(specs, plan.config, forced);
        } else {
            // Grouped reruns keep the pooling boundaries: rerun each group
            // that lost a matrix, leaving the others untouched.
            std::map<std::string, std::vector<std::int64_t>> groups;
            for (std::int64_t i = 0; i < static_cast<std::int64_t>(specs.size()); ++i)
                groups[(*group_of)[static_cast<std::size_t>(i)]].push_back(i);
            for (const auto& [tag, idx] : groups) {
                std::vector<Spectrum> sub;
                for (std::int64_t i : idx) sub.push_back(specs[static_cast<std::size_t>(i)]);
                AllocationPlan part = allocate(sub, plan.config, forced);
                for (std::size_t j = 0; j < idx.size(); ++j)
                    out.entries[static_cast<std::size_t>(idx[j])] = part.entries[j];
            }
            out.pool_truncations = 0;
            out.params_achieved = 0;
            for (const PlanEntry& e : out.entries) {
                if (e.status == LayerStatus::Factorize) {
                    out.pool_truncations += e.t;
                    out.params_achieved += e.r * (e.m + e.n);
                } else {
                    out.params_achieved += e.m * e.n;
                }
            }
        }
    }
}

nlohmann::json plan_to_json(const AllocationPlan& plan) {
    nlohmann::json j;
    j["target_cr"] = plan.config.target_cr;
    j["achieved_cr"] =
        plan.params_total > 0
            ? 1.0 - static_cast<double>(plan.params_achieved) / static_cast<double>(plan.params_total)
            : 0.0;
    j["pool_truncations"] = plan.pool_truncations;
    j["params_total"] = plan.params_total;
    j["params_target"] = plan.params_target;
    j["params_achieved"] = plan.params_achieved;
    j["config"] = {
        {"target_cr", plan.config.target_cr},
        {"cr_min", plan.config.cr_min},
        {"cr_max", plan.config.cr_max},
        {"grouping", to_string(plan.config.grouping)},
    };
    j["matrices"] = nlohmann::json::array();
    for (const PlanEntry& e : plan.entries) {
        j["matrices"].push_back({
            {"name", e.name},
            {"m", e.m},
            {"n", e.n},
            {"status", e.status == LayerStatus::Factorize ? "FACTORIZE" : "DENSE"},
            {"r", e.r},
            {"t", e.t},
            {"cr", e.cr},
            {"k", e.k},
            {"s", e.s},
        });
    }
    return j;
}

AllocationPlan plan_from_json(const nlohmann::json& j) {
    AllocationPlan plan;
    try {
        plan.config.target_cr = j.at("config").at("target_cr").get<double>();
        plan.config.cr_min = j.at("config").at("cr_min").get<double>();
        plan.config.cr_max = j.at("config").at("cr_max").get<double>();
        plan.config.grouping = grouping_from_string(j.at("config").at("grouping").get<std::string>());
        plan.pool_truncations = j.at("pool_truncations").get<std::int64_t>();
        plan.params_total = j.at("params_total").get<std::int64_t>();
        plan.params_target = j.at("params_target").get<double>();
        plan.params_achieved = j.at("params_achieved").get<std::int64_t>();
        for (const auto& e : j.at("matrices")) {
            PlanEntry p;
            p.name = e.at("name").get<std::string>();
            p.m = e.at("m").get<std::int64_t>();
            p.n = e.at("n").get<std::int64_t>();
            p.status = e.at("status").get<std::string>() == "DENSE" ? LayerStatus::Dense
                                                                    : LayerStatus::Factorize;
            p.r = e.at("r").get<std::int64_t>();
            p.t = e.at("t").get<std::int64_t>();
            p.cr = e.at("cr").get<double>();
            p.k = e.at("k").get<std::int64_t>();
            p.s = e.at("s").get<std::int64_t>();
            plan.entries.push_back(std::move(p));
        }
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(std::string("malformed allocation plan: ") + ex.what());
    }
    return plan;
}

}  // namespace compot
