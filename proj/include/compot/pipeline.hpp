#pragma once

#include "compot/allocator.hpp"
#include "compot/manifest.hpp"
#include "compot/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>

namespace compot {

// Resolved run configuration: defaults, then config-file values, then
// command-line flags.
struct RunConfig {
    double ks_ratio = 2.0;
    int iters = 20;
    std::string init = "svd";  // svd | random
    std::uint64_t seed = 0;
    std::optional<double> early_stop_tol;
    double cr_min = 0.0;
    double cr_max = 0.9;
    std::string grouping = "global";  // global | per-type | custom
    std::string baseline = "none";    // none | svd | v2-alloc
    int jobs = 1;
    std::optional<double> target_cr;
    std::optional<double> static_cr;
};

nlohmann::json config_to_json(const RunConfig& cfg);
RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {});

// Group key for per-type pooling: the tensor name with pure-numeric path
// components removed, so same-role projections across blocks share a key.
std::string projection_type_key(const std::string& name);

// Accumulates per-layer Gram tensors from activation chunk tensors named
// "<weight>/acts/<index>" and writes them to out_path.
void run_gram(const std::string& manifest_path, const std::string& acts_path,
              const std::string& out_path, const RunConfig& cfg);

// Produces the allocation plan JSON: pooled-spectrum allocation by default,
// a uniform plan under --static-cr, or the loss-proportional comparison
// allocator under --baseline v2-alloc (which needs the grams container).
void run_allocate(const std::string& manifest_path, const std::string& weights_path,
                  const std::string& plan_out, const RunConfig& cfg,
                  const std::optional<std::string>& grams_path = std::nullopt);

// Runs the per-layer compression described by the plan and serializes the
// artifacts container, a layer-metadata sidecar, and the run report.
void run_compress(const std::string& manifest_path, const std::string& weights_path,
                  const std::optional<std::string>& grams_path, const std::string& plan_path,
                  const std::string& out_path, const std::string& report_path,
                  const RunConfig& cfg);

// Expands an artifacts container back into dense weight tensors.
void run_reconstruct(const std::string& artifacts_path, const std::string& out_path);

// Recomputes metrics for an existing artifacts container and emits the
// report (and optionally a CSV of per-layer rows).
void run_report(const std::string& manifest_path, const std::string& weights_path,
                const std::optional<std::string>& grams_path, const std::string& artifacts_path,
                const std::string& plan_path, const std::string& report_path,
                const std::optional<std::string>& csv_path, const RunConfig& cfg);

}  // namespace compot
