#pragma once

#include "compot/gram.hpp"
#include "compot/packing.hpp"
#include "compot/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace compot {

struct LayerMetrics {
    std::string name;
    std::string status;  // FACTORIZE | SVD | DENSE
    std::int64_t m = 0;
    std::int64_t n = 0;
    std::int64_t k = -1;
    std::int64_t s = -1;
    double functional_loss = 0.0;         // squared calibration-space error
    double relative_weight_error = 0.0;   // ||W - What||_F / ||W||_F
    double cr_ideal = 0.0;
    double cr_padded = 0.0;
    int iterations = 0;
    double ridge_used = 0.0;
};

// Quality and storage metrics for one layer's deployable artifact. The
// functional loss is evaluated through the whitening factor; the
// reconstruction must come from the same path the reconstruct command uses.
LayerMetrics layer_metrics(const WeightMatrix& w, const CholeskyFactor& f,
                           const MatrixXd& w_hat, const StorageReport& storage,
                           int iterations, std::string status);

struct GlobalReport {
    nlohmann::json document;  // schema compot-report/1
    std::string table;        // human-readable per-layer summary
};

// Aggregates layer metrics into the run report. measured_bits, when given,
// is the artifact byte count normalized to the 16-bit dense baseline.
GlobalReport global_report(const std::vector<LayerMetrics>& layers, const nlohmann::json& config,
                           double target_cr, std::optional<std::int64_t> measured_bits);

std::string report_csv(const std::vector<LayerMetrics>& layers);

}  // namespace compot
