#include "compot/report.hpp"

#include "compot/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace compot {

LayerMetrics layer_metrics(const WeightMatrix& w, const CholeskyFactor& f,
                           const MatrixXd& w_hat, const StorageReport& storage,
                           int iterations, std::string status) {
    if (w_hat.rows() != w.rows() || w_hat.cols() != w.cols())
        throw ConfigError("reconstruction shape does not match weight " + w.name);
    LayerMetrics m;
    m.name = w.name;
    m.status = std::move(status);
    m.m = w.rows();
    m.n = w.cols();
    const MatrixXd diff = w.data - w_hat;
    m.functional_loss = (f.l.transpose() * diff).squaredNorm();
    const double fro = w.data.norm();
    m.relative_weight_error = fro > 0.0 ? diff.norm() / fro : 0.0;
    m.cr_ideal = storage.achieved_cr;
    m.cr_padded = storage.achieved_cr_padded;
    m.iterations = iterations;
    m.ridge_used = f.ridge_used;
    return m;
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

GlobalReport global_report(const std::vector<LayerMetrics>& layers, const nlohmann::json& config,
                           double target_cr, std::optional<std::int64_t> measured_bits) {
    if (layers.empty()) throw ConfigError("nothing compressed");

    std::int64_t dense_bits_total = 0;
    double compressed_bits_ideal = 0.0;
    double compressed_bits_padded = 0.0;
    std::vector<double> losses;
    nlohmann::json rows = nlohmann::json::array();
    nlohmann::json dense_list = nlohmann::json::array();
    for (const LayerMetrics& l : layers) {
        const std::int64_t dense_bits = 16 * l.m * l.n;
        dense_bits_total += dense_bits;
        compressed_bits_ideal += (1.0 - l.cr_ideal) * static_cast<double>(dense_bits);
        compressed_bits_padded += (1.0 - l.cr_padded) * static_cast<double>(dense_bits);
        if (l.status == "DENSE") dense_list.push_back(l.name);
        losses.push_back(l.functional_loss);
        rows.push_back({
            {"name", l.name},
            {"status", l.status},
            {"m", l.m},
            {"n", l.n},
            {"k", l.k},
            {"s", l.s},
            {"functional_loss", l.functional_loss},
            {"relative_weight_error", l.relative_weight_error},
            {"cr_ideal", l.cr_ideal},
            {"cr_padded", l.cr_padded},
            {"iterations", l.iterations},
            {"ridge_used", l.ridge_used},
        });
    }
    std::sort(losses.begin(), losses.end());

    nlohmann::json doc;
    doc["schema"] = "compot-report/1";
    doc["config"] = config;
    doc["target_cr"] = target_cr;
    doc["achieved_cr_ideal"] =
        1.0 - compressed_bits_ideal / static_cast<double>(dense_bits_total);
    doc["achieved_cr_padded"] =
        1.0 - compressed_bits_padded / static_cast<double>(dense_bits_total);
    if (measured_bits)
        doc["achieved_cr_measured"] =
            1.0 - static_cast<double>(*measured_bits) / static_cast<double>(dense_bits_total);
    doc["dense_layers"] = dense_list;
    doc["loss_distribution"] = {
        {"min", losses.front()},
        {"p50", quantile_sorted(losses, 0.5)},
        {"max", losses.back()},
    };
    doc["layers"] = rows;

    std::string table;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-28s %-9s %7s %7s %6s %6s %12s %10s %8s\n", "layer",
                  "status", "m", "n", "k", "s", "func_loss", "rel_err", "cr");
    table += buf;
    for (const LayerMetrics& l : layers) {
        std::snprintf(buf, sizeof(buf), "%-28s %-9s %7lld %7lld %6lld %6lld %12.4e %10.4e %8.4f\n",
                      l.name.c_str(), l.status.c_str(), static_cast<long long>(l.m),
                      static_cast<long long>(l.n), static_cast<long long>(l.k),
                      static_cast<long long>(l.s), l.functional_loss, l.relative_weight_error,
                      l.cr_padded);
        table += buf;
    }
    std::snprintf(buf, sizeof(buf), "achieved CR: ideal %.6f, padded %.6f (target %.6f)\n",
                  doc["achieved_cr_ideal"].get<double>(), doc["achieved_cr_padded"].get<double>(),
                  target_cr);
    table += buf;
    return GlobalReport{std::move(doc), std::move(table)};
}

std::string report_csv(const std::vector<LayerMetrics>& layers) {
    std::string csv =
        "name,status,m,n,k,s,functional_loss,relative_weight_error,cr_ideal,cr_padded,"
        "iterations,ridge_used\n";
    char buf[512];
    for (const LayerMetrics& l : layers) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%lld,%lld,%lld,%lld,%.17g,%.17g,%.17g,%.17g,%d,%.17g\n",
                      l.name.c_str(), l.status.c_str(), static_cast<long long>(l.m),
                      static_cast<long long>(l.n), static_cast<long long>(l.k),
                      static_cast<long long>(l.s), l.functional_loss, l.relative_weight_error,
                      l.cr_ideal, l.cr_padded, l.iterations, l.ridge_used);
        csv += buf;
    }
    return csv;
}

}  // namespace compot
