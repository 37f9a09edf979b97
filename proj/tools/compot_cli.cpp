#include "compot/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <optional>
#include <string>

namespace {

// Flag staging area; only flags the user actually passed override the
// config file.
struct Flags {
    std::string config_path;
    double cr = 0.0;
    double static_cr = 0.0;
    double ks_ratio = 0.0;
    int iters = 0;
    std::string init;
    std::uint64_t seed = 0;
    double early_stop_tol = 0.0;
    double cr_min = 0.0;
    double cr_max = 0.0;
    std::string grouping;
    std::string baseline;
    int jobs = 0;
};

void add_common_flags(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config_path, "JSON config file; flags override it");
    cmd->add_option("--cr", f.cr, "model-wide target compression ratio in (0,1)");
    cmd->add_option("--static-cr", f.static_cr, "uniform per-layer ratio, bypassing allocation");
    cmd->add_option("--ks-ratio", f.ks_ratio, "dictionary-to-sparsity ratio (> 1)");
    cmd->add_option("--iters", f.iters, "alternating minimization iterations");
    cmd->add_option("--init", f.init, "dictionary init: svd or random")
        ->check(CLI::IsMember({"svd", "random"}));
    cmd->add_option("--seed", f.seed, "run seed for random init");
    cmd->add_option("--early-stop-tol", f.early_stop_tol, "relative loss-change stop tolerance");
    cmd->add_option("--cr-min", f.cr_min, "per-matrix minimum compression guard");
    cmd->add_option("--cr-max", f.cr_max, "per-matrix maximum compression guard");
    cmd->add_option("--grouping", f.grouping, "allocation pooling: global, per-type, custom")
        ->check(CLI::IsMember({"global", "per-type", "custom"}));
    cmd->add_option("--baseline", f.baseline, "comparison mode: none, svd, v2-alloc")
        ->check(CLI::IsMember({"none", "svd", "v2-alloc"}));
    cmd->add_option("--jobs", f.jobs, "layer-level worker threads");
}

compot::RunConfig resolve_config(const CLI::App* cmd, const Flags& f) {
    compot::RunConfig cfg;
    if (cmd->count("--config") > 0) {
        std::ifstream in(f.config_path);
        if (!in) throw compot::ConfigError("cannot open config: " + f.config_path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw compot::ConfigError(std::string("malformed config: ") + e.what());
        }
        cfg = compot::config_from_json(j, cfg);
    }
    if (cmd->count("--cr") > 0) cfg.target_cr = f.cr;
    if (cmd->count("--static-cr") > 0) cfg.static_cr = f.static_cr;
    if (cmd->count("--ks-ratio") > 0) cfg.ks_ratio = f.ks_ratio;
    if (cmd->count("--iters") > 0) cfg.iters = f.iters;
    if (cmd->count("--init") > 0) cfg.init = f.init;
    if (cmd->count("--seed") > 0) cfg.seed = f.seed;
    if (cmd->count("--early-stop-tol") > 0) cfg.early_stop_tol = f.early_stop_tol;
    if (cmd->count("--cr-min") > 0) cfg.cr_min = f.cr_min;
    if (cmd->count("--cr-max") > 0) cfg.cr_max = f.cr_max;
    if (cmd->count("--grouping") > 0) cfg.grouping = f.grouping;
    if (cmd->count("--baseline") > 0) cfg.baseline = f.baseline;
    if (cmd->count("--jobs") > 0) cfg.jobs = f.jobs;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"training-free weight-matrix compression toolkit"};
    app.require_subcommand(1);

    Flags flags;
    std::string manifest, weights, acts, grams, plan, out, report, csv, artifacts;

    CLI::App* c_gram = app.add_subcommand("gram", "accumulate calibration Gram matrices");
    c_gram->add_option("--manifest", manifest)->required();
    c_gram->add_option("--acts", acts, "activation chunk container")->required();
    c_gram->add_option("--out", out, "output Gram container")->required();
    add_common_flags(c_gram, flags);

    CLI::App* c_alloc = app.add_subcommand("allocate", "produce the per-layer compression plan");
    c_alloc->add_option("--manifest", manifest)->required();
    c_alloc->add_option("--weights", weights)->required();
    c_alloc->add_option("--grams", grams,
                        "Gram container for --baseline v2-alloc (identity whitening when omitted)");
    c_alloc->add_option("--out", out, "output plan JSON")->required();
    add_common_flags(c_alloc, flags);

    CLI::App* c_comp = app.add_subcommand("compress", "factorize layers per plan");
    c_comp->add_option("--manifest", manifest)->required();
    c_comp->add_option("--weights", weights)->required();
    c_comp->add_option("--grams", grams, "Gram container (identity whitening when omitted)");
    c_comp->add_option("--plan", plan)->required();
    c_comp->add_option("--out", out, "output artifacts container")->required();
    c_comp->add_option("--report", report, "report JSON path (default <out>.report.json)");
    add_common_flags(c_comp, flags);

    CLI::App* c_recon = app.add_subcommand("reconstruct", "expand artifacts to dense weights");
    c_recon->add_option("--artifacts", artifacts)->required();
    c_recon->add_option("--out", out)->required();
    add_common_flags(c_recon, flags);

    CLI::App* c_rep = app.add_subcommand("report", "recompute metrics for existing artifacts");
    c_rep->add_option("--manifest", manifest)->required();
    c_rep->add_option("--weights", weights)->required();
    c_rep->add_option("--grams", grams);
    c_rep->add_option("--artifacts", artifacts)->required();
    c_rep->add_option("--plan", plan)->required();
    c_rep->add_option("--out", report, "report JSON path")->required();
    c_rep->add_option("--csv", csv, "also write per-layer rows as CSV");
    add_common_flags(c_rep, flags);

    CLI11_PARSE(app, argc, argv);

    try {
        if (c_gram->parsed()) {
            compot::run_gram(manifest, acts, out, resolve_config(c_gram, flags));
        } else if (c_alloc->parsed()) {
            std::optional<std::string> g;
            if (c_alloc->count("--grams") > 0) g = grams;
            compot::run_allocate(manifest, weights, out, resolve_config(c_alloc, flags), g);
        } else if (c_comp->parsed()) {
            std::optional<std::string> g;
            if (c_comp->count("--grams") > 0) g = grams;
            const std::string rep = c_comp->count("--report") > 0 ? report : out + ".report.json";
            compot::run_compress(manifest, weights, g, plan, out, rep,
                                 resolve_config(c_comp, flags));
        } else if (c_recon->parsed()) {
            compot::run_reconstruct(artifacts, out);
        } else if (c_rep->parsed()) {
            std::optional<std::string> g;
            if (c_rep->count("--grams") > 0) g = grams;
            std::optional<std::string> csv_opt;
            if (c_rep->count("--csv") > 0) csv_opt = csv;
            compot::run_report(manifest, weights, g, artifacts, plan, report, csv_opt,
                               resolve_config(c_rep, flags));
        }
    } catch (const compot::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const compot::IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 2;
    } catch (const compot::NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const compot::BudgetError& e) {
        std::fprintf(stderr, "infeasible budget: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
