#include "compot/pipeline.hpp"

#include "compot/baselines.hpp"
#include "compot/factorizer.hpp"
#include "compot/gram.hpp"
#include "compot/half.hpp"
#include "compot/kernels.hpp"
#include "compot/packing.hpp"
#include "compot/report.hpp"
#include "compot/rng.hpp"
#include "compot/tensor_container.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <vector>

namespace compot {

using nlohmann::json;

nlohmann::json config_to_json(const RunConfig& cfg) {
    json j;
    j["ks_ratio"] = cfg.ks_ratio;
    j["iters"] = cfg.iters;
    j["init"] = cfg.init;
    j["seed"] = cfg.seed;
    j["early_stop_tol"] = cfg.early_stop_tol ? json(*cfg.early_stop_tol) : json(nullptr);
    j["cr_min"] = cfg.cr_min;
    j["cr_max"] = cfg.cr_max;
    j["grouping"] = cfg.grouping;
    j["baseline"] = cfg.baseline;
    j["cr"] = cfg.target_cr ? json(*cfg.target_cr) : json(nullptr);
    j["static_cr"] = cfg.static_cr ? json(*cfg.static_cr) : json(nullptr);
    return j;
}

RunConfig config_from_json(const nlohmann::json& j, RunConfig base) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    try {
        if (j.contains("ks_ratio")) base.ks_ratio = j["ks_ratio"].get<double>();
        if (j.contains("iters")) base.iters = j["iters"].get<int>();
        if (j.contains("init")) base.init = j["init"].get<std::string>();
        if (j.contains("seed")) base.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("early_stop_tol") && !j["early_stop_tol"].is_null())
            base.early_stop_tol = j["early_stop_tol"].get<double>();
        if (j.contains("cr_min")) base.cr_min = j["cr_min"].get<double>();
        if (j.contains("cr_max")) base.cr_max = j["cr_max"].get<double>();
        if (j.contains("grouping")) base.grouping = j["grouping"].get<std::string>();
        if (j.contains("baseline")) base.baseline = j["baseline"].get<std::string>();
        if (j.contains("jobs")) base.jobs = j["jobs"].get<int>();
        if (j.contains("cr") && !j["cr"].is_null()) base.target_cr = j["cr"].get<double>();
        if (j.contains("static_cr") && !j["static_cr"].is_null())
            base.static_cr = j["static_cr"].get<double>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
    return base;
}

std::string projection_type_key(const std::string& name) {
    std::string key;
    std::size_t start = 0;
    auto flush = [&](std::size_t end) {
        if (end == start) {
            start = end + 1;
            return;
        }
        const std::string tok = name.substr(start, end - start);
        start = end + 1;
        bool digits = !tok.empty() && tok.find_first_not_of("0123456789") == std::string::npos;
        if (digits) return;
        if (!key.empty()) key += '.';
        key += tok;
    };
    for (std::size_t i = 0; i < name.size(); ++i)
        if (name[i] == '.' || name[i] == '/') flush(i);
    flush(name.size());
    return key.empty() ? name : key;
}

namespace {

InitMode init_mode_from_string(const std::string& s) {
    if (s == "svd") return InitMode::Svd;
    if (s == "random") return InitMode::Random;
    throw ConfigError("unknown init mode: " + s);
}

CholeskyFactor identity_factor(std::int64_t m) {
    return CholeskyFactor{MatrixXd::Identity(m, m), 0.0};
}

CholeskyFactor factor_for_layer(const ManifestLayer& layer, const TensorContainer* grams,
                                std::int64_t m) {
    if (grams != nullptr) {
        const std::string gname = Manifest::gram_name_for(layer);
        if (grams->contains(gname)) {
            const MatrixXd g = grams->matrix(gname);
            if (g.rows() != m || g.cols() != m)
                throw ConfigError("gram " + gname + " does not match weight width");
            if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, g.cwiseAbs().maxCoeff()))
                throw NumericalError("gram " + gname + " is not symmetric");
            return cholesky_of(g, RidgePolicy{});
        }
        if (layer.gram)
            throw ConfigError("gram tensor " + gname + " not found in grams container");
    }
    return identity_factor(m);
}

// Runs fn(i) for each layer, optionally across jobs threads. Kernel results
// do not depend on the thread count, so outputs are identical either way.
void for_each_layer(std::int64_t count, int jobs, const std::function<void(std::int64_t)>& fn) {
    if (jobs <= 1) {
        for (std::int64_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
#pragma omp parallel for num_threads(jobs) schedule(dynamic)
    for (std::int64_t i = 0; i < count; ++i) {
        try {
            fn(i);
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

void write_container_cleanly(const std::string& path,
                             const std::map<std::string, HostTensor>& tensors) {
    try {
        write_container(path, tensors);
    } catch (...) {
        std::remove(path.c_str());
        throw;
    }
}

void write_text_cleanly(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw IoError("cannot write: " + path);
    out << text;
    if (!out) {
        out.close();
        std::remove(path.c_str());
        throw IoError("write failed: " + path);
    }
}

json read_json_file(const std::string& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw IoError(std::string("cannot open ") + what + ": " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed ") + what + ": " + e.what());
    }
    return j;
}

HostTensor tensor_from_f16_bits(const std::vector<std::uint16_t>& bits) {
    HostTensor t;
    t.dtype = Dtype::F16;
    t.shape = {static_cast<std::int64_t>(bits.size())};
    t.bytes.resize(bits.size() * 2);
    std::memcpy(t.bytes.data(), bits.data(), t.bytes.size());
    return t;
}

HostTensor tensor_from_u8(std::vector<std::uint8_t> bytes) {
    HostTensor t;
    t.dtype = Dtype::U8;
    t.shape = {static_cast<std::int64_t>(bytes.size())};
    t.bytes = std::move(bytes);
    return t;
}

std::vector<std::uint16_t> f16_bits_from_tensor(const TensorContainer& c, const std::string& name) {
    const auto raw = c.raw(name);
    std::vector<std::uint16_t> bits(raw.size() / 2);
    std::memcpy(bits.data(), raw.data(), raw.size());
    return bits;
}

}  // namespace

void run_gram(const std::string& manifest_path, const std::string& acts_path,
              const std::string& out_path, const RunConfig& cfg) {
    const Manifest man = Manifest::read(manifest_path);
    const TensorContainer acts = TensorContainer::read(acts_path);

    // Gram names may be shared between layers; the first layer naming one
    // provides its activation chunks.
    std::vector<std::pair<std::string, const ManifestLayer*>> work;
    {
        std::map<std::string, bool> seen;
        for (const ManifestLayer& l : man.layers) {
            const std::string gname = Manifest::gram_name_for(l);
            if (seen.emplace(gname, true).second) work.emplace_back(gname, &l);
        }
    }

    std::vector<HostTensor> grams(work.size());
    std::vector<std::string> logs(work.size());
    for_each_layer(static_cast<std::int64_t>(work.size()), cfg.jobs, [&](std::int64_t i) {
        const auto& [gname, layer] = work[static_cast<std::size_t>(i)];
        const std::string prefix = layer->weight + "/acts/";
        std::vector<std::pair<std::int64_t, std::string>> chunks;
        for (const auto& [tname, entry] : acts.entries()) {
            if (tname.rfind(prefix, 0) != 0) continue;
            const std::string suffix = tname.substr(prefix.size());
            if (suffix.empty() || suffix.find_first_not_of("0123456789") != std::string::npos)
                throw ConfigError("bad activation chunk name: " + tname);
            chunks.emplace_back(std::stoll(suffix), tname);
        }
        if (chunks.empty())
            throw ConfigError("missing activation chunks for layer " + layer->weight);
        std::sort(chunks.begin(), chunks.end());

        GramState state;
        bool first = true;
        for (const auto& [idx, tname] : chunks) {
            const MatrixXd chunk = acts.matrix(tname);
            if (first) {
                state = GramState::zeros(chunk.cols());
                first = false;
            }
            accumulate(state, chunk);
        }
        grams[static_cast<std::size_t>(i)] = tensor_from_matrix(state.g, Dtype::F64);

        const auto diag = state.g.diagonal();
        char buf[256];
        std::snprintf(buf, sizeof(buf),
                      "gram %s: N=%lld m=%lld diag[min=%.3e mean=%.3e max=%.3e]",
                      gname.c_str(), static_cast<long long>(state.sample_count),
                      static_cast<long long>(state.dim), diag.minCoeff(), diag.mean(),
                      diag.maxCoeff());
        logs[static_cast<std::size_t>(i)] = buf;
    });

    std::map<std::string, HostTensor> out;
    for (std::size_t i = 0; i < work.size(); ++i) out[work[i].first] = std::move(grams[i]);
    write_container_cleanly(out_path, out);
    for (const auto& line : logs) std::printf("%s\n", line.c_str());
}

namespace {

// Uniform-ratio plan used by --static-cr: every layer gets the same target
// and the pooled allocation is bypassed entirely.
AllocationPlan static_plan(const std::vector<WeightMatrix>& weights, const RunConfig& cfg) {
    AllocationPlan plan;
    plan.config.target_cr = *cfg.static_cr;
    plan.config.cr_min = cfg.cr_min;
    plan.config.cr_max = cfg.cr_max;
    plan.config.grouping = grouping_from_string(cfg.grouping);
    for (const WeightMatrix& w : weights) {
        const std::int64_t m = w.rows(), n = w.cols();
        const std::int64_t limit = std::min(m, n);
        PlanEntry e;
        e.name = w.name;
        e.m = m;
        e.n = n;
        plan.params_total += m * n;
        try {
            const KsBudget b = solve_ks(m, n, *cfg.static_cr, cfg.ks_ratio);
            e.status = LayerStatus::Factorize;
            e.cr = *cfg.static_cr;
            e.k = b.k;
            e.s = b.s;
            e.r = std::max<std::int64_t>(
                0, static_cast<std::int64_t>(
                       std::floor((1.0 - e.cr) * static_cast<double>(m) * static_cast<double>(n) /
                                      static_cast<double>(m + n) +
                                  1e-9)));
            e.r = std::min(e.r, limit);
            e.t = limit - e.r;
            plan.pool_truncations += e.t;
            plan.params_achieved += e.r * (m + n);
        } catch (const Error&) {
            e.status = LayerStatus::Dense;
            e.r = limit;
            e.cr = 0.0;
            plan.params_achieved += m * n;
        }
        plan.entries.push_back(std::move(e));
    }
    plan.params_target = (1.0 - *cfg.static_cr) * static_cast<double>(plan.params_total);
    return plan;
}

// Comparison allocator: per-group loss-proportional ratios mapped onto plan
// entries with the source recipe's kept-fraction rank rule.
AllocationPlan v2_plan(const std::vector<WeightMatrix>& weights, const Manifest& man,
                       const TensorContainer* grams, const RunConfig& cfg) {
    if (!cfg.target_cr) throw ConfigError("v2-alloc requires --cr");
    std::vector<CholeskyFactor> factors;
    std::vector<std::string> groups;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        factors.push_back(factor_for_layer(man.layers[i], grams, weights[i].rows()));
        groups.push_back(man.layers[i].group ? *man.layers[i].group
                                             : projection_type_key(man.layers[i].weight));
    }
    const std::vector<double> ratios = v2_cr_allocation(weights, factors, groups, *cfg.target_cr);

    AllocationPlan plan;
    plan.config.target_cr = *cfg.target_cr;
    plan.config.cr_min = cfg.cr_min;
    plan.config.cr_max = cfg.cr_max;
    plan.config.grouping = grouping_from_string(cfg.grouping);
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const std::int64_t m = weights[i].rows(), n = weights[i].cols();
        const std::int64_t limit = std::min(m, n);
        PlanEntry e;
        e.name = weights[i].name;
        e.m = m;
        e.n = n;
        plan.params_total += m * n;
        // Kept-fraction semantics: the ratio budgets the retained rank.
        auto r = static_cast<std::int64_t>(static_cast<double>(m) * static_cast<double>(n) *
                                           ratios[i] / static_cast<double>(m + n));
        r = std::min(r, limit);
        bool dense = r < 1 || r * (m + n) >= m * n;
        if (!dense) {
            e.cr = 1.0 - static_cast<double>(r * (m + n)) /
                             (static_cast<double>(m) * static_cast<double>(n));
            try {
                const KsBudget b = solve_ks(m, n, e.cr, cfg.ks_ratio);
                e.status = LayerStatus::Factorize;
                e.k = b.k;
                e.s = b.s;
                e.r = r;
                e.t = limit - r;
                plan.pool_truncations += e.t;
                plan.params_achieved += r * (m + n);
            } catch (const Error&) {
                dense = true;
            }
        }
        if (dense) {
            e.status = LayerStatus::Dense;
            e.r = limit;
            e.t = 0;
            e.cr = 0.0;
            e.k = -1;
            e.s = -1;
            plan.params_achieved += m * n;
        }
        plan.entries.push_back(std::move(e));
    }
    plan.params_target = (1.0 - *cfg.target_cr) * static_cast<double>(plan.params_total);
    return plan;
}

}  // namespace

void run_allocate(const std::string& manifest_path, const std::string& weights_path,
                  const std::string& plan_out, const RunConfig& cfg,
                  const std::optional<std::string>& grams_path) {
    const Manifest man = Manifest::read(manifest_path);
    const TensorContainer weights = TensorContainer::read(weights_path);
    std::vector<WeightMatrix> mats;
    mats.reserve(man.layers.size());
    for (const ManifestLayer& l : man.layers)
        mats.push_back(load_weight(weights, l.weight, l.orientation));
    if (mats.empty()) throw ConfigError("manifest has no layers");

    AllocationPlan plan;
    if (cfg.static_cr) {
        plan = static_plan(mats, cfg);
    } else if (cfg.baseline == "v2-alloc") {
        std::optional<TensorContainer> grams;
        if (grams_path) grams = TensorContainer::read(*grams_path);
        plan = v2_plan(mats, man, grams ? &*grams : nullptr, cfg);
    } else {
        if (!cfg.target_cr) throw ConfigError("allocate requires --cr (or --static-cr)");
        AllocatorConfig acfg{*cfg.target_cr, cfg.cr_min, cfg.cr_max,
                             grouping_from_string(cfg.grouping)};
        const std::vector<Spectrum> specs = compute_spectra(mats);
        std::vector<std::string> group_of;
        if (acfg.grouping != Grouping::Global) {
            for (const ManifestLayer& l : man.layers) {
                if (acfg.grouping == Grouping::Custom) {
                    if (!l.group)
                        throw ConfigError("custom grouping needs a group tag for " + l.weight);
                    group_of.push_back(*l.group);
                } else {
                    group_of.push_back(projection_type_key(l.weight));
                }
            }
        }
        plan = acfg.grouping == Grouping::Global ? allocate(specs, acfg)
                                                 : allocate_grouped(specs, group_of, acfg);
        plan = plan_to_layer_budgets(plan, specs, cfg.ks_ratio,
                                     group_of.empty() ? nullptr : &group_of);
    }

    json doc = plan_to_json(plan);
    doc["run_config"] = config_to_json(cfg);
    write_text_cleanly(plan_out, doc.dump(2) + "\n");

    std::int64_t dense_count = 0;
    for (const PlanEntry& e : plan.entries)
        if (e.status == LayerStatus::Dense) ++dense_count;
    std::printf("plan: %zu layers (%lld dense), achieved_cr=%.6f -> %s\n", plan.entries.size(),
                static_cast<long long>(dense_count), doc["achieved_cr"].get<double>(),
                plan_out.c_str());
}

namespace {

struct LayerArtifacts {
    std::map<std::string, HostTensor> tensors;
    json sidecar;
    LayerMetrics metrics;
    std::int64_t measured_bits = 0;
};

LayerArtifacts compress_layer(const ManifestLayer& layer, const PlanEntry& entry,
                              const TensorContainer& weights, const TensorContainer* grams,
                              const RunConfig& cfg) {
    LayerArtifacts out;
    const WeightMatrix w = load_weight(weights, layer.weight, layer.orientation);
    if (w.rows() != entry.m || w.cols() != entry.n)
        throw ConfigError("plan entry " + entry.name + " does not match weight shape");

    if (entry.status == LayerStatus::Dense) {
        out.tensors[layer.weight] = weights.host_tensor(layer.weight);
        out.metrics = layer_metrics(w, identity_factor(w.rows()), w.data, StorageReport{}, 0,
                                    "DENSE");
        out.metrics.cr_ideal = 0.0;
        out.metrics.cr_padded = 0.0;
        out.measured_bits = 16 * entry.m * entry.n;  // dense baseline normalization
        out.sidecar = {{"kind", "dense"},
                       {"m", entry.m},
                       {"n", entry.n},
                       {"orientation", to_string(layer.orientation)}};
        return out;
    }

    const CholeskyFactor factor = factor_for_layer(layer, grams, w.rows());
    MatrixXd whitened = whiten(factor, w.data);
    // The factorization operand is carried at 32-bit storage precision.
    whitened = whitened.cast<float>().cast<double>();

    MatrixXd basis;
    SparseCodes codes;
    std::int64_t k = entry.k, s = entry.s;
    int iterations = 0;
    std::string status;
    if (cfg.baseline == "svd") {
        // Matched budget in the packed storage model with k = s = r.
        const double mn = static_cast<double>(entry.m) * static_cast<double>(entry.n);
        const double denom = 16.0 * static_cast<double>(entry.m) +
                             17.0 * static_cast<double>(entry.n);
        auto r = static_cast<std::int64_t>(std::floor((1.0 - entry.cr) * 16.0 * mn / denom + 1e-9));
        r = std::min(r, std::min(entry.m, entry.n));
        if (r < 1)
            throw BudgetError("svd baseline infeasible at cr=" + std::to_string(entry.cr) +
                              " for " + entry.name);
        const WhitenedSvdFactors f = truncated_whitened_svd(w, factor, r);
        basis = f.u;
        codes = SparseCodes::from_dense(f.sigma.asDiagonal() * f.v.transpose(), r);
        k = r;
        s = r;
        iterations = 1;
        status = "SVD";
    } else {
        if (k < 1 || s < 1) throw ConfigError("plan entry " + entry.name + " lacks (k, s)");
        FactorizerConfig fc;
        fc.ks_ratio = cfg.ks_ratio;
        fc.max_iterations = cfg.iters;
        fc.init_mode = init_mode_from_string(cfg.init);
        fc.seed = derive_seed(cfg.seed, layer.weight);
        fc.early_stop_tol = cfg.early_stop_tol;
        FactorizationResult res = factorize(whitened, fc, k, s);
        basis = std::move(res.dictionary.basis);
        codes = std::move(res.codes);
        iterations = res.trace.iterations_run;
        status = "FACTORIZE";
    }

    const MatrixXd a = dewhiten_dictionary(factor, basis);
    const PackedCodes packed = pack(codes);
    const HostTensor a_t = tensor_from_matrix(a, Dtype::F16);

    // Metrics are computed on the artifact as deployed: 16-bit dictionary
    // and 16-bit packed values, through the shared reconstruction path.
    const MatrixXd a_deployed = matrix_from_tensor(a_t);
    const MatrixXd w_hat = reconstruct(FactorizedLayer{a_deployed, packed});
    const StorageReport storage = storage_report(entry.m, entry.n, k, s);
    out.metrics = layer_metrics(w, factor, w_hat, storage, iterations, status);
    out.metrics.k = k;
    out.metrics.s = s;

    out.tensors[layer.weight + "/A"] = a_t;
    if (!packed.values.empty())
        out.tensors[layer.weight + "/S_values"] = tensor_from_f16_bits(packed.values);
    out.tensors[layer.weight + "/S_mask"] = tensor_from_u8(packed.mask);
    out.measured_bits = 0;
    for (const auto& [name, t] : out.tensors)
        out.measured_bits += 8 * static_cast<std::int64_t>(t.bytes.size());
    out.sidecar = {{"kind", status == "SVD" ? "svd" : "factorized"},
                   {"m", entry.m},
                   {"n", entry.n},
                   {"k", k},
                   {"s", s},
                   {"padding", "per-column-byte"},
                   {"iterations", iterations},
                   {"orientation", to_string(layer.orientation)}};
    return out;
}

}  // namespace

void run_compress(const std::string& manifest_path, const std::string& weights_path,
                  const std::optional<std::string>& grams_path, const std::string& plan_path,
                  const std::string& out_path, const std::string& report_path,
                  const RunConfig& cfg) {
    const Manifest man = Manifest::read(manifest_path);
    const TensorContainer weights = TensorContainer::read(weights_path);
    std::optional<TensorContainer> grams;
    if (grams_path) grams = TensorContainer::read(*grams_path);
    const AllocationPlan plan = plan_from_json(read_json_file(plan_path, "plan"));

    std::map<std::string, const PlanEntry*> by_name;
    for (const PlanEntry& e : plan.entries) by_name[e.name] = &e;

    std::vector<LayerArtifacts> results(man.layers.size());
    for_each_layer(static_cast<std::int64_t>(man.layers.size()), cfg.jobs, [&](std::int64_t i) {
        const ManifestLayer& layer = man.layers[static_cast<std::size_t>(i)];
        auto it = by_name.find(layer.weight);
        if (it == by_name.end()) throw ConfigError("plan is missing layer " + layer.weight);
        results[static_cast<std::size_t>(i)] =
            compress_layer(layer, *it->second, weights, grams ? &*grams : nullptr, cfg);
    });

    std::map<std::string, HostTensor> artifacts;
    json sidecar;
    sidecar["layers"] = json::object();
    std::vector<LayerMetrics> metrics;
    std::int64_t measured_bits = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
        LayerArtifacts& r = results[i];
        for (auto& [name, t] : r.tensors) artifacts[name] = std::move(t);
        sidecar["layers"][man.layers[i].weight] = r.sidecar;
        metrics.push_back(std::move(r.metrics));
        measured_bits += r.measured_bits;
    }

    const GlobalReport report =
        global_report(metrics, config_to_json(cfg), plan.config.target_cr, measured_bits);

    write_container_cleanly(out_path, artifacts);
    try {
        write_text_cleanly(out_path + ".meta.json", sidecar.dump(2) + "\n");
        write_text_cleanly(report_path, report.document.dump(2) + "\n");
    } catch (...) {
        std::remove(out_path.c_str());
        std::remove((out_path + ".meta.json").c_str());
        throw;
    }
    std::fputs(report.table.c_str(), stdout);
}

void run_reconstruct(const std::string& artifacts_path, const std::string& out_path) {
    const TensorContainer artifacts = TensorContainer::read(artifacts_path);
    const json sidecar = read_json_file(artifacts_path + ".meta.json", "artifact metadata");
    if (!sidecar.contains("layers") || !sidecar["layers"].is_object())
        throw ConfigError("artifact metadata lacks layers");

    std::map<std::string, HostTensor> out;
    for (const auto& [name, meta] : sidecar["layers"].items()) {
        const std::string kind = meta.at("kind").get<std::string>();
        if (kind == "dense") {
            out[name] = artifacts.host_tensor(name);
            continue;
        }
        PackedCodes packed;
        packed.k = meta.at("k").get<std::int64_t>();
        packed.s = meta.at("s").get<std::int64_t>();
        packed.n = meta.at("n").get<std::int64_t>();
        if (artifacts.contains(name + "/S_values"))
            packed.values = f16_bits_from_tensor(artifacts, name + "/S_values");
        const auto mask_raw = artifacts.raw(name + "/S_mask");
        packed.mask.assign(mask_raw.begin(), mask_raw.end());

        const MatrixXd a = artifacts.matrix(name + "/A");
        const MatrixXd w_hat = reconstruct(FactorizedLayer{a, packed});
        const Orientation orientation =
            orientation_from_string(meta.at("orientation").get<std::string>());
        out[name] = store_weight(WeightMatrix{name, w_hat}, orientation);
    }
    write_container_cleanly(out_path, out);
    std::printf("reconstructed %zu layers -> %s\n", out.size(), out_path.c_str());
}

void run_report(const std::string& manifest_path, const std::string& weights_path,
                const std::optional<std::string>& grams_path, const std::string& artifacts_path,
                const std::string& plan_path, const std::string& report_path,
                const std::optional<std::string>& csv_path, const RunConfig& cfg) {
    const Manifest man = Manifest::read(manifest_path);
    const TensorContainer weights = TensorContainer::read(weights_path);
    const TensorContainer artifacts = TensorContainer::read(artifacts_path);
    const json sidecar = read_json_file(artifacts_path + ".meta.json", "artifact metadata");
    std::optional<TensorContainer> grams;
    if (grams_path) grams = TensorContainer::read(*grams_path);
    const AllocationPlan plan = plan_from_json(read_json_file(plan_path, "plan"));

    std::vector<LayerMetrics> metrics(man.layers.size());
    std::vector<std::int64_t> bits(man.layers.size(), 0);
    for_each_layer(static_cast<std::int64_t>(man.layers.size()), cfg.jobs, [&](std::int64_t i) {
        const ManifestLayer& layer = man.layers[static_cast<std::size_t>(i)];
        const WeightMatrix w = load_weight(weights, layer.weight, layer.orientation);
        const json& meta = sidecar.at("layers").at(layer.weight);
        const std::string kind = meta.at("kind").get<std::string>();
        if (kind == "dense") {
            metrics[static_cast<std::size_t>(i)] = layer_metrics(
                w, identity_factor(w.rows()), artifacts.matrix(layer.weight), StorageReport{}, 0,
                "DENSE");
            bits[static_cast<std::size_t>(i)] = 16 * w.rows() * w.cols();
            return;
        }
        const CholeskyFactor factor = factor_for_layer(layer, grams ? &*grams : nullptr, w.rows());
        PackedCodes packed;
        packed.k = meta.at("k").get<std::int64_t>();
        packed.s = meta.at("s").get<std::int64_t>();
        packed.n = meta.at("n").get<std::int64_t>();
        if (artifacts.contains(layer.weight + "/S_values"))
            packed.values = f16_bits_from_tensor(artifacts, layer.weight + "/S_values");
        const auto mask_raw = artifacts.raw(layer.weight + "/S_mask");
        packed.mask.assign(mask_raw.begin(), mask_raw.end());
        const MatrixXd a = artifacts.matrix(layer.weight + "/A");
        const MatrixXd w_hat = reconstruct(FactorizedLayer{a, packed});
        const StorageReport storage = storage_report(w.rows(), w.cols(), packed.k, packed.s);
        metrics[static_cast<std::size_t>(i)] =
            layer_metrics(w, factor, w_hat, storage,
                          meta.value("iterations", 0), kind == "svd" ? "SVD" : "FACTORIZE");
        metrics[static_cast<std::size_t>(i)].k = packed.k;
        metrics[static_cast<std::size_t>(i)].s = packed.s;
        std::int64_t b = 8 * static_cast<std::int64_t>(artifacts.raw(layer.weight + "/A").size() +
                                                       mask_raw.size());
        if (artifacts.contains(layer.weight + "/S_values"))
            b += 8 * static_cast<std::int64_t>(artifacts.raw(layer.weight + "/S_values").size());
        bits[static_cast<std::size_t>(i)] = b;
    });

    std::int64_t measured_bits = 0;
    for (std::int64_t b : bits) measured_bits += b;
    const GlobalReport report =
        global_report(metrics, config_to_json(cfg), plan.config.target_cr, measured_bits);
    write_text_cleanly(report_path, report.document.dump(2) + "\n");
    if (csv_path) write_text_cleanly(*csv_path, report_csv(metrics));
    std::fputs(report.table.c_str(), stdout);
}

}  // namespace compot
