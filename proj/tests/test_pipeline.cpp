#include "compot/pipeline.hpp"

#include "compot/gram.hpp"
#include "compot/packing.hpp"
#include "compot/tensor_container.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>

using namespace compot;
using nlohmann::json;

namespace {

struct Model {
    std::string manifest;
    std::string weights;
    std::string acts;
};

// Three layers with distinct shapes; one stored transposed. Activations are
// split across two chunks per layer.
Model make_model(const testutil::TempDir& dir, std::uint64_t seed) {
    Rng rng(seed);
    Model m{dir.file("manifest.json"), dir.file("weights.ct"), dir.file("acts.ct")};

    std::map<std::string, HostTensor> weights;
    std::map<std::string, HostTensor> acts;
    const struct {
        const char* name;
        std::int64_t m, n;
        Orientation o;
    } layers[] = {
        {"blk.0.attn.q", 16, 24, Orientation::InputByOutput},
        {"blk.0.mlp.up", 16, 32, Orientation::OutputByInput},
        {"blk.1.attn.q", 12, 12, Orientation::InputByOutput},
    };
    json man;
    man["layers"] = json::array();
    for (const auto& l : layers) {
        const MatrixXd w = testutil::random_matrix(rng, l.m, l.n);
        weights[l.name] = store_weight(WeightMatrix{l.name, w}, l.o);
        for (int c = 0; c < 2; ++c) {
            const MatrixXd x = testutil::random_matrix(rng, 40, l.m);
            acts[std::string(l.name) + "/acts/" + std::to_string(c)] =
                tensor_from_matrix(x, Dtype::F32);
        }
        json e;
        e["weight"] = l.name;
        e["gram"] = nullptr;
        e["group"] = nullptr;
        if (l.o == Orientation::OutputByInput) e["orientation"] = "output-by-input";
        man["layers"].push_back(e);
    }
    man["config"] = json::object();
    write_container(m.weights, weights);
    write_container(m.acts, acts);
    std::ofstream(m.manifest) << man.dump(2);
    return m;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(COMPOT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("gram command accumulates exact products and is deterministic") {
    testutil::TempDir dir("pipe_gram");
    const Model m = make_model(dir, 7);
    RunConfig cfg;

    const std::string g1 = dir.file("grams.ct");
    run_gram(m.manifest, m.acts, g1, cfg);

    // Direct oracle: concatenate the two chunks.
    const TensorContainer acts = TensorContainer::read(m.acts);
    const TensorContainer grams = TensorContainer::read(g1);
    const MatrixXd x0 = acts.matrix("blk.0.attn.q/acts/0");
    const MatrixXd x1 = acts.matrix("blk.0.attn.q/acts/1");
    MatrixXd direct = x0.transpose() * x0 + x1.transpose() * x1;
    const MatrixXd g = grams.matrix("blk.0.attn.q/gram");
    CHECK((g - direct).norm() <= 1e-12 * direct.norm());

    // Single-shot accumulation gives the same gram within 1e-12.
    MatrixXd xall(x0.rows() + x1.rows(), x0.cols());
    xall << x0, x1;
    GramState st = GramState::zeros(x0.cols());
    accumulate(st, xall);
    CHECK((g - st.g).norm() <= 1e-12 * st.g.norm());

    // Re-running overwrites with identical bytes, with and without jobs.
    const std::string g2 = dir.file("grams2.ct");
    RunConfig threaded = cfg;
    threaded.jobs = 4;
    run_gram(m.manifest, m.acts, g2, threaded);
    CHECK(testutil::read_file_bytes(g1) == testutil::read_file_bytes(g2));
}

TEST_CASE("missing activation chunks are reported") {
    testutil::TempDir dir("pipe_gram_missing");
    const Model m = make_model(dir, 8);
    std::map<std::string, HostTensor> empty_acts;
    empty_acts["unrelated"] = tensor_from_matrix(MatrixXd::Identity(2, 2), Dtype::F32);
    const std::string acts2 = dir.file("acts2.ct");
    write_container(acts2, empty_acts);
    CHECK_THROWS_WITH_AS(run_gram(m.manifest, acts2, dir.file("g.ct"), RunConfig{}),
                         doctest::Contains("missing activation chunks"), ConfigError);
}

TEST_CASE("static allocation assigns the uniform ratio") {
    testutil::TempDir dir("pipe_alloc_static");
    const Model m = make_model(dir, 9);
    RunConfig cfg;
    cfg.static_cr = 0.2;
    const std::string plan_path = dir.file("plan.json");
    run_allocate(m.manifest, m.weights, plan_path, cfg);

    std::ifstream in(plan_path);
    json doc;
    in >> doc;
    for (const auto& e : doc["matrices"]) {
        if (e["status"] == "FACTORIZE") CHECK(e["cr"].get<double>() == 0.2);
        CHECK(e["k"].get<std::int64_t>() >= 1);
    }
    CHECK(doc["run_config"]["static_cr"].get<double>() == 0.2);
}

TEST_CASE("dynamic allocation writes a plan satisfying its invariants") {
    testutil::TempDir dir("pipe_alloc_dyn");
    const Model m = make_model(dir, 10);
    RunConfig cfg;
    cfg.target_cr = 0.3;
    const std::string plan_path = dir.file("plan.json");
    run_allocate(m.manifest, m.weights, plan_path, cfg);

    std::ifstream in(plan_path);
    json doc;
    in >> doc;
    const AllocationPlan plan = plan_from_json(doc);
    std::int64_t achieved = 0;
    for (const PlanEntry& e : plan.entries) {
        if (e.status == LayerStatus::Factorize) {
            CHECK(e.cr == 1.0 - static_cast<double>(e.r * (e.m + e.n)) /
                                    static_cast<double>(e.m * e.n));
            CHECK(e.r * (e.m + e.n) < e.m * e.n);
            CHECK(e.k >= 1);
            CHECK(e.s >= 1);
            CHECK(e.s <= e.k);
            achieved += e.r * (e.m + e.n);
        } else {
            CHECK(e.cr == 0.0);
            achieved += e.m * e.n;
        }
    }
    CHECK(static_cast<double>(achieved) <= plan.params_target);
}

TEST_CASE("grouping modes agree on identical layers") {
    testutil::TempDir dir("pipe_alloc_group");
    // Two identical layers whose type keys differ only in the block index.
    Rng rng(11);
    const MatrixXd w = testutil::random_matrix(rng, 12, 18);
    std::map<std::string, HostTensor> weights;
    weights["blk.0.proj"] = tensor_from_matrix(w, Dtype::F32);
    weights["blk.1.proj"] = tensor_from_matrix(w, Dtype::F32);
    const std::string wpath = dir.file("w.ct");
    write_container(wpath, weights);
    json man;
    man["layers"] = {{{"weight", "blk.0.proj"}}, {{"weight", "blk.1.proj"}}};
    const std::string mpath = dir.file("m.json");
    std::ofstream(mpath) << man.dump();

    RunConfig cfg;
    cfg.target_cr = 0.3;
    const std::string p_global = dir.file("pg.json");
    run_allocate(mpath, wpath, p_global, cfg);
    cfg.grouping = "per-type";
    const std::string p_type = dir.file("pt.json");
    run_allocate(mpath, wpath, p_type, cfg);

    json jg, jt;
    std::ifstream(p_global) >> jg;
    std::ifstream(p_type) >> jt;
    CHECK(jg["matrices"] == jt["matrices"]);
}

TEST_CASE("compress is deterministic across reruns and job counts") {
    testutil::TempDir dir("pipe_compress");
    const Model m = make_model(dir, 12);
    RunConfig cfg;
    cfg.target_cr = 0.25;
    const std::string grams = dir.file("grams.ct");
    const std::string plan = dir.file("plan.json");
    run_gram(m.manifest, m.acts, grams, cfg);
    run_allocate(m.manifest, m.weights, plan, cfg);

    const std::string a1 = dir.file("art1.ct");
    const std::string a2 = dir.file("art2.ct");
    const std::string a3 = dir.file("art3.ct");
    run_compress(m.manifest, m.weights, grams, plan, a1, a1 + ".report.json", cfg);
    run_compress(m.manifest, m.weights, grams, plan, a2, a2 + ".report.json", cfg);
    RunConfig threaded = cfg;
    threaded.jobs = 8;
    run_compress(m.manifest, m.weights, grams, plan, a3, a3 + ".report.json", threaded);

    CHECK(testutil::read_file_bytes(a1) == testutil::read_file_bytes(a2));
    CHECK(testutil::read_file_bytes(a1) == testutil::read_file_bytes(a3));
    CHECK(testutil::read_file_bytes(a1 + ".report.json") ==
          testutil::read_file_bytes(a3 + ".report.json"));

    // The padded-accounting CR must reach the plan target.
    json report;
    std::ifstream(a1 + ".report.json") >> report;
    CHECK(report["achieved_cr_padded"].get<double>() >= 0.25);
    CHECK(report["achieved_cr_measured"].get<double>() >=
          report["achieved_cr_padded"].get<double>() - 1e-12);
}

TEST_CASE("an all-dense plan is a weight passthrough") {
    testutil::TempDir dir("pipe_dense");
    const Model m = make_model(dir, 13);

    // Hand-build an all-dense plan.
    const TensorContainer weights = TensorContainer::read(m.weights);
    const Manifest man = Manifest::read(m.manifest);
    AllocationPlan plan;
    plan.config = AllocatorConfig{0.2, 0.0, 0.9};
    for (const ManifestLayer& l : man.layers) {
        const WeightMatrix w = load_weight(weights, l.weight, l.orientation);
        PlanEntry e;
        e.name = l.weight;
        e.m = w.rows();
        e.n = w.cols();
        e.status = LayerStatus::Dense;
        e.r = std::min(e.m, e.n);
        plan.entries.push_back(e);
        plan.params_total += e.m * e.n;
        plan.params_achieved += e.m * e.n;
    }
    plan.params_target = static_cast<double>(plan.params_total);
    const std::string plan_path = dir.file("plan.json");
    std::ofstream(plan_path) << plan_to_json(plan).dump(2);

    const std::string art = dir.file("art.ct");
    run_compress(m.manifest, m.weights, std::nullopt, plan_path, art, art + ".report.json",
                 RunConfig{});
    const TensorContainer out = TensorContainer::read(art);
    for (const ManifestLayer& l : man.layers) {
        const auto orig = weights.raw(l.weight);
        const auto copy = out.raw(l.weight);
        REQUIRE(orig.size() == copy.size());
        CHECK(std::memcmp(orig.data(), copy.data(), orig.size()) == 0);
    }

    // Reconstruction of a dense passthrough is bit-identical too.
    const std::string recon = dir.file("recon.ct");
    run_reconstruct(art, recon);
    const TensorContainer r = TensorContainer::read(recon);
    for (const ManifestLayer& l : man.layers) {
        const auto orig = weights.raw(l.weight);
        const auto copy = r.raw(l.weight);
        REQUIRE(orig.size() == copy.size());
        CHECK(std::memcmp(orig.data(), copy.data(), orig.size()) == 0);
    }
}

TEST_CASE("reconstruct recovers an exactly representable layer to f16 accuracy") {
    testutil::TempDir dir("pipe_recon");
    Rng rng(14);
    // Weight built from 4 orthonormal atoms with 2-sparse columns.
    const MatrixXd w = 3.0 * testutil::union_of_subspaces_matrix(rng, 8, 40, 2, 2);
    std::map<std::string, HostTensor> weights;
    weights["layer"] = tensor_from_matrix(w, Dtype::F32);
    const std::string wpath = dir.file("w.ct");
    write_container(wpath, weights);
    json man;
    man["layers"] = {{{"weight", "layer"}}};
    const std::string mpath = dir.file("m.json");
    std::ofstream(mpath) << man.dump();

    AllocationPlan plan;
    plan.config = AllocatorConfig{0.2, 0.0, 0.9};
    PlanEntry e;
    e.name = "layer";
    e.m = 8;
    e.n = 40;
    e.status = LayerStatus::Factorize;
    e.r = 4;
    e.cr = 0.2;
    e.k = 4;
    e.s = 2;
    plan.entries = {e};
    plan.params_total = 8 * 40;
    plan.params_target = 0.8 * 8 * 40;
    plan.params_achieved = 4 * 48;
    const std::string plan_path = dir.file("plan.json");
    std::ofstream(plan_path) << plan_to_json(plan).dump(2);

    const std::string art = dir.file("art.ct");
    run_compress(mpath, wpath, std::nullopt, plan_path, art, art + ".report.json", RunConfig{});
    const std::string recon = dir.file("recon.ct");
    run_reconstruct(art, recon);

    const MatrixXd w_hat = TensorContainer::read(recon).matrix("layer");
    CHECK((w_hat - w).norm() <= 1e-3 * w.norm());
}

TEST_CASE("the svd baseline flows through the same artifact path") {
    testutil::TempDir dir("pipe_svd");
    const Model m = make_model(dir, 15);
    RunConfig cfg;
    cfg.target_cr = 0.25;
    const std::string grams = dir.file("grams.ct");
    const std::string plan = dir.file("plan.json");
    run_gram(m.manifest, m.acts, grams, cfg);
    run_allocate(m.manifest, m.weights, plan, cfg);

    cfg.baseline = "svd";
    const std::string art = dir.file("art.ct");
    run_compress(m.manifest, m.weights, grams, plan, art, art + ".report.json", cfg);

    const json sidecar = [&] {
        std::ifstream in(art + ".meta.json");
        json j;
        in >> j;
        return j;
    }();
    for (const auto& [name, meta] : sidecar["layers"].items()) {
        if (meta["kind"] == "dense") continue;
        CHECK(meta["kind"] == "svd");
        CHECK(meta["k"] == meta["s"]);  // rank-r factors ride the packed format
    }
    const std::string recon = dir.file("recon.ct");
    run_reconstruct(art, recon);
    const TensorContainer r = TensorContainer::read(recon);
    CHECK(r.contains("blk.0.attn.q"));
}

TEST_CASE("v2 ratio allocation runs through the cli surface") {
    testutil::TempDir dir("pipe_v2");
    Rng rng(16);
    // Large-scale weights keep the theoretical losses above 1.
    std::map<std::string, HostTensor> weights;
    json man;
    man["layers"] = json::array();
    for (int i = 0; i < 2; ++i) {
        const std::string name = "blk." + std::to_string(i) + ".proj";
        weights[name] = tensor_from_matrix(testutil::random_matrix(rng, 24, 36) * 30.0,
                                           Dtype::F32);
        man["layers"].push_back({{"weight", name}});
    }
    const std::string wpath = dir.file("w.ct");
    write_container(wpath, weights);
    const std::string mpath = dir.file("m.json");
    std::ofstream(mpath) << man.dump();

    RunConfig cfg;
    cfg.target_cr = 0.4;
    cfg.baseline = "v2-alloc";
    const std::string plan = dir.file("plan.json");
    run_allocate(mpath, wpath, plan, cfg);
    json doc;
    std::ifstream(plan) >> doc;
    CHECK(doc["matrices"].size() == 2);
}

TEST_CASE("cli exit codes map the error taxonomy") {
    testutil::TempDir dir("pipe_cli");
    const Model m = make_model(dir, 17);

    // Missing --cr: config error.
    CHECK(run_cli("allocate --manifest " + m.manifest + " --weights " + m.weights + " --out " +
                  dir.file("p.json")) == 2);

    // Unreachable budget under guards: infeasible budget.
    CHECK(run_cli("allocate --manifest " + m.manifest + " --weights " + m.weights + " --out " +
                  dir.file("p2.json") + " --cr 0.95 --cr-max 0.05") == 4);

    // Non-finite activations: numerical failure.
    std::map<std::string, HostTensor> acts;
    MatrixXd bad = MatrixXd::Zero(4, 16);
    bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    acts["blk.0.attn.q/acts/0"] = tensor_from_matrix(bad, Dtype::F32);
    acts["blk.0.mlp.up/acts/0"] = tensor_from_matrix(MatrixXd::Identity(16, 16), Dtype::F32);
    acts["blk.1.attn.q/acts/0"] = tensor_from_matrix(MatrixXd::Identity(12, 12), Dtype::F32);
    const std::string bad_acts = dir.file("bad_acts.ct");
    write_container(bad_acts, acts);
    CHECK(run_cli("gram --manifest " + m.manifest + " --acts " + bad_acts + " --out " +
                  dir.file("g.ct")) == 3);

    // A full healthy run through the binary.
    CHECK(run_cli("gram --manifest " + m.manifest + " --acts " + m.acts + " --out " +
                  dir.file("grams.ct")) == 0);
    CHECK(run_cli("allocate --manifest " + m.manifest + " --weights " + m.weights +
                  " --out " + dir.file("plan.json") + " --cr 0.25") == 0);
    CHECK(run_cli("compress --manifest " + m.manifest + " --weights " + m.weights + " --grams " +
                  dir.file("grams.ct") + " --plan " + dir.file("plan.json") + " --out " +
                  dir.file("art.ct") + " --jobs 2") == 0);
    CHECK(run_cli("reconstruct --artifacts " + dir.file("art.ct") + " --out " +
                  dir.file("recon.ct")) == 0);
    CHECK(run_cli("report --manifest " + m.manifest + " --weights " + m.weights + " --grams " +
                  dir.file("grams.ct") + " --artifacts " + dir.file("art.ct") + " --plan " +
                  dir.file("plan.json") + " --out " + dir.file("rep.json") + " --csv " +
                  dir.file("rep.csv")) == 0);

    // Config file merge: flags win over the file.
    std::ofstream(dir.file("cfg.json")) << R"({"cr": 0.5, "iters": 3})";
    CHECK(run_cli("allocate --manifest " + m.manifest + " --weights " + m.weights + " --out " +
                  dir.file("plan2.json") + " --config " + dir.file("cfg.json") + " --cr 0.3") ==
          0);
    json p2;
    std::ifstream(dir.file("plan2.json")) >> p2;
    CHECK(p2["target_cr"].get<double>() == 0.3);
}

TEST_CASE("report command reproduces compress-time metrics") {
    testutil::TempDir dir("pipe_report");
    const Model m = make_model(dir, 18);
    RunConfig cfg;
    cfg.target_cr = 0.3;
    const std::string grams = dir.file("grams.ct");
    const std::string plan = dir.file("plan.json");
    const std::string art = dir.file("art.ct");
    run_gram(m.manifest, m.acts, grams, cfg);
    run_allocate(m.manifest, m.weights, plan, cfg);
    run_compress(m.manifest, m.weights, grams, plan, art, dir.file("r1.json"), cfg);
    run_report(m.manifest, m.weights, grams, art, plan, dir.file("r2.json"),
               dir.file("r2.csv"), cfg);

    json r1, r2;
    std::ifstream(dir.file("r1.json")) >> r1;
    std::ifstream(dir.file("r2.json")) >> r2;
    CHECK(r1["layers"] == r2["layers"]);
    CHECK(r1["achieved_cr_measured"] == r2["achieved_cr_measured"]);
    std::ifstream csv(dir.file("r2.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line.rfind("name,", 0) == 0);
}
