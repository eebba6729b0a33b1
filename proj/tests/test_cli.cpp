#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gradlearn/io.hpp"
#include "gradlearn/version.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

using namespace gradlearn;
using nlohmann::json;

namespace {

namespace fs = std::filesystem;

struct RunResult {
    int code = -1;
    std::string output; // stdout and stderr interleaved
};

RunResult run_cli(const std::string& args) {
    const std::string cmd = std::string(GRADLEARN_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult result;
    char buf[1024];
    while (fgets(buf, sizeof(buf), pipe) != nullptr) result.output += buf;
    const int status = pclose(pipe);
    result.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

struct Scratch {
    fs::path dir;
    Scratch() {
        dir = fs::temp_directory_path() / ("gradlearn_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(dir);
    }
    ~Scratch() { std::error_code ec; fs::remove_all(dir, ec); }
    std::string operator()(const std::string& name) const { return (dir / name).string(); }
};

Scratch scratch;

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

json load_json(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    json j;
    in >> j;
    return j;
}

// generates a small labeled dataset on disk and returns the train CSV path
std::string make_training_csv(const std::string& tag) {
    const std::string prefix = scratch(tag);
    RunResult r = run_cli("simulate --design hypersphere --n-per-class 15 --p 8 --d 2 --r 2.0"
                          " --sigma 0.3 --seed 7 --out-prefix " + prefix);
    REQUIRE(r.code == 0);
    return prefix + ".train.csv";
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("version flag") {
    RunResult r = run_cli("--version");
    CHECK(r.code == 0);
    CHECK(r.output.find(kVersion) != std::string::npos);
}

TEST_CASE("usage failures exit with code 2") {
    CHECK(run_cli("").code == 2);
    CHECK(run_cli("frobnicate").code == 2);
    CHECK(run_cli("fit").code == 2);                       // missing --data
    CHECK(run_cli("simulate --seed 1 --design cube").code == 2);
    CHECK(run_cli("reduce --model nowhere.json").code == 2); // missing --k

    RunResult r = run_cli("fit --data x.csv --task dance");
    CHECK(r.code == 2);
    CHECK(r.output.find("category=usage") != std::string::npos);
}

TEST_CASE("simulate writes deterministic artifacts") {
    const std::string p1 = scratch("det_a");
    const std::string p2 = scratch("det_b");
    const std::string args = "simulate --design linear --n-per-class 6 --sigma 0.4 --seed 42"
                             " --n-test 4 --out-prefix ";
    REQUIRE(run_cli(args + p1).code == 0);
    REQUIRE(run_cli(args + p2).code == 0);

    for (const char* suffix : {".train.csv", ".test.csv", ".truth.csv"}) {
        CAPTURE(suffix);
        REQUIRE(fs::exists(p1 + suffix));
        CHECK(file_digest(p1 + suffix) == file_digest(p2 + suffix));
    }

    // a different seed changes the data but not the shapes
    const std::string p3 = scratch("det_c");
    REQUIRE(run_cli("simulate --design linear --n-per-class 6 --sigma 0.4 --seed 43"
                    " --n-test 4 --out-prefix " + p3).code == 0);
    CHECK(file_digest(p1 + ".train.csv") != file_digest(p3 + ".train.csv"));
    CHECK(file_digest(p1 + ".truth.csv") == file_digest(p3 + ".truth.csv")); // design constant

    Dataset train = load_csv(p1 + ".train.csv");
    Dataset test = load_csv(p1 + ".test.csv");
    CHECK(train.n() == 8);
    CHECK(test.n() == 4);
    CHECK(train.p() == 100);
}

TEST_CASE("fit produces a loadable regression archive") {
    const std::string train = make_training_csv("fitcase");
    const std::string model = scratch("fitcase.model.json");
    RunResult r = run_cli("fit --data " + train + " --task regress --lambda 0.001 --seed 7"
                          " --out " + model);
    CHECK(r.code == 0);

    ModelArchive archive = load_model(model);
    CHECK(archive.kind == "regression");
    REQUIRE(archive.regression.has_value());
    CHECK(archive.regression->lambda == 0.001);
    CHECK(archive.regression->train_points.rows() == 30);
    REQUIRE(archive.provenance.seed.has_value());
    CHECK(*archive.provenance.seed == 7);
    CHECK(archive.provenance.dataset_digest ==
          dataset_digest(load_csv(train)));
}

TEST_CASE("fit handles constant responses with a zero model") {
    const std::string csv = scratch("const.csv");
    write_text(csv, "0,0,5\n1,0,5\n0,1,5\n2,2,5\n");
    const std::string model = scratch("const.model.json");
    RunResult r = run_cli("fit --data " + csv + " --out " + model);
    CHECK(r.code == 0);
    ModelArchive archive = load_model(model);
    CHECK(archive.regression->coefficients.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("fit classifies binary labels") {
    const std::string train = make_training_csv("clscase");
    const std::string model = scratch("clscase.model.json");
    RunResult r = run_cli("fit --data " + train + " --task classify --lambda1 0.01"
                          " --lambda2 0.01 --out " + model);
    CHECK(r.code == 0);
    ModelArchive archive = load_model(model);
    CHECK(archive.kind == "classification");
    REQUIRE(archive.classification.has_value());
    CHECK(archive.classification->converged);

    // non-binary responses are a data-format error for this task
    const std::string bad = scratch("notbinary.csv");
    write_text(bad, "0,0,0.5\n1,1,1\n");
    RunResult rb = run_cli("fit --data " + bad + " --task classify --out " +
                           scratch("nb.model.json"));
    CHECK(rb.code == 3);
    CHECK(rb.output.find("category=data-format") != std::string::npos);
}

TEST_CASE("data errors exit with code 3") {
    RunResult missing = run_cli("fit --data " + scratch("noexist.csv") + " --out " +
                                scratch("m.json"));
    CHECK(missing.code == 3);
    CHECK(missing.output.find("category=data-format") != std::string::npos);

    const std::string ragged = scratch("ragged.csv");
    write_text(ragged, "1,2,3\n4,5\n");
    CHECK(run_cli("fit --data " + ragged + " --out " + scratch("m2.json")).code == 3);
}

TEST_CASE("numerical failures exit with code 4") {
    // Two identical points with different responses and a third point make
    // the stationarity system inconsistent as lambda -> 0; a denormal-small
    // lambda passes validation but leaves the system numerically singular.
    const std::string csv = scratch("inconsistent.csv");
    write_text(csv, "0,0\n0,1\n1,0\n");
    RunResult r =
        run_cli("fit --data " + csv + " --lambda 1e-300 --out " + scratch("m3.json"));
    CHECK(r.code == 4);
    CHECK(r.output.find("category=numerical") != std::string::npos);

    // lambda = 0 violates the fit contract outright: usage, not numerical.
    RunResult r0 = run_cli("fit --data " + csv + " --lambda 0 --out " + scratch("m4.json"));
    CHECK(r0.code == 2);
    CHECK(r0.output.find("category=usage") != std::string::npos);
}

TEST_CASE("reduce writes spectra, directions, and projections") {
    const std::string train = make_training_csv("redcase");
    const std::string model = scratch("redcase.model.json");
    REQUIRE(run_cli("fit --data " + train + " --lambda 0.001 --out " + model).code == 0);

    const std::string prefix = scratch("redcase.reduced");
    RunResult r = run_cli("reduce --model " + model + " --data " + train +
                          " --k 3 --method gop --out-prefix " + prefix);
    CHECK(r.code == 0);

    Eigen::MatrixXd values = load_matrix_csv(prefix + ".eigenvalues.csv");
    REQUIRE(values.rows() >= 1);
    for (Eigen::Index i = 1; i < values.rows(); ++i)
        CHECK(values(i, 0) <= values(i - 1, 0)); // descending
    CHECK(values(values.rows() - 1, 0) >= 0.0);

    Eigen::MatrixXd vectors = load_matrix_csv(prefix + ".eigenvectors.csv");
    CHECK(vectors.rows() == 8);
    CHECK(vectors.cols() == values.rows());

    Eigen::MatrixXd projections = load_matrix_csv(prefix + ".projections.csv");
    CHECK(projections.rows() == 30);
    CHECK(projections.cols() == vectors.cols());

    json summary = load_json(prefix + ".summary.json");
    CHECK(summary["k_requested"] == 3);
    CHECK(summary["k_used"] == values.rows());
    CHECK(summary["method"] == "gop");
    CHECK(summary["has_degenerate_cluster"].is_boolean());

    // the egcm factorization runs from the archive alone
    const std::string prefix2 = scratch("redcase.egcm");
    CHECK(run_cli("reduce --model " + model + " --k 2 --method egcm --out-prefix " + prefix2)
              .code == 0);
    CHECK(load_json(prefix2 + ".summary.json")["method"] == "egcm");
}

TEST_CASE("reduce with zero directions writes empty artifacts and a valid summary") {
    const std::string train = make_training_csv("zerok");
    const std::string model = scratch("zerok.model.json");
    REQUIRE(run_cli("fit --data " + train + " --lambda 0.001 --out " + model).code == 0);

    const std::string prefix = scratch("zerok.reduced");
    RunResult r = run_cli("reduce --model " + model + " --k 0 --out-prefix " + prefix);
    CHECK(r.code == 0);
    CHECK(fs::exists(prefix + ".eigenvectors.csv"));
    CHECK(fs::file_size(prefix + ".eigenvectors.csv") == 0);
    CHECK(fs::file_size(prefix + ".eigenvalues.csv") == 0);
    json summary = load_json(prefix + ".summary.json");
    CHECK(summary["k_used"] == 0);
    CHECK(summary["eigenvalues"].empty());
}

TEST_CASE("evaluate reports reduced and full-space error with subspace angles") {
    const std::string prefix = scratch("evalcase");
    REQUIRE(run_cli("simulate --design hypersphere --n-per-class 20 --p 8 --d 2 --r 2.0"
                    " --sigma 0.3 --n-test 10 --seed 11 --out-prefix " + prefix).code == 0);
    const std::string model = scratch("evalcase.model.json");
    REQUIRE(run_cli("fit --data " + prefix + ".train.csv --lambda 0.001 --out " + model)
                .code == 0);

    const std::string report_path = scratch("evalcase.report.json");
    RunResult r = run_cli("evaluate --model " + model + " --train " + prefix + ".train.csv" +
                          " --test " + prefix + ".test.csv --truth " + prefix + ".truth.csv" +
                          " --k 2 --knn-k 5 --loo --out " + report_path);
    CHECK(r.code == 0);

    json report = load_json(report_path);
    const double err_red = report["error_reduced"]["error_rate"].get<double>();
    const double err_full = report["error_full"]["error_rate"].get<double>();
    CHECK(err_red >= 0.0);
    CHECK(err_red <= 1.0);
    CHECK(err_full >= 0.0);
    CHECK(err_full <= 1.0);
    CHECK(report["error_reduced"]["n_test"] == 10);
    const double alignment = report["alignment"].get<double>();
    CHECK(alignment >= 0.0);
    CHECK(alignment <= 1.0 + 1e-12);
    CHECK(report["loo_errors"].is_number_integer());
    CHECK(report["subspace"]["principal_angles"].size() == 2);
}

TEST_CASE("pipeline produces a manifest that replays") {
    const std::string dir1 = scratch("pipe1");
    const std::string dir2 = scratch("pipe2");
    const std::string args = "pipeline --design hypersphere --n-per-class 15 --p 8 --d 2"
                             " --r 2.0 --sigma-noise 0.3 --seed 3 --task regress"
                             " --lambda 0.001 --k 2 --knn-k 5 --out-dir ";
    RunResult r1 = run_cli(args + dir1);
    CHECK(r1.code == 0);

    json manifest = load_json((fs::path(dir1) / "manifest.json").string());
    CHECK(manifest["tool_version"] == std::string(kVersion));
    CHECK(manifest["config"]["seed"] == 3);
    CHECK(manifest["config"]["design"] == "hypersphere");
    CHECK(manifest.contains("alignment"));
    CHECK(manifest["artifacts"]["model.json"]["digest"].is_string());
    REQUIRE(manifest["results"]["eigenvalues"].is_array());

    // every artifact digest matches the file on disk
    for (auto& [name, entry] : manifest["artifacts"].items()) {
        CAPTURE(name);
        CHECK(file_digest(entry["path"].get<std::string>()) ==
              entry["digest"].get<std::string>());
    }

    // replaying the recorded configuration reproduces the spectrum
    RunResult r2 = run_cli(args + dir2);
    CHECK(r2.code == 0);
    json manifest2 = load_json((fs::path(dir2) / "manifest.json").string());
    auto ev1 = manifest["results"]["eigenvalues"];
    auto ev2 = manifest2["results"]["eigenvalues"];
    REQUIRE(ev1.size() == ev2.size());
    for (std::size_t i = 0; i < ev1.size(); ++i) {
        const double a = ev1[static_cast<int>(i)].get<double>();
        const double b = ev2[static_cast<int>(i)].get<double>();
        CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)));
    }
    CHECK(manifest2["alignment"] == manifest["alignment"]);

    // artifact bytes are identical run to run
    CHECK(file_digest((fs::path(dir1) / "sim.train.csv").string()) ==
          file_digest((fs::path(dir2) / "sim.train.csv").string()));
    CHECK(file_digest((fs::path(dir1) / "reduced.eigenvalues.csv").string()) ==
          file_digest((fs::path(dir2) / "reduced.eigenvalues.csv").string()));
}

} // TEST_SUITE
