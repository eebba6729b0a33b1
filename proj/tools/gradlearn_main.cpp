// Command-line front end: fit gradient models, reduce them to predictive
// directions, generate benchmark data, and evaluate reduced-space classifiers.
//
// Exit codes: 0 success, 2 usage/precondition error, 3 malformed input data,
// 4 numerical failure.  Every failure prints one line to stderr of the form
//   gradlearn: category=<usage|data-format|numerical|internal>: <message>

#include "gradlearn/errors.hpp"
#include "gradlearn/gradient_classification.hpp"
#include "gradlearn/gradient_regression.hpp"
#include "gradlearn/io.hpp"
#include "gradlearn/kernel.hpp"
#include "gradlearn/metrics.hpp"
#include "gradlearn/opg.hpp"
#include "gradlearn/simulate.hpp"
#include "gradlearn/spectral.hpp"
#include "gradlearn/version.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

using nlohmann::json;
using namespace gradlearn;

constexpr int kExitUsage = 2;
constexpr int kExitDataFormat = 3;
constexpr int kExitNumerical = 4;

// ---------------------------------------------------------------------------
// shared option blocks

struct KernelFlags {
    std::optional<double> s;     // weight bandwidth; default: median distance
    std::optional<double> sigma; // kernel bandwidth; default: 0.2 * median
    int weight_factor = 2;       // denominator 1*s^2 or 2*s^2

    void attach(CLI::App* cmd) {
        cmd->add_option("--s", s, "weight bandwidth s (default: median pairwise distance)");
        cmd->add_option("--sigma", sigma, "kernel bandwidth (default: 0.2 * median distance)");
        cmd->add_option("--weight-factor", weight_factor,
                        "weight denominator factor: 1 for s^2, 2 for 2 s^2")
            ->check(CLI::IsMember({1, 2}));
    }

    std::pair<KernelSpec, WeightSpec> resolve(const Eigen::MatrixXd& X) const {
        double s_val = 0.0, sigma_val = 0.0;
        if (!s || !sigma) {
            auto [s_def, sigma_def] = default_bandwidths(X);
            s_val = s.value_or(s_def);
            sigma_val = sigma.value_or(sigma_def);
        } else {
            s_val = *s;
            sigma_val = *sigma;
        }
        KernelSpec kernel{KernelFamily::gaussian, sigma_val};
        kernel.validate();
        WeightSpec weight{s_val, weight_factor == 1 ? DenominatorFactor::one_s_sq
                                                    : DenominatorFactor::two_s_sq};
        weight.validate();
        return {kernel, weight};
    }
};

GramKind parse_method(const std::string& method) {
    return method == "egcm" ? GramKind::egcm : GramKind::gop;
}

// Empty matrices become empty files (a 0-column CSV row has no text form).
void save_csv_allow_empty(const std::string& path, const Eigen::MatrixXd& M) {
    if (M.size() == 0) {
        save_matrix_csv(path, Eigen::MatrixXd(0, 0));
        return;
    }
    save_matrix_csv(path, M);
}

json eigenvalues_to_json(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

void write_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out)
        throw DataFormatError("cannot write '" + path + "'");
    out << j.dump(1) << '\n';
    if (!out)
        throw DataFormatError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// fit

struct FitOptions {
    std::string data_path;
    std::string out_path = "model.json";
    std::string task = "regress";
    int label_column = -1;
    double lambda = 1e-4;
    double lambda1 = 1e-4;
    double lambda2 = 1e-4;
    std::optional<std::uint64_t> seed;
    KernelFlags kernel;
};

int run_fit(const FitOptions& opt) {
    Dataset data = load_csv(opt.data_path, opt.label_column, false,
                            /*require_binary_labels=*/opt.task == "classify");
    auto [kernel, weight] = opt.kernel.resolve(data.X);

    Provenance prov;
    prov.seed = opt.seed;
    prov.dataset_digest = dataset_digest(data);
    prov.tool_version = kVersion;

    json summary;
    summary["n"] = data.n();
    summary["p"] = data.p();
    summary["s"] = weight.s;
    summary["sigma"] = kernel.sigma;
    summary["out"] = opt.out_path;

    if (opt.task == "regress") {
        GradientModel model = fit_gradient_regression(data, kernel, weight, opt.lambda);
        save_model(opt.out_path, make_archive(model, prov));
        summary["kind"] = "regression";
        summary["lambda"] = opt.lambda;
        summary["objective_value"] = model.objective_value;
    } else {
        ClassGradientModel model =
            fit_gradient_classification(data, kernel, weight, opt.lambda1, opt.lambda2);
        save_model(opt.out_path, make_archive(model, prov));
        summary["kind"] = "classification";
        summary["lambda1"] = opt.lambda1;
        summary["lambda2"] = opt.lambda2;
        summary["objective_value"] = model.objective_value;
        summary["iterations"] = model.iterations;
        summary["converged"] = model.converged;
    }
    std::cout << summary.dump(1) << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// reduce

struct ReduceOptions {
    std::string model_path;
    std::string data_path; // optional; defaults to the model's training points
    std::string out_prefix = "reduced";
    std::string method = "gop";
    Eigen::Index k = 1;
};

struct ReducedSpectrum {
    SpectralResult spec;
    EdrEstimate edr;
};

// Shared by reduce/evaluate/pipeline: factor the requested gram operator at
// the given evaluation points and keep the leading directions.
ReducedSpectrum reduce_model(const ModelArchive& archive, const Eigen::MatrixXd& X_eval,
                             GramKind method, Eigen::Index k) {
    LowRankGram gram;
    if (archive.kind == "regression") {
        const GradientModel& m = *archive.regression;
        gram = (method == GramKind::gop)
                   ? gradient_outer_product(m, X_eval)
                   : egcm(m, cholesky_psd(kernel_matrix(m.train_points, m.kernel)));
    } else {
        const ClassGradientModel& m = *archive.classification;
        gram = (method == GramKind::gop)
                   ? gradient_outer_product(m, X_eval)
                   : egcm(m, cholesky_psd(kernel_matrix(m.train_points, m.kernel)));
    }
    ReducedSpectrum out;
    out.spec = top_eigen(gram, k);
    out.edr = edr_estimate(out.spec, out.spec.eigenvalues.size());
    return out;
}

const Eigen::MatrixXd& archive_train_points(const ModelArchive& archive) {
    return archive.kind == "regression" ? archive.regression->train_points
                                        : archive.classification->train_points;
}

int run_reduce(const ReduceOptions& opt) {
    ModelArchive archive = load_model(opt.model_path);
    Eigen::MatrixXd X_eval = opt.data_path.empty() ? archive_train_points(archive)
                                                   : load_csv(opt.data_path).X;

    ReducedSpectrum red = reduce_model(archive, X_eval, parse_method(opt.method), opt.k);

    save_csv_allow_empty(opt.out_prefix + ".eigenvalues.csv", red.spec.eigenvalues);
    save_csv_allow_empty(opt.out_prefix + ".eigenvectors.csv", red.edr.B_hat);
    save_csv_allow_empty(opt.out_prefix + ".projections.csv", project(X_eval, red.edr));

    json summary;
    summary["method"] = opt.method;
    summary["model_kind"] = archive.kind;
    summary["k_requested"] = opt.k;
    summary["k_used"] = red.edr.k;
    summary["eigenvalues"] = eigenvalues_to_json(red.spec.eigenvalues);
    summary["has_degenerate_cluster"] = red.spec.has_degenerate_cluster;
    summary["n_eval_points"] = X_eval.rows();
    write_json(opt.out_prefix + ".summary.json", summary);

    std::cout << summary.dump(1) << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
    std::string design = "linear";
    int n_per_class = 20;
    int p = 100;
    int d = 2;
    double r = 3.0;
    double sigma = 0.5;
    Eigen::Index n_test = 0;
    std::uint64_t seed = 0;
    std::string out_prefix = "sim";
};

int run_simulate(const SimulateOptions& opt) {
    SimConfig config;
    config.design =
        opt.design == "hypersphere" ? SimDesign::hypersphere_shells : SimDesign::linear_means;
    config.n_per_class = opt.n_per_class;
    config.p = opt.p;
    config.d = opt.d;
    config.r = opt.r;
    config.sigma = opt.sigma;
    config.seed = opt.seed;

    auto [data, truth] = generate(config);

    Dataset train = data;
    json summary;
    if (opt.n_test > 0) {
        auto [tr, te] = train_test_split(data, opt.n_test, opt.seed);
        train = std::move(tr);
        save_dataset_csv(opt.out_prefix + ".test.csv", te);
        summary["n_test"] = te.n();
        summary["test_csv"] = opt.out_prefix + ".test.csv";
    }
    save_dataset_csv(opt.out_prefix + ".train.csv", train);
    save_matrix_csv(opt.out_prefix + ".truth.csv", truth.directions);

    summary["design"] = opt.design;
    summary["n_train"] = train.n();
    summary["p"] = data.p();
    summary["k_true"] = truth.k;
    summary["seed"] = opt.seed;
    summary["train_csv"] = opt.out_prefix + ".train.csv";
    summary["truth_csv"] = opt.out_prefix + ".truth.csv";
    std::cout << summary.dump(1) << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateOptions {
    std::string model_path;
    std::string train_path;
    std::string test_path;
    std::string truth_path; // optional
    std::string out_path = "report.json";
    std::string method = "gop";
    Eigen::Index k = 1;
    int knn_k = 5;
    bool loo = false;
};

json error_report_to_json(const ErrorReport& rep) {
    return json{{"error_rate", rep.error_rate},
                {"n_test", rep.n_test},
                {"method_label", rep.method_label},
                {"dimension_used", rep.dimension_used}};
}

json run_evaluate_impl(const EvaluateOptions& opt) {
    ModelArchive archive = load_model(opt.model_path);
    Dataset train = load_csv(opt.train_path, -1, false, true);
    Dataset test = load_csv(opt.test_path, -1, false, true);

    ReducedSpectrum red = reduce_model(archive, train.X, parse_method(opt.method), opt.k);

    Dataset projected_train;
    projected_train.X = project(train.X, red.edr);
    projected_train.y = train.y;
    Eigen::MatrixXd projected_test = project(test.X, red.edr);

    ErrorReport reduced = error_rate(knn_classify(projected_train, projected_test, opt.knn_k),
                                     test.y, "knn_reduced", red.edr.k);
    ErrorReport full =
        error_rate(knn_classify(train, test.X, opt.knn_k), test.y, "knn_full", train.p());

    json report;
    report["model_kind"] = archive.kind;
    report["method"] = opt.method;
    report["k_used"] = red.edr.k;
    report["knn_k"] = opt.knn_k;
    report["eigenvalues"] = eigenvalues_to_json(red.spec.eigenvalues);
    report["error_reduced"] = error_report_to_json(reduced);
    report["error_full"] = error_report_to_json(full);

    if (!opt.truth_path.empty()) {
        Eigen::MatrixXd truth = load_matrix_csv(opt.truth_path);
        SubspaceReport angles = principal_angles(red.edr.B_hat, truth);
        json sub;
        sub["principal_angles"] = angles.principal_angles;
        sub["max_angle"] = angles.max_angle;
        sub["alignment"] = angles.alignment;
        report["subspace"] = std::move(sub);
        report["alignment"] = angles.alignment;
    }

    if (opt.loo) {
        const int wrong =
            loo_error(projected_train, [&](const Dataset& fold, const Eigen::RowVectorXd& q) {
                const int kk = std::min<int>(opt.knn_k, static_cast<int>(fold.n()));
                return knn_classify(fold, q, kk)(0);
            });
        report["loo_errors"] = wrong;
        report["loo_n"] = projected_train.n();
    }
    return report;
}

int run_evaluate(const EvaluateOptions& opt) {
    json report = run_evaluate_impl(opt);
    write_json(opt.out_path, report);
    std::cout << report.dump(1) << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// pipeline

struct PipelineOptions {
    SimulateOptions sim;
    std::string task = "regress";
    double lambda = 1e-4;
    double lambda1 = 1e-4;
    double lambda2 = 1e-4;
    KernelFlags kernel;
    std::string method = "gop";
    Eigen::Index k = 1;
    int knn_k = 5;
    std::string out_dir = "pipeline_out";
};

int run_pipeline(const PipelineOptions& opt) {
    namespace fs = std::filesystem;
    fs::create_directories(opt.out_dir);
    const std::string prefix = (fs::path(opt.out_dir) / "sim").string();
    const std::string model_path = (fs::path(opt.out_dir) / "model.json").string();
    const std::string reduce_prefix = (fs::path(opt.out_dir) / "reduced").string();
    const std::string report_path = (fs::path(opt.out_dir) / "report.json").string();
    const std::string manifest_path = (fs::path(opt.out_dir) / "manifest.json").string();

    // stage 1: data
    SimulateOptions sim = opt.sim;
    sim.out_prefix = prefix;
    if (sim.n_test <= 0) sim.n_test = sim.n_per_class / 2 + 1;
    run_simulate(sim);

    // stage 2: fit on the training half
    FitOptions fit;
    fit.data_path = prefix + ".train.csv";
    fit.out_path = model_path;
    fit.task = opt.task;
    fit.lambda = opt.lambda;
    fit.lambda1 = opt.lambda1;
    fit.lambda2 = opt.lambda2;
    fit.seed = sim.seed;
    fit.kernel = opt.kernel;
    run_fit(fit);

    // stage 3: predictive directions
    ReduceOptions reduce;
    reduce.model_path = model_path;
    reduce.data_path = prefix + ".train.csv";
    reduce.out_prefix = reduce_prefix;
    reduce.method = opt.method;
    reduce.k = opt.k;
    run_reduce(reduce);

    // stage 4: reduced-space evaluation
    EvaluateOptions eval;
    eval.model_path = model_path;
    eval.train_path = prefix + ".train.csv";
    eval.test_path = prefix + ".test.csv";
    eval.truth_path = prefix + ".truth.csv";
    eval.out_path = report_path;
    eval.method = opt.method;
    eval.k = opt.k;
    eval.knn_k = opt.knn_k;
    json report = run_evaluate_impl(eval);
    write_json(report_path, report);

    // manifest: enough to replay the run and check the artifacts byte for byte
    json manifest;
    manifest["tool_version"] = kVersion;
    manifest["archive_schema_version"] = kArchiveSchemaVersion;
    json config;
    config["design"] = sim.design;
    config["n_per_class"] = sim.n_per_class;
    config["p"] = sim.p;
    config["d"] = sim.d;
    config["r"] = sim.r;
    config["sigma_noise"] = sim.sigma;
    config["n_test"] = sim.n_test;
    config["seed"] = sim.seed;
    config["task"] = opt.task;
    config["lambda"] = opt.lambda;
    config["lambda1"] = opt.lambda1;
    config["lambda2"] = opt.lambda2;
    if (opt.kernel.s) config["s"] = *opt.kernel.s;
    if (opt.kernel.sigma) config["sigma"] = *opt.kernel.sigma;
    config["weight_factor"] = opt.kernel.weight_factor;
    config["method"] = opt.method;
    config["k"] = opt.k;
    config["knn_k"] = opt.knn_k;
    manifest["config"] = std::move(config);

    json artifacts;
    for (const char* name : {"sim.train.csv", "sim.test.csv", "sim.truth.csv", "model.json",
                             "reduced.eigenvalues.csv", "reduced.eigenvectors.csv",
                             "reduced.projections.csv", "reduced.summary.json", "report.json"}) {
        const std::string path = (fs::path(opt.out_dir) / name).string();
        artifacts[name] = json{{"path", path}, {"digest", file_digest(path)}};
    }
    manifest["artifacts"] = std::move(artifacts);

    json results;
    results["eigenvalues"] = report["eigenvalues"];
    results["k_used"] = report["k_used"];
    results["error_reduced"] = report["error_reduced"]["error_rate"];
    results["error_full"] = report["error_full"]["error_rate"];
    if (report.contains("alignment")) {
        results["alignment"] = report["alignment"];
        manifest["alignment"] = report["alignment"];
    }
    manifest["results"] = std::move(results);
    write_json(manifest_path, manifest);

    json out;
    out["out_dir"] = opt.out_dir;
    out["manifest"] = manifest_path;
    if (manifest.contains("alignment")) out["alignment"] = manifest["alignment"];
    out["error_reduced"] = report["error_reduced"]["error_rate"];
    std::cout << out.dump(1) << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"kernel gradient learning: fit, reduce, simulate, evaluate, pipeline"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    FitOptions fit;
    CLI::App* fit_cmd = app.add_subcommand("fit", "fit a gradient model to labeled CSV data");
    fit_cmd->add_option("--data", fit.data_path, "input CSV (features plus one label column)")
        ->required();
    fit_cmd->add_option("--out", fit.out_path, "output model archive path");
    fit_cmd->add_option("--task", fit.task, "regress or classify")
        ->check(CLI::IsMember({"regress", "classify"}));
    fit_cmd->add_option("--label-column", fit.label_column,
                        "0-based label column (-1: last column)");
    fit_cmd->add_option("--lambda", fit.lambda, "regression penalty");
    fit_cmd->add_option("--lambda1", fit.lambda1, "classification penalty on the log-odds");
    fit_cmd->add_option("--lambda2", fit.lambda2, "classification penalty on the gradient field");
    fit_cmd->add_option("--seed", fit.seed, "seed recorded in the archive provenance");
    fit.kernel.attach(fit_cmd);

    ReduceOptions reduce;
    CLI::App* reduce_cmd =
        app.add_subcommand("reduce", "extract predictive directions from a fitted model");
    reduce_cmd->add_option("--model", reduce.model_path, "model archive from fit")->required();
    reduce_cmd->add_option("--data", reduce.data_path,
                           "labeled CSV of evaluation points (default: training points)");
    reduce_cmd->add_option("--out-prefix", reduce.out_prefix, "prefix for the output files");
    reduce_cmd->add_option("--method", reduce.method, "gram operator: gop or egcm")
        ->check(CLI::IsMember({"gop", "egcm"}));
    reduce_cmd->add_option("--k", reduce.k, "number of directions to retain")->required();

    SimulateOptions sim;
    CLI::App* sim_cmd = app.add_subcommand("simulate", "generate benchmark datasets");
    sim_cmd->add_option("--design", sim.design, "linear or hypersphere")
        ->check(CLI::IsMember({"linear", "hypersphere"}));
    sim_cmd->add_option("--n-per-class", sim.n_per_class, "samples per class");
    sim_cmd->add_option("--p", sim.p, "ambient dimension (hypersphere design only)");
    sim_cmd->add_option("--d", sim.d, "intrinsic dimension (hypersphere design only)");
    sim_cmd->add_option("--r", sim.r, "inner shell radius (hypersphere design only)");
    sim_cmd->add_option("--sigma", sim.sigma, "noise level");
    sim_cmd->add_option("--n-test", sim.n_test, "rows held out into a test CSV");
    sim_cmd->add_option("--seed", sim.seed, "generator seed")->required();
    sim_cmd->add_option("--out-prefix", sim.out_prefix, "prefix for the output files");

    EvaluateOptions eval;
    CLI::App* eval_cmd =
        app.add_subcommand("evaluate", "nearest-neighbor error in the reduced space");
    eval_cmd->add_option("--model", eval.model_path, "model archive from fit")->required();
    eval_cmd->add_option("--train", eval.train_path, "labeled training CSV")->required();
    eval_cmd->add_option("--test", eval.test_path, "labeled test CSV")->required();
    eval_cmd->add_option("--truth", eval.truth_path,
                         "orthonormal true directions CSV for subspace angles");
    eval_cmd->add_option("--out", eval.out_path, "output report path");
    eval_cmd->add_option("--method", eval.method, "gram operator: gop or egcm")
        ->check(CLI::IsMember({"gop", "egcm"}));
    eval_cmd->add_option("--k", eval.k, "number of directions to retain")->required();
    eval_cmd->add_option("--knn-k", eval.knn_k, "nearest-neighbor count");
    eval_cmd->add_flag("--loo", eval.loo, "add leave-one-out error on the training set");

    PipelineOptions pipe;
    CLI::App* pipe_cmd =
        app.add_subcommand("pipeline", "simulate, fit, reduce, and evaluate in one run");
    pipe_cmd->add_option("--design", pipe.sim.design, "linear or hypersphere")
        ->check(CLI::IsMember({"linear", "hypersphere"}));
    pipe_cmd->add_option("--n-per-class", pipe.sim.n_per_class, "samples per class");
    pipe_cmd->add_option("--p", pipe.sim.p, "ambient dimension (hypersphere design only)");
    pipe_cmd->add_option("--d", pipe.sim.d, "intrinsic dimension (hypersphere design only)");
    pipe_cmd->add_option("--r", pipe.sim.r, "inner shell radius (hypersphere design only)");
    pipe_cmd->add_option("--sigma-noise", pipe.sim.sigma, "noise level");
    pipe_cmd->add_option("--n-test", pipe.sim.n_test,
                         "test rows (default: n_per_class / 2 + 1)");
    pipe_cmd->add_option("--seed", pipe.sim.seed, "seed for every stage")->required();
    pipe_cmd->add_option("--task", pipe.task, "regress or classify")
        ->check(CLI::IsMember({"regress", "classify"}));
    pipe_cmd->add_option("--lambda", pipe.lambda, "regression penalty");
    pipe_cmd->add_option("--lambda1", pipe.lambda1, "classification penalty on the log-odds");
    pipe_cmd->add_option("--lambda2", pipe.lambda2,
                         "classification penalty on the gradient field");
    pipe.kernel.attach(pipe_cmd);
    pipe_cmd->add_option("--method", pipe.method, "gram operator: gop or egcm")
        ->check(CLI::IsMember({"gop", "egcm"}));
    pipe_cmd->add_option("--k", pipe.k, "number of directions to retain")->required();
    pipe_cmd->add_option("--knn-k", pipe.knn_k, "nearest-neighbor count");
    pipe_cmd->add_option("--out-dir", pipe.out_dir, "directory for all artifacts")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e); // --help / --version
    } catch (const CLI::ParseError& e) {
        std::cerr << "gradlearn: category=usage: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (app.got_subcommand(fit_cmd)) return run_fit(fit);
        if (app.got_subcommand(reduce_cmd)) return run_reduce(reduce);
        if (app.got_subcommand(sim_cmd)) return run_simulate(sim);
        if (app.got_subcommand(eval_cmd)) return run_evaluate(eval);
        if (app.got_subcommand(pipe_cmd)) return run_pipeline(pipe);
        std::cerr << "gradlearn: category=usage: no subcommand selected\n";
        return kExitUsage;
    } catch (const DataFormatError& e) {
        std::cerr << "gradlearn: category=data-format: " << e.what() << '\n';
        return kExitDataFormat;
    } catch (const NumericalError& e) {
        std::cerr << "gradlearn: category=numerical: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::invalid_argument& e) {
        std::cerr << "gradlearn: category=usage: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "gradlearn: category=internal: " << e.what() << '\n';
        return kExitNumerical;
    }
}
