#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sfg/classical.hpp"
#include "sfg/errors.hpp"
#include "sfg/eval.hpp"
#include "sfg/fnin.hpp"
#include "sfg/gradcheck.hpp"
#include "sfg/io.hpp"
#include "sfg/refine.hpp"
#include "sfg/synth.hpp"
#include "sfg/train.hpp"

namespace sfg::cli {

namespace {

namespace fs = std::filesystem;

NormalMap load_normals(const std::string& normals_path, const std::string& mask_path, const CameraModel& cam) {
    NormalMap n = normals_from_image(read_pfm(normals_path));
    if (!mask_path.empty()) {
        const Mask m = read_mask(mask_path);
        if (!m.same_shape(n.mask)) {
            throw DataError("mask is " + shape_string(m.rows(), m.cols()) + " but normal map is " +
                            shape_string(n.rows(), n.cols()));
        }
        for (std::size_t i = 0; i < m.size(); ++i) n.mask[i] = n.mask[i] && m[i];
    }
    if (n.rows() != cam.height || n.cols() != cam.width) {
        throw DataError("normal map is " + shape_string(n.rows(), n.cols()) + " but camera is " +
                        shape_string(cam.height, cam.width));
    }
    if (count_valid(n.mask) == 0) throw DataError("mask selects no pixel");
    n.validate();
    return n;
}

DepthMap load_depth(const std::string& path) { return depth_from_image(read_pfm(path)); }

void save_depth(const std::string& path, const DepthMap& z) { write_pfm(path, depth_to_image(to_space(z, DepthSpace::linear))); }

/// Classical solvers return zero-mean depth in the solve space; shift to
/// mean 1 (linear) or geometric mean 1 (log) so it reads as z / mu.
DepthMap fix_gauge(DepthMap z) {
    for (std::size_t i = 0; i < z.values.size(); ++i) {
        if (!z.mask[i]) continue;
        z.values[i] = z.space == DepthSpace::log ? std::exp(z.values[i]) : z.values[i] + 1.0;
    }
    z.space = DepthSpace::linear;
    return z;
}

FninParams load_network(const std::string& path) { return load_params(path).params; }

// ---------------------------------------------------------------------------

struct IntegrateArgs {
    std::string normals, mask, camera, params, out, omega_out, method = "fnin";
    bool no_refine = false;
    double lambda = 1e-3;
    double sigmoid_k = 2.0;
    int coarsest_min = 32;
};

int run_integrate(const IntegrateArgs& a, std::ostream& out) {
    const CameraModel cam = read_camera(a.camera);
    const NormalMap n = load_normals(a.normals, a.mask, cam);
    const auto t0 = std::chrono::steady_clock::now();
    DepthMap depth;
    std::optional<GridD> omega;
    if (a.method == "fnin" || a.method == "fnin-s") {
        if (a.params.empty()) throw std::invalid_argument("--method " + a.method + " needs --params");
        const FninParams params = load_network(a.params);
        FninOutput stage1 = fnin_forward(n, cam, params, ForwardOptions{a.coarsest_min});
        depth = std::move(stage1.depth);
        omega = std::move(stage1.omega);
        if (!a.no_refine) {
            RefineOptions opts;
            opts.mode = a.method == "fnin" ? WeightMode::attention : WeightMode::sigmoid;
            opts.lambda = a.lambda;
            opts.sigmoid_k = a.sigmoid_k;
            depth = refine(n, cam, depth, &*omega, opts).depth;
        }
    } else {
        const GradientField g = gradients_from_normals(n, cam);
        if (a.method == "dct") depth = integrate_dct(g);
        else if (a.method == "fft") depth = integrate_fft(g);
        else depth = integrate_dense_lsq(g, n.mask).depth;
        depth = fix_gauge(std::move(depth));
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    save_depth(a.out, depth);
    if (!a.omega_out.empty()) {
        if (!omega) throw std::invalid_argument("--omega-out is only produced by the network methods");
        write_pfm(a.omega_out, grid_to_image(*omega));
    }
    out << a.method << ": " << count_valid(depth.mask) << " pixels in " << std::fixed << std::setprecision(3)
        << seconds << " s\n";
    return ok;
}

struct RefineArgs {
    std::string normals, mask, camera, depth, omega, out, weights = "sigmoid", system_prefix;
    double lambda = 1e-3;
    double sigmoid_k = 2.0;
};

int run_refine(const RefineArgs& a, std::ostream& out) {
    const CameraModel cam = read_camera(a.camera);
    const NormalMap n = load_normals(a.normals, a.mask, cam);
    const DepthMap z_ref = load_depth(a.depth);
    std::optional<GridD> omega;
    if (a.weights == "attention") {
        if (a.omega.empty()) throw std::invalid_argument("--weights attention needs --omega");
        omega = grid_from_image(read_pfm(a.omega));
    }
    RefineOptions opts;
    opts.mode = omega ? WeightMode::attention : WeightMode::sigmoid;
    opts.lambda = a.lambda;
    opts.sigmoid_k = a.sigmoid_k;
    const RefineResult r = refine(n, cam, z_ref, omega ? &*omega : nullptr, opts);
    if (!a.system_prefix.empty()) {
        const SparseSystem sys = assemble_system(n, cam, r.weights, z_ref, a.lambda);
        write_matrix_market(sys, a.system_prefix + ".mtx", a.system_prefix + "_rhs.mtx");
    }
    save_depth(a.out, r.depth);
    out << "refine: " << r.solver.iterations << " CG iterations, relative residual " << std::scientific
        << std::setprecision(3) << r.solver.residual << '\n';
    return ok;
}

struct EvalArgs {
    std::string est, gt, csv, error_map, align = "offset", object = "object", method = "method";
    double mu = 0.0;
    double ceiling = 5.0;
    double runtime = 0.0;
};

int run_eval(const EvalArgs& a, std::ostream& out) {
    const DepthMap est = load_depth(a.est);
    const DepthMap gt = load_depth(a.gt);
    const AlignMode mode = parse_align(a.align);
    const MetricRow row{a.object, a.method, mae_mm(est, gt, a.mu, mode), a.runtime};
    if (!a.error_map.empty()) write_png(a.error_map, error_map(est, gt, a.mu, a.ceiling, mode));
    if (a.csv.empty()) {
        write_metrics_csv(out, {row});
    } else {
        std::ofstream f(a.csv);
        if (!f) throw DataError("cannot create " + a.csv);
        write_metrics_csv(f, {row});
    }
    return ok;
}

struct SynthArgs {
    std::string spec, out;
    std::uint64_t seed = 0;
};

int run_synth(const SynthArgs& a, std::ostream& out) {
    const SynthSpec spec = parse_synth_spec(a.spec);
    const auto samples = synth_dataset(spec, a.seed);
    for (const auto& s : samples) {
        const fs::path dir = fs::path(a.out) / s.name;
        fs::create_directories(dir);
        write_pfm((dir / "normals.pfm").string(), normals_to_image(s.normals));
        write_pfm((dir / "depth.pfm").string(), depth_to_image(s.depth));
        write_mask_png((dir / "mask.png").string(), s.normals.mask);
        write_camera((dir / "camera.json").string(), s.cam);
    }
    out << "wrote " << samples.size() << " sample(s) to " << a.out << '\n';
    return ok;
}

struct TrainArgs {
    std::string config, out, history, init;
};

int run_train(const TrainArgs& a, std::ostream& out) {
    const TrainJob job = parse_train_job(read_text_file(a.config));
    const auto dataset = synth_dataset(job.data, job.data_seed);
    std::optional<FninParams> init;
    if (!a.init.empty()) {
        init = load_network(a.init);
        if (!(init->hyper == job.config.hyper)) throw DataError("--init network does not match the configured hyperparameters");
    }
    const TrainResult r = train_toy(job.config, dataset, init ? &*init : nullptr, [&](const EpochRecord& e) {
        out << "epoch " << e.epoch << "  train " << std::setprecision(6) << e.train_loss << "  val " << e.val_loss
            << '\n' << std::flush;
    });
    save_params(a.out, r.params);
    if (!a.history.empty()) {
        std::ofstream f(a.history);
        if (!f) throw DataError("cannot create " + a.history);
        write_history_csv(f, r.history);
    }
    return ok;
}

struct MeshArgs {
    std::string depth, camera, out;
};

int run_mesh(const MeshArgs& a, std::ostream& out) {
    const CameraModel cam = read_camera(a.camera);
    const DepthMap z = load_depth(a.depth);
    if (z.rows() != cam.height || z.cols() != cam.width) {
        throw DataError("depth is " + shape_string(z.rows(), z.cols()) + " but camera is " +
                        shape_string(cam.height, cam.width));
    }
    const std::size_t faces = export_obj(z, cam, a.out);
    out << "wrote " << count_valid(z.mask) << " vertices, " << faces << " faces\n";
    return ok;
}

struct GradcheckArgs {
    std::string params, sample = "mixed rows=16 cols=16 randomize=1";
    std::uint64_t seed = 0;
    std::uint64_t init_seed = 0;
    FninHyper hyper{4, 4, 8, 4};
    GradCheckOptions opts;
};

int run_gradcheck(const GradcheckArgs& a, std::ostream& out) {
    const FninParams params = a.params.empty() ? FninParams::random(a.hyper, a.init_seed) : load_network(a.params);
    SynthSpec spec = parse_synth_spec(a.sample);
    spec.count = 1;
    const auto samples = synth_dataset(spec, a.seed);
    const GradCheckReport rep = grad_check(params, samples.front(), a.opts);
    out << std::left << std::setw(34) << "tensor" << std::setw(9) << "checked" << std::setw(11) << "resampled"
        << "max_rel_error\n";
    for (const auto& t : rep.tensors) {
        out << std::setw(34) << t.name << std::setw(9) << t.checked << std::setw(11) << t.resampled << std::scientific
            << std::setprecision(3) << t.max_rel_error << std::defaultfloat << '\n';
    }
    out << (rep.passed ? "PASS" : "FAIL") << ": max relative error " << std::scientific << rep.max_rel_error << " in "
        << rep.worst_tensor << '[' << rep.worst_index << "]\n";
    return rep.passed ? ok : numerical_failure;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Surface-from-gradients toolkit: neural and classical normal integration", "sfg"};
    app.require_subcommand(1);
    const auto positive = CLI::PositiveNumber;
    const auto methods = CLI::IsMember({"fnin", "fnin-s", "dct", "fft", "dense"});

    IntegrateArgs ia;
    auto* integrate = app.add_subcommand("integrate", "Integrate a normal map into relative depth");
    integrate->add_option("--normals", ia.normals, "Normal map PFM (3 channels)")->required();
    integrate->add_option("--mask", ia.mask, "Mask PNG/PGM; defaults to pixels with a non-zero normal");
    integrate->add_option("--camera", ia.camera, "Camera JSON")->required();
    integrate->add_option("--params", ia.params, "Network parameter container (fnin, fnin-s)");
    integrate->add_option("--method", ia.method, "Integration method")->check(methods)->capture_default_str();
    integrate->add_flag("--no-refine", ia.no_refine, "Skip the weighted least-squares refinement");
    integrate->add_option("--lambda", ia.lambda, "Proximity weight of the refinement")->check(positive)->capture_default_str();
    integrate->add_option("--sigmoid-k", ia.sigmoid_k, "Sharpness of the sigmoid weights")->check(CLI::NonNegativeNumber)->capture_default_str();
    integrate->add_option("--coarsest-min", ia.coarsest_min, "Smallest side of the coarsest pyramid level")->check(CLI::Range(2, 1 << 20))->capture_default_str();
    integrate->add_option("--out,-o", ia.out, "Depth PFM (z / mu, NaN off-mask)")->required();
    integrate->add_option("--omega-out", ia.omega_out, "Attention map PFM (network methods)");

    RefineArgs ra;
    auto* refine_cmd = app.add_subcommand("refine", "Weighted least-squares refinement of a given depth map");
    refine_cmd->add_option("--normals", ra.normals, "Normal map PFM")->required();
    refine_cmd->add_option("--mask", ra.mask, "Mask PNG/PGM");
    refine_cmd->add_option("--camera", ra.camera, "Camera JSON")->required();
    refine_cmd->add_option("--depth", ra.depth, "Reference depth PFM")->required();
    refine_cmd->add_option("--weights", ra.weights, "Weight source")->check(CLI::IsMember({"sigmoid", "attention"}))->capture_default_str();
    refine_cmd->add_option("--omega", ra.omega, "Attention map PFM for --weights attention");
    refine_cmd->add_option("--lambda", ra.lambda, "Proximity weight")->check(positive)->capture_default_str();
    refine_cmd->add_option("--sigmoid-k", ra.sigmoid_k, "Sharpness of the sigmoid weights")->check(CLI::NonNegativeNumber)->capture_default_str();
    refine_cmd->add_option("--export-system", ra.system_prefix, "Also write PREFIX.mtx and PREFIX_rhs.mtx");
    refine_cmd->add_option("--out,-o", ra.out, "Refined depth PFM")->required();

    EvalArgs ea;
    auto* eval_cmd = app.add_subcommand("eval", "Mean absolute depth error in millimetres");
    eval_cmd->add_option("--est", ea.est, "Estimated depth PFM")->required();
    eval_cmd->add_option("--gt", ea.gt, "Ground-truth depth PFM")->required();
    eval_cmd->add_option("--mu", ea.mu, "Main distance in millimetres")->required()->check(positive);
    eval_cmd->add_option("--align", ea.align, "Gauge alignment")->check(CLI::IsMember({"offset", "scale", "none"}))->capture_default_str();
    eval_cmd->add_option("--csv", ea.csv, "Metrics CSV (default: stdout)");
    eval_cmd->add_option("--error-map", ea.error_map, "Error-map PNG");
    eval_cmd->add_option("--ceiling", ea.ceiling, "Error mapped to the top of the colour ramp, mm")->check(positive)->capture_default_str();
    eval_cmd->add_option("--object", ea.object, "Object name for the CSV row")->capture_default_str();
    eval_cmd->add_option("--method", ea.method, "Method name for the CSV row")->capture_default_str();
    eval_cmd->add_option("--runtime", ea.runtime, "Runtime in seconds for the CSV row")->check(CLI::NonNegativeNumber);

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "Generate synthetic samples");
    synth->add_option("--spec", sa.spec, "Shape recipe, e.g. \"hemisphere radius=0.8 size=64\"")->required();
    synth->add_option("--seed", sa.seed, "Random seed")->capture_default_str();
    synth->add_option("--out,-o", sa.out, "Output directory")->required();

    TrainArgs ta;
    auto* train = app.add_subcommand("train-toy", "Train a network on synthetic data");
    train->add_option("--config", ta.config, "Training job JSON")->required()->check(CLI::ExistingFile);
    train->add_option("--out,-o", ta.out, "Parameter container to write")->required();
    train->add_option("--history", ta.history, "Per-epoch loss CSV");
    train->add_option("--init", ta.init, "Start from this parameter container");

    MeshArgs ma;
    auto* mesh = app.add_subcommand("mesh", "Export a depth map as an OBJ mesh");
    mesh->add_option("--depth", ma.depth, "Depth PFM")->required();
    mesh->add_option("--camera", ma.camera, "Camera JSON")->required();
    mesh->add_option("--out,-o", ma.out, "OBJ file")->required();

    GradcheckArgs ga;
    auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
    gradcheck->add_option("--params", ga.params, "Parameter container (default: random toy network)");
    gradcheck->add_option("--sample", ga.sample, "Synthetic sample recipe")->capture_default_str();
    gradcheck->add_option("--seed", ga.seed, "Sample seed")->capture_default_str();
    gradcheck->add_option("--init-seed", ga.init_seed, "Seed of the random network")->capture_default_str();
    gradcheck->add_option("--layers", ga.hyper.T, "Random network: Fourier layers")->check(CLI::PositiveNumber)->capture_default_str();
    gradcheck->add_option("--modes", ga.hyper.k_max, "Random network: retained modes")->check(CLI::PositiveNumber)->capture_default_str();
    gradcheck->add_option("--width", ga.hyper.d_v, "Random network: feature width")->check(CLI::PositiveNumber)->capture_default_str();
    gradcheck->add_option("--attention-width", ga.hyper.c_a, "Random network: attention width")->check(CLI::PositiveNumber)->capture_default_str();
    gradcheck->add_option("--eps", ga.opts.eps, "Finite-difference step")->check(positive)->capture_default_str();
    gradcheck->add_option("--per-tensor", ga.opts.samples_per_tensor, "Coordinates per tensor")->check(CLI::PositiveNumber)->capture_default_str();
    gradcheck->add_option("--tolerance", ga.opts.tolerance, "Maximum relative error")->check(positive)->capture_default_str();
    gradcheck->add_option("--coarsest-min", ga.opts.forward.coarsest_min, "Smallest side of the coarsest level")->check(CLI::Range(2, 1 << 20))->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n";
        const CLI::App* shown = &app;
        for (const auto* sub : app.get_subcommands({})) {
            if (sub->parsed()) shown = sub;
        }
        err << shown->help();
        return usage;
    }

    try {
        if (integrate->parsed()) return run_integrate(ia, out);
        if (refine_cmd->parsed()) return run_refine(ra, out);
        if (eval_cmd->parsed()) return run_eval(ea, out);
        if (synth->parsed()) return run_synth(sa, out);
        if (train->parsed()) return run_train(ta, out);
        if (mesh->parsed()) return run_mesh(ma, out);
        if (gradcheck->parsed()) return run_gradcheck(ga, out);
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return numerical_failure;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return data_error;
    } catch (const std::invalid_argument& e) {
        err << "invalid input: " << e.what() << '\n';
        return data_error;
    } catch (const fs::filesystem_error& e) {
        err << "data error: " << e.what() << '\n';
        return data_error;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << '\n';
        return numerical_failure;
    }
    return usage;
}

}  // namespace sfg::cli
