#include "cli.hpp"

#include "manifest.hpp"
#include "run_config.hpp"

#include "cagewarp/errors.hpp"
#include "cagewarp/geometry.hpp"
#include "cagewarp/gradcheck.hpp"
#include "cagewarp/losses.hpp"
#include "cagewarp/mesh_io.hpp"
#include "cagewarp/mvc.hpp"
#include "cagewarp/optim.hpp"
#include "cagewarp/parallel.hpp"
#include "cagewarp/template_cage.hpp"
#include "cagewarp/toy.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>

namespace cagewarp::app {

namespace fs = std::filesystem;
using nlohmann::json;

void configure_logging() {
    static bool done = false;
    if (!done) {
        auto logger = std::make_shared<spdlog::logger>("cagewarp", std::make_shared<spdlog::sinks::stderr_sink_mt>());
        spdlog::set_default_logger(logger);
        done = true;
    }
    spdlog::set_pattern("[%l] %v");
    const char* env = std::getenv("CAGEWARP_LOG");
    const std::string level = env ? env : "info";
    if (level == "error") spdlog::set_level(spdlog::level::err);
    else if (level == "debug") spdlog::set_level(spdlog::level::debug);
    else {
        spdlog::set_level(spdlog::level::info);
        if (level != "info") spdlog::warn("CAGEWARP_LOG='{}' not recognized, using info", level);
    }
}

namespace {

struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::string out = ".";
};

// Everything a command needs: resolved config, output directory, manifest.
struct Context {
    RunConfig cfg;
    fs::path out;
    RunManifest& manifest;

    fs::path output(const std::string& name) {
        const fs::path p = out / name;
        manifest.add_output(p);
        return p;
    }
};

json provenance(double wall_seconds) { return {{"version", CAGEWARP_VERSION}, {"wall_seconds", wall_seconds}}; }

void write_trace(const fs::path& path, const std::vector<LossBreakdown>& trace) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path.string());
    f << "iteration,total";
    if (!trace.empty())
        for (const auto& t : trace.front().terms) f << ',' << t.name;
    f << '\n';
    for (std::size_t i = 0; i < trace.size(); ++i) {
        f << i << ',' << format_double(trace[i].total);
        for (const auto& t : trace[i].terms) f << ',' << format_double(t.value);
        f << '\n';
    }
    if (!f) throw IoError("failed writing " + path.string());
}

json optim_metrics(const OptimReport& r) {
    json m = {{"stop_reason", std::string(to_string(r.stop))}, {"iterations", r.iterations}};
    for (const auto& [k, v] : r.metrics) m[k] = v;
    if (!r.diagnostic.empty()) m["diagnostic"] = r.diagnostic;
    return m;
}

// ---- commands ----------------------------------------------------------------

int cmd_make_cage(Context& c, const std::string& mesh_path, std::optional<std::string> tmpl,
                  std::optional<double> scale) {
    c.manifest.add_input("mesh", mesh_path);
    const auto mesh = load_mesh(mesh_path);
    CageTemplate kind = c.cfg.cage_template;
    if (tmpl) {
        const auto k = parse_cage_template(*tmpl);
        if (!k) throw Error("unknown cage template '" + *tmpl + "' (sphere42 | sphere162)");
        kind = *k;
    }
    const double s = scale.value_or(c.cfg.cage_scale);
    const auto cage = make_enclosing_cage(kind, mesh, s);
    save_mesh(cage, c.output("cage.obj"));
    write_json(c.output("report.json"),
               {{"metrics",
                 {{"template", std::string(to_string(kind))},
                  {"scale", s},
                  {"vertices", cage.vertices.size()},
                  {"faces", cage.faces.size()}}},
                {"provenance", provenance(0.0)}});
    return 0;
}

int cmd_compute_mvc(Context& c, const std::string& cage_path, const std::string& points_path) {
    c.manifest.add_input("cage", cage_path);
    c.manifest.add_input("points", points_path);
    const auto cage = load_mesh(cage_path);
    const auto points = load_points(points_path);
    const auto mvc = compute_mvc(cage, points);
    save_mvc_binary(mvc, c.output("mvc.bin"));
    save_mvc_csv(mvc, c.output("mvc.csv"));
    double worst = 0.0;
    json status = {{"interior", 0}, {"on_vertex", 0}, {"on_face", 0}, {"exterior_ok", 0}};
    for (std::size_t i = 0; i < mvc.rows(); ++i) {
        worst = std::max(worst, std::abs(mvc.weights.row(static_cast<Eigen::Index>(i)).sum() - 1.0));
        const std::string k(to_string(mvc.status[i]));
        status[k] = status[k].get<int>() + 1;
    }
    write_json(c.output("report.json"), {{"metrics",
                                          {{"rows", mvc.rows()},
                                           {"cols", mvc.cols()},
                                           {"max_row_sum_error", worst},
                                           {"gradient_excluded_rows", mvc.excluded_count()},
                                           {"status", status}}},
                                         {"provenance", provenance(0.0)}});
    return 0;
}

int cmd_deform(Context& c, const std::string& src_path, const std::string& tgt_path) {
    c.manifest.add_input("source", src_path);
    c.manifest.add_input("target", tgt_path);
    const auto src = normalize_to_unit_box(load_mesh(src_path));
    const auto tgt = normalize_to_unit_box(load_mesh(tgt_path));
    const auto dcfg = c.cfg.deform_config();
    auto res = deform_pair(src.mesh, tgt.mesh, dcfg);
    save_mesh(res.cage, c.output("cage.obj"));
    save_mesh(res.deformed_cage, c.output("deformed_cage.obj"));
    save_mesh(res.deformed_mesh, c.output("deformed.obj"));
    save_offsets(res.offsets, c.output("offsets.csv"));
    write_trace(c.output("trace.csv"), res.report.trace);
    json m = optim_metrics(res.report);
    if (!src.mesh.faces.empty() && !tgt.mesh.faces.empty()) {
        const auto e = eval_metrics(res.deformed_mesh, tgt.mesh, src.mesh, {c.cfg.n_samples, c.cfg.seed, true});
        m["cd_x100"] = e.cd_x100;
        m["dcotlap_x1000"] = e.dcotlap_x1000;
        m["n_samples"] = e.n_samples;
    }
    m["seed"] = c.cfg.seed;
    write_json(c.output("report.json"), {{"metrics", m}, {"provenance", provenance(res.report.wall_seconds)}});
    if (!res.report.ok()) {
        spdlog::error("deform stopped: {} ({})", to_string(res.report.stop), res.report.diagnostic);
        return 1;
    }
    return 0;
}

int cmd_fit_cage(Context& c, const std::string& cage_path, const std::string& src_path, const std::string& novel_path,
                 const std::string& lm_path) {
    c.manifest.add_input("template_cage", cage_path);
    c.manifest.add_input("source", src_path);
    c.manifest.add_input("novel", novel_path);
    c.manifest.add_input("landmarks", lm_path);
    const auto cage = load_mesh(cage_path);
    const auto src = load_points(src_path);
    const auto novel = load_points(novel_path);
    const auto lms = load_landmarks(lm_path);
    auto res = fit_cage(cage, src, novel, lms, c.cfg.fit_config());
    save_mesh(res.cage, c.output("fitted_cage.obj"));
    write_trace(c.output("trace.csv"), res.report.trace);
    json m = optim_metrics(res.report);
    double rms = 0.0;
    for (std::size_t j = 0; j < cage.vertices.size(); ++j)
        rms += (res.cage.vertices[j] - cage.vertices[j]).squaredNorm();
    m["displacement_rms"] = std::sqrt(rms / static_cast<double>(cage.vertices.size()));
    m["landmarks"] = lms.size();
    write_json(c.output("report.json"), {{"metrics", m}, {"provenance", provenance(res.report.wall_seconds)}});
    if (!res.report.ok()) {
        spdlog::error("fit-cage stopped: {} ({})", to_string(res.report.stop), res.report.diagnostic);
        return 1;
    }
    return 0;
}

int cmd_transfer(Context& c, const std::string& cage_path, const std::string& offsets_path,
                 const std::string& novel_path) {
    c.manifest.add_input("cage", cage_path);
    c.manifest.add_input("offsets", offsets_path);
    c.manifest.add_input("novel", novel_path);
    const auto cage = load_mesh(cage_path);
    const auto offsets = load_offsets(offsets_path);
    const auto novel = load_mesh(novel_path);
    const auto moved = transfer(cage, offsets, novel.vertices);
    save_mesh(with_vertices(novel, moved), c.output("transferred.obj"));
    double max_disp = 0.0;
    for (std::size_t i = 0; i < moved.size(); ++i) max_disp = std::max(max_disp, (moved[i] - novel.vertices[i]).norm());
    write_json(c.output("report.json"),
               {{"metrics", {{"vertices", moved.size()}, {"max_displacement", max_disp}}}, {"provenance", provenance(0.0)}});
    return 0;
}

int cmd_eval(Context& c, const std::string& def_path, const std::string& tgt_path, const std::string& src_path,
             std::optional<std::size_t> samples, bool no_normalize) {
    c.manifest.add_input("deformed", def_path);
    c.manifest.add_input("target", tgt_path);
    c.manifest.add_input("source", src_path);
    EvalOptions o{samples.value_or(c.cfg.n_samples), c.cfg.seed, !no_normalize};
    const auto e = eval_metrics(load_mesh(def_path), load_mesh(tgt_path), load_mesh(src_path), o);
    write_json(c.output("eval.json"),
               {{"cd_x100", e.cd_x100}, {"dcotlap_x1000", e.dcotlap_x1000}, {"n_samples", e.n_samples}, {"seed", e.seed}});
    return 0;
}

int cmd_gradcheck(Context& c, const std::string& op, std::size_t configs, std::optional<double> fd_step) {
    GradCheckOptions o;
    o.n_configs = configs;
    o.seed = c.cfg.seed;
    if (fd_step) o.fd_step = *fd_step;
    json out;
    bool pass = true;
    if (op == "all") {
        json ops = json::array();
        double worst = 0.0;
        for (const auto& name : gradcheck_ops()) {
            const auto r = run_gradcheck(name, o);
            pass = pass && r.pass;
            worst = std::max(worst, r.max_rel_err);
            ops.push_back(to_json(r));
            spdlog::info("gradcheck {}: max_rel_err={:.3g} {}", name, r.max_rel_err, r.pass ? "pass" : "FAIL");
        }
        out = {{"op", "all"}, {"n_configs", configs}, {"max_rel_err", worst}, {"pass", pass}, {"ops", ops}};
    } else {
        const auto r = run_gradcheck(op, o);
        pass = r.pass;
        out = to_json(r);
    }
    write_json(c.output("gradcheck.json"), out);
    return pass ? 0 : 1;
}

int cmd_train_toy(Context& c, std::optional<std::size_t> epochs) {
    auto tcfg = c.cfg.toy_config();
    if (epochs) tcfg.epochs = *epochs;
    const auto problem = make_toy_problem(tcfg);
    auto res = train_toy(problem, tcfg);
    res.predictor.save(c.output("predictor.json"));
    write_trace(c.output("trace.csv"), res.report.trace);
    const auto ev = eval_toy(res.predictor, problem, c.cfg.n_holdout, tcfg.seed);
    json m = optim_metrics(res.report);
    m["eval"] = {{"n_holdout", ev.n_holdout},
                 {"mean_l2", ev.mean_l2},
                 {"max_l2", ev.max_l2},
                 {"mean_cd", ev.mean_cd},
                 {"baseline_mean_l2", ev.baseline_mean_l2},
                 {"baseline_max_l2", ev.baseline_max_l2},
                 {"baseline_mean_cd", ev.baseline_mean_cd},
                 {"baseline_ratio", ev.baseline_ratio}};
    m["seed"] = tcfg.seed;
    write_json(c.output("report.json"), {{"metrics", m}, {"provenance", provenance(res.report.wall_seconds)}});
    return res.report.ok() ? 0 : 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    configure_logging();
    CLI::App app{"Differentiable cage-based deformation toolkit", "cagewarp"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(CAGEWARP_VERSION));
    Common common;
    app.add_option("--config", common.config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--seed", common.seed, "seed for all randomness (default 0)");
    app.add_option("--threads", common.threads, "worker threads (default: all cores)")->check(CLI::PositiveNumber);
    app.add_option("--out", common.out, "output directory");
    app.fallthrough();

    std::function<int(Context&)> action;
    std::string command;

    std::string a, b, d, e;
    std::optional<std::string> tmpl;
    std::optional<double> scale, fd_step;
    std::optional<std::size_t> count;
    std::size_t configs = 10;
    std::string op = "all";
    bool no_normalize = false;

    auto* mk = app.add_subcommand("make-cage", "template cage around a mesh's bounding box");
    mk->add_option("--mesh", a, "input mesh OBJ")->required();
    mk->add_option("--template", tmpl, "sphere42 | sphere162");
    mk->add_option("--scale", scale, "cage bounding box / mesh bounding box (default 1.05)");
    mk->callback([&] { command = "make-cage"; action = [&](Context& c) { return cmd_make_cage(c, a, tmpl, scale); }; });

    auto* mv = app.add_subcommand("compute-mvc", "mean value coordinates of points w.r.t. a cage");
    mv->add_option("--cage", a, "cage OBJ")->required();
    mv->add_option("--points", b, "points OBJ or CSV")->required();
    mv->callback([&] { command = "compute-mvc"; action = [&](Context& c) { return cmd_compute_mvc(c, a, b); }; });

    auto* df = app.add_subcommand("deform", "optimize a cage deformation of source onto target");
    df->add_option("--source", a, "source mesh OBJ")->required();
    df->add_option("--target", b, "target mesh OBJ")->required();
    df->callback([&] { command = "deform"; action = [&](Context& c) { return cmd_deform(c, a, b); }; });

    auto* fc = app.add_subcommand("fit-cage", "fit a template cage to a novel shape from landmarks");
    fc->add_option("--template-cage", a, "template cage OBJ")->required();
    fc->add_option("--source", b, "source shape (OBJ or CSV)")->required();
    fc->add_option("--novel", d, "novel shape (OBJ or CSV)")->required();
    fc->add_option("--landmarks", e, "CSV src_index,dst_index")->required();
    fc->callback([&] { command = "fit-cage"; action = [&](Context& c) { return cmd_fit_cage(c, a, b, d, e); }; });

    auto* tr = app.add_subcommand("transfer", "apply cage offsets to a fitted cage around a novel shape");
    tr->add_option("--cage", a, "fitted cage OBJ")->required();
    tr->add_option("--offsets", b, "CSV dx,dy,dz per cage vertex")->required();
    tr->add_option("--novel", d, "novel mesh OBJ")->required();
    tr->callback([&] { command = "transfer"; action = [&](Context& c) { return cmd_transfer(c, a, b, d); }; });

    auto* ev = app.add_subcommand("eval", "chamfer and cotangent-Laplacian metrics");
    ev->add_option("--deformed", a, "deformed mesh OBJ")->required();
    ev->add_option("--target", b, "target mesh OBJ")->required();
    ev->add_option("--source", d, "source mesh OBJ (connectivity of the deformed mesh)")->required();
    ev->add_option("--samples", count, "surface samples per mesh (default 5000)");
    ev->add_flag("--no-normalize", no_normalize, "use coordinates as given");
    ev->callback([&] {
        command = "eval";
        action = [&](Context& c) { return cmd_eval(c, a, b, d, count, no_normalize); };
    });

    auto* gc = app.add_subcommand("gradcheck", "finite-difference checks of analytic gradients");
    gc->add_option("--op", op, "operation name or 'all'");
    gc->add_option("--configs", configs, "random configurations per op")->check(CLI::PositiveNumber);
    gc->add_option("--fd-step", fd_step, "central difference step");
    gc->callback([&] {
        command = "gradcheck";
        action = [&](Context& c) { return cmd_gradcheck(c, op, configs, fd_step); };
    });

    auto* tt = app.add_subcommand("train-toy", "train the offset predictor on a synthetic family");
    tt->add_option("--epochs", count, "training epochs (default 1500)");
    tt->callback([&] { command = "train-toy"; action = [&](Context& c) { return cmd_train_toy(c, count); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success&) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& err) {
        if (err.get_name() == "CallForHelp" || err.get_name() == "CallForAllHelp") {
            std::cout << app.help();
            return 0;
        }
        if (err.get_name() == "CallForVersion") {
            std::cout << CAGEWARP_VERSION << '\n';
            return 0;
        }
        std::cerr << "cagewarp: usage error: " << err.what() << '\n';
        return 2;
    }

    std::unique_ptr<RunManifest> manifest;
    try {
        RunConfig cfg = common.config_path.empty() ? RunConfig{} : RunConfig::load(common.config_path);
        if (common.seed) cfg.seed = *common.seed;
        if (common.threads) set_thread_count(*common.threads);
        const fs::path out = common.out;
        fs::create_directories(out);
        std::vector<std::string> args(argv, argv + argc);
        manifest = std::make_unique<RunManifest>(out, command, args);
        manifest->set_config(cfg.to_json());
        manifest->set_seed(cfg.seed);
        manifest->set_threads(thread_count());
        if (!common.config_path.empty()) manifest->add_input("config", common.config_path);
        manifest->write_started();
        Context ctx{cfg, out, *manifest};
        const int code = action(ctx);
        manifest->finalize(code == 0, code == 0 ? "" : "pipeline reported failure");
        return code;
    } catch (const std::exception& ex) {
        std::cerr << "cagewarp: error: " << ex.what() << '\n';
        if (manifest) {
            try {
                manifest->finalize(false, ex.what());
            } catch (const std::exception&) {
            }
        }
        return 1;
    }
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    for (const auto& s : args) argv.push_back(s.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace cagewarp::app
