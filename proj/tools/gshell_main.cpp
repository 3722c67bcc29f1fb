#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gshell/errors.hpp"
#include "gshell/pipeline.hpp"

using gshell::json;

namespace {

// --set key=value overrides (numbers, bools and strings are auto-detected)
void apply_overrides(json& params, const std::vector<std::string>& sets) {
    for (const std::string& kv : sets) {
        size_t eq = kv.find('=');
        if (eq == std::string::npos || eq == 0)
            throw gshell::InvalidInput("--set expects key=value, got '" + kv + "'");
        std::string key = kv.substr(0, eq);
        std::string val = kv.substr(eq + 1);
        if (val == "true") {
            params[key] = true;
        } else if (val == "false") {
            params[key] = false;
        } else {
            try {
                params[key] = gshell::string_to_double(val);
            } catch (const gshell::FormatError&) {
                params[key] = val;
            }
        }
    }
}

int log_level_of(const std::string& s) {
    if (s == "quiet") return 0;
    if (s == "info") return 1;
    if (s == "debug") return 2;
    throw gshell::InvalidInput("unknown log level '" + s + "' (quiet|info|debug)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"G-Shell: differentiable open/closed surface extraction on tetrahedral grids"};
    app.require_subcommand(1);

    uint64_t seed = 0;
    int threads = 1;
    std::string log_level = "info";
    app.add_option("--seed", seed, "base RNG seed")->capture_default_str();
    app.add_option("--threads", threads, "worker threads (1 = reference mode)")
        ->capture_default_str();
    app.add_option("--log-level", log_level, "quiet|info|debug")->capture_default_str();

    // ---- gen ----
    auto* gen = app.add_subcommand("gen", "sample an analytic shape onto a grid");
    std::string gen_shape, gen_out, gen_points_out;
    int gen_res = 32;
    double gen_radius = 0.6, gen_jitter = 0.0;
    uint32_t gen_points = 20000;
    std::vector<double> gen_bbox;
    gen->add_option("--shape", gen_shape, "sphere|hemisphere|open-cylinder|sheet")->required();
    gen->add_option("--resolution", gen_res, "vertices per axis")->capture_default_str();
    gen->add_option("--radius", gen_radius, "shape radius")->capture_default_str();
    gen->add_option("--jitter", gen_jitter, "random offset amplitude in [0,1]")
        ->capture_default_str();
    gen->add_option("--bbox", gen_bbox, "x0 y0 z0 x1 y1 z1")->expected(6);
    gen->add_option("--out", gen_out, "output grid json");
    gen->add_option("--points-out", gen_points_out, "write surface samples (xyz)");
    gen->add_option("--points-count", gen_points, "number of surface samples")
        ->capture_default_str();

    // ---- extract ----
    auto* ext = app.add_subcommand("extract", "extract the mesh from a grid");
    std::string ext_grid, ext_mode = "gshell", ext_obj, ext_ply, ext_report;
    ext->add_option("--grid", ext_grid, "input grid json")->required()->check(CLI::ExistingFile);
    ext->add_option("--mode", ext_mode, "watertight|gshell")->capture_default_str();
    ext->add_option("--obj", ext_obj, "output OBJ path");
    ext->add_option("--ply", ext_ply, "output PLY path");
    ext->add_option("--report", ext_report, "output report json");

    // ---- fit ----
    auto* fit = app.add_subcommand("fit", "fit a grid to a target point cloud");
    std::string fit_grid, fit_target, fit_out, fit_report, fit_history, fit_config;
    int fit_res = 0;
    uint32_t fit_iters = 0;
    bool fit_watertight = false;
    std::vector<std::string> fit_sets;
    fit->add_option("--grid", fit_grid, "initial grid json (default: sphere init)")
        ->check(CLI::ExistingFile);
    fit->add_option("--resolution", fit_res, "grid resolution when no --grid is given");
    fit->add_option("--target", fit_target, "target point cloud (xyz)")
        ->required()
        ->check(CLI::ExistingFile);
    fit->add_option("--iterations", fit_iters, "optimisation steps");
    fit->add_option("--out", fit_out, "output fitted grid json");
    fit->add_option("--report", fit_report, "output report json");
    fit->add_option("--history", fit_history, "output per-iteration csv");
    fit->add_option("--config", fit_config, "json file with fit parameters")
        ->check(CLI::ExistingFile);
    fit->add_flag("--watertight", fit_watertight, "freeze msdf (closed-surface ablation)");
    fit->add_option("--set", fit_sets, "override any fit parameter (key=value)");

    // ---- metrics ----
    auto* met = app.add_subcommand("metrics", "chamfer metrics against a point cloud");
    std::string met_grid, met_target, met_mode = "gshell", met_out;
    uint32_t met_samples = 100000;
    met->add_option("--grid", met_grid, "grid json")->required()->check(CLI::ExistingFile);
    met->add_option("--target", met_target, "target point cloud (xyz)")
        ->required()
        ->check(CLI::ExistingFile);
    met->add_option("--mode", met_mode, "watertight|gshell")->capture_default_str();
    met->add_option("--samples", met_samples, "surface samples")->capture_default_str();
    met->add_option("--out", met_out, "output json");

    // ---- check ----
    auto* chk = app.add_subcommand("check", "manifoldness / topology report");
    std::string chk_grid, chk_mode = "gshell", chk_out;
    chk->add_option("--grid", chk_grid, "grid json")->required()->check(CLI::ExistingFile);
    chk->add_option("--mode", chk_mode, "watertight|gshell")->capture_default_str();
    chk->add_option("--out", chk_out, "output json");

    // ---- winding ----
    auto* wnd = app.add_subcommand("winding", "generalized winding numbers at query points");
    std::string wnd_grid, wnd_mode = "watertight", wnd_points, wnd_out;
    uint32_t wnd_count = 1000;
    wnd->add_option("--grid", wnd_grid, "grid json")->required()->check(CLI::ExistingFile);
    wnd->add_option("--mode", wnd_mode, "watertight|gshell")->capture_default_str();
    wnd->add_option("--points", wnd_points, "query points (xyz); default random in bbox")
        ->check(CLI::ExistingFile);
    wnd->add_option("--count", wnd_count, "random query count")->capture_default_str();
    wnd->add_option("--out", wnd_out, "output csv (x,y,z,winding)");

    // ---- gradcheck ----
    auto* gc = app.add_subcommand("gradcheck", "finite-difference check of the pullback");
    int gc_res = 5, gc_trials = 100;
    double gc_h = 1e-5, gc_tol = 1e-4;
    std::string gc_out;
    gc->add_option("--resolution", gc_res, "grid resolution")->capture_default_str();
    gc->add_option("--trials", gc_trials, "random grids to test")->capture_default_str();
    gc->add_option("--fd-step", gc_h, "finite-difference step")->capture_default_str();
    gc->add_option("--tolerance", gc_tol, "relative error bound")->capture_default_str();
    gc->add_option("--out", gc_out, "output json");

    // ---- tensorize / detensorize ----
    auto* ten = app.add_subcommand("tensorize", "encode a grid into the tensor container");
    std::string ten_grid, ten_out;
    ten->add_option("--grid", ten_grid, "grid json")->required()->check(CLI::ExistingFile);
    ten->add_option("--out", ten_out, "output .gsp path")->required();

    auto* det = app.add_subcommand("detensorize", "decode a tensor container");
    std::string det_gsp, det_grid_out, det_obj, det_report;
    det->add_option("--gsp", det_gsp, "input .gsp path")->required()->check(CLI::ExistingFile);
    det->add_option("--grid-out", det_grid_out, "output grid json (msdf = 0)");
    det->add_option("--obj", det_obj, "output decoded mesh OBJ");
    det->add_option("--report", det_report, "output report json");

    // ---- pipeline ----
    auto* pip = app.add_subcommand("pipeline", "run a multi-step spec and write a manifest");
    std::string pip_spec, pip_out_dir;
    pip->add_option("--spec", pip_spec, "pipeline spec json")->required()->check(CLI::ExistingFile);
    pip->add_option("--out-dir", pip_out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        gshell::OpContext ctx;
        ctx.seed = seed;
        ctx.threads = threads;
        ctx.log_level = log_level_of(log_level);

        json params;
        std::string op;
        if (gen->parsed()) {
            op = "gen";
            params["shape"] = gen_shape;
            params["resolution"] = gen_res;
            params["radius"] = gen_radius;
            if (gen_jitter > 0) params["jitter"] = gen_jitter;
            if (!gen_bbox.empty()) params["bbox"] = gen_bbox;
            if (!gen_out.empty()) params["out"] = gen_out;
            if (!gen_points_out.empty()) {
                params["points_out"] = gen_points_out;
                params["points_count"] = gen_points;
            }
        } else if (ext->parsed()) {
            op = "extract";
            params["grid"] = ext_grid;
            params["mode"] = ext_mode;
            if (!ext_obj.empty()) params["obj"] = ext_obj;
            if (!ext_ply.empty()) params["ply"] = ext_ply;
            if (!ext_report.empty()) params["report"] = ext_report;
        } else if (fit->parsed()) {
            op = "fit";
            params["target"] = fit_target;
            if (!fit_grid.empty()) params["grid"] = fit_grid;
            if (fit_res > 0) params["resolution"] = fit_res;
            if (fit_iters > 0) params["iterations"] = fit_iters;
            if (!fit_out.empty()) params["out"] = fit_out;
            if (!fit_report.empty()) params["report"] = fit_report;
            if (!fit_history.empty()) params["history"] = fit_history;
            if (!fit_config.empty()) params["config"] = fit_config;
            if (fit_watertight) params["watertight"] = true;
            apply_overrides(params, fit_sets);
        } else if (met->parsed()) {
            op = "metrics";
            params["grid"] = met_grid;
            params["target"] = met_target;
            params["mode"] = met_mode;
            params["samples"] = met_samples;
            if (!met_out.empty()) params["out"] = met_out;
        } else if (chk->parsed()) {
            op = "check";
            params["grid"] = chk_grid;
            params["mode"] = chk_mode;
            if (!chk_out.empty()) params["out"] = chk_out;
        } else if (wnd->parsed()) {
            op = "winding";
            params["grid"] = wnd_grid;
            params["mode"] = wnd_mode;
            params["count"] = wnd_count;
            if (!wnd_points.empty()) params["points"] = wnd_points;
            if (!wnd_out.empty()) params["out"] = wnd_out;
        } else if (gc->parsed()) {
            op = "gradcheck";
            params["resolution"] = gc_res;
            params["trials"] = gc_trials;
            params["fd_step"] = gc_h;
            params["tolerance"] = gc_tol;
            if (!gc_out.empty()) params["out"] = gc_out;
        } else if (ten->parsed()) {
            op = "tensorize";
            params["grid"] = ten_grid;
            params["out"] = ten_out;
        } else if (det->parsed()) {
            op = "detensorize";
            params["gsp"] = det_gsp;
            if (!det_grid_out.empty()) params["grid_out"] = det_grid_out;
            if (!det_obj.empty()) params["obj"] = det_obj;
            if (!det_report.empty()) params["report"] = det_report;
        } else if (pip->parsed()) {
            json manifest = gshell::run_pipeline(pip_spec, pip_out_dir, ctx.log_level);
            std::string mpath = pip_out_dir + "/manifest.json";
            std::printf("manifest: %s\nmanifest_sha256: %s\n", mpath.c_str(),
                        gshell::sha256_hex_file(mpath).c_str());
            return 0;
        }

        json summary = gshell::run_op(op, params, ctx);
        if (ctx.log_level >= 1) std::printf("%s\n", summary.dump(2).c_str());
        if (summary.contains("passed") && summary.at("passed").is_boolean() &&
            !summary.at("passed").get<bool>()) {
            std::fprintf(stderr, "error: %s reported failure\n", op.c_str());
            return 3;
        }
        return 0;
    } catch (const gshell::InvalidInput& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const gshell::NumericFailure& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const gshell::FormatError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
