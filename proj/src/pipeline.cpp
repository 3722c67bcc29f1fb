#include "gshell/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "gshell/analysis.hpp"
#include "gshell/errors.hpp"
#include "gshell/extract.hpp"
#include "gshell/fit.hpp"
#include "gshell/losses.hpp"
#include "gshell/rng.hpp"
#include "gshell/tensorize.hpp"
#include "gshell/vjp.hpp"

namespace fs = std::filesystem;

namespace gshell {

namespace {

std::string resolve(const OpContext& ctx, const std::string& path) {
    if (ctx.dir.empty() || fs::path(path).is_absolute()) return path;
    return (fs::path(ctx.dir) / path).string();
}

uint64_t param_seed(const json& params, const OpContext& ctx) {
    return params.value("seed", ctx.seed);
}

Box3 param_bbox(const json& params) {
    Box3 box{{-1, -1, -1}, {1, 1, 1}};
    if (params.contains("bbox")) {
        const auto& bb = params.at("bbox");
        if (!bb.is_array() || bb.size() != 6)
            throw InvalidInput("bbox must be [x0,y0,z0,x1,y1,z1]");
        box.lo = {bb[0].get<double>(), bb[1].get<double>(), bb[2].get<double>()};
        box.hi = {bb[3].get<double>(), bb[4].get<double>(), bb[5].get<double>()};
    }
    return box;
}

ExtractedMesh extract_mode(const TetGrid& grid, const std::string& mode, int threads) {
    if (mode == "watertight") return extract_watertight(grid, threads);
    if (mode == "gshell") return extract_gshell(grid, threads);
    throw InvalidInput("unknown extract mode '" + mode + "' (expected watertight|gshell)");
}

json mesh_summary(const ExtractedMesh& mesh) {
    ManifoldReport rep = analyze_mesh(mesh);
    json j;
    j["vertices"] = mesh.vertex_count();
    j["watertight_vertices"] = mesh.watertight_vertex_count;
    j["boundary_vertices"] = mesh.vertex_count() - mesh.watertight_vertex_count;
    j["faces"] = mesh.faces.size();
    j["boundary_edges"] = mesh.boundary_edges.size();
    j["degenerate_faces"] = mesh.degenerate_faces.size();
    j["area"] = total_area(mesh);
    j["edges"] = rep.edges;
    j["open_edges"] = rep.open_edges;
    j["nonmanifold_edges"] = rep.nonmanifold_edges;
    j["nonmanifold_vertices"] = rep.nonmanifold_vertices;
    j["boundary_loops"] = rep.boundary_loops;
    j["boundary_loop_lengths"] = rep.boundary_loop_lengths;
    j["edge_face_histogram"] = rep.edge_face_histogram;
    j["nonmanifold_edge_list"] = rep.nonmanifold_edge_list;
    j["nonmanifold_vertex_list"] = rep.nonmanifold_vertex_list;
    j["connected_components"] = rep.connected_components;
    j["euler_characteristic"] = rep.euler_characteristic;
    j["closed"] = rep.closed();
    j["manifold"] = rep.manifold();
    j["watertight"] = rep.watertight();
    return j;
}

json op_gen(const json& params, const OpContext& ctx) {
    std::string shape = params.at("shape").get<std::string>();
    int resolution = params.at("resolution").get<int>();
    double radius = params.value("radius", 0.6);
    double jitter = params.value("jitter", 0.0);
    uint64_t seed = param_seed(params, ctx);

    TetGrid grid = build_uniform_tet_grid(resolution, param_bbox(params));
    if (jitter > 0.0) {
        Rng rng = Rng::stream(seed, "gen.offsets");
        double j = std::min(jitter, 1.0);
        for (auto& o : grid.offsets)
            o = {rng.uniform(-j, j), rng.uniform(-j, j), rng.uniform(-j, j)};
    }
    sample_fields(grid, make_shape_field(shape, radius));

    json summary;
    summary["op"] = "gen";
    summary["shape"] = shape;
    summary["resolution"] = resolution;
    summary["vertices"] = grid.vertex_count();
    summary["tets"] = grid.tets.size();
    json artifacts = json::array();
    if (params.contains("out")) {
        std::string out = params.at("out").get<std::string>();
        save_grid_json(resolve(ctx, out), grid);
        artifacts.push_back(out);
    }
    if (params.contains("points_out")) {
        std::string pout = params.at("points_out").get<std::string>();
        uint32_t count = params.value("points_count", 20000u);
        Rng rng = Rng::stream(seed, "gen.points");
        save_xyz(resolve(ctx, pout), sample_shape_surface(shape, radius, count, rng));
        summary["points"] = count;
        artifacts.push_back(pout);
    }
    summary["artifacts"] = artifacts;
    return summary;
}

json op_extract(const json& params, const OpContext& ctx) {
    TetGrid grid = load_grid_json(resolve(ctx, params.at("grid").get<std::string>()));
    std::string mode = params.value("mode", std::string("gshell"));
    ExtractedMesh mesh = extract_mode(grid, mode, ctx.threads);

    json summary = mesh_summary(mesh);
    summary["op"] = "extract";
    summary["mode"] = mode;
    json artifacts = json::array();
    if (params.contains("obj")) {
        std::string p = params.at("obj").get<std::string>();
        save_obj(resolve(ctx, p), mesh);
        artifacts.push_back(p);
    }
    if (params.contains("ply")) {
        std::string p = params.at("ply").get<std::string>();
        save_ply(resolve(ctx, p), mesh);
        artifacts.push_back(p);
    }
    if (params.contains("report")) {
        std::string p = params.at("report").get<std::string>();
        save_json(resolve(ctx, p), summary);
        artifacts.push_back(p);
    }
    summary["artifacts"] = artifacts;
    return summary;
}

FitConfig fit_config_from(const json& params, const OpContext& ctx) {
    json merged;
    if (params.contains("config"))
        merged = load_json(resolve(ctx, params.at("config").get<std::string>()));
    if (!merged.is_object()) merged = json::object();
    for (const auto& [k, v] : params.items()) merged[k] = v;

    FitConfig cfg;
    cfg.iterations = merged.value("iterations", cfg.iterations);
    cfg.lr_sdf = merged.value("lr_sdf", cfg.lr_sdf);
    cfg.lr_msdf = merged.value("lr_msdf", cfg.lr_msdf);
    cfg.lr_offsets = merged.value("lr_offsets", cfg.lr_offsets);
    cfg.lr_decay = merged.value("lr_decay", cfg.lr_decay);
    cfg.adam_beta1 = merged.value("adam_beta1", cfg.adam_beta1);
    cfg.adam_beta2 = merged.value("adam_beta2", cfg.adam_beta2);
    cfg.gamma_chamfer = merged.value("gamma_chamfer", cfg.gamma_chamfer);
    cfg.gamma_open = merged.value("gamma_open", cfg.gamma_open);
    cfg.gamma_close = merged.value("gamma_close", cfg.gamma_close);
    cfg.open_phase = merged.value("open_phase", cfg.open_phase);
    cfg.heal_phase = merged.value("heal_phase", cfg.heal_phase);
    cfg.close_boost = merged.value("close_boost", cfg.close_boost);
    cfg.heal_max_loop_edges = merged.value("heal_max_loop_edges", cfg.heal_max_loop_edges);
    cfg.scale_msdf_weights = merged.value("scale_msdf_weights", cfg.scale_msdf_weights);
    cfg.gamma_sdf_reg = merged.value("gamma_sdf_reg", cfg.gamma_sdf_reg);
    cfg.gamma_eikonal = merged.value("gamma_eikonal", cfg.gamma_eikonal);
    cfg.eps_close = merged.value("eps_close", cfg.eps_close);
    cfg.huber_delta = merged.value("huber_delta", cfg.huber_delta);
    cfg.chamfer_samples = merged.value("chamfer_samples", cfg.chamfer_samples);
    cfg.seed = merged.value("seed", ctx.seed);
    cfg.threads = ctx.threads;
    cfg.optimize_sdf = merged.value("optimize_sdf", cfg.optimize_sdf);
    cfg.optimize_msdf = !merged.value("watertight", false) &&
                        merged.value("optimize_msdf", cfg.optimize_msdf);
    cfg.optimize_offsets = merged.value("optimize_offsets", cfg.optimize_offsets);
    cfg.log_every = merged.value("log_every", ctx.log_level >= 2 ? 25u : 0u);
    return cfg;
}

json op_fit(const json& params, const OpContext& ctx) {
    std::vector<Vec3> target = load_xyz(resolve(ctx, params.at("target").get<std::string>()));
    FitConfig cfg = fit_config_from(params, ctx);

    TetGrid grid;
    if (params.contains("grid")) {
        grid = load_grid_json(resolve(ctx, params.at("grid").get<std::string>()));
    } else {
        int resolution = params.at("resolution").get<int>();
        grid = build_uniform_tet_grid(resolution, param_bbox(params));
        init_for_fitting(grid, cfg.seed);
        // the watertight ablation freezes msdf, so start it fully closed
        if (!cfg.optimize_msdf) std::fill(grid.msdf.begin(), grid.msdf.end(), 1.0);
    }

    FitReport rep;
    TetGrid fitted = fit_to_points(std::move(grid), target, cfg, &rep);

    ExtractedMesh mesh = extract_gshell(fitted, ctx.threads);
    json summary = mesh_summary(mesh);
    summary["op"] = "fit";
    summary["iterations"] = cfg.iterations;
    summary["best_iter"] = rep.best_iter;
    summary["best_chamfer"] = rep.best_chamfer;
    summary["final_chamfer"] = rep.final_chamfer;
    summary["wall_seconds"] = rep.wall_seconds;

    json artifacts = json::array();
    if (params.contains("out")) {
        std::string p = params.at("out").get<std::string>();
        save_grid_json(resolve(ctx, p), fitted);
        artifacts.push_back(p);
    }
    if (params.contains("report")) {
        // artifact files carry no timing so reruns hash identically
        json file_report = summary;
        file_report.erase("wall_seconds");
        file_report.erase("artifacts");
        std::string p = params.at("report").get<std::string>();
        save_json(resolve(ctx, p), file_report);
        artifacts.push_back(p);
    }
    if (params.contains("history")) {
        std::string csv = "iter,total,chamfer,open_reg,close_reg,sdf_reg,eikonal,lr_scale,"
                          "vertices,boundary_vertices,faces\n";
        for (const FitIterStats& st : rep.history) {
            csv += std::to_string(st.iter);
            csv += ',';
            csv += double_to_string(st.total);
            csv += ',';
            csv += double_to_string(st.chamfer);
            csv += ',';
            csv += double_to_string(st.open_reg);
            csv += ',';
            csv += double_to_string(st.close_reg);
            csv += ',';
            csv += double_to_string(st.sdf_reg);
            csv += ',';
            csv += double_to_string(st.eikonal);
            csv += ',';
            csv += double_to_string(st.lr_scale);
            csv += ',';
            csv += std::to_string(st.vertices);
            csv += ',';
            csv += std::to_string(st.boundary_vertices);
            csv += ',';
            csv += std::to_string(st.faces);
            csv += '\n';
        }
        std::string p = params.at("history").get<std::string>();
        atomic_write_file(resolve(ctx, p), csv);
        artifacts.push_back(p);
    }
    summary["artifacts"] = artifacts;
    return summary;
}

json op_metrics(const json& params, const OpContext& ctx) {
    TetGrid grid = load_grid_json(resolve(ctx, params.at("grid").get<std::string>()));
    std::vector<Vec3> target = load_xyz(resolve(ctx, params.at("target").get<std::string>()));
    std::string mode = params.value("mode", std::string("gshell"));
    uint32_t samples = params.value("samples", 100000u);

    ExtractedMesh mesh = extract_mode(grid, mode, ctx.threads);
    Rng rng = Rng::stream(param_seed(params, ctx), "metrics.samples");
    ChamferResult ch = chamfer_metric(mesh, target, samples, rng);

    json summary = mesh_summary(mesh);
    summary["op"] = "metrics";
    summary["mode"] = mode;
    summary["target_points"] = target.size();
    summary["chamfer"] = ch.value;
    summary["chamfer_forward"] = ch.forward;
    summary["chamfer_backward"] = ch.backward;
    json artifacts = json::array();
    if (params.contains("out")) {
        std::string p = params.at("out").get<std::string>();
        save_json(resolve(ctx, p), summary);
        artifacts.push_back(p);
    }
    summary["artifacts"] = artifacts;
    return summary;
}

json op_check(const json& params, const OpContext& ctx) {
    TetGrid grid = load_grid_json(resolve(ctx, params.at("grid").get<std::string>()));
    std::string mode = params.value("mode", std::string("gshell"));
    ExtractedMesh mesh = extract_mode(grid, mode, ctx.threads);
    json summary = mesh_summary(mesh);
    summary["op"] = "check";
    summary["mode"] = mode;
    json artifacts = json::array();
    if (params.contains("out")) {
        std::string p = params.at("out").get<std::string>();
        save_json(resolve(ctx, p), summary);
        artifacts.push_back(p);
    }
    summary["artifacts"] = artifacts;
    return summary;
}

json op_winding(const json& params, const OpContext& ctx) {
    TetGrid grid = load_grid_json(resolve(ctx, params.at("grid").get<std::string>()));
    std::string mode = params.value("mode", std::string("watertight"));
    ExtractedMesh mesh = extract_mode(grid, mode, ctx.threads);

    std::vector<Vec3> queries;
    if (params.contains("points")) {
        queries = load_xyz(resolve(ctx, params.at("points").get<std::string>()));
    } else {
        uint32_t count = params.value("count", 1000u);
        Rng rng = Rng::stream(param_seed(params, ctx), "winding.queries");
        Vec3 lo = grid.bbox.lo, hi = grid.bbox.hi;
        for (uint32_t i = 0; i < count; ++i)
            queries.push_back({rng.uniform(lo.x, hi.x), rng.uniform(lo.y, hi.y),
                               rng.uniform(lo.z, hi.z)});
    }
    std::vector<double> w = winding_numbers(mesh.positions, mesh.faces, queries, ctx.threads);

    double wmin = 0, wmax = 0, mean = 0;
    size_t integral = 0;
    if (!w.empty()) {
        wmin = wmax = w[0];
        for (double x : w) {
            wmin = std::min(wmin, x);
            wmax = std::max(wmax, x);
            mean += x;
            if (std::fabs(x - std::round(x)) < 1e-6) ++integral;
        }
        mean /= double(w.size());
    }
    json summary;
    summary["op"] = "winding";
    summary["mode"] = mode;
    summary["queries"] = w.size();
    summary["min"] = wmin;
    summary["max"] = wmax;
    summary["mean"] = mean;
    summary["integral_fraction"] = w.empty() ? 0.0 : double(integral) / double(w.size());
    json artifacts = json::array();
    if (params.contains("out")) {
        std::string csv = "x,y,z,winding\n";
        for (size_t i = 0; i < w.size(); ++i) {
            csv += double_to_string(queries[i].x);
            csv += ',';
            csv += double_to_string(queries[i].y);
            csv += ',';
            csv += double_to_string(queries[i].z);
            csv += ',';
            csv += double_to_string(w[i]);
            csv += '\n';
        }
        std::string p = params.at("out").get<std::string>();
        atomic_write_file(resolve(ctx, p), csv);
        artifacts.push_back(p);
    }
    summary["artifacts"] = artifacts;
    return summary;
}

json op_gradcheck(const json& params, const OpContext& ctx) {
    int resolution = params.value("resolution", 5);
    int trials = params.value("trials", 100);
    double fd_step = params.value("fd_step", 1e-5);
    double tol = params.value("tolerance", 1e-4);
    GradCheckReport rep = gradcheck_random(resolution, trials, param_seed(params, ctx), fd_step,
                                           tol, ctx.threads);
    json summary;
    summary["op"] = "gradcheck";
    summary["resolution"] = resolution;
    summary["trials"] = rep.trials;
    summary["probes"] = rep.probes;
    summary["failures"] = rep.failures;
    summary["skipped"] = rep.skipped;
    summary["worst_rel"] = rep.worst_rel;
    summary["tolerance"] = rep.tolerance;
    summary["passed"] = rep.passed();
    json artifacts = json::array();
    if (params.contains("out")) {
        std::string p = params.at("out").get<std::string>();
        save_json(resolve(ctx, p), summary);
        artifacts.push_back(p);
    }
    summary["artifacts"] = artifacts;
    return summary;
}

json op_tensorize(const json& params, const OpContext& ctx) {
    TetGrid grid = load_grid_json(resolve(ctx, params.at("grid").get<std::string>()));
    TensorGrid t = tensorize(grid, ctx.threads);

    size_t ones = 0, zeros = 0, cuts = 0, masked = 0;
    for (size_t i = 0; i < t.alpha_cells(); ++i) {
        if (t.alpha_at(1, i) == 0.0) continue;
        ++masked;
        double v = t.alpha_at(0, i);
        if (v == 1.0) ++ones;
        else if (v == 0.0) ++zeros;
        else ++cuts;
    }
    json summary;
    summary["op"] = "tensorize";
    summary["resolution"] = t.resolution;
    summary["alpha_side"] = t.alpha_side;
    summary["candidates"] = masked;
    summary["alpha_whole"] = ones;
    summary["alpha_discarded"] = zeros;
    summary["alpha_cut"] = cuts;
    json artifacts = json::array();
    if (params.contains("out")) {
        std::string p = params.at("out").get<std::string>();
        save_gsp(resolve(ctx, p), t);
        artifacts.push_back(p);
    }
    summary["artifacts"] = artifacts;
    return summary;
}

json op_detensorize(const json& params, const OpContext& ctx) {
    TensorGrid t = load_gsp(resolve(ctx, params.at("gsp").get<std::string>()));
    TetGrid grid = detensorize_grid(t);
    ExtractedMesh mesh = extract_from_tensor(t, ctx.threads);

    json summary = mesh_summary(mesh);
    summary["op"] = "detensorize";
    summary["resolution"] = t.resolution;
    json artifacts = json::array();
    if (params.contains("grid_out")) {
        std::string p = params.at("grid_out").get<std::string>();
        save_grid_json(resolve(ctx, p), grid);
        artifacts.push_back(p);
    }
    if (params.contains("obj")) {
        std::string p = params.at("obj").get<std::string>();
        save_obj(resolve(ctx, p), mesh);
        artifacts.push_back(p);
    }
    if (params.contains("report")) {
        json file_report = summary;
        file_report.erase("artifacts");
        std::string p = params.at("report").get<std::string>();
        save_json(resolve(ctx, p), file_report);
        artifacts.push_back(p);
    }
    summary["artifacts"] = artifacts;
    return summary;
}

} // namespace

json run_op(const std::string& op, json params, const OpContext& ctx) {
    if (op == "gen") return op_gen(params, ctx);
    if (op == "extract") return op_extract(params, ctx);
    if (op == "fit") return op_fit(params, ctx);
    if (op == "metrics") return op_metrics(params, ctx);
    if (op == "check") return op_check(params, ctx);
    if (op == "winding") return op_winding(params, ctx);
    if (op == "gradcheck") return op_gradcheck(params, ctx);
    if (op == "tensorize") return op_tensorize(params, ctx);
    if (op == "detensorize") return op_detensorize(params, ctx);
    throw InvalidInput("unknown op '" + op + "'");
}

json run_pipeline(const std::string& spec_path, const std::string& out_dir, int log_level) {
    json spec = load_json(spec_path);
    if (!spec.is_object() || !spec.contains("steps") || !spec.at("steps").is_array())
        throw FormatError("pipeline spec: expected an object with a 'steps' array");

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw InvalidInput("cannot create output dir: " + out_dir);

    OpContext ctx;
    ctx.dir = out_dir;
    ctx.seed = spec.value("seed", 0ull);
    ctx.threads = spec.value("threads", 1);
    ctx.log_level = log_level;

    json manifest;
    manifest["version"] = 1;
    manifest["seed"] = ctx.seed;
    manifest["steps"] = json::array();

    const auto& steps = spec.at("steps");
    for (size_t i = 0; i < steps.size(); ++i) {
        json step = steps[i];
        if (!step.is_object() || !step.contains("op"))
            throw FormatError("pipeline spec: step " + std::to_string(i) + " has no 'op'");
        std::string op = step.at("op").get<std::string>();
        std::string name = step.value("name", op + "-" + std::to_string(i));
        step.erase("op");
        step.erase("name");

        if (log_level >= 1) std::printf("[pipeline] step %zu: %s (%s)\n", i, name.c_str(), op.c_str());
        json summary = run_op(op, step, ctx);
        if (summary.contains("passed") && summary.at("passed").is_boolean() &&
            !summary.at("passed").get<bool>())
            throw NumericFailure("pipeline step '" + name + "' reported failure");

        json entry;
        entry["name"] = name;
        entry["op"] = op;
        json arts = json::array();
        if (summary.contains("artifacts")) {
            for (const auto& a : summary.at("artifacts")) {
                std::string rel = a.get<std::string>();
                std::string abs = resolve(ctx, rel);
                json ar;
                ar["path"] = rel;
                std::string bytes = read_file(abs);
                ar["bytes"] = bytes.size();
                ar["sha256"] = sha256_hex_bytes(bytes);
                arts.push_back(ar);
            }
        }
        entry["artifacts"] = arts;
        // volatile fields stay out of the manifest so reruns compare equal
        summary.erase("artifacts");
        summary.erase("wall_seconds");
        entry["summary"] = summary;
        manifest["steps"].push_back(entry);
    }

    save_json((fs::path(out_dir) / "manifest.json").string(), manifest);
    return manifest;
}

} // namespace gshell
