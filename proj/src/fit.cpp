#include "gshell/fit.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include "gshell/errors.hpp"
#include "gshell/extract.hpp"

namespace gshell {

void init_for_fitting(TetGrid& grid, uint64_t seed) {
    Vec3 center = grid.bbox.center();
    double r = 0.25 * std::min(grid.bbox.extent().x,
                               std::min(grid.bbox.extent().y, grid.bbox.extent().z));
    Rng rng = Rng::stream(seed, "init.msdf");
    for (size_t i = 0; i < grid.vertex_count(); ++i) {
        grid.sdf[i] = norm(grid.canonical_positions[i] - center) - r;
        grid.msdf[i] = rng.uniform(-0.01, 0.99);
        grid.offsets[i] = Vec3{};
    }
}

namespace {

// per-parameter-group Adam state
struct Adam {
    std::vector<double> m, v;
    void init(size_t n) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
    }
};

void adam_step(Adam& st, std::vector<double>& params, const std::vector<double>& grad,
               double lr, double b1, double b2, double eps, double b1t, double b2t) {
    for (size_t i = 0; i < params.size(); ++i) {
        double g = grad[i];
        st.m[i] = b1 * st.m[i] + (1.0 - b1) * g;
        st.v[i] = b2 * st.v[i] + (1.0 - b2) * g * g;
        double mhat = st.m[i] / (1.0 - b1t);
        double vhat = st.v[i] / (1.0 - b2t);
        params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

void require_finite(double v, const char* term, uint32_t iter) {
    if (!std::isfinite(v)) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "fit: %s is non-finite at iteration %u", term, iter);
        throw NumericFailure(buf);
    }
}

} // namespace

TetGrid fit_to_points(TetGrid grid, const std::vector<Vec3>& target, const FitConfig& cfg,
                      FitReport* report) {
    if (target.empty()) throw InvalidInput("fit: empty target point set");
    if (cfg.iterations == 0) throw InvalidInput("fit: iterations must be positive");
    validate_grid(grid);

    auto t_start = std::chrono::steady_clock::now();
    const size_t n = grid.vertex_count();

    double rho = 1.0;
    if (cfg.scale_msdf_weights) {
        double s = double(grid.resolution) / 64.0;
        rho = s * s * s;
    }
    const double w_open = cfg.gamma_open / rho;
    const double w_close = cfg.gamma_close / rho;
    const uint32_t open_until = uint32_t(std::ceil(cfg.open_phase * double(cfg.iterations)));
    const uint32_t heal_from =
        std::max(open_until, uint32_t(std::ceil(cfg.heal_phase * double(cfg.iterations))));

    PointKd target_kd(target);
    Rng rng = Rng::stream(cfg.seed, "fit.chamfer");

    Adam adam_sdf, adam_msdf;
    adam_sdf.init(n);
    adam_msdf.init(n);
    // offsets use three scalar lanes
    Adam adam_off;
    adam_off.init(3 * n);

    VjpFlags chamfer_flags{cfg.optimize_sdf, cfg.optimize_msdf, cfg.optimize_offsets};

    TetGrid best = grid;
    FitReport local;
    FitReport& rep = report ? *report : local;
    rep.history.clear();
    rep.best_iter = 0;
    rep.best_chamfer = std::numeric_limits<double>::infinity();

    // Iterates are ranked by the data term plus a fixed price per spurious
    // rim, not by the data term alone: the chamfer distance barely notices
    // pinholes (they are small and sit on the surface), so ranking by it
    // tends to return an early iterate from the noisy opening phase whose
    // mask is riddled with them. Only iterates from the healing regime are
    // eligible — before it the mask structure is unsettled by construction.
    const double kShortLoopPrice = 1e-3;
    const double w_heal = w_close * cfg.close_boost;
    double best_score = std::numeric_limits<double>::infinity();

    double b1t = 1.0, b2t = 1.0;
    for (uint32_t it = 1; it <= cfg.iterations; ++it) {
        ExtractedMesh mesh = extract_gshell(grid, cfg.threads);

        GradSet g(n);
        ChamferResult ch = loss_chamfer(grid, mesh, target, target_kd, cfg.chamfer_samples,
                                        rng, cfg.gamma_chamfer, chamfer_flags, g);
        double open_v = 0.0, close_v = 0.0, heal_v = 0.0;
        uint32_t short_loops = 0;
        double w_open_t = it <= open_until ? w_open : 0.0;
        // The global closing pull only runs opposite the opening push; under
        // adaptive moments even a tiny consistent pull wins on any mask value
        // the data term does not defend, so left on during the settle phase
        // it slowly zips up undefended stretches of a genuine rim.
        double w_close_t = it <= open_until ? w_close : 0.0;
        bool healing = it > heal_from && cfg.close_boost > 0.0;
        if (cfg.optimize_msdf) {
            open_v = loss_msdf_reg_open(grid, mesh, w_open_t, cfg.huber_delta, g);
            close_v =
                loss_msdf_reg_close(grid, mesh, cfg.eps_close, w_close_t, cfg.huber_delta, g);
            if (healing)
                heal_v = loss_msdf_reg_close(grid, mesh, cfg.eps_close, w_heal, cfg.huber_delta,
                                             g, cfg.heal_max_loop_edges, &short_loops);
        }
        double sdf_reg_v = cfg.gamma_sdf_reg > 0.0 ? loss_sdf_reg(grid, cfg.gamma_sdf_reg, g) : 0.0;
        double eik_v = cfg.gamma_eikonal > 0.0 ? loss_eikonal(grid, mesh, cfg.gamma_eikonal, g) : 0.0;

        require_finite(ch.value, "chamfer", it);
        require_finite(open_v, "msdf-reg-open", it);
        require_finite(close_v, "msdf-reg-close", it);
        require_finite(sdf_reg_v, "sdf-reg", it);
        require_finite(eik_v, "eikonal", it);

        double total = cfg.gamma_chamfer * ch.value + w_open_t * open_v + w_close_t * close_v +
                       w_heal * heal_v + cfg.gamma_sdf_reg * sdf_reg_v +
                       cfg.gamma_eikonal * eik_v;

        bool eligible = !cfg.optimize_msdf || it > heal_from;
        double score = cfg.gamma_chamfer * ch.value + kShortLoopPrice * double(short_loops);
        if (eligible && score < best_score && !mesh.empty()) {
            best_score = score;
            rep.best_chamfer = ch.value;
            rep.best_iter = it;
            best = grid;
        }

        FitIterStats st;
        st.iter = it;
        st.total = total;
        st.chamfer = ch.value;
        st.open_reg = open_v;
        st.close_reg = close_v;
        st.sdf_reg = sdf_reg_v;
        st.eikonal = eik_v;
        st.lr_scale = std::pow(10.0, -cfg.lr_decay * double(it));
        st.vertices = uint32_t(mesh.vertex_count());
        st.boundary_vertices = uint32_t(mesh.vertex_count() - mesh.watertight_vertex_count);
        st.faces = uint32_t(mesh.faces.size());
        rep.history.push_back(st);

        if (cfg.log_every && (it % cfg.log_every == 0 || it == 1))
            std::printf("iter %5u  total %.6g  chamfer %.6g  V %u (%u boundary)  F %u\n", it,
                        total, ch.value, st.vertices, st.boundary_vertices, st.faces);

        b1t *= cfg.adam_beta1;
        b2t *= cfg.adam_beta2;
        double scale = st.lr_scale;
        if (cfg.optimize_sdf)
            adam_step(adam_sdf, grid.sdf, g.sdf, cfg.lr_sdf * scale, cfg.adam_beta1,
                      cfg.adam_beta2, cfg.adam_eps, b1t, b2t);
        if (cfg.optimize_msdf)
            adam_step(adam_msdf, grid.msdf, g.msdf, cfg.lr_msdf * scale, cfg.adam_beta1,
                      cfg.adam_beta2, cfg.adam_eps, b1t, b2t);
        if (cfg.optimize_offsets) {
            for (size_t i = 0; i < n; ++i) {
                for (int k = 0; k < 3; ++k) {
                    size_t j = 3 * i + k;
                    double gk = g.offsets[i][k];
                    adam_off.m[j] = cfg.adam_beta1 * adam_off.m[j] + (1.0 - cfg.adam_beta1) * gk;
                    adam_off.v[j] =
                        cfg.adam_beta2 * adam_off.v[j] + (1.0 - cfg.adam_beta2) * gk * gk;
                    double mhat = adam_off.m[j] / (1.0 - b1t);
                    double vhat = adam_off.v[j] / (1.0 - b2t);
                    double upd = cfg.lr_offsets * scale * mhat / (std::sqrt(vhat) + cfg.adam_eps);
                    double nv = grid.offsets[i][k] - upd;
                    grid.offsets[i][k] = std::clamp(nv, -1.0, 1.0);
                }
            }
        }

        for (size_t i = 0; i < n; ++i) {
            if (!std::isfinite(grid.sdf[i]) || !std::isfinite(grid.msdf[i]))
                require_finite(std::numeric_limits<double>::quiet_NaN(), "parameters", it);
        }
    }

    // the final iterate was stepped but never scored; give it a chance
    {
        ExtractedMesh mesh = extract_gshell(grid, cfg.threads);
        ChamferResult ch = chamfer_metric(mesh, target, cfg.chamfer_samples, rng);
        rep.final_chamfer = ch.value;
        uint32_t short_loops = 0;
        if (cfg.optimize_msdf) {
            GradSet scratch(n);
            loss_msdf_reg_close(grid, mesh, cfg.eps_close, 0.0, cfg.huber_delta, scratch,
                                cfg.heal_max_loop_edges, &short_loops);
        }
        double score = cfg.gamma_chamfer * ch.value + kShortLoopPrice * double(short_loops);
        if (score < best_score && !mesh.empty()) {
            rep.best_chamfer = ch.value;
            rep.best_iter = cfg.iterations + 1;
            best = grid;
        }
    }

    rep.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return best;
}

} // namespace gshell
