#include "gshell/vjp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gshell/errors.hpp"
#include "gshell/extract.hpp"
#include "gshell/rng.hpp"

namespace gshell {

namespace {

// quotient-rule partials of t = v_a / (v_a - v_b)
inline void coeff_partials(double v_a, double v_b, double& dt_da, double& dt_db) {
    double d = v_a - v_b;
    dt_da = -v_b / (d * d);
    dt_db = v_a / (d * d);
}

void check_provenance(const TetGrid& grid, const ExtractedMesh& mesh) {
    const size_t n = grid.vertex_count();
    for (size_t i = 0; i < mesh.info.size(); ++i) {
        const VertexInfo& vi = mesh.info[i];
        if (vi.is_boundary) {
            if (vi.src_a >= mesh.info.size() || vi.src_b >= mesh.info.size() ||
                mesh.info[vi.src_a].is_boundary || mesh.info[vi.src_b].is_boundary)
                throw InvalidInput("vjp: boundary vertex " + std::to_string(i) +
                                   " references invalid watertight vertices");
            continue;
        }
        uint32_t a = edge_key_a(vi.source_edge), b = edge_key_b(vi.source_edge);
        if (a >= n || b >= n ||
            sign_positive(grid.sdf[a]) == sign_positive(grid.sdf[b]))
            throw InvalidInput("vjp: vertex " + std::to_string(i) +
                               " does not originate from this grid (source edge " +
                               std::to_string(a) + "-" + std::to_string(b) + ")");
        if (!vi.coeff_clamped) {
            double alpha = grid.sdf[a] / (grid.sdf[a] - grid.sdf[b]);
            if (alpha != vi.alpha)
                throw InvalidInput("vjp: vertex " + std::to_string(i) +
                                   " alpha is stale; re-extract after mutating the grid");
        }
    }
}

// shared pullback of a position cotangent through one crossing vertex
inline void crossing_pullback(const TetGrid& grid, const VertexInfo& vi, const Vec3& c,
                              const VjpFlags& flags, GradSet& out) {
    uint32_t a = edge_key_a(vi.source_edge), b = edge_key_b(vi.source_edge);
    double alpha = vi.alpha;
    if (flags.to_offsets) {
        out.offsets[a] += c * (grid.deformation_scale * (1.0 - alpha));
        out.offsets[b] += c * (grid.deformation_scale * alpha);
    }
    if (flags.to_sdf && !vi.coeff_clamped) {
        double g_alpha = dot(c, grid.position(b) - grid.position(a));
        double da, db;
        coeff_partials(grid.sdf[a], grid.sdf[b], da, db);
        out.sdf[a] += g_alpha * da;
        out.sdf[b] += g_alpha * db;
    }
}

} // namespace

void nu_pullback_accumulate(const TetGrid& grid, const ExtractedMesh& mesh,
                            const std::vector<double>& nu_cotangents, VjpFlags flags,
                            GradSet& out) {
    for (size_t i = 0; i < mesh.info.size(); ++i) {
        const VertexInfo& vi = mesh.info[i];
        if (vi.is_boundary) continue;
        double g = nu_cotangents[i];
        if (g == 0.0) continue;
        uint32_t a = edge_key_a(vi.source_edge), b = edge_key_b(vi.source_edge);
        if (flags.to_msdf) {
            out.msdf[a] += g * (1.0 - vi.alpha);
            out.msdf[b] += g * vi.alpha;
        }
        if (flags.to_sdf && !vi.coeff_clamped) {
            double g_alpha = g * (grid.msdf[b] - grid.msdf[a]);
            double da, db;
            coeff_partials(grid.sdf[a], grid.sdf[b], da, db);
            out.sdf[a] += g_alpha * da;
            out.sdf[b] += g_alpha * db;
        }
    }
}

void vjp_accumulate(const TetGrid& grid, const ExtractedMesh& mesh,
                    const std::vector<Vec3>& cotangents, VjpFlags flags, GradSet& out) {
    if (cotangents.size() != mesh.vertex_count())
        throw InvalidInput("vjp: cotangent count does not match mesh vertex count");
    if (out.sdf.size() != grid.vertex_count()) out.resize(grid.vertex_count());
    check_provenance(grid, mesh);

    // beta-path cotangents on nu' are gathered first and pulled back in one
    // deterministic sweep
    std::vector<double> nu_cot(mesh.info.size(), 0.0);
    bool any_nu = false;

    for (size_t i = 0; i < mesh.info.size(); ++i) {
        const VertexInfo& vi = mesh.info[i];
        const Vec3& c = cotangents[i];
        if (c.x == 0.0 && c.y == 0.0 && c.z == 0.0) continue;
        if (!vi.is_boundary) {
            crossing_pullback(grid, vi, c, flags, out);
            continue;
        }
        const VertexInfo& va = mesh.info[vi.src_a];
        const VertexInfo& vb = mesh.info[vi.src_b];
        double beta = vi.beta;
        crossing_pullback(grid, va, c * (1.0 - beta), flags, out);
        crossing_pullback(grid, vb, c * beta, flags, out);
        if (!vi.coeff_clamped && (flags.to_msdf || flags.to_sdf) &&
            va.projected_msdf != vb.projected_msdf) {
            Vec3 u_a = mesh.positions[vi.src_a], u_b = mesh.positions[vi.src_b];
            double g_beta = dot(c, u_b - u_a);
            double da, db;
            coeff_partials(va.projected_msdf, vb.projected_msdf, da, db);
            nu_cot[vi.src_a] += g_beta * da;
            nu_cot[vi.src_b] += g_beta * db;
            any_nu = true;
        }
    }
    if (any_nu) nu_pullback_accumulate(grid, mesh, nu_cot, flags, out);
}

GradSet vjp(const TetGrid& grid, const ExtractedMesh& mesh, const std::vector<Vec3>& cotangents,
            VjpFlags flags) {
    GradSet out(grid.vertex_count());
    vjp_accumulate(grid, mesh, cotangents, flags, out);
    return out;
}

// ---------------------------------------------------------------------------
// finite-difference validation
// ---------------------------------------------------------------------------

namespace {

double cotangent_projection(const TetGrid& grid, const std::vector<Vec3>& cots, int threads,
                            bool& same_topology, size_t expect_vertices) {
    ExtractedMesh m = extract_gshell(grid, threads);
    if (m.vertex_count() != expect_vertices) {
        same_topology = false;
        return 0.0;
    }
    double s = 0.0;
    for (size_t i = 0; i < m.vertex_count(); ++i) s += dot(cots[i], m.positions[i]);
    return s;
}

} // namespace

GradCheckReport gradcheck_random(int resolution, int trials, uint64_t seed, double fd_step,
                                 double tolerance, int threads) {
    GradCheckReport rep;
    rep.tolerance = tolerance;
    Rng rng = Rng::stream(seed, "gradcheck");
    Box3 box{{-1, -1, -1}, {1, 1, 1}};

    for (int trial = 0; trial < trials; ++trial) {
        TetGrid grid = build_uniform_tet_grid(resolution, box);
        for (size_t i = 0; i < grid.vertex_count(); ++i) {
            // magnitudes in [0.05, 1.05]: no value sits within reach of the
            // probe step, so the sign pattern cannot flip
            grid.sdf[i] = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.05, 1.05);
            grid.msdf[i] = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.05, 1.05);
            grid.offsets[i] = {rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8),
                               rng.uniform(-0.8, 0.8)};
        }
        ExtractedMesh mesh = extract_gshell(grid, threads);
        if (mesh.vertex_count() == 0) continue;
        ++rep.trials;

        std::vector<Vec3> cots(mesh.vertex_count());
        for (auto& c : cots) c = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        GradSet g = vjp(grid, mesh, cots);

        // probe the strongest lane of each group plus one random lane
        auto probe = [&](std::vector<double>& params, const std::vector<double>& grad,
                         size_t idx) {
            double keep = params[idx];
            bool ok = true;
            params[idx] = keep + fd_step;
            double fp = cotangent_projection(grid, cots, threads, ok, mesh.vertex_count());
            params[idx] = keep - fd_step;
            double fm = cotangent_projection(grid, cots, threads, ok, mesh.vertex_count());
            params[idx] = keep;
            if (!ok) {
                ++rep.skipped;
                return;
            }
            ++rep.probes;
            double fd = (fp - fm) / (2.0 * fd_step);
            double rel = std::fabs(fd - grad[idx]) /
                         std::max({1e-6, std::fabs(fd), std::fabs(grad[idx])});
            rep.worst_rel = std::max(rep.worst_rel, rel);
            if (rel > tolerance) ++rep.failures;
        };
        auto probe_vec = [&](size_t idx, int axis) {
            double keep = grid.offsets[idx][axis];
            bool ok = true;
            grid.offsets[idx][axis] = keep + fd_step;
            double fp = cotangent_projection(grid, cots, threads, ok, mesh.vertex_count());
            grid.offsets[idx][axis] = keep - fd_step;
            double fm = cotangent_projection(grid, cots, threads, ok, mesh.vertex_count());
            grid.offsets[idx][axis] = keep;
            if (!ok) {
                ++rep.skipped;
                return;
            }
            ++rep.probes;
            double fd = (fp - fm) / (2.0 * fd_step);
            double an = g.offsets[idx][axis];
            double rel = std::fabs(fd - an) / std::max({1e-6, std::fabs(fd), std::fabs(an)});
            rep.worst_rel = std::max(rep.worst_rel, rel);
            if (rel > tolerance) ++rep.failures;
        };

        size_t n = grid.vertex_count();
        auto argmax = [](const std::vector<double>& v) {
            size_t best = 0;
            for (size_t i = 1; i < v.size(); ++i)
                if (std::fabs(v[i]) > std::fabs(v[best])) best = i;
            return best;
        };
        probe(grid.sdf, g.sdf, argmax(g.sdf));
        probe(grid.sdf, g.sdf, rng.below(n));
        probe(grid.msdf, g.msdf, argmax(g.msdf));
        probe(grid.msdf, g.msdf, rng.below(n));
        size_t oi = 0;
        int oax = 0;
        double best = -1.0;
        for (size_t i = 0; i < n; ++i)
            for (int a = 0; a < 3; ++a)
                if (std::fabs(g.offsets[i][a]) > best) {
                    best = std::fabs(g.offsets[i][a]);
                    oi = i;
                    oax = a;
                }
        probe_vec(oi, oax);
        probe_vec(rng.below(n), int(rng.below(3)));
    }
    return rep;
}

} // namespace gshell
