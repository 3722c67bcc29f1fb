#include "gshell/losses.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "gshell/errors.hpp"

namespace gshell {

double huber(double x, double delta) {
    double a = std::fabs(x);
    return a <= delta ? 0.5 * x * x : delta * (a - 0.5 * delta);
}

double huber_grad(double x, double delta) {
    if (std::fabs(x) <= delta) return x;
    return x > 0 ? delta : -delta;
}

static double softplus(double x) {
    return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

static double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

double loss_msdf_reg_open(const TetGrid& grid, const ExtractedMesh& mesh, double weight,
                          double huber_delta, GradSet& out) {
    if (out.sdf.size() != grid.vertex_count()) out.resize(grid.vertex_count());
    double value = 0.0;
    std::vector<double> nu_cot(mesh.info.size(), 0.0);
    bool any = false;
    for (uint32_t v = 0; v < mesh.watertight_vertex_count; ++v) {
        double nu = mesh.info[v].projected_msdf;
        if (nu < 0.0) continue;
        value += huber(nu, huber_delta);
        double g = huber_grad(nu, huber_delta);
        if (g != 0.0) {
            nu_cot[v] = weight * g;
            any = true;
        }
    }
    if (any)
        nu_pullback_accumulate(grid, mesh, nu_cot, {/*to_sdf=*/false, /*to_msdf=*/true,
                                                    /*to_offsets=*/false},
                               out);
    return value;
}

double loss_msdf_reg_close(const TetGrid& grid, const ExtractedMesh& mesh, double eps,
                           double weight, double huber_delta, GradSet& out,
                           uint32_t max_loop_edges, uint32_t* short_loops) {
    if (out.sdf.size() != grid.vertex_count()) out.resize(grid.vertex_count());
    if (short_loops) *short_loops = 0;

    // Rim membership by cut-segment connectivity (the same vertex-connected
    // notion the manifold diagnostics use for loop counts).
    std::vector<uint32_t> root;
    std::vector<char> in_short;
    if (max_loop_edges > 0) {
        root.resize(mesh.info.size());
        for (uint32_t i = 0; i < root.size(); ++i) root[i] = i;
        auto find = [&](uint32_t x) {
            while (root[x] != x) x = root[x] = root[root[x]];
            return x;
        };
        for (const auto& e : mesh.boundary_edges) {
            uint32_t a = find(e[0]), b = find(e[1]);
            if (a != b) root[std::max(a, b)] = std::min(a, b);
        }
        std::vector<uint32_t> edge_count(mesh.info.size(), 0);
        for (const auto& e : mesh.boundary_edges) ++edge_count[find(e[0])];
        in_short.assign(mesh.info.size(), 0);
        for (uint32_t i = 0; i < root.size(); ++i) {
            uint32_t r = find(i);
            in_short[i] = edge_count[r] <= max_loop_edges;
        }
        if (short_loops) {
            for (uint32_t i = 0; i < root.size(); ++i)
                if (find(i) == i && edge_count[i] > 0 && edge_count[i] <= max_loop_edges)
                    ++*short_loops;
        }
    }

    double value = 0.0;
    std::vector<double> nu_cot(mesh.info.size(), 0.0);
    bool any = false;
    for (size_t v = mesh.watertight_vertex_count; v < mesh.info.size(); ++v) {
        if (max_loop_edges > 0 && !in_short[v]) continue;
        const VertexInfo& vi = mesh.info[v];
        // interpolated msdf at the frozen boundary location; exactly 0 unless
        // the coefficient clamp hit
        double nu_here = (1.0 - vi.beta) * mesh.info[vi.src_a].projected_msdf +
                         vi.beta * mesh.info[vi.src_b].projected_msdf;
        value += huber(nu_here - eps, huber_delta);
        double g = huber_grad(nu_here - eps, huber_delta);
        if (g != 0.0) {
            nu_cot[vi.src_a] += weight * g * (1.0 - vi.beta);
            nu_cot[vi.src_b] += weight * g * vi.beta;
            any = true;
        }
    }
    if (any)
        nu_pullback_accumulate(grid, mesh, nu_cot, {/*to_sdf=*/false, /*to_msdf=*/true,
                                                    /*to_offsets=*/false},
                               out);
    return value;
}

double loss_sdf_reg(const TetGrid& grid, double weight, GradSet& out) {
    if (out.sdf.size() != grid.vertex_count()) out.resize(grid.vertex_count());
    double value = 0.0;
    for (EdgeKey key : unique_edges(grid)) {
        uint32_t i = edge_key_a(key), j = edge_key_b(key);
        double si = grid.sdf[i], sj = grid.sdf[j];
        double ti = sign_positive(sj) ? 1.0 : 0.0; // target for sigma(s_i)
        double tj = sign_positive(si) ? 1.0 : 0.0;
        value += softplus(si) - ti * si;
        value += softplus(sj) - tj * sj;
        out.sdf[i] += weight * (sigmoid(si) - ti);
        out.sdf[j] += weight * (sigmoid(sj) - tj);
    }
    return value;
}

double loss_eikonal(const TetGrid& grid, const ExtractedMesh& mesh, double weight,
                    GradSet& out, uint32_t* degenerate_skipped) {
    if (out.sdf.size() != grid.vertex_count()) out.resize(grid.vertex_count());
    if (degenerate_skipped) *degenerate_skipped = 0;
    if (mesh.vertex_count() == 0) return 0.0;

    struct TetCache {
        Vec3 g;
        std::array<Vec3, 4> basis;
        bool ok;
    };
    std::unordered_map<uint32_t, TetCache> cache;
    cache.reserve(mesh.info.size());
    auto lookup = [&](uint32_t t) -> const TetCache& {
        auto it = cache.find(t);
        if (it == cache.end()) {
            TetCache tc;
            const auto& tet = grid.tets[t];
            const Vec3& q0 = grid.canonical_positions[tet[0]];
            double canon = std::fabs(triple(grid.canonical_positions[tet[1]] - q0,
                                            grid.canonical_positions[tet[2]] - q0,
                                            grid.canonical_positions[tet[3]] - q0));
            tc.ok = std::fabs(6.0 * tet_volume(grid, t)) >= 1e-3 * canon;
            if (tc.ok) {
                tc.g = tet_value_gradient(grid, t, grid.sdf);
                tc.basis = tet_basis_gradients(grid, t);
                // a gradient this far from unit length means the tet is
                // squashed, not that the field is bad; treat as degenerate
                if (norm(tc.g) > 10.0) tc.ok = false;
            }
            it = cache.emplace(t, tc).first;
        }
        return it->second;
    };

    size_t counted = 0;
    for (const VertexInfo& vi : mesh.info)
        if (lookup(vi.source_tet).ok)
            counted++;
        else if (degenerate_skipped)
            ++*degenerate_skipped;
    if (counted == 0) return 0.0;

    double value = 0.0;
    double inv_n = 1.0 / double(counted);
    for (const VertexInfo& vi : mesh.info) {
        const TetCache& tc = lookup(vi.source_tet);
        if (!tc.ok) continue;
        double mag = norm(tc.g);
        double r = mag - 1.0;
        value += r * r * inv_n;
        if (mag < 1e-12) continue; // gradient direction undefined
        double scale = weight * 2.0 * r * inv_n / mag;
        const auto& tet = grid.tets[vi.source_tet];
        for (int k = 0; k < 4; ++k) out.sdf[tet[k]] += scale * dot(tc.g, tc.basis[k]);
    }
    return value;
}

std::vector<Vec3> sample_surface(const ExtractedMesh& mesh, uint32_t samples, Rng& rng) {
    std::vector<Vec3> pts;
    std::vector<double> cum(mesh.faces.size(), 0.0);
    double total = 0.0;
    for (size_t f = 0; f < mesh.faces.size(); ++f) {
        total += face_area(mesh, f);
        cum[f] = total;
    }
    if (total <= 0.0) return pts;
    pts.reserve(samples);
    for (uint32_t s = 0; s < samples; ++s) {
        double r = rng.uniform() * total;
        size_t f = size_t(std::upper_bound(cum.begin(), cum.end(), r) - cum.begin());
        if (f >= cum.size()) f = cum.size() - 1;
        double u = rng.uniform(), v = rng.uniform();
        if (u + v > 1.0) {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        const auto& t = mesh.faces[f];
        pts.push_back(mesh.positions[t[0]] * (1.0 - u - v) + mesh.positions[t[1]] * u +
                      mesh.positions[t[2]] * v);
    }
    return pts;
}

static Box3 bounds_of(const std::vector<Vec3>& pts) {
    Box3 b;
    for (const Vec3& p : pts) b.expand(p);
    return b;
}

ChamferResult loss_chamfer(const TetGrid& grid, const ExtractedMesh& mesh,
                           const std::vector<Vec3>& target, const PointKd& target_kd,
                           uint32_t samples, Rng& rng, double weight, VjpFlags flags,
                           GradSet& out) {
    if (target.empty()) throw InvalidInput("chamfer: empty target point set");
    if (out.sdf.size() != grid.vertex_count()) out.resize(grid.vertex_count());

    ChamferResult res;
    double total = total_area(mesh);
    if (mesh.empty() || total <= 0.0) {
        // degenerate iterate: finite penalty, no gradient
        double sentinel = 10.0 * norm(bounds_of(target).extent());
        res.forward = res.backward = 0.5 * sentinel;
        res.value = sentinel;
        return res;
    }

    TriBvh bvh(mesh.positions, mesh.faces);
    std::vector<Vec3> cot(mesh.vertex_count(), Vec3{});

    double wf = weight / double(target.size());
    for (const Vec3& t : target) {
        TriBvh::Hit hit = bvh.closest(t);
        double d = std::sqrt(hit.dist2);
        res.forward += d;
        if (d < 1e-15) continue;
        Vec3 dir = (hit.point - t) / d;
        const auto& face = mesh.faces[hit.face];
        for (int k = 0; k < 3; ++k) cot[face[k]] += dir * (wf * hit.bary[k]);
    }
    res.forward /= double(target.size());

    // area-weighted face table reused across samples
    std::vector<double> cum(mesh.faces.size(), 0.0);
    double acc = 0.0;
    for (size_t f = 0; f < mesh.faces.size(); ++f) {
        acc += face_area(mesh, f);
        cum[f] = acc;
    }
    double wb = samples ? weight / double(samples) : 0.0;
    for (uint32_t s = 0; s < samples; ++s) {
        double r = rng.uniform() * acc;
        size_t f = size_t(std::upper_bound(cum.begin(), cum.end(), r) - cum.begin());
        if (f >= cum.size()) f = cum.size() - 1;
        double u = rng.uniform(), v = rng.uniform();
        if (u + v > 1.0) {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        const auto& t = mesh.faces[f];
        double bw[3] = {1.0 - u - v, u, v};
        Vec3 p = mesh.positions[t[0]] * bw[0] + mesh.positions[t[1]] * bw[1] +
                 mesh.positions[t[2]] * bw[2];
        auto [ni, d2] = target_kd.nearest(p);
        double d = std::sqrt(d2);
        res.backward += d;
        if (d < 1e-15) continue;
        Vec3 dir = (p - target_kd.points()[ni]) / d;
        for (int k = 0; k < 3; ++k) cot[t[k]] += dir * (wb * bw[k]);
    }
    if (samples) res.backward /= double(samples);
    res.value = res.forward + res.backward;

    vjp_accumulate(grid, mesh, cot, flags, out);
    return res;
}

double chamfer_forward(const ExtractedMesh& mesh, const std::vector<Vec3>& target) {
    if (target.empty()) throw InvalidInput("chamfer: empty target point set");
    if (mesh.empty()) return 10.0 * norm(bounds_of(target).extent());
    TriBvh bvh(mesh.positions, mesh.faces);
    double sum = 0.0;
    for (const Vec3& t : target) sum += std::sqrt(bvh.closest(t).dist2);
    return sum / double(target.size());
}

ChamferResult chamfer_metric(const ExtractedMesh& mesh, const std::vector<Vec3>& target,
                             uint32_t samples, Rng& rng) {
    if (target.empty()) throw InvalidInput("chamfer: empty target point set");
    ChamferResult res;
    if (mesh.empty() || total_area(mesh) <= 0.0) {
        double sentinel = 10.0 * norm(bounds_of(target).extent());
        res.forward = res.backward = 0.5 * sentinel;
        res.value = sentinel;
        return res;
    }
    res.forward = chamfer_forward(mesh, target);
    PointKd kd(target);
    std::vector<Vec3> pts = sample_surface(mesh, samples, rng);
    for (const Vec3& p : pts) res.backward += std::sqrt(kd.nearest(p).second);
    if (!pts.empty()) res.backward /= double(pts.size());
    res.value = res.forward + res.backward;
    return res;
}

} // namespace gshell
