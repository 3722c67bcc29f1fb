#include "gshell/grid.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "gshell/errors.hpp"
#include "gshell/rng.hpp"

namespace gshell {

TetGrid build_uniform_tet_grid(int resolution, const Box3& bbox) {
    if (resolution < 2)
        throw InvalidInput("build_uniform_tet_grid: resolution must be >= 2, got " +
                           std::to_string(resolution));
    Vec3 ext = bbox.extent();
    if (!(ext.x > 0 && ext.y > 0 && ext.z > 0))
        throw InvalidInput("build_uniform_tet_grid: bbox must have positive extent");

    TetGrid g;
    g.resolution = resolution;
    g.bbox = bbox;
    const int R = resolution;
    const double step[3] = {ext.x / (R - 1), ext.y / (R - 1), ext.z / (R - 1)};
    g.deformation_scale = 0.5 * std::min({step[0], step[1], step[2]});

    g.canonical_positions.reserve(size_t(R) * R * R);
    for (int ix = 0; ix < R; ++ix)
        for (int iy = 0; iy < R; ++iy)
            for (int iz = 0; iz < R; ++iz)
                g.canonical_positions.push_back(
                    {bbox.lo.x + step[0] * ix, bbox.lo.y + step[1] * iy, bbox.lo.z + step[2] * iz});

    // Monotone-path tets: walk from cube corner (0,0,0) to (1,1,1) one axis at
    // a time; the 6 axis orders give 6 tets sharing the main diagonal.
    static constexpr int kAxisOrders[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                              {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    g.tets.reserve(size_t(R - 1) * (R - 1) * (R - 1) * 6);
    for (int cx = 0; cx + 1 < R; ++cx)
        for (int cy = 0; cy + 1 < R; ++cy)
            for (int cz = 0; cz + 1 < R; ++cz)
                for (const auto& order : kAxisOrders) {
                    int c[3] = {cx, cy, cz};
                    std::array<uint32_t, 4> tet;
                    tet[0] = g.lattice_index(c[0], c[1], c[2]);
                    for (int k = 0; k < 3; ++k) {
                        c[order[k]] += 1;
                        tet[k + 1] = g.lattice_index(c[0], c[1], c[2]);
                    }
                    // canonical positive orientation
                    const Vec3& p0 = g.canonical_positions[tet[0]];
                    double det = triple(g.canonical_positions[tet[1]] - p0,
                                        g.canonical_positions[tet[2]] - p0,
                                        g.canonical_positions[tet[3]] - p0);
                    if (det < 0) std::swap(tet[2], tet[3]);
                    g.tets.push_back(tet);
                }

    g.offsets.assign(g.vertex_count(), Vec3{});
    g.sdf.assign(g.vertex_count(), 0.0);
    g.msdf.assign(g.vertex_count(), 0.0);
    return g;
}

void sample_fields(TetGrid& grid, const AnalyticField& field) {
    for (uint32_t i = 0; i < grid.vertex_count(); ++i) {
        Vec3 p = grid.position(i);
        double s = field.sdf_fn(p);
        double v = field.msdf_fn(p);
        if (!std::isfinite(s) || !std::isfinite(v))
            throw InvalidInput("sample_fields: non-finite field value at vertex " +
                               std::to_string(i));
        grid.sdf[i] = s;
        grid.msdf[i] = v;
    }
}

void validate_grid(const TetGrid& grid) {
    const size_t n = grid.vertex_count();
    if (grid.offsets.size() != n || grid.sdf.size() != n || grid.msdf.size() != n)
        throw InvalidInput("grid: attribute arrays must match vertex count");
    if (!(grid.deformation_scale > 0))
        throw InvalidInput("grid: deformation_scale must be positive");
    for (size_t t = 0; t < grid.tets.size(); ++t) {
        const auto& tet = grid.tets[t];
        for (int k = 0; k < 4; ++k) {
            if (tet[k] >= n)
                throw InvalidInput("grid: tet " + std::to_string(t) + " index out of range");
            for (int j = k + 1; j < 4; ++j)
                if (tet[k] == tet[j])
                    throw InvalidInput("grid: tet " + std::to_string(t) +
                                       " has repeated vertex indices");
        }
    }
    for (size_t i = 0; i < n; ++i) {
        if (!std::isfinite(grid.sdf[i]) || !std::isfinite(grid.msdf[i]))
            throw InvalidInput("grid: non-finite field value at vertex " + std::to_string(i));
        for (int a = 0; a < 3; ++a) {
            if (!std::isfinite(grid.canonical_positions[i][a]))
                throw InvalidInput("grid: non-finite position at vertex " + std::to_string(i));
            if (!(std::fabs(grid.offsets[i][a]) <= 1.0))
                throw InvalidInput("grid: offset out of [-1,1] at vertex " + std::to_string(i));
        }
    }
}

std::vector<EdgeKey> unique_edges(const TetGrid& grid) {
    std::vector<EdgeKey> edges;
    edges.reserve(grid.tets.size() * 6);
    for (const auto& tet : grid.tets)
        for (int a = 0; a < 4; ++a)
            for (int b = a + 1; b < 4; ++b)
                edges.push_back(edge_key(tet[a], tet[b]));
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

double tet_volume(const TetGrid& grid, size_t t) {
    const auto& tet = grid.tets[t];
    Vec3 p0 = grid.position(tet[0]);
    return triple(grid.position(tet[1]) - p0, grid.position(tet[2]) - p0,
                  grid.position(tet[3]) - p0) / 6.0;
}

// Solves the 3x3 system for the constant gradient g with g . (p_k - p_0) = v_k - v_0.
static bool linear_gradient(const Vec3& e1, const Vec3& e2, const Vec3& e3, double d1, double d2,
                            double d3, Vec3& out) {
    double det = triple(e1, e2, e3);
    if (std::fabs(det) < 1e-300) return false;
    // Cramer's rule via the adjugate rows (cross products of column pairs)
    Vec3 r1 = cross(e2, e3), r2 = cross(e3, e1), r3 = cross(e1, e2);
    out = (r1 * d1 + r2 * d2 + r3 * d3) / det;
    return true;
}

Vec3 tet_value_gradient(const TetGrid& grid, size_t t, const std::vector<double>& values) {
    const auto& tet = grid.tets[t];
    Vec3 p0 = grid.position(tet[0]);
    double v0 = values[tet[0]];
    Vec3 g;
    if (linear_gradient(grid.position(tet[1]) - p0, grid.position(tet[2]) - p0,
                        grid.position(tet[3]) - p0, values[tet[1]] - v0, values[tet[2]] - v0,
                        values[tet[3]] - v0, g))
        return g;
    // deformed tet collapsed: fall back to the canonical shape, which never degenerates
    const Vec3& q0 = grid.canonical_positions[tet[0]];
    linear_gradient(grid.canonical_positions[tet[1]] - q0, grid.canonical_positions[tet[2]] - q0,
                    grid.canonical_positions[tet[3]] - q0, values[tet[1]] - v0,
                    values[tet[2]] - v0, values[tet[3]] - v0, g);
    return g;
}

static bool basis_gradients(const Vec3& e1, const Vec3& e2, const Vec3& e3,
                            std::array<Vec3, 4>& out) {
    double det = triple(e1, e2, e3);
    if (std::fabs(det) < 1e-300) return false;
    out[1] = cross(e2, e3) / det;
    out[2] = cross(e3, e1) / det;
    out[3] = cross(e1, e2) / det;
    out[0] = (out[1] + out[2] + out[3]) * -1.0;
    return true;
}

std::array<Vec3, 4> tet_basis_gradients(const TetGrid& grid, size_t t) {
    const auto& tet = grid.tets[t];
    std::array<Vec3, 4> g{};
    Vec3 p0 = grid.position(tet[0]);
    if (basis_gradients(grid.position(tet[1]) - p0, grid.position(tet[2]) - p0,
                        grid.position(tet[3]) - p0, g))
        return g;
    const Vec3& q0 = grid.canonical_positions[tet[0]];
    basis_gradients(grid.canonical_positions[tet[1]] - q0,
                    grid.canonical_positions[tet[2]] - q0,
                    grid.canonical_positions[tet[3]] - q0, g);
    return g;
}

AnalyticField make_shape_field(const std::string& name, double radius) {
    AnalyticField f;
    if (name == "sphere") {
        f.sdf_fn = [radius](const Vec3& p) { return norm(p) - radius; };
        f.msdf_fn = [](const Vec3&) { return 1.0; };
    } else if (name == "hemisphere") {
        f.sdf_fn = [radius](const Vec3& p) { return norm(p) - radius; };
        f.msdf_fn = [](const Vec3& p) { return p.z; };
    } else if (name == "open-cylinder") {
        // capped cylinder (exact SDF), caps trimmed away by the msdf
        const double rc = radius, hh = radius;
        f.sdf_fn = [rc, hh](const Vec3& p) {
            double dxy = std::hypot(p.x, p.y) - rc;
            double dz = std::fabs(p.z) - hh;
            double outside = std::hypot(std::max(dxy, 0.0), std::max(dz, 0.0));
            return std::min(std::max(dxy, dz), 0.0) + outside;
        };
        f.msdf_fn = [hh](const Vec3& p) { return 0.8 * hh - std::fabs(p.z); };
    } else if (name == "sheet") {
        // plane z = 0 trimmed to the square |x|,|y| <= 0.75 * radius
        const double half = 0.75 * radius;
        f.sdf_fn = [](const Vec3& p) { return p.z; };
        f.msdf_fn = [half](const Vec3& p) {
            return half - std::max(std::fabs(p.x), std::fabs(p.y));
        };
    } else {
        throw InvalidInput("unknown shape '" + name +
                           "' (expected sphere|hemisphere|open-cylinder|sheet)");
    }
    return f;
}

std::vector<Vec3> sample_shape_surface(const std::string& name, double radius, uint32_t count,
                                       Rng& rng) {
    std::vector<Vec3> pts;
    pts.reserve(count);
    if (name == "sphere") {
        for (uint32_t i = 0; i < count; ++i) pts.push_back(rng.unit_vector() * radius);
    } else if (name == "hemisphere") {
        for (uint32_t i = 0; i < count; ++i) {
            Vec3 u = rng.unit_vector();
            u.z = std::fabs(u.z); // folding preserves uniformity on the cap
            pts.push_back(u * radius);
        }
    } else if (name == "open-cylinder") {
        const double rc = radius, zmax = 0.8 * radius;
        for (uint32_t i = 0; i < count; ++i) {
            double th = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
            pts.push_back({rc * std::cos(th), rc * std::sin(th), rng.uniform(-zmax, zmax)});
        }
    } else if (name == "sheet") {
        const double half = 0.75 * radius;
        for (uint32_t i = 0; i < count; ++i)
            pts.push_back({rng.uniform(-half, half), rng.uniform(-half, half), 0.0});
    } else {
        throw InvalidInput("unknown shape '" + name +
                           "' (expected sphere|hemisphere|open-cylinder|sheet)");
    }
    return pts;
}

} // namespace gshell
