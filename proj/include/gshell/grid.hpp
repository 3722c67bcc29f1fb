#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gshell/vec3.hpp"

namespace gshell {

// Undirected grid-edge key: vertex indices packed with the smaller index in
// the high half so that integer order == lexicographic order on (min, max).
using EdgeKey = uint64_t;

inline EdgeKey edge_key(uint32_t a, uint32_t b) {
    if (a > b) std::swap(a, b);
    return (uint64_t(a) << 32) | uint64_t(b);
}
inline uint32_t edge_key_a(EdgeKey k) { return uint32_t(k >> 32); }
inline uint32_t edge_key_b(EdgeKey k) { return uint32_t(k & 0xffffffffu); }

// Deformable tetrahedral grid carrying all G-Shell attributes.
// Effective vertex position = canonical_positions[i] + deformation_scale * offsets[i];
// offsets are dimensionless and clipped to [-1,1] per axis by every mutating path.
struct TetGrid {
    int resolution = 0;                    // vertices per axis
    Box3 bbox;                             // canonical lattice bounds
    double deformation_scale = 0.0;        // world units per unit offset
    std::vector<Vec3> canonical_positions;
    std::vector<Vec3> offsets;
    std::vector<std::array<uint32_t, 4>> tets;
    std::vector<double> sdf;
    std::vector<double> msdf;

    size_t vertex_count() const { return canonical_positions.size(); }

    Vec3 position(uint32_t i) const {
        return canonical_positions[i] + offsets[i] * deformation_scale;
    }

    // lattice coordinates of vertex i (layout: ((ix*R)+iy)*R+iz)
    std::array<int, 3> lattice_coord(uint32_t i) const {
        int r = resolution;
        return {int(i) / (r * r), (int(i) / r) % r, int(i) % r};
    }
    uint32_t lattice_index(int ix, int iy, int iz) const {
        return uint32_t((ix * resolution + iy) * resolution + iz);
    }
};

// Oracle scalar fields used by `gen` and the tests.
struct AnalyticField {
    std::function<double(const Vec3&)> sdf_fn;
    std::function<double(const Vec3&)> msdf_fn;
};

// Uniform Kuhn subdivision: every cube cell is split into the 6 monotone-path
// tets sharing the cube's main diagonal, which makes the tiling conforming
// across cells. Throws InvalidInput for resolution < 2.
TetGrid build_uniform_tet_grid(int resolution, const Box3& bbox);

// Evaluates the field at the effective vertex positions. Non-finite output is
// a data error naming the vertex index.
void sample_fields(TetGrid& grid, const AnalyticField& field);

// Structural validation of the TetGrid invariants (index ranges, distinct tet
// vertices, offset bounds, attribute lengths). Throws InvalidInput.
void validate_grid(const TetGrid& grid);

// All unique undirected edges over the tets, ascending key order.
std::vector<EdgeKey> unique_edges(const TetGrid& grid);

// Signed volume of tet t from effective positions (positive for canonical order).
double tet_volume(const TetGrid& grid, size_t t);

// Constant gradient of the linear interpolant of per-vertex values over tet t.
// Falls back to canonical positions when the deformed tet is degenerate.
Vec3 tet_value_gradient(const TetGrid& grid, size_t t, const std::vector<double>& values);

// Gradients of the four barycentric basis functions of tet t, so that
// tet_value_gradient == sum_k values[tet[k]] * basis[k]. Same degenerate-tet
// fallback to canonical positions.
std::array<Vec3, 4> tet_basis_gradients(const TetGrid& grid, size_t t);

// sign(0) = +1 convention used for every sign test in the project
inline bool sign_positive(double v) { return v >= 0.0; }

// Built-in shapes for `gen` and the acceptance tests. All are centered at the
// origin and sized for a [-1,1]^3 box.
//   sphere        sdf = |x| - r, msdf = +1 (watertight)
//   hemisphere    sdf = |x| - r, msdf = z (open upper half)
//   open-cylinder side wall of a capped cylinder, msdf trims both caps
//   sheet         plane z = 0 trimmed to a square patch
AnalyticField make_shape_field(const std::string& name, double radius = 0.6);

// Uniform samples of the open surface each shape extracts to (the msdf >= 0
// part of the sdf zero set); reference targets for fitting and metrics.
std::vector<Vec3> sample_shape_surface(const std::string& name, double radius, uint32_t count,
                                       class Rng& rng);

} // namespace gshell
