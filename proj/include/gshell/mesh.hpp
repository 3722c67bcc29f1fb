#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "gshell/grid.hpp"
#include "gshell/vec3.hpp"

namespace gshell {

// Candidate-edge key: the unordered pair of grid edges carrying the two mesh
// vertices the edge connects. The pair determines the (face, apex) pair
// uniquely: apex = shared grid vertex, face = union of endpoints.
struct CandKey {
    EdgeKey e1 = 0, e2 = 0; // e1 < e2

    static CandKey make(EdgeKey a, EdgeKey b) {
        if (a > b) std::swap(a, b);
        return {a, b};
    }
    bool operator==(const CandKey& o) const { return e1 == o.e1 && e2 == o.e2; }
    bool operator<(const CandKey& o) const { return e1 != o.e1 ? e1 < o.e1 : e2 < o.e2; }
};

// One record per extracted vertex. Watertight (crossing) vertices carry
// (source_edge, alpha, projected_msdf); boundary vertices carry the two
// watertight vertex ids they interpolate between and beta. The unused fields
// of the other kind are zero.
struct VertexInfo {
    bool is_boundary = false;
    bool coeff_clamped = false;   // alpha/beta was clamped to [1e-6, 1-1e-6]
    EdgeKey source_edge = 0;      // watertight: undirected grid edge (a < b)
    double alpha = 0.0;           // position = (1-alpha) p_a + alpha p_b
    double projected_msdf = 0.0;  // nu' (watertight vertices)
    uint32_t src_a = 0, src_b = 0; // boundary: watertight vertex ids, src_a's edge key < src_b's
    double beta = 0.0;            // position = (1-beta) u_a + beta u_b
    uint32_t source_tet = 0;      // lowest tet index that emitted this vertex
};

struct ExtractedMesh {
    // Vertex order is canonical: watertight vertices ascending by grid-edge
    // key, then boundary vertices ascending by candidate key. Faces follow
    // tet index order. This makes outputs bit-identical at any thread count.
    std::vector<Vec3> positions;
    std::vector<VertexInfo> info;
    std::vector<std::array<uint32_t, 3>> faces;   // outward = toward positive sdf
    std::vector<std::array<uint32_t, 2>> boundary_edges; // cut segments, traversal order
    uint32_t watertight_vertex_count = 0;
    std::vector<uint32_t> degenerate_faces; // indices of zero-area faces, flagged not dropped

    size_t vertex_count() const { return positions.size(); }
    bool empty() const { return faces.empty(); }
};

inline double face_area(const ExtractedMesh& m, size_t f) {
    const auto& t = m.faces[f];
    return 0.5 * norm(cross(m.positions[t[1]] - m.positions[t[0]],
                            m.positions[t[2]] - m.positions[t[0]]));
}

inline Vec3 face_normal(const ExtractedMesh& m, size_t f) {
    const auto& t = m.faces[f];
    return cross(m.positions[t[1]] - m.positions[t[0]], m.positions[t[2]] - m.positions[t[0]]);
}

inline double total_area(const ExtractedMesh& m) {
    double a = 0;
    for (size_t f = 0; f < m.faces.size(); ++f) a += face_area(m, f);
    return a;
}

} // namespace gshell
