#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <vector>

#include "gshell/grid.hpp"
#include "gshell/mesh.hpp"

namespace gshell {

// ---------------------------------------------------------------------------
// Public operations
// ---------------------------------------------------------------------------

// Marching tetrahedra over the sdf values (sign(0) = +1). Faces oriented
// toward the positive-sdf side; 2-2 sign cases emit a planar quad split along
// the diagonal with the lexicographically smaller edge-key pair.
ExtractedMesh extract_watertight(const TetGrid& grid, int threads = 1);

// Fills projected_msdf = (1-alpha) nu_a + alpha nu_b on every watertight
// vertex of a mesh extracted from this grid. Throws InvalidInput if a vertex
// has no valid source edge in the grid.
ExtractedMesh project_msdf(const TetGrid& grid, ExtractedMesh mesh);

// Joint extraction: marching tetrahedra, msdf projection, then per-cell
// clipping of each (planar, convex) cell polygon against nu' >= 0. Cut
// segments become boundary edges; cells whose polygon is kept whole take the
// exact watertight code path, so msdf = +1 grids reproduce extract_watertight
// verbatim.
ExtractedMesh extract_gshell(const TetGrid& grid, int threads = 1);

// Independent half-space clip of a single triangle against a linearly
// interpolated field nu >= 0; cross-validation oracle for the table path.
struct ClipResult {
    std::vector<std::array<Vec3, 3>> triangles;
    std::vector<std::array<Vec3, 2>> segments; // nu = 0 cut segments
};
ClipResult clip_oracle(const std::array<Vec3, 3>& corners, const std::array<double, 3>& nu);

// ---------------------------------------------------------------------------
// Shared internals (also used by the tensorize module and the tests)
// ---------------------------------------------------------------------------

// Interpolation coefficient of the zero crossing on a value pair (v_a, v_b)
// of strictly opposite sign; clamped to [1e-6, 1-1e-6] so crossing vertices
// never coincide with cell corners. `clamped` reports whether the clamp hit
// (derivatives through a clamped coefficient are zero).
double crossing_coeff(double v_a, double v_b, bool& clamped);

struct CellPolygon {
    uint32_t tet = 0;
    uint8_t n = 0;                   // 3 or 4
    std::array<uint32_t, 4> v{};     // crossing-vertex ids, cyclic, oriented
};

// Result of the marching-tetrahedra pass shared by all extraction modes:
// deduplicated crossing vertices (ascending edge key) plus per-cell polygons.
struct MtData {
    std::vector<EdgeKey> edges;       // sorted; vertex id = position in this list
    std::vector<double> alpha;
    std::vector<uint8_t> alpha_clamped;
    std::vector<Vec3> position;
    std::vector<double> nu;           // projected msdf, filled by gshell/encode paths
    std::vector<uint32_t> source_tet; // lowest emitting tet
    std::vector<CellPolygon> polys;
};

MtData marching_tets(const TetGrid& grid, int threads = 1);

// Candidate-edge cut: parameter t of the nu'=0 point measured from the
// lex-first endpoint (the one on the smaller grid-edge key).
struct CutInfo {
    double t = 0.0;
    bool clamped = false;
};
using CutMap = std::map<CandKey, CutInfo>;

// Fills mt.nu (projected msdf), the per-vertex kept statuses and the cut map
// for every strictly sign-mixed candidate edge. Shared by extract_gshell and
// the tensor encoder.
void gshell_clip_data(const TetGrid& grid, MtData& mt, std::vector<uint8_t>& kept,
                      CutMap& cuts, int threads = 1);

// Clipping pass shared by extract_gshell and the decoded-alpha extraction:
// `kept` holds the per-crossing-vertex nu' >= 0 status; `cuts` maps every
// strictly sign-mixed candidate edge to its cut parameter. Cells whose
// polygon survives untouched are emitted exactly like extract_watertight.
ExtractedMesh assemble_clipped(const TetGrid& grid, const MtData& mt,
                               const std::vector<uint8_t>& kept, const CutMap& cuts,
                               int threads = 1);

} // namespace gshell
