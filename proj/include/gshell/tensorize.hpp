#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "gshell/extract.hpp"
#include "gshell/grid.hpp"
#include "gshell/mesh.hpp"

namespace gshell {

// Dense-tensor form of a G-Shell over the canonical lattice tiling.
//
// base  — 5 channels of resolution^3 scalars (channel-major, z fastest):
//         [sdf, offset_x, offset_y, offset_z, occupancy], occupancy being the
//         sign bit of sdf (informational; sdf is authoritative).
// alpha — 2 channels over a quarter-step lattice of side S = 4*resolution-3:
//         [value, mask]. mask = 1 exactly at structurally valid candidate
//         addresses; value there defaults to 1 and must be 0 wherever mask=0.
//
// A candidate edge is an unordered pair of grid edges sharing a grid vertex
// within a common tet face (the only mesh edges the clip stage can cut). Its
// address is lat(outer1) + lat(outer2) + 2*lat(apex) in quarter steps, an
// injective map (checked at runtime). The stored value is the kept fraction
// of the chord: 1 = kept whole, 0 = discarded whole, fractional = cut, with
// the cut parameter measured from the endpoint on the lex-smaller grid edge
// (t = value if that endpoint is kept, 1 - value otherwise).
//
// The msdf field itself is not round-tripped: decoding reproduces the
// geometry and connectivity, not the scalar field, so decoded grids carry
// msdf = 0 and decoded meshes carry projected_msdf = 0.
struct TensorGrid {
    int resolution = 0;
    int alpha_side = 0;
    Box3 bbox;
    double deformation_scale = 0.0;
    std::vector<double> base;  // 5 * resolution^3
    std::vector<double> alpha; // 2 * alpha_side^3

    size_t base_cells() const { return size_t(resolution) * resolution * resolution; }
    size_t alpha_cells() const { return size_t(alpha_side) * alpha_side * alpha_side; }

    double& base_at(int ch, size_t idx) { return base[size_t(ch) * base_cells() + idx]; }
    double base_at(int ch, size_t idx) const { return base[size_t(ch) * base_cells() + idx]; }
    double& alpha_at(int ch, size_t idx) { return alpha[size_t(ch) * alpha_cells() + idx]; }
    double alpha_at(int ch, size_t idx) const { return alpha[size_t(ch) * alpha_cells() + idx]; }
};

// Quarter-step address of a candidate edge; components in [0, 4(R-1)].
std::array<int, 3> candidate_coord(const TetGrid& grid, const CandKey& key);

// All distinct candidate edges of the lattice tiling, ascending key order.
std::vector<CandKey> enumerate_candidates(const TetGrid& grid);

// Verifies the address map is injective for this resolution (cached); throws
// InvalidInput naming both colliding candidates if it is not.
void validate_placement(const TetGrid& grid);

// Grid + current clip state -> tensors. Requires the canonical lattice tiling.
TensorGrid tensorize(const TetGrid& grid, int threads = 1);

// Base channels -> TetGrid (msdf = 0).
TetGrid detensorize_grid(const TensorGrid& t);

// Full decode: rebuilds the clipped mesh from the base channels and the alpha
// tensor. Kept/discarded statuses are re-derived by propagating the chord
// codes (whole-chord codes pin both endpoints, fractional codes force the
// endpoints to differ); inconsistent tensors raise FormatError.
ExtractedMesh extract_from_tensor(const TensorGrid& t, int threads = 1);

} // namespace gshell
