#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "gshell/mesh.hpp"

namespace gshell {

struct ManifoldReport {
    uint64_t vertices = 0; // vertices referenced by at least one face
    uint64_t faces = 0;
    uint64_t edges = 0;
    uint64_t open_edges = 0;        // exactly one incident face
    uint64_t nonmanifold_edges = 0; // more than two incident faces
    uint64_t nonmanifold_vertices = 0;
    uint64_t boundary_loops = 0; // components of the open-edge graph
    uint64_t connected_components = 0;
    int64_t euler_characteristic = 0; // V - E + F over face-used vertices
    uint64_t degenerate_faces = 0;

    // detail views (deterministically ordered)
    std::vector<uint64_t> edge_face_histogram;   // [k] = edges with k incident faces
    std::vector<uint64_t> boundary_loop_lengths; // open edges per loop, descending
    std::vector<std::array<uint32_t, 2>> nonmanifold_edge_list; // ascending (a, b)
    std::vector<uint32_t> nonmanifold_vertex_list;              // ascending

    bool closed() const { return open_edges == 0; }
    bool manifold() const { return nonmanifold_edges == 0 && nonmanifold_vertices == 0; }
    bool watertight() const { return closed() && manifold(); }
};

ManifoldReport analyze_mesh(const ExtractedMesh& mesh);

// Divergence-theorem volume; meaningful for closed surfaces oriented outward.
double signed_volume(const ExtractedMesh& mesh);

// Generalized winding number of the triangle soup at q: the summed signed
// solid angles over 4*pi. Integer-valued away from a watertight surface,
// fractional near open boundaries.
double winding_number(const std::vector<Vec3>& positions,
                      const std::vector<std::array<uint32_t, 3>>& faces, const Vec3& q);

std::vector<double> winding_numbers(const std::vector<Vec3>& positions,
                                    const std::vector<std::array<uint32_t, 3>>& faces,
                                    const std::vector<Vec3>& queries, int threads = 1);

} // namespace gshell
