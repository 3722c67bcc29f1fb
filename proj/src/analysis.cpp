#include "gshell/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <unordered_map>

#include "gshell/grid.hpp"
#include "gshell/parallel.hpp"

namespace gshell {

namespace {

struct UnionFind {
    std::vector<uint32_t> parent;
    explicit UnionFind(size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0u); }
    uint32_t find(uint32_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(uint32_t a, uint32_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[a] = b;
    }
};

} // namespace

ManifoldReport analyze_mesh(const ExtractedMesh& mesh) {
    ManifoldReport rep;
    rep.faces = mesh.faces.size();
    rep.degenerate_faces = mesh.degenerate_faces.size();
    if (mesh.faces.empty()) return rep;

    size_t nv = mesh.vertex_count();
    std::vector<uint8_t> used(nv, 0);
    std::unordered_map<uint64_t, uint32_t> edge_count;
    edge_count.reserve(mesh.faces.size() * 2);
    for (const auto& f : mesh.faces) {
        for (int k = 0; k < 3; ++k) {
            used[f[k]] = 1;
            ++edge_count[edge_key(f[k], f[(k + 1) % 3])];
        }
    }
    for (size_t v = 0; v < nv; ++v) rep.vertices += used[v];
    rep.edges = edge_count.size();
    rep.euler_characteristic =
        int64_t(rep.vertices) - int64_t(rep.edges) + int64_t(rep.faces);

    std::vector<uint64_t> open;
    uint32_t max_incidence = 0;
    for (const auto& [key, cnt] : edge_count) {
        max_incidence = std::max(max_incidence, cnt);
        if (cnt == 1) {
            ++rep.open_edges;
            open.push_back(key);
        } else if (cnt > 2) {
            ++rep.nonmanifold_edges;
            rep.nonmanifold_edge_list.push_back({edge_key_a(key), edge_key_b(key)});
        }
    }
    rep.edge_face_histogram.assign(max_incidence + 1, 0);
    for (const auto& [key, cnt] : edge_count) ++rep.edge_face_histogram[cnt];
    std::sort(rep.nonmanifold_edge_list.begin(), rep.nonmanifold_edge_list.end());

    // boundary loops = connected components of the open-edge graph
    if (!open.empty()) {
        std::unordered_map<uint32_t, uint32_t> compact; // vertex id -> dense id
        for (uint64_t k : open) {
            compact.emplace(edge_key_a(k), uint32_t(compact.size()));
            compact.emplace(edge_key_b(k), uint32_t(compact.size()));
        }
        UnionFind uf(compact.size());
        for (uint64_t k : open) uf.unite(compact[edge_key_a(k)], compact[edge_key_b(k)]);
        std::unordered_map<uint32_t, uint64_t> loop_edges; // component root -> edge count
        for (uint64_t k : open) ++loop_edges[uf.find(compact[edge_key_a(k)])];
        rep.boundary_loops = loop_edges.size();
        for (const auto& [root, cnt] : loop_edges) rep.boundary_loop_lengths.push_back(cnt);
        std::sort(rep.boundary_loop_lengths.begin(), rep.boundary_loop_lengths.end(),
                  std::greater<>());
    }

    // umbrella test: the faces incident to a manifold vertex form a single
    // edge-connected fan
    std::vector<std::vector<uint32_t>> vertex_faces(nv);
    for (uint32_t f = 0; f < mesh.faces.size(); ++f)
        for (int k = 0; k < 3; ++k) vertex_faces[mesh.faces[f][k]].push_back(f);
    for (size_t v = 0; v < nv; ++v) {
        const auto& inc = vertex_faces[v];
        if (inc.size() <= 1) continue;
        // faces sharing an edge through v: group by the neighbour vertex
        std::unordered_map<uint32_t, std::vector<uint32_t>> by_neighbor;
        for (uint32_t fi : inc) {
            const auto& f = mesh.faces[fi];
            for (int k = 0; k < 3; ++k) {
                if (f[k] == v) continue;
                by_neighbor[f[k]].push_back(fi);
            }
        }
        std::unordered_map<uint32_t, uint32_t> local; // face id -> dense id
        for (uint32_t fi : inc) local.emplace(fi, uint32_t(local.size()));
        UnionFind uf(local.size());
        for (const auto& [nb, fs] : by_neighbor)
            for (size_t i = 1; i < fs.size(); ++i) uf.unite(local[fs[0]], local[fs[i]]);
        uint32_t comps = 0;
        std::vector<uint8_t> seen(local.size(), 0);
        for (const auto& [fi, id] : local) {
            uint32_t r = uf.find(id);
            if (!seen[r]) {
                seen[r] = 1;
                ++comps;
            }
        }
        if (comps > 1) {
            ++rep.nonmanifold_vertices;
            rep.nonmanifold_vertex_list.push_back(uint32_t(v));
        }
    }

    // connected components over face-used vertices
    {
        UnionFind uf(nv);
        for (const auto& f : mesh.faces) {
            uf.unite(f[0], f[1]);
            uf.unite(f[0], f[2]);
        }
        std::vector<uint8_t> seen(nv, 0);
        for (uint32_t v = 0; v < nv; ++v) {
            if (!used[v]) continue;
            uint32_t r = uf.find(v);
            if (!seen[r]) {
                seen[r] = 1;
                ++rep.connected_components;
            }
        }
    }
    return rep;
}

double signed_volume(const ExtractedMesh& mesh) {
    double vol = 0.0;
    for (const auto& f : mesh.faces)
        vol += triple(mesh.positions[f[0]], mesh.positions[f[1]], mesh.positions[f[2]]);
    return vol / 6.0;
}

double winding_number(const std::vector<Vec3>& positions,
                      const std::vector<std::array<uint32_t, 3>>& faces, const Vec3& q) {
    // sum of signed solid angles (the two-argument arctangent form is exact
    // and branch-free across the triangle's plane)
    double omega = 0.0;
    for (const auto& f : faces) {
        Vec3 a = positions[f[0]] - q;
        Vec3 b = positions[f[1]] - q;
        Vec3 c = positions[f[2]] - q;
        double la = norm(a), lb = norm(b), lc = norm(c);
        double num = triple(a, b, c);
        double den = la * lb * lc + dot(a, b) * lc + dot(b, c) * la + dot(c, a) * lb;
        omega += 2.0 * std::atan2(num, den);
    }
    return omega / (4.0 * 3.14159265358979323846);
}

std::vector<double> winding_numbers(const std::vector<Vec3>& positions,
                                    const std::vector<std::array<uint32_t, 3>>& faces,
                                    const std::vector<Vec3>& queries, int threads) {
    std::vector<double> out(queries.size(), 0.0);
    parallel_ranges(queries.size(), threads, [&](size_t lo, size_t hi, size_t) {
        for (size_t i = lo; i < hi; ++i) out[i] = winding_number(positions, faces, queries[i]);
    });
    return out;
}

} // namespace gshell
