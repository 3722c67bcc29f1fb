#include "gshell/tensorize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <queue>

#include "gshell/errors.hpp"
#include "gshell/parallel.hpp"

namespace gshell {

namespace {

constexpr double kCoeffClamp = 1e-6; // same floor the clip stage uses

uint32_t shared_vertex(const CandKey& key) {
    uint32_t a1 = edge_key_a(key.e1), b1 = edge_key_b(key.e1);
    uint32_t a2 = edge_key_a(key.e2), b2 = edge_key_b(key.e2);
    if (a1 == a2 || a1 == b2) return a1;
    if (b1 == a2 || b1 == b2) return b1;
    throw InvalidInput("candidate edge: grid edges share no vertex");
}

int32_t find_vertex(const std::vector<EdgeKey>& edges, EdgeKey key) {
    auto it = std::lower_bound(edges.begin(), edges.end(), key);
    if (it == edges.end() || *it != key) return -1;
    return int32_t(it - edges.begin());
}

void require_lattice_tiling(const TetGrid& grid) {
    TetGrid ref = build_uniform_tet_grid(grid.resolution, grid.bbox);
    if (grid.tets != ref.tets)
        throw InvalidInput("tensorize: grid tets are not the canonical lattice tiling");
}

std::string describe_candidate(const TetGrid& grid, const CandKey& key) {
    (void)grid;
    char buf[96];
    std::snprintf(buf, sizeof(buf), "{(%u,%u),(%u,%u)}", edge_key_a(key.e1), edge_key_b(key.e1),
                  edge_key_a(key.e2), edge_key_b(key.e2));
    return buf;
}

} // namespace

std::array<int, 3> candidate_coord(const TetGrid& grid, const CandKey& key) {
    uint32_t apex = shared_vertex(key);
    uint32_t o1 = edge_key_a(key.e1) == apex ? edge_key_b(key.e1) : edge_key_a(key.e1);
    uint32_t o2 = edge_key_a(key.e2) == apex ? edge_key_b(key.e2) : edge_key_a(key.e2);
    auto la = grid.lattice_coord(apex);
    auto l1 = grid.lattice_coord(o1);
    auto l2 = grid.lattice_coord(o2);
    return {l1[0] + l2[0] + 2 * la[0], l1[1] + l2[1] + 2 * la[1], l1[2] + l2[2] + 2 * la[2]};
}

std::vector<CandKey> enumerate_candidates(const TetGrid& grid) {
    std::vector<CandKey> out;
    out.reserve(grid.tets.size() * 12);
    for (const auto& tet : grid.tets) {
        for (int skip = 0; skip < 4; ++skip) {
            uint32_t f[3];
            int m = 0;
            for (int k = 0; k < 4; ++k)
                if (k != skip) f[m++] = tet[k];
            EdgeKey e01 = edge_key(f[0], f[1]);
            EdgeKey e02 = edge_key(f[0], f[2]);
            EdgeKey e12 = edge_key(f[1], f[2]);
            out.push_back(CandKey::make(e01, e02));
            out.push_back(CandKey::make(e01, e12));
            out.push_back(CandKey::make(e02, e12));
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

void validate_placement(const TetGrid& grid) {
    static std::mutex mu;
    static std::map<int, bool> checked;
    {
        std::lock_guard<std::mutex> lock(mu);
        auto it = checked.find(grid.resolution);
        if (it != checked.end() && it->second) return;
    }
    int side = 4 * grid.resolution - 3;
    std::vector<int64_t> slot(size_t(side) * side * side, -1);
    std::vector<CandKey> cands = enumerate_candidates(grid);
    for (size_t i = 0; i < cands.size(); ++i) {
        auto c = candidate_coord(grid, cands[i]);
        size_t idx = (size_t(c[0]) * side + c[1]) * side + c[2];
        if (slot[idx] >= 0) {
            throw InvalidInput("tensorize: candidate address collision between " +
                               describe_candidate(grid, cands[slot[idx]]) + " and " +
                               describe_candidate(grid, cands[i]));
        }
        slot[idx] = int64_t(i);
    }
    std::lock_guard<std::mutex> lock(mu);
    checked[grid.resolution] = true;
}

TensorGrid tensorize(const TetGrid& grid, int threads) {
    validate_grid(grid);
    require_lattice_tiling(grid);
    validate_placement(grid);

    TensorGrid t;
    t.resolution = grid.resolution;
    t.alpha_side = 4 * grid.resolution - 3;
    t.bbox = grid.bbox;
    t.deformation_scale = grid.deformation_scale;
    t.base.assign(5 * t.base_cells(), 0.0);
    t.alpha.assign(2 * t.alpha_cells(), 0.0);

    for (size_t i = 0; i < t.base_cells(); ++i) {
        t.base_at(0, i) = grid.sdf[i];
        t.base_at(1, i) = grid.offsets[i].x;
        t.base_at(2, i) = grid.offsets[i].y;
        t.base_at(3, i) = grid.offsets[i].z;
        t.base_at(4, i) = sign_positive(grid.sdf[i]) ? 1.0 : 0.0;
    }

    MtData mt = marching_tets(grid, threads);
    std::vector<uint8_t> kept;
    CutMap cuts;
    gshell_clip_data(grid, mt, kept, cuts, threads);

    const int side = t.alpha_side;
    for (const CandKey& key : enumerate_candidates(grid)) {
        auto c = candidate_coord(grid, key);
        size_t aidx = (size_t(c[0]) * side + c[1]) * side + c[2];
        t.alpha_at(1, aidx) = 1.0;

        double v = 1.0; // inactive candidates read as kept-whole
        int32_t va = find_vertex(mt.edges, key.e1);
        int32_t vb = find_vertex(mt.edges, key.e2);
        if (va >= 0 && vb >= 0) {
            auto it = cuts.find(key);
            if (it != cuts.end()) {
                // va sits on the lex-smaller edge, the reference end of t
                v = kept[va] ? it->second.t : 1.0 - it->second.t;
            } else if (kept[va] != kept[vb]) {
                // nu' touched zero at the kept end: the kept portion is a
                // point, encoded at the fractional floor
                v = kCoeffClamp;
            } else {
                v = kept[va] ? 1.0 : 0.0;
            }
        }
        t.alpha_at(0, aidx) = v;
    }
    return t;
}

TetGrid detensorize_grid(const TensorGrid& t) {
    if (t.resolution < 2) throw FormatError("tensor grid: resolution must be at least 2");
    if (t.alpha_side != 4 * t.resolution - 3)
        throw FormatError("tensor grid: alpha side does not match resolution");
    if (t.base.size() != 5 * t.base_cells())
        throw FormatError("tensor grid: base tensor has wrong size");
    if (t.alpha.size() != 2 * t.alpha_cells())
        throw FormatError("tensor grid: alpha tensor has wrong size");

    TetGrid grid = build_uniform_tet_grid(t.resolution, t.bbox);
    grid.deformation_scale = t.deformation_scale;
    for (size_t i = 0; i < t.base_cells(); ++i) {
        double s = t.base_at(0, i);
        if (!std::isfinite(s)) throw FormatError("tensor grid: non-finite sdf value");
        grid.sdf[i] = s;
        // offsets are clipped to the documented [-1,1] range on every path
        grid.offsets[i] = {std::clamp(t.base_at(1, i), -1.0, 1.0),
                           std::clamp(t.base_at(2, i), -1.0, 1.0),
                           std::clamp(t.base_at(3, i), -1.0, 1.0)};
        if (!std::isfinite(grid.offsets[i].x) || !std::isfinite(grid.offsets[i].y) ||
            !std::isfinite(grid.offsets[i].z))
            throw FormatError("tensor grid: non-finite offset value");
    }
    grid.msdf.assign(grid.vertex_count(), 0.0);
    return grid;
}

ExtractedMesh extract_from_tensor(const TensorGrid& t, int threads) {
    TetGrid grid = detensorize_grid(t);
    validate_placement(grid);

    for (size_t i = 0; i < t.alpha_cells(); ++i) {
        double m = t.alpha_at(1, i);
        double v = t.alpha_at(0, i);
        if (m != 0.0 && m != 1.0) throw FormatError("alpha tensor: mask must be 0 or 1");
        if (m == 0.0 && v != 0.0)
            throw FormatError("alpha tensor: nonzero value outside the structural mask");
        if (m == 1.0 && !(v >= 0.0 && v <= 1.0))
            throw FormatError("alpha tensor: value out of [0,1]");
    }

    MtData mt = marching_tets(grid, threads);
    mt.nu.assign(mt.edges.size(), 0.0); // msdf is not round-tripped

    // unique chords = polygon-adjacent crossing-vertex pairs
    std::vector<std::pair<CandKey, std::pair<uint32_t, uint32_t>>> chords;
    for (const auto& p : mt.polys) {
        for (int i = 0; i < p.n; ++i) {
            uint32_t vi = p.v[i], vj = p.v[(i + 1) % p.n];
            CandKey ck = CandKey::make(mt.edges[vi], mt.edges[vj]);
            chords.push_back({ck, {std::min(vi, vj), std::max(vi, vj)}});
        }
    }
    std::sort(chords.begin(), chords.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    chords.erase(std::unique(chords.begin(), chords.end(),
                             [](const auto& a, const auto& b) { return a.first == b.first; }),
                 chords.end());

    const size_t nv = mt.edges.size();
    const int side = t.alpha_side;
    std::vector<int8_t> status(nv, -1); // -1 unknown, 0 discarded, 1 kept
    struct XorEdge {
        uint32_t va, vb;
        CandKey key;
        double v;
    };
    std::vector<XorEdge> xors;
    std::vector<std::vector<uint32_t>> adj(nv); // indices into xors

    auto pin = [&](uint32_t vtx, int8_t s) {
        if (status[vtx] == -1) {
            status[vtx] = s;
        } else if (status[vtx] != s) {
            throw FormatError("alpha tensor: inconsistent kept/discarded statuses");
        }
    };

    for (const auto& [ck, pair_ids] : chords) {
        auto c = candidate_coord(grid, ck);
        size_t aidx = (size_t(c[0]) * side + c[1]) * side + c[2];
        if (t.alpha_at(1, aidx) == 0.0)
            throw FormatError("alpha tensor: active candidate edge " +
                              describe_candidate(grid, ck) + " is masked off");
        double v = t.alpha_at(0, aidx);
        if (!(v >= 0.0 && v <= 1.0)) throw FormatError("alpha tensor: value out of [0,1]");
        if (v == 1.0) {
            pin(pair_ids.first, 1);
            pin(pair_ids.second, 1);
        } else if (v == 0.0) {
            pin(pair_ids.first, 0);
            pin(pair_ids.second, 0);
        } else {
            uint32_t id = uint32_t(xors.size());
            xors.push_back({pair_ids.first, pair_ids.second, ck, v});
            adj[pair_ids.first].push_back(id);
            adj[pair_ids.second].push_back(id);
        }
    }

    // propagate the XOR constraints; components with no pinned vertex take
    // the deterministic tie-break "lowest vertex id is kept"
    auto propagate = [&](uint32_t root) {
        std::queue<uint32_t> q;
        q.push(root);
        while (!q.empty()) {
            uint32_t u = q.front();
            q.pop();
            for (uint32_t ei : adj[u]) {
                const XorEdge& e = xors[ei];
                uint32_t other = e.va == u ? e.vb : e.va;
                int8_t want = status[u] == 1 ? 0 : 1;
                if (status[other] == -1) {
                    status[other] = want;
                    q.push(other);
                } else if (status[other] != want) {
                    throw FormatError("alpha tensor: contradictory cut codes around vertex");
                }
            }
        }
    };
    for (uint32_t v = 0; v < nv; ++v)
        if (status[v] != -1 && !adj[v].empty()) propagate(v);
    for (uint32_t v = 0; v < nv; ++v) {
        if (status[v] == -1 && !adj[v].empty()) {
            status[v] = 1;
            propagate(v);
        }
    }
    // vertices not touched by any chord keep the default
    for (uint32_t v = 0; v < nv; ++v)
        if (status[v] == -1) status[v] = 1;

    std::vector<uint8_t> kept(nv);
    for (uint32_t v = 0; v < nv; ++v) kept[v] = status[v] == 1 ? 1 : 0;
    CutMap cuts;
    for (const XorEdge& e : xors) {
        CutInfo ci;
        ci.t = kept[e.va] ? e.v : 1.0 - e.v;
        ci.clamped = e.v <= kCoeffClamp || e.v >= 1.0 - kCoeffClamp;
        cuts.emplace(e.key, ci);
    }
    return assemble_clipped(grid, mt, kept, cuts, threads);
}

} // namespace gshell
