#include "gshell/extract.hpp"

#include <algorithm>
#include <cmath>

#include "gshell/errors.hpp"
#include "gshell/parallel.hpp"

namespace gshell {

double crossing_coeff(double v_a, double v_b, bool& clamped) {
    // Caller guarantees strictly mixed signs (under sign(0) = +1), so the
    // denominator is nonzero. The clamp keeps crossing points strictly off
    // the segment endpoints so vertices never coincide.
    double t = v_a / (v_a - v_b);
    clamped = false;
    if (!(t >= 1e-6)) {
        t = 1e-6;
        clamped = true;
    } else if (!(t <= 1.0 - 1e-6)) {
        t = 1.0 - 1e-6;
        clamped = true;
    }
    return t;
}

// ---------------------------------------------------------------------------
// Marching-tetrahedra pass
// ---------------------------------------------------------------------------

namespace {

struct PolyKeys {
    uint32_t tet = 0;
    uint8_t n = 0;
    std::array<EdgeKey, 4> k{};
};

// Cell polygon as edge keys, cyclic but not yet oriented. Consecutive
// crossing edges always share a tet vertex, so every polygon side is a
// candidate edge of one tet face.
void cell_polygon(const TetGrid& grid, uint32_t t, std::vector<PolyKeys>& out) {
    const auto& tet = grid.tets[t];
    int neg[4], pos[4], nn = 0, np = 0;
    for (int i = 0; i < 4; ++i) {
        if (sign_positive(grid.sdf[tet[i]]))
            pos[np++] = i;
        else
            neg[nn++] = i;
    }
    if (nn == 0 || nn == 4) return;
    PolyKeys p;
    p.tet = t;
    if (nn == 1 || nn == 3) {
        int apex = (nn == 1) ? neg[0] : pos[0];
        const int* others = (nn == 1) ? pos : neg;
        p.n = 3;
        for (int i = 0; i < 3; ++i) p.k[i] = edge_key(tet[apex], tet[others[i]]);
    } else {
        // 2-2: quad through the four mixed edges, cyclic so neighbours share
        // a tet vertex: (i,k), (i,l), (j,l), (j,k)
        p.n = 4;
        p.k[0] = edge_key(tet[neg[0]], tet[pos[0]]);
        p.k[1] = edge_key(tet[neg[0]], tet[pos[1]]);
        p.k[2] = edge_key(tet[neg[1]], tet[pos[1]]);
        p.k[3] = edge_key(tet[neg[1]], tet[pos[0]]);
    }
    out.push_back(p);
}

uint32_t vertex_id(const std::vector<EdgeKey>& edges, EdgeKey k) {
    return uint32_t(std::lower_bound(edges.begin(), edges.end(), k) - edges.begin());
}

} // namespace

MtData marching_tets(const TetGrid& grid, int threads) {
    const size_t ntets = grid.tets.size();
    std::vector<std::vector<PolyKeys>> chunk_polys(std::max<size_t>(1, std::min<size_t>(size_t(std::max(threads, 1)), ntets)));

    parallel_ranges(ntets, threads, [&](size_t lo, size_t hi, size_t c) {
        auto& local = chunk_polys[c];
        for (size_t t = lo; t < hi; ++t) cell_polygon(grid, uint32_t(t), local);
    });

    MtData mt;
    std::vector<PolyKeys> polys;
    for (auto& c : chunk_polys)
        polys.insert(polys.end(), c.begin(), c.end());

    mt.edges.reserve(polys.size() * 4);
    for (const auto& p : polys)
        for (int i = 0; i < p.n; ++i) mt.edges.push_back(p.k[i]);
    std::sort(mt.edges.begin(), mt.edges.end());
    mt.edges.erase(std::unique(mt.edges.begin(), mt.edges.end()), mt.edges.end());

    const size_t nv = mt.edges.size();
    mt.alpha.resize(nv);
    mt.alpha_clamped.resize(nv);
    mt.position.resize(nv);
    mt.source_tet.assign(nv, UINT32_MAX);

    parallel_ranges(nv, threads, [&](size_t lo, size_t hi, size_t) {
        for (size_t i = lo; i < hi; ++i) {
            uint32_t a = edge_key_a(mt.edges[i]), b = edge_key_b(mt.edges[i]);
            bool cl = false;
            double alpha = crossing_coeff(grid.sdf[a], grid.sdf[b], cl);
            mt.alpha[i] = alpha;
            mt.alpha_clamped[i] = cl;
            mt.position[i] = grid.position(a) * (1.0 - alpha) + grid.position(b) * alpha;
        }
    });

    // resolve polygon vertex ids, lowest emitting tet, and orientation
    mt.polys.resize(polys.size());
    for (size_t pi = 0; pi < polys.size(); ++pi) {
        const auto& pk = polys[pi];
        CellPolygon cp;
        cp.tet = pk.tet;
        cp.n = pk.n;
        for (int i = 0; i < pk.n; ++i) {
            cp.v[i] = vertex_id(mt.edges, pk.k[i]);
            mt.source_tet[cp.v[i]] = std::min(mt.source_tet[cp.v[i]], pk.tet);
        }
        mt.polys[pi] = cp;
    }

    parallel_ranges(mt.polys.size(), threads, [&](size_t lo, size_t hi, size_t) {
        for (size_t pi = lo; pi < hi; ++pi) {
            auto& cp = mt.polys[pi];
            Vec3 n = cross(mt.position[cp.v[1]] - mt.position[cp.v[0]],
                           mt.position[cp.v[2]] - mt.position[cp.v[0]]);
            Vec3 g = tet_value_gradient(grid, cp.tet, grid.sdf);
            if (dot(n, g) < 0.0) std::reverse(cp.v.begin(), cp.v.begin() + cp.n);
        }
    });
    return mt;
}

// ---------------------------------------------------------------------------
// Whole-polygon emission (shared by the watertight path and kept-whole cells)
// ---------------------------------------------------------------------------

namespace {

// Quad diagonal: the one whose (min id, max id) pair is lexicographically
// smaller. Vertex ids are assigned in ascending edge-key order, so comparing
// ids is comparing edge-key pairs. Both split triangles keep the winding.
void emit_whole(const CellPolygon& p, std::vector<std::array<uint32_t, 3>>& faces) {
    if (p.n == 3) {
        faces.push_back({p.v[0], p.v[1], p.v[2]});
        return;
    }
    uint32_t a0 = std::min(p.v[0], p.v[2]), b0 = std::max(p.v[0], p.v[2]);
    uint32_t a1 = std::min(p.v[1], p.v[3]), b1 = std::max(p.v[1], p.v[3]);
    bool diag02 = (a0 != a1) ? a0 < a1 : b0 < b1;
    if (diag02) {
        faces.push_back({p.v[0], p.v[1], p.v[2]});
        faces.push_back({p.v[0], p.v[2], p.v[3]});
    } else {
        faces.push_back({p.v[1], p.v[2], p.v[3]});
        faces.push_back({p.v[1], p.v[3], p.v[0]});
    }
}

void flag_degenerate_faces(ExtractedMesh& mesh, const TetGrid& grid) {
    Vec3 ext = grid.bbox.extent();
    double h = std::min({ext.x, ext.y, ext.z}) / std::max(1, grid.resolution - 1);
    double thresh = 1e-12 * h * h;
    for (size_t f = 0; f < mesh.faces.size(); ++f)
        if (face_area(mesh, f) < thresh) mesh.degenerate_faces.push_back(uint32_t(f));
}

ExtractedMesh build_vertex_table(const TetGrid&, const MtData& mt) {
    ExtractedMesh mesh;
    const size_t nv = mt.edges.size();
    mesh.positions.assign(mt.position.begin(), mt.position.end());
    mesh.info.resize(nv);
    mesh.watertight_vertex_count = uint32_t(nv);
    for (size_t i = 0; i < nv; ++i) {
        VertexInfo& vi = mesh.info[i];
        vi.is_boundary = false;
        vi.source_edge = mt.edges[i];
        vi.alpha = mt.alpha[i];
        vi.coeff_clamped = mt.alpha_clamped[i] != 0;
        vi.projected_msdf = mt.nu.empty() ? 0.0 : mt.nu[i];
        vi.source_tet = mt.source_tet[i];
    }
    return mesh;
}

} // namespace

ExtractedMesh extract_watertight(const TetGrid& grid, int threads) {
    MtData mt = marching_tets(grid, threads);
    ExtractedMesh mesh = build_vertex_table(grid, mt);
    mesh.faces.reserve(mt.polys.size() * 2);
    for (const auto& p : mt.polys) emit_whole(p, mesh.faces);
    flag_degenerate_faces(mesh, grid);
    return mesh;
}

ExtractedMesh project_msdf(const TetGrid& grid, ExtractedMesh mesh) {
    const size_t n = grid.vertex_count();
    for (size_t i = 0; i < mesh.info.size(); ++i) {
        VertexInfo& vi = mesh.info[i];
        if (vi.is_boundary) continue;
        uint32_t a = edge_key_a(vi.source_edge), b = edge_key_b(vi.source_edge);
        if (a >= n || b >= n || a == b ||
            sign_positive(grid.sdf[a]) == sign_positive(grid.sdf[b]))
            throw InvalidInput("project_msdf: vertex " + std::to_string(i) +
                               " has no valid source edge in this grid");
        vi.projected_msdf = (1.0 - vi.alpha) * grid.msdf[a] + vi.alpha * grid.msdf[b];
    }
    return mesh;
}

// ---------------------------------------------------------------------------
// Clipping pass
// ---------------------------------------------------------------------------

ExtractedMesh assemble_clipped(const TetGrid& grid, const MtData& mt,
                               const std::vector<uint8_t>& kept, const CutMap& cuts,
                               int threads) {
    // Boundary vertices: one per cut candidate edge that some cell actually
    // crosses; ids follow the watertight block in candidate-key order.
    std::vector<std::pair<CandKey, uint32_t>> cut_usage; // (key, min tet)
    for (const auto& p : mt.polys) {
        for (int i = 0; i < p.n; ++i) {
            uint32_t vi = p.v[i], vj = p.v[(i + 1) % p.n];
            if (kept[vi] == kept[vj]) continue;
            CandKey ck = CandKey::make(mt.edges[vi], mt.edges[vj]);
            if (cuts.count(ck)) cut_usage.push_back({ck, p.tet});
        }
    }
    std::sort(cut_usage.begin(), cut_usage.end());
    std::vector<CandKey> cut_keys;
    std::vector<uint32_t> cut_tet;
    for (const auto& [ck, tet] : cut_usage) {
        if (!cut_keys.empty() && cut_keys.back() == ck) continue;
        cut_keys.push_back(ck);
        cut_tet.push_back(tet);
    }

    ExtractedMesh mesh = build_vertex_table(grid, mt);
    const uint32_t base = mesh.watertight_vertex_count;

    auto boundary_id = [&](CandKey ck) {
        return base + uint32_t(std::lower_bound(cut_keys.begin(), cut_keys.end(), ck) -
                               cut_keys.begin());
    };

    for (size_t i = 0; i < cut_keys.size(); ++i) {
        const CandKey& ck = cut_keys[i];
        uint32_t va = vertex_id(mt.edges, ck.e1), vb = vertex_id(mt.edges, ck.e2);
        const CutInfo& ci = cuts.at(ck);
        VertexInfo vi;
        vi.is_boundary = true;
        vi.src_a = va;
        vi.src_b = vb;
        vi.beta = ci.t;
        vi.coeff_clamped = ci.clamped;
        vi.source_tet = cut_tet[i];
        mesh.positions.push_back(mt.position[va] * (1.0 - ci.t) + mt.position[vb] * ci.t);
        mesh.info.push_back(vi);
    }

    // Per-cell clip. Cells kept whole go through the watertight emission path
    // so msdf = +1 grids reproduce extract_watertight exactly.
    struct ChunkOut {
        std::vector<std::array<uint32_t, 3>> faces;
        std::vector<std::array<uint32_t, 2>> bedges;
    };
    size_t nchunks = std::max<size_t>(1, std::min<size_t>(size_t(std::max(threads, 1)), std::max<size_t>(1, mt.polys.size())));
    std::vector<ChunkOut> chunks(nchunks);

    parallel_ranges(mt.polys.size(), threads, [&](size_t lo, size_t hi, size_t c) {
        auto& out = chunks[c];
        std::array<uint32_t, 8> poly;
        for (size_t pi = lo; pi < hi; ++pi) {
            const CellPolygon& p = mt.polys[pi];
            int nkept = 0;
            for (int i = 0; i < p.n; ++i) nkept += kept[p.v[i]] ? 1 : 0;
            if (nkept == p.n) {
                emit_whole(p, out.faces);
                continue;
            }
            if (nkept == 0) continue; // crossings require a kept endpoint

            int m = 0, ncross = 0;
            for (int i = 0; i < p.n; ++i) {
                uint32_t vi = p.v[i], vj = p.v[(i + 1) % p.n];
                if (kept[vi]) poly[m++] = vi;
                if (kept[vi] != kept[vj]) {
                    CandKey ck = CandKey::make(mt.edges[vi], mt.edges[vj]);
                    if (cuts.count(ck)) {
                        poly[m++] = boundary_id(ck);
                        ++ncross;
                    }
                }
            }
            if (m < 3) continue;

            // chord between an exit crossing and the entry crossing that
            // follows it across the discarded region; they are the unique
            // cyclically adjacent boundary-id pair
            if (ncross == 2) {
                for (int i = 0; i < m; ++i) {
                    uint32_t a = poly[i], b = poly[(i + 1) % m];
                    if (a >= base && b >= base) {
                        out.bedges.push_back({a, b});
                        break;
                    }
                }
            }

            // fan triangulation from the smallest id, winding preserved
            int start = 0;
            for (int i = 1; i < m; ++i)
                if (poly[i] < poly[start]) start = i;
            for (int i = 1; i + 1 < m; ++i)
                out.faces.push_back({poly[start], poly[(start + i) % m],
                                     poly[(start + i + 1) % m]});
        }
    });

    for (auto& c : chunks) {
        mesh.faces.insert(mesh.faces.end(), c.faces.begin(), c.faces.end());
        mesh.boundary_edges.insert(mesh.boundary_edges.end(), c.bedges.begin(), c.bedges.end());
    }

    // Compact away vertices of fully-discarded regions. Watertight endpoints
    // of used boundary vertices are retained even when faceless: they carry
    // the interpolation provenance the derivative code chains through.
    // Relative order is preserved, so the canonical ordering survives; when
    // nothing was clipped this remap is the identity.
    std::vector<uint8_t> used(mesh.positions.size(), 0);
    for (const auto& f : mesh.faces)
        for (uint32_t v : f) used[v] = 1;
    for (const auto& e : mesh.boundary_edges)
        for (uint32_t v : e) used[v] = 1;
    for (size_t i = base; i < mesh.info.size(); ++i)
        if (used[i]) {
            used[mesh.info[i].src_a] = 1;
            used[mesh.info[i].src_b] = 1;
        }
    std::vector<uint32_t> remap(mesh.positions.size(), UINT32_MAX);
    uint32_t w = 0;
    for (size_t i = 0; i < mesh.positions.size(); ++i) {
        if (!used[i]) continue;
        remap[i] = w;
        mesh.positions[w] = mesh.positions[i];
        mesh.info[w] = mesh.info[i];
        ++w;
    }
    mesh.positions.resize(w);
    mesh.info.resize(w);
    uint32_t wt_used = 0;
    for (uint32_t i = 0; i < base; ++i) wt_used += used[i] ? 1 : 0;
    mesh.watertight_vertex_count = wt_used;
    for (auto& f : mesh.faces)
        for (uint32_t& v : f) v = remap[v];
    for (auto& e : mesh.boundary_edges)
        for (uint32_t& v : e) v = remap[v];
    for (auto& vi : mesh.info)
        if (vi.is_boundary) {
            vi.src_a = remap[vi.src_a];
            vi.src_b = remap[vi.src_b];
        }

    flag_degenerate_faces(mesh, grid);
    return mesh;
}

void gshell_clip_data(const TetGrid& grid, MtData& mt, std::vector<uint8_t>& kept,
                      CutMap& cuts, int threads) {
    const size_t nv = mt.edges.size();
    mt.nu.resize(nv);
    kept.assign(nv, 0);
    parallel_ranges(nv, threads, [&](size_t lo, size_t hi, size_t) {
        for (size_t i = lo; i < hi; ++i) {
            uint32_t a = edge_key_a(mt.edges[i]), b = edge_key_b(mt.edges[i]);
            mt.nu[i] = (1.0 - mt.alpha[i]) * grid.msdf[a] + mt.alpha[i] * grid.msdf[b];
            kept[i] = sign_positive(mt.nu[i]) ? 1 : 0;
        }
    });

    // Cut parameters for every strictly sign-mixed candidate edge. Strictness
    // matters: a vertex with nu' exactly 0 is kept and gets no boundary
    // vertex duplicated onto it.
    cuts.clear();
    for (const auto& p : mt.polys) {
        for (int i = 0; i < p.n; ++i) {
            uint32_t vi = p.v[i], vj = p.v[(i + 1) % p.n];
            double ni = mt.nu[vi], nj = mt.nu[vj];
            if (!((ni < 0.0 && nj > 0.0) || (ni > 0.0 && nj < 0.0))) continue;
            CandKey ck = CandKey::make(mt.edges[vi], mt.edges[vj]);
            if (cuts.count(ck)) continue;
            uint32_t a = std::min(vi, vj), b = std::max(vi, vj); // id order == key order
            CutInfo ci;
            ci.t = crossing_coeff(mt.nu[a], mt.nu[b], ci.clamped);
            cuts.emplace(ck, ci);
        }
    }
}

ExtractedMesh extract_gshell(const TetGrid& grid, int threads) {
    MtData mt = marching_tets(grid, threads);
    std::vector<uint8_t> kept;
    CutMap cuts;
    gshell_clip_data(grid, mt, kept, cuts, threads);
    return assemble_clipped(grid, mt, kept, cuts, threads);
}

// ---------------------------------------------------------------------------
// Per-triangle clip oracle
// ---------------------------------------------------------------------------

ClipResult clip_oracle(const std::array<Vec3, 3>& corners, const std::array<double, 3>& nu) {
    ClipResult res;
    Vec3 poly[4];
    int m = 0;
    std::vector<Vec3> crossings;
    for (int i = 0; i < 3; ++i) {
        int j = (i + 1) % 3;
        if (nu[i] >= 0.0) poly[m++] = corners[i];
        if ((nu[i] < 0.0 && nu[j] > 0.0) || (nu[i] > 0.0 && nu[j] < 0.0)) {
            double t = nu[i] / (nu[i] - nu[j]);
            Vec3 x = corners[i] * (1.0 - t) + corners[j] * t;
            poly[m++] = x;
            crossings.push_back(x);
        }
    }
    if (crossings.size() == 2) res.segments.push_back({crossings[0], crossings[1]});
    for (int i = 1; i + 1 < m; ++i) res.triangles.push_back({poly[0], poly[i], poly[i + 1]});
    return res;
}

} // namespace gshell
