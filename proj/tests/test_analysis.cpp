#include <cmath>

#include "doctest.h"
#include "gshell/analysis.hpp"
#include "gshell/extract.hpp"
#include "gshell/grid.hpp"
#include "test_util.hpp"

using namespace gshell;

namespace {

ExtractedMesh raw_mesh(std::vector<Vec3> pos, std::vector<std::array<uint32_t, 3>> faces) {
    ExtractedMesh m;
    m.positions = std::move(pos);
    m.faces = std::move(faces);
    m.info.resize(m.positions.size());
    m.watertight_vertex_count = uint32_t(m.positions.size());
    return m;
}

// Closed unit cube, outward orientation.
ExtractedMesh cube_mesh() {
    std::vector<Vec3> p;
    for (int i = 0; i < 8; ++i)
        p.push_back({double(i & 1), double((i >> 1) & 1), double((i >> 2) & 1)});
    std::vector<std::array<uint32_t, 3>> f = {
        {0, 2, 1}, {1, 2, 3}, // z = 0, normal -z
        {4, 5, 6}, {5, 7, 6}, // z = 1, normal +z
        {0, 1, 4}, {1, 5, 4}, // y = 0, normal -y
        {2, 6, 3}, {3, 6, 7}, // y = 1, normal +y
        {0, 4, 2}, {2, 4, 6}, // x = 0, normal -x
        {1, 3, 5}, {3, 7, 5}, // x = 1, normal +x
    };
    return raw_mesh(p, f);
}

} // namespace

TEST_CASE("analysis: closed cube") {
    ExtractedMesh m = cube_mesh();
    ManifoldReport r = analyze_mesh(m);
    CHECK(r.vertices == 8);
    CHECK(r.faces == 12);
    CHECK(r.edges == 18);
    CHECK(r.watertight());
    CHECK(r.euler_characteristic == 2);
    CHECK(r.boundary_loops == 0);
    CHECK(r.boundary_loop_lengths.empty());
    CHECK(r.edge_face_histogram == std::vector<uint64_t>{0, 0, 18});
    CHECK(r.nonmanifold_edge_list.empty());
    CHECK(r.connected_components == 1);
    CHECK(signed_volume(m) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("analysis: single triangle and open strip") {
    ExtractedMesh tri = raw_mesh({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 2}});
    ManifoldReport r = analyze_mesh(tri);
    CHECK(r.open_edges == 3);
    CHECK(!r.closed());
    CHECK(r.manifold());
    CHECK(r.boundary_loops == 1);
    CHECK(r.boundary_loop_lengths == std::vector<uint64_t>{3});
    CHECK(r.edge_face_histogram == std::vector<uint64_t>{0, 3});
    CHECK(r.euler_characteristic == 1);
}

TEST_CASE("analysis: bowtie vertex is flagged") {
    ExtractedMesh m = raw_mesh(
        {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {-1, 0, 0}, {0, -1, 0}},
        {{0, 1, 2}, {0, 3, 4}});
    ManifoldReport r = analyze_mesh(m);
    CHECK(r.nonmanifold_vertices == 1);
    CHECK(r.nonmanifold_vertex_list == std::vector<uint32_t>{0});
    CHECK(r.nonmanifold_edges == 0);
    CHECK(!r.manifold());
    // connectivity is vertex-based, so the junction vertex fuses the two
    // triangles into one component and their rims into one open-edge component
    CHECK(r.connected_components == 1);
    CHECK(r.boundary_loops == 1);
    CHECK(r.boundary_loop_lengths == std::vector<uint64_t>{6});
}

TEST_CASE("analysis: three faces on one edge") {
    ExtractedMesh m = raw_mesh(
        {{0, 0, 0}, {0, 0, 1}, {1, 0, 0}, {0, 1, 0}, {-1, 0, 0}},
        {{0, 1, 2}, {0, 1, 3}, {0, 1, 4}});
    ManifoldReport r = analyze_mesh(m);
    CHECK(r.nonmanifold_edges == 1);
    CHECK(r.nonmanifold_edge_list == std::vector<std::array<uint32_t, 2>>{{0, 1}});
    CHECK(r.edge_face_histogram == std::vector<uint64_t>{0, 6, 0, 1});
    CHECK(!r.manifold());
}

TEST_CASE("analysis: extracted sphere and hemisphere") {
    TetGrid g = build_uniform_tet_grid(16, Box3{{-1, -1, -1}, {1, 1, 1}});
    sample_fields(g, make_shape_field("sphere", 0.6));
    ExtractedMesh sphere = extract_watertight(g);
    ManifoldReport rs = analyze_mesh(sphere);
    CHECK(rs.watertight());
    CHECK(rs.euler_characteristic == 2);
    CHECK(rs.connected_components == 1);
    double vol = signed_volume(sphere);
    double exact = 4.0 / 3.0 * 3.14159265358979323846 * 0.6 * 0.6 * 0.6;
    CHECK(vol == doctest::Approx(exact).epsilon(0.05));

    sample_fields(g, make_shape_field("hemisphere", 0.6));
    ExtractedMesh hemi = extract_gshell(g);
    ManifoldReport rh = analyze_mesh(hemi);
    CHECK(rh.manifold());
    CHECK(!rh.closed());
    CHECK(rh.boundary_loops == 1);
    CHECK(rh.euler_characteristic == 1);
}

TEST_CASE("winding number: closed mesh is an indicator function") {
    TetGrid g = build_uniform_tet_grid(12, Box3{{-1, -1, -1}, {1, 1, 1}});
    sample_fields(g, make_shape_field("sphere", 0.6));
    ExtractedMesh m = extract_watertight(g);

    CHECK(winding_number(m.positions, m.faces, Vec3{0, 0, 0}) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(winding_number(m.positions, m.faces, Vec3{0.1, -0.2, 0.05}) ==
          doctest::Approx(1.0).epsilon(1e-9));
    CHECK(winding_number(m.positions, m.faces, Vec3{0.9, 0.9, 0.9}) ==
          doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
    CHECK(winding_number(m.positions, m.faces, Vec3{2, 0, 0}) ==
          doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
}

TEST_CASE("winding number: open surface takes fractional values") {
    TetGrid g = build_uniform_tet_grid(16, Box3{{-1, -1, -1}, {1, 1, 1}});
    sample_fields(g, make_shape_field("hemisphere", 0.6));
    ExtractedMesh m = extract_gshell(g);

    // Just inside the top of the cap the sheet curves past the probe and
    // subtends MORE than a half space: the chords from a point on a sphere
    // that exit below the equator fill a 45-degree cone, so
    // w_in = 1 - (1 - cos 45)/2 = 0.8536 and w_out = w_in - 1 = -0.1464.
    // Probe relative to the discrete sheet (ray cast), not the analytic one.
    Vec3 dir{0.11, -0.07, 1.0};
    dir = dir / norm(dir);
    double hit = testutil::ray_mesh_hit(m, Vec3{0, 0, 0}, dir);
    REQUIRE(hit > 0.0);
    double below = winding_number(m.positions, m.faces, dir * (hit - 6e-4));
    double above = winding_number(m.positions, m.faces, dir * (hit + 6e-4));
    CHECK(below == doctest::Approx(0.853553).epsilon(0.025));
    CHECK(above == doctest::Approx(-0.146447).epsilon(0.15));
    CHECK(below - above == doctest::Approx(1.0).epsilon(5e-3)); // jump across the sheet

    // in the opening, every point of the spanned disk sees exactly half of
    // all directions exit through the cap, so the field reads 1/2 there
    CHECK(winding_number(m.positions, m.faces, Vec3{0, 0, 1e-3}) ==
          doctest::Approx(0.5).epsilon(0.04));
    CHECK(winding_number(m.positions, m.faces, Vec3{0.2, 0.1, -1e-3}) ==
          doctest::Approx(0.5).epsilon(0.04));

    // far away it decays
    CHECK(std::fabs(winding_number(m.positions, m.faces, Vec3{2, 2, 2})) < 0.01);
}

TEST_CASE("winding number: flat square sheet approaches one half") {
    std::vector<Vec3> pos = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
    std::vector<std::array<uint32_t, 3>> faces = {{0, 1, 2}, {0, 2, 3}};

    double w_above = winding_number(pos, faces, Vec3{0.5, 0.5, 1e-4});
    double w_below = winding_number(pos, faces, Vec3{0.5, 0.5, -1e-4});
    CHECK(std::fabs(w_above) >= 0.499);
    CHECK(std::fabs(w_above) <= 0.5);
    CHECK(w_above == doctest::Approx(-w_below).epsilon(1e-12));
    CHECK(std::fabs(w_below - w_above) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("winding numbers: batch equals pointwise, any thread count") {
    TetGrid g = build_uniform_tet_grid(8, Box3{{-1, -1, -1}, {1, 1, 1}});
    sample_fields(g, make_shape_field("sphere", 0.6));
    ExtractedMesh m = extract_watertight(g);

    Rng rng = Rng::stream(4, "test.winding_batch");
    std::vector<Vec3> q;
    for (int i = 0; i < 64; ++i)
        q.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});

    std::vector<double> w1 = winding_numbers(m.positions, m.faces, q, 1);
    std::vector<double> w4 = winding_numbers(m.positions, m.faces, q, 4);
    REQUIRE(w1.size() == q.size());
    for (size_t i = 0; i < q.size(); ++i) {
        CHECK(w1[i] == w4[i]);
        CHECK(w1[i] == winding_number(m.positions, m.faces, q[i]));
    }
}

TEST_CASE("signed volume: orientation flips the sign") {
    ExtractedMesh m = cube_mesh();
    ExtractedMesh flipped = m;
    for (auto& f : flipped.faces) std::swap(f[1], f[2]);
    CHECK(signed_volume(flipped) == doctest::Approx(-1.0).epsilon(1e-14));
}
