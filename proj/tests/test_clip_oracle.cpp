#include <cmath>

#include "doctest.h"
#include "gshell/extract.hpp"
#include "gshell/grid.hpp"
#include "test_util.hpp"

using namespace gshell;

namespace {

double tri_area(const std::array<Vec3, 3>& t) {
    return 0.5 * norm(cross(t[1] - t[0], t[2] - t[0]));
}

double clip_area(const ClipResult& r) {
    double a = 0.0;
    for (const auto& t : r.triangles) a += tri_area(t);
    return a;
}

double seg_length(const ClipResult& r) {
    double l = 0.0;
    for (const auto& s : r.segments) l += norm(s[0] - s[1]);
    return l;
}

} // namespace

TEST_CASE("clip oracle: one negative corner keeps three quarters") {
    std::array<Vec3, 3> tri = {Vec3{0, 0, 0}, Vec3{1, 0, 0}, Vec3{0, 1, 0}};
    ClipResult r = clip_oracle(tri, {-1.0, 1.0, 1.0});
    CHECK(clip_area(r) == doctest::Approx(0.375).epsilon(1e-14)); // 3/4 of area 1/2
    REQUIRE(r.segments.size() == 1);
    // cut at the midpoints of the two edges out of the negative corner
    Vec3 m01{0.5, 0, 0}, m02{0, 0.5, 0};
    double d1 = norm(r.segments[0][0] - m01) + norm(r.segments[0][1] - m02);
    double d2 = norm(r.segments[0][0] - m02) + norm(r.segments[0][1] - m01);
    CHECK(std::min(d1, d2) < 1e-14);
}

TEST_CASE("clip oracle: uniform signs") {
    std::array<Vec3, 3> tri = {Vec3{0, 0, 0}, Vec3{1, 0, 0}, Vec3{0, 1, 0}};
    ClipResult keep = clip_oracle(tri, {0.3, 1.0, 2.0});
    CHECK(clip_area(keep) == doctest::Approx(0.5));
    CHECK(keep.segments.empty());
    ClipResult drop = clip_oracle(tri, {-0.3, -1.0, -2.0});
    CHECK(drop.triangles.empty());
    CHECK(drop.segments.empty());
}

TEST_CASE("clip oracle: zero corner is kept without a duplicated cut vertex") {
    std::array<Vec3, 3> tri = {Vec3{0, 0, 0}, Vec3{1, 0, 0}, Vec3{0, 1, 0}};
    ClipResult r = clip_oracle(tri, {0.0, -1.0, 1.0});
    // kept region is y >= x: half of the triangle
    CHECK(clip_area(r) == doctest::Approx(0.25).epsilon(1e-14));
    // only one strict crossing, so no cut segment is reported
    CHECK(r.segments.empty());
}

TEST_CASE("clip oracle: kept and discarded areas partition the triangle") {
    Rng rng = Rng::stream(11, "test.clip_partition");
    for (int trial = 0; trial < 200; ++trial) {
        std::array<Vec3, 3> tri;
        for (auto& c : tri) c = Vec3{rng.uniform(), rng.uniform(), rng.uniform()};
        std::array<double, 3> nu;
        for (double& v : nu) v = testutil::bounded_signed(rng);
        std::array<double, 3> neg = {-nu[0], -nu[1], -nu[2]};
        double total = tri_area(tri);
        double kept = clip_area(clip_oracle(tri, nu));
        double dropped = clip_area(clip_oracle(tri, neg));
        CHECK(kept + dropped == doctest::Approx(total).epsilon(1e-12));
        // both sides see the same cut
        CHECK(seg_length(clip_oracle(tri, nu)) ==
              doctest::Approx(seg_length(clip_oracle(tri, neg))).epsilon(1e-12));
    }
}

TEST_CASE("gshell clipping agrees with the per-face oracle on random grids") {
    for (uint64_t seed : {31, 32, 33}) {
        TetGrid g = testutil::random_grid(4, seed, true);
        ExtractedMesh shell = extract_gshell(g);
        ExtractedMesh whole = project_msdf(g, extract_watertight(g));

        double oracle_area = 0.0, oracle_cut = 0.0;
        for (const auto& f : whole.faces) {
            std::array<Vec3, 3> tri = {whole.positions[f[0]], whole.positions[f[1]],
                                       whole.positions[f[2]]};
            std::array<double, 3> nu = {whole.info[f[0]].projected_msdf,
                                        whole.info[f[1]].projected_msdf,
                                        whole.info[f[2]].projected_msdf};
            ClipResult r = clip_oracle(tri, nu);
            oracle_area += clip_area(r);
            oracle_cut += seg_length(r);
        }

        double shell_area = total_area(shell);
        double shell_cut = 0.0;
        for (const auto& e : shell.boundary_edges)
            shell_cut += norm(shell.positions[e[0]] - shell.positions[e[1]]);

        REQUIRE(oracle_area > 0.0);
        CHECK(shell_area == doctest::Approx(oracle_area).epsilon(1e-9));
        CHECK(shell_cut == doctest::Approx(oracle_cut).epsilon(1e-9));
    }
}
