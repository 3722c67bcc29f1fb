#include <cmath>

#include "doctest.h"
#include "gshell/analysis.hpp"
#include "gshell/errors.hpp"
#include "gshell/extract.hpp"
#include "gshell/grid.hpp"
#include "gshell/losses.hpp"
#include "test_util.hpp"

using namespace gshell;

namespace {

TetGrid single_tet(std::array<double, 4> sdf, std::array<double, 4> msdf) {
    TetGrid g;
    g.resolution = 0;
    g.bbox = Box3{{0, 0, 0}, {1, 1, 1}};
    g.deformation_scale = 0.5;
    g.canonical_positions = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    g.offsets.assign(4, Vec3{});
    g.tets = {{0, 1, 2, 3}};
    g.sdf.assign(sdf.begin(), sdf.end());
    g.msdf.assign(msdf.begin(), msdf.end());
    return g;
}

double softplus_ref(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sdf_reg_ref(const TetGrid& g) {
    double total = 0.0;
    for (EdgeKey e : unique_edges(g)) {
        double si = g.sdf[edge_key_a(e)], sj = g.sdf[edge_key_b(e)];
        total += softplus_ref(si) - (sj >= 0 ? si : 0.0);
        total += softplus_ref(sj) - (si >= 0 ? sj : 0.0);
    }
    return total;
}

} // namespace

TEST_CASE("huber: values, gradient, and continuity at the knee") {
    CHECK(huber(0.5) == doctest::Approx(0.125).epsilon(1e-15));
    CHECK(huber(2.0) == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(huber(-0.001) == doctest::Approx(5e-7).epsilon(1e-12));
    CHECK(huber(0.0) == 0.0);

    CHECK(std::fabs(huber(1.0 + 1e-9) - huber(1.0 - 1e-9)) < 1e-8);
    CHECK(huber_grad(0.5) == doctest::Approx(0.5));
    CHECK(huber_grad(2.0) == doctest::Approx(1.0));
    CHECK(huber_grad(-2.0) == doctest::Approx(-1.0));
    CHECK(huber(3.0, 0.5) == doctest::Approx(0.5 * (3.0 - 0.25)));
}

TEST_CASE("open regulariser: sums huber over kept crossing vertices only") {
    // nu' per crossing vertex: (m0+mi)/2 -> 0.5, -1, 2
    TetGrid g = single_tet({-1, 1, 1, 1}, {0, 1, -2, 4});
    ExtractedMesh m = extract_gshell(g);

    GradSet out(g.vertex_count());
    double value = loss_msdf_reg_open(g, m, 1.0, 1.0, out);
    CHECK(value == doctest::Approx(1.625).epsilon(1e-14)); // huber(0.5) + huber(2)

    // d value / d m0 = huber'(0.5) * 0.5 + huber'(2) * 0.5
    CHECK(out.msdf[0] == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(out.msdf[1] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(out.msdf[2] == 0.0); // discarded vertex contributes nothing
    CHECK(out.msdf[3] == doctest::Approx(0.5).epsilon(1e-12));
    for (int i = 0; i < 4; ++i) {
        CHECK(out.sdf[i] == 0.0);
        CHECK(norm(out.offsets[i]) == 0.0);
    }

    // weight scales gradients, not the reported value
    GradSet out2(g.vertex_count());
    double v2 = loss_msdf_reg_open(g, m, 3.0, 1.0, out2);
    CHECK(v2 == doctest::Approx(value));
    CHECK(out2.msdf[0] == doctest::Approx(3.0 * out.msdf[0]));
}

TEST_CASE("open regulariser: fd through re-extraction with the clip frozen") {
    TetGrid g = testutil::random_grid(3, 55, true);
    ExtractedMesh m = extract_gshell(g);
    GradSet out(g.vertex_count());
    loss_msdf_reg_open(g, m, 1.0, 1.0, out);

    // freeze the vertex set: recompute nu' by re-projection on the watertight
    // mesh of the same grid and sum huber over the vertices the shell kept
    auto value_of = [&](const TetGrid& gg) {
        ExtractedMesh mm = extract_gshell(gg);
        REQUIRE(mm.watertight_vertex_count == m.watertight_vertex_count);
        double s = 0.0;
        for (size_t v = 0; v < mm.watertight_vertex_count; ++v)
            if (mm.info[v].projected_msdf >= 0.0) s += huber(mm.info[v].projected_msdf);
        return s;
    };

    const double h = 1e-6;
    int checked = 0;
    for (size_t lane = 0; lane < g.vertex_count(); lane += 3) {
        if (out.msdf[lane] == 0.0) continue;
        TetGrid gp = g, gm = g;
        gp.msdf[lane] += h;
        gm.msdf[lane] -= h;
        double fd = (value_of(gp) - value_of(gm)) / (2 * h);
        CHECK(out.msdf[lane] == doctest::Approx(fd).epsilon(1e-4));
        ++checked;
    }
    CHECK(checked > 0);
}

TEST_CASE("close regulariser: value pins to huber(-eps) per boundary vertex") {
    TetGrid g = build_uniform_tet_grid(8, Box3{{-1, -1, -1}, {1, 1, 1}});
    sample_fields(g, make_shape_field("hemisphere", 0.6));
    ExtractedMesh m = extract_gshell(g);
    size_t nb = m.vertex_count() - m.watertight_vertex_count;
    REQUIRE(nb > 0);

    GradSet out(g.vertex_count());
    double eps = 1e-3;
    double value = loss_msdf_reg_close(g, m, eps, 1.0, 1.0, out);
    CHECK(value / double(nb) == doctest::Approx(huber(-eps)).epsilon(1e-6));

    double msdf_mag = 0.0;
    for (size_t i = 0; i < g.vertex_count(); ++i) {
        CHECK(out.sdf[i] == 0.0);
        CHECK(norm(out.offsets[i]) == 0.0);
        msdf_mag += std::fabs(out.msdf[i]);
    }
    CHECK(msdf_mag > 0.0);

    // the gradient pulls the boundary msdf upward: a small ascent step must
    // increase the interpolated nu' at the boundary, i.e. decrease the loss
    TetGrid g2 = g;
    for (size_t i = 0; i < g.vertex_count(); ++i) g2.msdf[i] -= 1e-3 * out.msdf[i];
    ExtractedMesh m2 = extract_gshell(g2);
    GradSet dump(g.vertex_count());
    double v2 = loss_msdf_reg_close(g2, m2, eps, 1.0, 1.0, dump);
    size_t nb2 = m2.vertex_count() - m2.watertight_vertex_count;
    CHECK(v2 / double(std::max<size_t>(nb2, 1)) < value / double(nb));
}

TEST_CASE("sdf sign-consistency: closed forms and fd") {
    TetGrid uniform = single_tet({10, 10, 10, 10}, {1, 1, 1, 1});
    GradSet out(4);
    double v = loss_sdf_reg(uniform, 1.0, out);
    // per edge: 2 * softplus(10) - 2 * 10 = 2 * log(1 + e^-10), six edges
    CHECK(v == doctest::Approx(6 * 9.0797828e-5).epsilon(1e-6));
    CHECK(v == doctest::Approx(sdf_reg_ref(uniform)).epsilon(1e-14));

    TetGrid mixed = single_tet({10, -10, 10, 10}, {1, 1, 1, 1});
    GradSet out2(4);
    double v2 = loss_sdf_reg(mixed, 1.0, out2);
    // the (10,-10) edges each cost ~20: certainty about a sign disagreement
    CHECK(v2 == doctest::Approx(sdf_reg_ref(mixed)).epsilon(1e-14));
    CHECK(v2 == doctest::Approx(3 * 20.0000907978 + 3 * 9.0797828e-5).epsilon(1e-6));

    // fd at |s| = 10: no sign boundary nearby, the loss is smooth
    const double h = 1e-6;
    for (int lane = 0; lane < 4; ++lane) {
        TetGrid gp = mixed, gm = mixed;
        gp.sdf[lane] += h;
        gm.sdf[lane] -= h;
        double fd = (sdf_reg_ref(gp) - sdf_reg_ref(gm)) / (2 * h);
        CHECK(out2.sdf[lane] == doctest::Approx(fd).epsilon(1e-5));
        CHECK(out2.msdf[lane] == 0.0);
        CHECK(norm(out2.offsets[lane]) == 0.0);
    }

    // weight scales the gradient only
    GradSet out3(4);
    double v3 = loss_sdf_reg(mixed, 2.5, out3);
    CHECK(v3 == doctest::Approx(v2));
    CHECK(out3.sdf[0] == doctest::Approx(2.5 * out2.sdf[0]));
}

TEST_CASE("eikonal: exact values for linear fields") {
    TetGrid g = build_uniform_tet_grid(4, Box3{{-1, -1, -1}, {1, 1, 1}});
    g.msdf.assign(g.vertex_count(), 1.0);

    // unit-gradient plane: loss is zero
    for (size_t i = 0; i < g.vertex_count(); ++i)
        g.sdf[i] = g.canonical_positions[i].x - 0.25;
    ExtractedMesh m = extract_gshell(g);
    REQUIRE(!m.empty());
    GradSet out(g.vertex_count());
    CHECK(loss_eikonal(g, m, 1.0, out) == doctest::Approx(0.0).epsilon(1e-18));

    // |grad| = 2 everywhere: loss is exactly 1
    for (size_t i = 0; i < g.vertex_count(); ++i)
        g.sdf[i] = 2.0 * g.canonical_positions[i].x + 0.37;
    ExtractedMesh m2 = extract_gshell(g);
    REQUIRE(!m2.empty());
    GradSet out2(g.vertex_count());
    double v = loss_eikonal(g, m2, 1.0, out2);
    CHECK(v == doctest::Approx(1.0).epsilon(1e-12));

    // fd: the loss reads the grid only through per-tet gradients, and the
    // crossing pattern is stable under the probe
    auto eik_of = [&](const TetGrid& gg) {
        ExtractedMesh mm = extract_gshell(gg);
        REQUIRE(mm.vertex_count() == m2.vertex_count());
        GradSet dump(gg.vertex_count());
        return loss_eikonal(gg, mm, 1.0, dump);
    };
    const double h = 1e-6;
    int checked = 0;
    for (size_t lane = 0; lane < g.vertex_count(); lane += 11) {
        if (out2.sdf[lane] == 0.0) continue;
        TetGrid gp = g, gm = g;
        gp.sdf[lane] += h;
        gm.sdf[lane] -= h;
        double fd = (eik_of(gp) - eik_of(gm)) / (2 * h);
        CHECK(out2.sdf[lane] == doctest::Approx(fd).epsilon(1e-4));
        ++checked;
    }
    CHECK(checked > 0);

    for (size_t i = 0; i < g.vertex_count(); ++i) {
        CHECK(out2.msdf[i] == 0.0);
        CHECK(norm(out2.offsets[i]) == 0.0);
    }
}

TEST_CASE("surface sampling: points lie on the mesh, area-weighted") {
    TetGrid g = build_uniform_tet_grid(8, Box3{{-1, -1, -1}, {1, 1, 1}});
    sample_fields(g, make_shape_field("sphere", 0.6));
    ExtractedMesh m = extract_watertight(g);
    Rng rng = Rng::stream(2, "test.sample_surface");
    std::vector<Vec3> pts = sample_surface(m, 500, rng);
    REQUIRE(pts.size() == 500);
    TriBvh bvh(m.positions, m.faces);
    for (const Vec3& p : pts) CHECK(bvh.closest(p).dist2 < 1e-20);
}

TEST_CASE("chamfer: forward term, gradients, and sentinel") {
    TetGrid g = build_uniform_tet_grid(5, Box3{{-1, -1, -1}, {1, 1, 1}});
    sample_fields(g, make_shape_field("sphere", 0.6));
    Rng trng = Rng::stream(7, "test.chamfer_targets");
    std::vector<Vec3> target;
    for (int i = 0; i < 60; ++i) target.push_back(trng.unit_vector() * 0.7);
    PointKd kd(target);

    ExtractedMesh m = extract_gshell(g);
    GradSet out(g.vertex_count());
    Rng rng = Rng::stream(8, "test.chamfer_rng");
    ChamferResult r = loss_chamfer(g, m, target, kd, 0, rng, 1.0, VjpFlags{}, out);
    CHECK(r.backward == 0.0);
    CHECK(r.value == doctest::Approx(r.forward));
    CHECK(r.forward == doctest::Approx(chamfer_forward(m, target)).epsilon(1e-14));

    // fd on the forward term through re-extraction (samples = 0 keeps the
    // stochastic backward term out of the difference)
    auto fwd_of = [&](const TetGrid& gg) { return chamfer_forward(extract_gshell(gg), target); };
    const double h = 1e-6;
    int checked = 0;
    double worst = 0.0;
    for (size_t lane = 0; lane < g.vertex_count(); ++lane) {
        if (std::fabs(out.sdf[lane]) < 1e-4) continue;
        TetGrid gp = g, gm = g;
        gp.sdf[lane] += h;
        gm.sdf[lane] -= h;
        double fd = (fwd_of(gp) - fwd_of(gm)) / (2 * h);
        worst = std::max(worst, std::fabs(fd - out.sdf[lane]) / std::max(1e-9, std::fabs(fd)));
        ++checked;
    }
    INFO("lanes " << checked << " worst rel " << worst);
    CHECK(checked > 3);
    CHECK(worst < 1e-3);

    // empty mesh: sentinel value, zero gradient
    TetGrid empty = g;
    for (double& mm : empty.msdf) mm = -1.0;
    ExtractedMesh me = extract_gshell(empty);
    REQUIRE(me.empty());
    GradSet oute(g.vertex_count());
    ChamferResult re = loss_chamfer(empty, me, target, kd, 100, rng, 1.0, VjpFlags{}, oute);
    Box3 bb{target[0], target[0]};
    for (const Vec3& t : target) bb.expand(t);
    CHECK(re.value == doctest::Approx(10.0 * norm(bb.extent())).epsilon(1e-12));
    for (size_t i = 0; i < g.vertex_count(); ++i) {
        CHECK(oute.sdf[i] == 0.0);
        CHECK(oute.msdf[i] == 0.0);
    }

    CHECK_THROWS_AS(chamfer_forward(m, {}), InvalidInput);
}

TEST_CASE("chamfer: backward term averages sample-to-target distances") {
    TetGrid g = build_uniform_tet_grid(5, Box3{{-1, -1, -1}, {1, 1, 1}});
    sample_fields(g, make_shape_field("sphere", 0.6));
    ExtractedMesh m = extract_gshell(g);
    Rng trng = Rng::stream(12, "test.chamfer_bwd_targets");
    std::vector<Vec3> target;
    for (int i = 0; i < 50; ++i) target.push_back(trng.unit_vector() * 0.65);
    PointKd kd(target);

    GradSet out(g.vertex_count());
    Rng r1 = Rng::stream(99, "test.chamfer_bwd");
    ChamferResult res = loss_chamfer(g, m, target, kd, 400, r1, 1.0, VjpFlags{}, out);

    Rng r2 = Rng::stream(99, "test.chamfer_bwd");
    std::vector<Vec3> pts = sample_surface(m, 400, r2);
    double expect = 0.0;
    for (const Vec3& p : pts) expect += std::sqrt(kd.nearest(p).second);
    expect /= double(pts.size());
    CHECK(res.backward == doctest::Approx(expect).epsilon(1e-12));

    ChamferResult metric = chamfer_metric(m, target, 400, r2);
    CHECK(metric.forward == doctest::Approx(res.forward).epsilon(1e-12));
    CHECK(metric.value > 0.0);
}
