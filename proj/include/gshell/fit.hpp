#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "gshell/grid.hpp"
#include "gshell/losses.hpp"

namespace gshell {

// Gradient-descent reconstruction of a G-Shell from a target point cloud.
// The msdf regulariser weights follow the resolution scaling
// rho = (resolution / 64)^3 when scale_msdf_weights is on, so the defaults
// transfer across grid sizes.
struct FitConfig {
    uint32_t iterations = 1000;

    double lr_sdf = 3e-3;
    double lr_msdf = 0.15;
    double lr_offsets = 0.15;
    double lr_decay = 0.0002; // lr(t) = lr * 10^(-lr_decay * t)
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.99;
    double adam_eps = 1e-8;

    double gamma_chamfer = 1.0;
    double gamma_open = 3e-6;  // divided by rho (see above)
    double gamma_close = 1e-6; // divided by rho
    // The hole-opening push runs for this leading fraction of the iterations
    // and is then switched off. With adaptive moments the push advances at
    // full step size however small gamma_open is, so left on it drags every
    // interior mask value to the sign boundary and the surface sizzles with
    // pinholes; once it stops, the boundary regulariser heals the spurious
    // rims while the data term keeps the real ones open.
    double open_phase = 0.2;
    // From this fraction of the run onward, boundary loops with at most
    // heal_max_loop_edges cut segments get an extra closing pull of
    // close_boost times the base weight. Pinholes left behind by the opening
    // push are a handful of segments whatever the resolution, while an
    // intended opening scales with it, so the boost heals the debris quickly
    // yet can never drag a genuine rim shut — a single global boost has no
    // workable value for both: healing needs it far above the sampling-noise
    // floor, and any pull that strong also beats the data term's defence of
    // a real rim, which only reacts once the rim has already sunk inward.
    //
    // The gap between open_phase and heal_phase is deliberate: right after
    // the opening push stops, a genuine opening is still a lace of small
    // holes that loop size cannot tell apart from debris. Left alone with
    // the data term, the lace merges into one long rim and much of the
    // debris shrinks; only then is short-loop healing safe.
    double heal_phase = 0.6;
    uint32_t heal_max_loop_edges = 16;
    double close_boost = 1000.0;
    bool scale_msdf_weights = true;
    // The sign-consistency BCE sees the stored sdf values directly. They live
    // at world scale (|s| ~ 1e-1), far inside the logistic's linear region,
    // so the raw sum is ~0.7 per edge and its gradient reaches every vertex;
    // the weight keeps it a tie-break against the (sparse) data term rather
    // than a competitor.
    double gamma_sdf_reg = 2e-5;
    double gamma_eikonal = 0.01;

    double eps_close = 1e-3; // target margin of the boundary regulariser
    double huber_delta = 1.0;
    uint32_t chamfer_samples = 20000; // surface samples per iteration

    uint64_t seed = 0;
    int threads = 1;

    bool optimize_sdf = true;
    bool optimize_msdf = true; // false freezes msdf (watertight ablation)
    bool optimize_offsets = true;

    uint32_t log_every = 0; // print progress every n iterations (0 = silent)
};

struct FitIterStats {
    uint32_t iter = 0;
    double total = 0.0;
    double chamfer = 0.0; // symmetric estimate, unweighted
    double open_reg = 0.0;
    double close_reg = 0.0;
    double sdf_reg = 0.0;
    double eikonal = 0.0;
    double lr_scale = 1.0;
    uint32_t vertices = 0;
    uint32_t boundary_vertices = 0;
    uint32_t faces = 0;
};

struct FitReport {
    std::vector<FitIterStats> history;
    uint32_t best_iter = 0;
    double best_chamfer = std::numeric_limits<double>::infinity();
    double final_chamfer = std::numeric_limits<double>::infinity();
    double wall_seconds = 0.0;
};

// Standard starting point: sphere sdf of radius min-extent/4 centered in the
// box, msdf ~ U(-0.01, 0.99) (mostly closed with random pinholes so boundary
// gradients exist from the start), zero offsets.
void init_for_fitting(TetGrid& grid, uint64_t seed);

// Runs the optimisation and returns the iterate with the best symmetric
// Chamfer estimate. Throws NumericFailure (naming term and iteration) if a
// loss or parameter turns non-finite.
TetGrid fit_to_points(TetGrid grid, const std::vector<Vec3>& target, const FitConfig& cfg,
                      FitReport* report = nullptr);

} // namespace gshell
