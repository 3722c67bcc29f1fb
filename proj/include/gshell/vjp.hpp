#pragma once

#include <vector>

#include "gshell/grid.hpp"
#include "gshell/mesh.hpp"

namespace gshell {

struct GradSet {
    std::vector<double> sdf;
    std::vector<double> msdf;
    std::vector<Vec3> offsets;

    explicit GradSet(size_t n = 0) : sdf(n, 0.0), msdf(n, 0.0), offsets(n, Vec3{}) {}
    void resize(size_t n) {
        sdf.assign(n, 0.0);
        msdf.assign(n, 0.0);
        offsets.assign(n, Vec3{});
    }
};

// Per-loss gradient masking: the msdf regularizers stop gradients to sdf and
// offsets, the sdf losses never touch msdf, and so on.
struct VjpFlags {
    bool to_sdf = true;
    bool to_msdf = true;
    bool to_offsets = true;
};

// Reverse-mode pullback of sum_v <cotangent_v, position_v> through the
// extraction formulas: crossing vertices chain through alpha(s) and the
// endpoint positions; boundary vertices additionally chain through beta(nu')
// and both underlying crossing vertices (two nested quotient rules). Clamped
// coefficients contribute zero derivative. Gradients accumulate into `out`
// (caller-sized to the grid). Throws InvalidInput if the mesh was not
// extracted from this exact grid state.
void vjp_accumulate(const TetGrid& grid, const ExtractedMesh& mesh,
                    const std::vector<Vec3>& cotangents, VjpFlags flags, GradSet& out);

GradSet vjp(const TetGrid& grid, const ExtractedMesh& mesh, const std::vector<Vec3>& cotangents,
            VjpFlags flags = {});

// Pullback of per-watertight-vertex cotangents on nu' = (1-alpha) nu_a +
// alpha nu_b. The msdf path uses the interpolation weights; the sdf path (off
// for the stop-gradient losses) chains through alpha.
void nu_pullback_accumulate(const TetGrid& grid, const ExtractedMesh& mesh,
                            const std::vector<double>& nu_cotangents, VjpFlags flags,
                            GradSet& out);

struct GradCheckReport {
    int trials = 0;
    int probes = 0;
    int failures = 0;
    int skipped = 0; // probes whose re-extraction changed the vertex set
    double worst_rel = 0.0;
    double tolerance = 0.0;
    bool passed() const { return failures == 0 && probes > 0; }
};

// Central finite-difference validation of the extraction pullback on random
// grids. Field values are bounded away from zero so the crossing pattern is
// stable under the probe step; each trial probes sdf, msdf and offset lanes
// of a random cotangent projection.
GradCheckReport gradcheck_random(int resolution, int trials, uint64_t seed,
                                 double fd_step = 1e-5, double tolerance = 1e-4,
                                 int threads = 1);

} // namespace gshell
