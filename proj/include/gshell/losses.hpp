#pragma once

#include <cstdint>
#include <vector>

#include "gshell/grid.hpp"
#include "gshell/mesh.hpp"
#include "gshell/rng.hpp"
#include "gshell/spatial.hpp"
#include "gshell/vjp.hpp"

namespace gshell {

// Each loss returns its own (unweighted) value and accumulates
// weight * d(value)/d(parameters) into `out`, honouring the per-loss
// stop-gradient contracts documented below.

double huber(double x, double delta = 1.0);
double huber_grad(double x, double delta = 1.0);

// Sum of huber(nu') over crossing vertices with nu' >= 0. Shrinks the open
// surface; gradients flow into msdf only (interpolation weights frozen).
double loss_msdf_reg_open(const TetGrid& grid, const ExtractedMesh& mesh, double weight,
                          double huber_delta, GradSet& out);

// Sum over boundary vertices of huber(nu'(u') - eps) with the vertex location
// frozen, so the value is huber(-eps) per vertex and the gradient pushes the
// interpolated msdf at the boundary upward (holes tend to close). Gradients
// flow into msdf only.
//
// With max_loop_edges > 0 the term is restricted to boundary vertices lying
// on short rims: connected components of the cut-segment graph with at most
// that many segments. Pinholes from optimisation noise are a handful of
// segments while an intended opening scales with the grid resolution, so the
// restriction heals the former at any weight without ever pulling on the
// latter. short_loops (optional) receives the number of such components.
double loss_msdf_reg_close(const TetGrid& grid, const ExtractedMesh& mesh, double eps,
                           double weight, double huber_delta, GradSet& out,
                           uint32_t max_loop_edges = 0, uint32_t* short_loops = nullptr);

// Binary cross-entropy sign-consistency over all unique grid edges:
// H(sigma(s_i), [s_j >= 0]) + H(sigma(s_j), [s_i >= 0]) summed per edge.
// Discourages isolated sign islands; gradients into sdf (targets detached).
double loss_sdf_reg(const TetGrid& grid, double weight, GradSet& out);

// Mean over extracted vertices of (|grad s| - 1)^2, where grad s is the
// constant per-tet gradient of the vertex's source tet. Gradients into sdf
// only (tet geometry detached). Returns 0 on an empty mesh. Vertices whose
// source tet has collapsed under deformation (effective volume below 1e-3 of
// canonical) are excluded from the mean and tallied in degenerate_skipped:
// their 1/volume gradient is numerically meaningless.
double loss_eikonal(const TetGrid& grid, const ExtractedMesh& mesh, double weight, GradSet& out,
                    uint32_t* degenerate_skipped = nullptr);

struct ChamferResult {
    double value = 0.0;     // forward + backward
    double forward = 0.0;   // mean over target points of distance to the mesh
    double backward = 0.0;  // mean over surface samples of distance to the target
};

// Symmetric point-cloud <-> surface distance (plain L2 means). The backward
// term draws `samples` area-weighted surface points. Gradients flow through
// the mesh vertex positions into sdf/msdf/offsets via the extraction
// pullback; the sampling measure and the correspondences are detached. An
// empty mesh yields the sentinel value 10 * diagonal(target bbox) with zero
// gradient so a degenerate iterate is heavily penalised but finite.
ChamferResult loss_chamfer(const TetGrid& grid, const ExtractedMesh& mesh,
                           const std::vector<Vec3>& target, const PointKd& target_kd,
                           uint32_t samples, Rng& rng, double weight, VjpFlags flags,
                           GradSet& out);

// Evaluation-only variants (no gradients).
double chamfer_forward(const ExtractedMesh& mesh, const std::vector<Vec3>& target);
ChamferResult chamfer_metric(const ExtractedMesh& mesh, const std::vector<Vec3>& target,
                             uint32_t samples, Rng& rng);

// Area-weighted surface samples; returns positions (used by metrics and the
// backward Chamfer term).
std::vector<Vec3> sample_surface(const ExtractedMesh& mesh, uint32_t samples, Rng& rng);

} // namespace gshell
