#include "gshell/spatial.hpp"

#include <algorithm>
#include <limits>

namespace gshell {

Vec3 closest_point_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c,
                            Vec3* bary) {
    // region walk over the barycentric decomposition of the plane
    Vec3 ab = b - a, ac = c - a, ap = p - a;
    double d1 = dot(ab, ap), d2 = dot(ac, ap);
    if (d1 <= 0 && d2 <= 0) {
        if (bary) *bary = {1, 0, 0};
        return a;
    }
    Vec3 bp = p - b;
    double d3 = dot(ab, bp), d4 = dot(ac, bp);
    if (d3 >= 0 && d4 <= d3) {
        if (bary) *bary = {0, 1, 0};
        return b;
    }
    double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) {
        double t = (d1 - d3) == 0 ? 0.0 : d1 / (d1 - d3);
        if (bary) *bary = {1 - t, t, 0};
        return a + ab * t;
    }
    Vec3 cp = p - c;
    double d5 = dot(ab, cp), d6 = dot(ac, cp);
    if (d6 >= 0 && d5 <= d6) {
        if (bary) *bary = {0, 0, 1};
        return c;
    }
    double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) {
        double t = (d2 - d6) == 0 ? 0.0 : d2 / (d2 - d6);
        if (bary) *bary = {1 - t, 0, t};
        return a + ac * t;
    }
    double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
        double denom = (d4 - d3) + (d5 - d6);
        double t = denom == 0 ? 0.0 : (d4 - d3) / denom;
        if (bary) *bary = {0, 1 - t, t};
        return b + (c - b) * t;
    }
    double denom = va + vb + vc;
    double v = vb / denom, w = vc / denom;
    if (bary) *bary = {1 - v - w, v, w};
    return a + ab * v + ac * w;
}

// ---------------------------------------------------------------------------
// TriBvh
// ---------------------------------------------------------------------------

static double box_dist2(const Box3& b, const Vec3& p) {
    double d2 = 0;
    const double lo[3] = {b.lo.x, b.lo.y, b.lo.z};
    const double hi[3] = {b.hi.x, b.hi.y, b.hi.z};
    const double q[3] = {p.x, p.y, p.z};
    for (int k = 0; k < 3; ++k) {
        double d = 0;
        if (q[k] < lo[k]) d = lo[k] - q[k];
        else if (q[k] > hi[k]) d = q[k] - hi[k];
        d2 += d * d;
    }
    return d2;
}

TriBvh::TriBvh(const std::vector<Vec3>& positions,
               const std::vector<std::array<uint32_t, 3>>& faces) {
    tris_.reserve(faces.size());
    face_ids_.reserve(faces.size());
    std::vector<Vec3> centroids;
    centroids.reserve(faces.size());
    for (uint32_t f = 0; f < faces.size(); ++f) {
        const auto& t = faces[f];
        std::array<Vec3, 3> tri = {positions[t[0]], positions[t[1]], positions[t[2]]};
        tris_.push_back(tri);
        face_ids_.push_back(f);
        centroids.push_back((tri[0] + tri[1] + tri[2]) / 3.0);
    }
    order_.resize(tris_.size());
    for (uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
    if (!tris_.empty()) build(0, uint32_t(tris_.size()), centroids);
}

int32_t TriBvh::build(uint32_t begin, uint32_t end, std::vector<Vec3>& centroids) {
    Node node;
    for (uint32_t i = begin; i < end; ++i)
        for (const Vec3& v : tris_[order_[i]]) node.box.expand(v);
    int32_t id = int32_t(nodes_.size());
    nodes_.push_back(node);
    uint32_t n = end - begin;
    if (n <= 4) {
        nodes_[id].begin = begin;
        nodes_[id].count = n;
        return id;
    }
    Vec3 ext = node.box.extent();
    int axis = 0;
    if (ext.y > ext.x) axis = 1;
    if (ext.z > (axis == 0 ? ext.x : ext.y)) axis = 2;
    uint32_t mid = begin + n / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](uint32_t a, uint32_t b) {
                         return centroids[a][axis] < centroids[b][axis];
                     });
    int32_t l = build(begin, mid, centroids);
    int32_t r = build(mid, end, centroids);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
}

TriBvh::Hit TriBvh::closest(const Vec3& p) const {
    Hit best;
    best.dist2 = std::numeric_limits<double>::infinity();
    if (nodes_.empty()) return best;

    // explicit stack ordered by child proximity
    int32_t stack[128];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        int32_t ni = stack[--top];
        const Node& node = nodes_[ni];
        if (box_dist2(node.box, p) >= best.dist2) continue;
        if (node.left < 0) {
            for (uint32_t i = node.begin; i < node.begin + node.count; ++i) {
                const auto& tri = tris_[order_[i]];
                Vec3 bc;
                Vec3 q = closest_point_triangle(p, tri[0], tri[1], tri[2], &bc);
                double d2 = norm2(q - p);
                if (d2 < best.dist2) {
                    best.dist2 = d2;
                    best.point = q;
                    best.bary = bc;
                    best.face = face_ids_[order_[i]];
                }
            }
            continue;
        }
        double dl = box_dist2(nodes_[node.left].box, p);
        double dr = box_dist2(nodes_[node.right].box, p);
        // push the farther child first so the nearer one is explored next
        if (dl <= dr) {
            if (dr < best.dist2) stack[top++] = node.right;
            if (dl < best.dist2) stack[top++] = node.left;
        } else {
            if (dl < best.dist2) stack[top++] = node.left;
            if (dr < best.dist2) stack[top++] = node.right;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// PointKd
// ---------------------------------------------------------------------------

PointKd::PointKd(std::vector<Vec3> points) : points_(std::move(points)) {
    order_.resize(points_.size());
    for (uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
    if (!points_.empty()) root_ = build(0, uint32_t(points_.size()));
}

int32_t PointKd::build(uint32_t begin, uint32_t end) {
    Node node;
    int32_t id;
    uint32_t n = end - begin;
    if (n <= 8) {
        node.begin = begin;
        node.count = n;
        id = int32_t(nodes_.size());
        nodes_.push_back(node);
        return id;
    }
    Box3 box;
    for (uint32_t i = begin; i < end; ++i) box.expand(points_[order_[i]]);
    Vec3 ext = box.extent();
    int axis = 0;
    if (ext.y > ext.x) axis = 1;
    if (ext.z > (axis == 0 ? ext.x : ext.y)) axis = 2;
    uint32_t mid = begin + n / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](uint32_t a, uint32_t b) { return points_[a][axis] < points_[b][axis]; });
    node.axis = axis;
    node.split = points_[order_[mid]][axis];
    id = int32_t(nodes_.size());
    nodes_.push_back(node);
    int32_t l = build(begin, mid);
    int32_t r = build(mid, end);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
}

void PointKd::search(int32_t ni, const Vec3& q, uint32_t& best, double& best_d2) const {
    const Node& node = nodes_[ni];
    if (node.left < 0) {
        for (uint32_t i = node.begin; i < node.begin + node.count; ++i) {
            double d2 = norm2(points_[order_[i]] - q);
            if (d2 < best_d2) {
                best_d2 = d2;
                best = order_[i];
            }
        }
        return;
    }
    double delta = q[node.axis] - node.split;
    int32_t near = delta < 0 ? node.left : node.right;
    int32_t far = delta < 0 ? node.right : node.left;
    search(near, q, best, best_d2);
    if (delta * delta < best_d2) search(far, q, best, best_d2);
}

std::pair<uint32_t, double> PointKd::nearest(const Vec3& q) const {
    uint32_t best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    if (root_ >= 0) search(root_, q, best, best_d2);
    return {best, best_d2};
}

} // namespace gshell
