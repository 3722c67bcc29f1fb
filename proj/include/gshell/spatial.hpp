#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "gshell/vec3.hpp"

namespace gshell {

// Closest point on triangle (a,b,c) to p. If `bary` is non-null it receives
// the barycentric weights of the result with respect to (a,b,c).
Vec3 closest_point_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c,
                            Vec3* bary = nullptr);

// Static median-split BVH over a triangle soup; point-to-surface queries.
class TriBvh {
public:
    struct Hit {
        uint32_t face = 0;
        Vec3 point;  // closest point on the surface
        Vec3 bary;   // barycentric weights within `face`
        double dist2 = 0.0;
    };

    TriBvh() = default;
    TriBvh(const std::vector<Vec3>& positions, const std::vector<std::array<uint32_t, 3>>& faces);

    bool empty() const { return nodes_.empty(); }
    Hit closest(const Vec3& p) const;

private:
    struct Node {
        Box3 box;
        int32_t left = -1, right = -1; // children, or -1 for leaves
        uint32_t begin = 0, count = 0; // leaf range into order_
    };
    int32_t build(uint32_t begin, uint32_t end, std::vector<Vec3>& centroids);

    std::vector<Node> nodes_;
    std::vector<uint32_t> order_;
    std::vector<std::array<Vec3, 3>> tris_;
    std::vector<uint32_t> face_ids_;
};

// kd-tree over a fixed point set; exact nearest neighbour.
class PointKd {
public:
    PointKd() = default;
    explicit PointKd(std::vector<Vec3> points);

    bool empty() const { return points_.empty(); }
    size_t size() const { return points_.size(); }
    const std::vector<Vec3>& points() const { return points_; }

    // (index into the original point list, squared distance)
    std::pair<uint32_t, double> nearest(const Vec3& q) const;

private:
    struct Node {
        int axis = 0;
        double split = 0.0;
        int32_t left = -1, right = -1;
        uint32_t begin = 0, count = 0;
    };
    int32_t build(uint32_t begin, uint32_t end);
    void search(int32_t node, const Vec3& q, uint32_t& best, double& best_d2) const;

    std::vector<Node> nodes_;
    std::vector<uint32_t> order_;
    std::vector<Vec3> points_;
    int32_t root_ = -1;
};

} // namespace gshell
