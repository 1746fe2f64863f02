#pragma once
// Ground-plane inverse perspective mapping: homographies from top-view pixels
// to camera pixels, warping and merging several tilted views.
//
// World frame: the table is the plane Z = 0, Z points up. Top-view pixel (u,v)
// sits at X = origin_x + u*mpp, Y = origin_y - v*mpp.

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <json.hpp>
#include <vector>

#include "simip/raster.hpp"

namespace simip {

struct CameraModel {
    double fx = 1.0, fy = 1.0;  // pixels
    double cx = 0.0, cy = 0.0;  // principal point, pixels
    Eigen::Matrix3d R = Eigen::Matrix3d::Identity();  // world -> camera
    Eigen::Vector3d t = Eigen::Vector3d::Zero();      // meters
    int width = 0, height = 0;

    void check() const;
    Eigen::Matrix3d K() const;
    // Camera at `eye` looking at `target`; `up` is the world direction shown upwards in the image.
    static CameraModel look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, const Eigen::Vector3d& up,
                               double f, int width, int height);
    // Pixel of a world point; false when it lies behind the camera.
    bool project(const Eigen::Vector3d& world, Eigen::Vector2d& pixel) const;

    nlohmann::json to_json() const;
    static CameraModel from_json(const nlohmann::json& j);
};

struct TopViewSpec {
    double meters_per_pixel = 0.001;
    int width = 0, height = 0;
    double origin_x = 0.0, origin_y = 0.0;

    void check() const;
    Eigen::Matrix3d A() const;  // top-view pixel -> world (X,Y,1)
    nlohmann::json to_json() const;
    static TopViewSpec from_json(const nlohmann::json& j);
};

// Top-view pixel -> source pixel. Throws InvalidArgument for a degenerate pose.
Eigen::Matrix3d ground_homography(const CameraModel& cam, const TopViewSpec& spec);

struct MergeResult {
    Image image;
    Mask coverage;                 // seen by at least one camera
    std::vector<int> view_count;   // cameras per pixel, row-major
};

// Bilinear warp of each view; coverage-weighted average where views overlap.
// Source samples whose 2x2 neighborhood leaves the image are invalid.
MergeResult remap_and_merge(const std::vector<Image>& images, const std::vector<CameraModel>& cams,
                            const TopViewSpec& spec);

using GroundTexture = std::function<std::array<std::uint8_t, 3>(double x, double y)>;

// Synthetic view of a textured ground plane, `supersample`^2 rays per pixel.
Image render_ground_plane(const CameraModel& cam, const GroundTexture& texture, int supersample = 1);

}  // namespace simip
