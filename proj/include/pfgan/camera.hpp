// Copyright 2026 pfgan contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Camera model and pose geometry.
//
// Axis convention (asserted in tests): right-handed world, +y is up, the
// canonical front view looks from +z toward the origin. A pose is a point on
// a fixed-radius orbit sphere: azimuth rotates about +y (0 = front, positive
// toward +x), elevation lifts above the horizontal plane. The camera always
// looks at the origin with the up vector taken from world-up.

#include "pfgan/tensor.hpp"

#include <Eigen/Dense>

#include <cstdint>

namespace pfgan::camera {

struct CameraPose {
    double azimuth = 0.0;    // radians, normalized to [-pi, pi)
    double elevation = 0.0;  // radians, must lie in (-pi/2, pi/2)

    CameraPose() = default;
    CameraPose(double az, double el);
};

struct CameraIntrinsics {
    double field_of_view = 0.0;   // radians, full angle, square image
    int64_t image_resolution = 0; // pixels per side
    double near = 0.0;            // world units
    double far = 0.0;
    double orbit_radius = 0.0;    // camera distance from the origin

    void validate() const;
};

// Desk-scale defaults for the face-like synthetic scenes; every field is
// config-exposed.
CameraIntrinsics default_intrinsics(int64_t resolution = 64);

struct RayBundle {
    Tensord origins;     // [res*res, 3]
    Tensord directions;  // [res*res, 3], unit norm
    int64_t resolution = 0;
};

struct CameraFrame {
    Eigen::Vector3d center;
    Eigen::Vector3d right;
    Eigen::Vector3d up;
    Eigen::Vector3d forward;  // unit vector toward the origin
};

CameraFrame camera_frame(const CameraPose& pose, const CameraIntrinsics& intr);

// World-from-camera rigid transform; camera-space axes are (right, up, forward).
Eigen::Matrix4d pose_to_extrinsics(const CameraPose& pose, const CameraIntrinsics& intr);

// Ray through the continuous image point (ix, iy) in [0, res]^2, measured from
// the top-left corner; (res/2, res/2) is the optical axis. Pixel (px, py)
// centers sit at (px + 0.5, py + 0.5).
void ray_at(const CameraFrame& frame, const CameraIntrinsics& intr, double ix, double iy,
            Eigen::Vector3d& origin, Eigen::Vector3d& dir);

RayBundle generate_rays(const CameraPose& pose, const CameraIntrinsics& intr);

// Reflection across the yz-plane: azimuth negates, elevation is unchanged.
CameraPose mirror_pose(const CameraPose& pose);

struct WarpResult {
    Tensord image;  // [res*res, C], zeros where invalid
    Tensord mask;   // [res*res, 1], 1 where a valid correspondence exists
};

// Inverse-sampling warp into the target view: each target pixel is
// back-projected with `target_depth` (distance along its own ray), transformed
// into the source camera and bilinearly sampled from `source_image`. Pixels
// are invalid when they leave the source frustum or when either view's alpha
// (if provided, [res*res, 1]) falls below 0.5. Depth maps hold ray-parameter
// distance, matching the renderer's expected-depth output.
WarpResult warp_image(const Tensord& source_image, const Tensord& target_depth,
                      const CameraPose& source_pose, const CameraPose& target_pose,
                      const CameraIntrinsics& intr, const Tensord* source_alpha = nullptr,
                      const Tensord* target_alpha = nullptr);

}  // namespace pfgan::camera
