// Copyright 2026 pfgan contributors
// SPDX-License-Identifier: Apache-2.0
#include "pfgan/camera.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pfgan::camera {

namespace {
constexpr double kPi = std::numbers::pi;

double wrap_azimuth(double az) {
    if (az >= -kPi && az < kPi) return az;  // exact passthrough when already normalized
    double a = std::fmod(az + kPi, 2.0 * kPi);
    if (a < 0) a += 2.0 * kPi;
    return a - kPi;
}
}  // namespace

CameraPose::CameraPose(double az, double el) {
    if (!std::isfinite(az) || !std::isfinite(el))
        throw std::invalid_argument("pfgan: camera: non-finite pose");
    if (!(el > -kPi / 2 && el < kPi / 2))
        throw std::invalid_argument("pfgan: camera: elevation out of (-pi/2, pi/2)");
    azimuth = wrap_azimuth(az);
    elevation = el;
}

void CameraIntrinsics::validate() const {
    if (!(near > 0.0 && near < far))
        throw std::invalid_argument("pfgan: camera: need 0 < near < far");
    if (!(orbit_radius > 0.0)) throw std::invalid_argument("pfgan: camera: orbit_radius <= 0");
    if (!(field_of_view > 0.0 && field_of_view < kPi))
        throw std::invalid_argument("pfgan: camera: fov out of (0, pi)");
    if (image_resolution <= 0) throw std::invalid_argument("pfgan: camera: resolution <= 0");
}

CameraIntrinsics default_intrinsics(int64_t resolution) {
    CameraIntrinsics intr;
    intr.field_of_view = 30.0 * kPi / 180.0;
    intr.image_resolution = resolution;
    intr.near = 2.25;
    intr.far = 3.3;
    intr.orbit_radius = 2.7;
    return intr;
}

CameraFrame camera_frame(const CameraPose& pose, const CameraIntrinsics& intr) {
    intr.validate();
    const double ca = std::cos(pose.azimuth), sa = std::sin(pose.azimuth);
    const double ce = std::cos(pose.elevation), se = std::sin(pose.elevation);
    if (std::fabs(ce) < 1e-9)
        throw std::invalid_argument("pfgan: camera: degenerate elevation (up undefined)");

    CameraFrame f;
    f.center = intr.orbit_radius * Eigen::Vector3d(sa * ce, se, ca * ce);
    f.forward = -f.center.normalized();
    const Eigen::Vector3d world_up(0.0, 1.0, 0.0);
    f.right = f.forward.cross(world_up).normalized();
    f.up = f.right.cross(f.forward);
    return f;
}

Eigen::Matrix4d pose_to_extrinsics(const CameraPose& pose, const CameraIntrinsics& intr) {
    CameraFrame f = camera_frame(pose, intr);
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.block<3, 1>(0, 0) = f.right;
    m.block<3, 1>(0, 1) = f.up;
    m.block<3, 1>(0, 2) = f.forward;
    m.block<3, 1>(0, 3) = f.center;
    return m;
}

void ray_at(const CameraFrame& frame, const CameraIntrinsics& intr, double ix, double iy,
            Eigen::Vector3d& origin, Eigen::Vector3d& dir) {
    const double res = static_cast<double>(intr.image_resolution);
    const double scale = 2.0 * std::tan(intr.field_of_view / 2.0) / res;
    const double u = (ix - res / 2.0) * scale;
    const double v = (res / 2.0 - iy) * scale;
    origin = frame.center;
    dir = (u * frame.right + v * frame.up + frame.forward).normalized();
}

RayBundle generate_rays(const CameraPose& pose, const CameraIntrinsics& intr) {
    CameraFrame f = camera_frame(pose, intr);
    const int64_t res = intr.image_resolution;
    RayBundle b;
    b.resolution = res;
    b.origins = Tensord(res * res, 3);
    b.directions = Tensord(res * res, 3);
    for (int64_t py = 0; py < res; ++py)
        for (int64_t px = 0; px < res; ++px) {
            Eigen::Vector3d o, d;
            ray_at(f, intr, static_cast<double>(px) + 0.5, static_cast<double>(py) + 0.5, o, d);
            int64_t i = py * res + px;
            for (int k = 0; k < 3; ++k) {
                b.origins(i, k) = o[k];
                b.directions(i, k) = d[k];
            }
        }
    return b;
}

CameraPose mirror_pose(const CameraPose& pose) {
    return CameraPose(-pose.azimuth, pose.elevation);
}

WarpResult warp_image(const Tensord& source_image, const Tensord& target_depth,
                      const CameraPose& source_pose, const CameraPose& target_pose,
                      const CameraIntrinsics& intr, const Tensord* source_alpha,
                      const Tensord* target_alpha) {
    intr.validate();
    const int64_t res = intr.image_resolution;
    const int64_t n = res * res;
    const int64_t ch = source_image.cols();
    if (source_image.rows() != n || target_depth.rows() != n || target_depth.cols() != 1)
        throw std::invalid_argument("pfgan: warp_image: resolution mismatch");
    if (source_alpha && (source_alpha->rows() != n || source_alpha->cols() != 1))
        throw std::invalid_argument("pfgan: warp_image: source alpha shape");
    if (target_alpha && (target_alpha->rows() != n || target_alpha->cols() != 1))
        throw std::invalid_argument("pfgan: warp_image: target alpha shape");

    const CameraFrame src = camera_frame(source_pose, intr);
    const CameraFrame dst = camera_frame(target_pose, intr);
    const double scale = 2.0 * std::tan(intr.field_of_view / 2.0) / static_cast<double>(res);

    WarpResult out;
    out.image = Tensord::zeros(n, ch);
    out.mask = Tensord::zeros(n, 1);

    auto sample = [&](const Tensord& img, int64_t c, double sx, double sy) {
        double fx = sx - std::floor(sx), fy = sy - std::floor(sy);
        int64_t x0 = static_cast<int64_t>(std::floor(sx)), y0 = static_cast<int64_t>(std::floor(sy));
        int64_t x1 = fx > 0.0 ? x0 + 1 : x0;
        int64_t y1 = fy > 0.0 ? y0 + 1 : y0;
        double v00 = img(y0 * res + x0, c), v01 = img(y0 * res + x1, c);
        double v10 = img(y1 * res + x0, c), v11 = img(y1 * res + x1, c);
        return (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
    };

    // snap near-integer sample coordinates so the identity warp is exact and
    // edge pixels survive the frustum bounds check
    auto snap = [](double x) {
        double r = std::round(x);
        return std::fabs(x - r) < 1e-7 ? r : x;
    };

    for (int64_t py = 0; py < res; ++py)
        for (int64_t px = 0; px < res; ++px) {
            const int64_t i = py * res + px;
            if (target_alpha && target_alpha->at(i) < 0.5) continue;

            Eigen::Vector3d o, d;
            ray_at(dst, intr, static_cast<double>(px) + 0.5, static_cast<double>(py) + 0.5, o, d);
            const Eigen::Vector3d world = o + target_depth.at(i) * d;

            const Eigen::Vector3d rel = world - src.center;
            const double zc = rel.dot(src.forward);
            if (zc <= 1e-9) continue;  // behind or at the source pinhole
            const double u = rel.dot(src.right) / zc;
            const double v = rel.dot(src.up) / zc;
            const double sx = snap(u / scale + static_cast<double>(res) / 2.0 - 0.5);
            const double sy = snap(static_cast<double>(res) / 2.0 - v / scale - 0.5);
            if (sx < 0.0 || sy < 0.0 || sx > static_cast<double>(res - 1) ||
                sy > static_cast<double>(res - 1))
                continue;
            if (source_alpha && sample(*source_alpha, 0, sx, sy) < 0.5) continue;

            for (int64_t c = 0; c < ch; ++c) out.image(i, c) = sample(source_image, c, sx, sy);
            out.mask.at(i) = 1.0;
        }
    return out;
}

}  // namespace pfgan::camera
