// Copyright 2026 pfgan contributors
// SPDX-License-Identifier: Apache-2.0
#include "pfgan/camera.hpp"
#include "pfgan/rng.hpp"

#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

using namespace pfgan;
using namespace pfgan::camera;

namespace {
constexpr double kPi = std::numbers::pi;

double point_line_distance(const Eigen::Vector3d& p, const Eigen::Vector3d& o,
                           const Eigen::Vector3d& d) {
    return d.cross(p - o).norm() / d.norm();
}
}  // namespace

TEST_CASE("pose construction normalizes azimuth and rejects bad elevation") {
    CameraPose p(3 * kPi + 0.1, 0.2);
    CHECK(p.azimuth == doctest::Approx(-kPi + 0.1).epsilon(1e-12));
    CHECK(p.elevation == doctest::Approx(0.2));
    CHECK_THROWS_AS(CameraPose(0.0, kPi / 2), std::invalid_argument);
    CHECK_THROWS_AS(CameraPose(0.0, -kPi / 2), std::invalid_argument);
    CHECK_THROWS_AS(CameraPose(std::nan(""), 0.0), std::invalid_argument);
}

TEST_CASE("pose_to_extrinsics places the camera on the orbit sphere") {
    CameraIntrinsics intr = default_intrinsics(64);

    // canonical front: camera on +z, looking back at the origin
    Eigen::Matrix4d m = pose_to_extrinsics(CameraPose(0.0, 0.0), intr);
    CHECK(m(0, 3) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(m(1, 3) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(m(2, 3) == doctest::Approx(2.7).epsilon(1e-12));
    // optical axis (third column) points at the origin
    CHECK(m(2, 2) == doctest::Approx(-1.0).epsilon(1e-12));

    // quarter turn: camera on +x
    CameraIntrinsics intr1 = intr;
    intr1.orbit_radius = 1.0;
    intr1.near = 0.5;
    intr1.far = 1.5;
    Eigen::Matrix4d q = pose_to_extrinsics(CameraPose(kPi / 2, 0.0), intr1);
    CHECK(q(0, 3) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::fabs(q(1, 3)) < 1e-12);
    CHECK(std::fabs(q(2, 3)) < 1e-12);

    // rigid transform: composing with the inverse gives the identity
    Rng rng(5);
    for (int i = 0; i < 20; ++i) {
        CameraPose p(rng.uniform(-kPi, kPi), rng.uniform(-1.4, 1.4));
        Eigen::Matrix4d e = pose_to_extrinsics(p, intr);
        CHECK(((e * e.inverse()) - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() < 1e-6);
        // orthonormal rotation block
        Eigen::Matrix3d r = e.block<3, 3>(0, 0);
        CHECK((r * r.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("generate_rays: unit directions, deterministic, center ray hits the origin") {
    CameraIntrinsics intr = default_intrinsics(33);  // odd, so one pixel center is the image center
    CameraPose pose(0.37, -0.21);
    RayBundle b = generate_rays(pose, intr);
    REQUIRE(b.origins.rows() == 33 * 33);

    CameraFrame f = camera_frame(pose, intr);
    for (int64_t i = 0; i < b.directions.rows(); ++i) {
        Eigen::Vector3d d(b.directions(i, 0), b.directions(i, 1), b.directions(i, 2));
        CHECK(std::fabs(d.norm() - 1.0) < 1e-6);
        CHECK(b.origins(i, 0) == f.center[0]);
    }

    // center pixel of an odd-resolution image sits on the optical axis
    int64_t c = 16 * 33 + 16;
    Eigen::Vector3d o(b.origins(c, 0), b.origins(c, 1), b.origins(c, 2));
    Eigen::Vector3d d(b.directions(c, 0), b.directions(c, 1), b.directions(c, 2));
    CHECK(point_line_distance(Eigen::Vector3d::Zero(), o, d) < 1e-5);

    // canonical front: the center direction is -center/|center|
    RayBundle bf = generate_rays(CameraPose(0.0, 0.0), intr);
    Eigen::Vector3d dc(bf.directions(c, 0), bf.directions(c, 1), bf.directions(c, 2));
    CHECK((dc - Eigen::Vector3d(0, 0, -1)).norm() < 1e-12);

    // deterministic
    RayBundle b2 = generate_rays(pose, intr);
    for (int64_t k = 0; k < b.directions.numel(); ++k)
        CHECK(b.directions.at(k) == b2.directions.at(k));
}

TEST_CASE("corner ray angle matches the closed-form pinhole geometry") {
    for (double fov_deg : {20.0, 30.0, 55.0}) {
        CameraIntrinsics intr = default_intrinsics(64);
        intr.field_of_view = fov_deg * kPi / 180.0;
        CameraFrame f = camera_frame(CameraPose(0.0, 0.0), intr);
        Eigen::Vector3d o, d;
        ray_at(f, intr, 0.0, 0.0, o, d);  // exact image corner
        double angle = std::acos(d.dot(f.forward));
        double expected = std::atan(std::sqrt(2.0) * std::tan(intr.field_of_view / 2.0));
        CHECK(angle == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("mirror_pose negates azimuth, keeps elevation, and is an involution") {
    CameraPose p = mirror_pose(CameraPose(0.3, 0.1));
    CHECK(p.azimuth == doctest::Approx(-0.3).epsilon(1e-15));
    CHECK(p.elevation == doctest::Approx(0.1).epsilon(1e-15));

    CameraPose fixed = mirror_pose(CameraPose(0.0, 0.4));
    CHECK(fixed.azimuth == 0.0);
    CHECK(fixed.elevation == 0.4);

    Rng rng(9);
    for (int i = 0; i < 100; ++i) {
        CameraPose q(rng.uniform(-kPi, kPi), rng.uniform(-1.5, 1.5));
        CameraPose qq = mirror_pose(mirror_pose(q));
        CHECK(qq.azimuth == q.azimuth);
        CHECK(qq.elevation == q.elevation);
    }
}

TEST_CASE("warp_image with identical poses is the identity on the valid mask") {
    CameraIntrinsics intr = default_intrinsics(16);
    Rng rng(13);
    int64_t n = 16 * 16;
    Tensord img(n, 3), depth(n, 1);
    for (int64_t k = 0; k < img.numel(); ++k) img.at(k) = rng.uniform(-1, 1);
    for (int64_t k = 0; k < n; ++k) depth.at(k) = rng.uniform(intr.near, intr.far);

    CameraPose pose(0.2, -0.1);
    WarpResult w = warp_image(img, depth, pose, pose, intr);
    int64_t valid = 0;
    for (int64_t i = 0; i < n; ++i)
        if (w.mask.at(i) > 0.5) {
            ++valid;
            for (int64_t c = 0; c < 3; ++c) CHECK(w.image(i, c) == img(i, c));
        }
    CHECK(valid == n);
}

TEST_CASE("warp_image matches the analytic plane-induced homography") {
    CameraIntrinsics intr = default_intrinsics(32);
    const int64_t res = intr.image_resolution, n = res * res;
    const double z0 = 0.15;  // fronto-parallel plane in front of the canonical camera

    CameraPose src_pose(0.0, 0.0);
    CameraPose dst_pose(0.18, 0.0);  // pure azimuth rotation
    CameraFrame src = camera_frame(src_pose, intr);
    CameraFrame dst = camera_frame(dst_pose, intr);

    // smooth source texture
    Rng rng(17);
    Tensord img(n, 3);
    for (int64_t py = 0; py < res; ++py)
        for (int64_t px = 0; px < res; ++px)
            for (int64_t c = 0; c < 3; ++c)
                img(py * res + px, c) =
                    std::sin(0.3 * px + 0.2 * c) * std::cos(0.25 * py - 0.1 * c);

    // depth of the plane along each target ray
    Tensord depth(n, 1);
    for (int64_t py = 0; py < res; ++py)
        for (int64_t px = 0; px < res; ++px) {
            Eigen::Vector3d o, d;
            ray_at(dst, intr, px + 0.5, py + 0.5, o, d);
            depth.at(py * res + px) = (z0 - o[2]) / d[2];
        }

    WarpResult w = warp_image(img, depth, src_pose, dst_pose, intr);

    // plane-induced homography on normalized image coordinates:
    // m_s ~ (Bs^T Bt + Bs^T (Ct - Cs) ez^T Bt / (z0 - Ct_z)) m_t
    Eigen::Matrix3d Bt, Bs;
    Bt.col(0) = dst.right; Bt.col(1) = dst.up; Bt.col(2) = dst.forward;
    Bs.col(0) = src.right; Bs.col(1) = src.up; Bs.col(2) = src.forward;
    Eigen::Vector3d ez(0, 0, 1);
    Eigen::Matrix3d H = Bs.transpose() * Bt +
                        (Bs.transpose() * (dst.center - src.center)) * (ez.transpose() * Bt) /
                            (z0 - dst.center[2]);

    const double scale = 2.0 * std::tan(intr.field_of_view / 2.0) / res;
    auto bilinear = [&](int64_t c, double sx, double sy) {
        int64_t x0 = static_cast<int64_t>(std::floor(sx)), y0 = static_cast<int64_t>(std::floor(sy));
        double fx = sx - x0, fy = sy - y0;
        return (1 - fy) * ((1 - fx) * img(y0 * res + x0, c) + fx * img(y0 * res + x0 + 1, c)) +
               fy * ((1 - fx) * img((y0 + 1) * res + x0, c) + fx * img((y0 + 1) * res + x0 + 1, c));
    };

    int64_t checked = 0;
    for (int64_t py = 0; py < res; ++py)
        for (int64_t px = 0; px < res; ++px) {
            double u = (px + 0.5 - res / 2.0) * scale;
            double v = (res / 2.0 - (py + 0.5)) * scale;
            Eigen::Vector3d ms = H * Eigen::Vector3d(u, v, 1.0);
            double sx = (ms[0] / ms[2]) / scale + res / 2.0 - 0.5;
            double sy = res / 2.0 - (ms[1] / ms[2]) / scale - 0.5;
            int64_t i = py * res + px;
            bool interior = sx > 0.5 && sy > 0.5 && sx < res - 1.5 && sy < res - 1.5;
            if (!interior) continue;
            REQUIRE(w.mask.at(i) == 1.0);
            for (int64_t c = 0; c < 3; ++c)
                CHECK(w.image(i, c) == doctest::Approx(bilinear(c, sx, sy)).epsilon(1e-9));
            ++checked;
        }
    CHECK(checked > n / 2);
}

TEST_CASE("warp_image: empty mask when all content lies behind the source camera") {
    CameraIntrinsics intr = default_intrinsics(8);
    Tensord img = Tensord::full(64, 3, 0.5);
    Tensord depth = Tensord::full(64, 1, 6.0);  // behind the opposite camera
    WarpResult w = warp_image(img, depth, CameraPose(0.0, 0.0), CameraPose(kPi - 1e-9, 0.0), intr);
    for (int64_t i = 0; i < 64; ++i) CHECK(w.mask.at(i) == 0.0);
}

TEST_CASE("warp_image rejects mismatched resolutions and honors alpha masks") {
    CameraIntrinsics intr = default_intrinsics(8);
    Tensord img(64, 3), bad(49, 3), depth(64, 1);
    CHECK_THROWS_AS(warp_image(bad, depth, CameraPose(0, 0), CameraPose(0, 0), intr),
                    std::invalid_argument);

    for (int64_t k = 0; k < depth.numel(); ++k) depth.at(k) = 2.7;
    Tensord ta = Tensord::full(64, 1, 1.0);
    ta.at(5) = 0.0;
    WarpResult w = warp_image(img, depth, CameraPose(0, 0), CameraPose(0, 0), intr, nullptr, &ta);
    CHECK(w.mask.at(5) == 0.0);
    CHECK(w.mask.at(6) == 1.0);
}
