// Copyright 2026 pfgan contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Differentiable twin of camera::generate_rays: builds the pose-to-ray
// geometry as autodiff ops so rendered pixels carry gradients back into the
// azimuth/elevation scalars. Values agree with the plain path to float
// round-off (asserted in tests).

#include "pfgan/autodiff.hpp"
#include "pfgan/camera.hpp"

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace pfgan::camera {

template <class T>
struct PoseVarsT {
    VarT<T> azimuth;    // [1,1]
    VarT<T> elevation;  // [1,1]

    CameraPose to_pose() const {
        return CameraPose(static_cast<double>(azimuth.val().at(0)),
                          static_cast<double>(elevation.val().at(0)));
    }

    static PoseVarsT constant(const CameraPose& p) {
        return {VarT<T>::constant(TensorT<T>::scalar(static_cast<T>(p.azimuth))),
                VarT<T>::constant(TensorT<T>::scalar(static_cast<T>(p.elevation)))};
    }
};

// Azimuth negation; keeps the pose-learner gradient path alive through the
// mirrored rendering.
template <class T>
PoseVarsT<T> mirror_pose_graph(const PoseVarsT<T>& p) {
    return {neg(p.azimuth), p.elevation};
}

template <class T>
struct RayChunkT {
    VarT<T> origins;     // [R, 3]
    VarT<T> directions;  // [R, 3], unit norm
};

// Rays for pixel indices [i0, i1) in row-major order. The camera frame has
// closed forms in (sin, cos) of the two angles:
//   center  = r (sa ce, se, ca ce)
//   forward = -(sa ce, se, ca ce)
//   right   = (ca, 0, -sa)
//   up      = (-sa se, ce, -ca se)
template <class T>
RayChunkT<T> build_pose_rays(const PoseVarsT<T>& pose, const CameraIntrinsics& intr, int64_t i0,
                             int64_t i1) {
    intr.validate();
    const int64_t res = intr.image_resolution;
    if (i0 < 0 || i1 > res * res || i0 >= i1)
        throw std::invalid_argument("pfgan: rays: bad pixel range");
    const int64_t n = i1 - i0;

    VarT<T> sa = sin(pose.azimuth), ca = cos(pose.azimuth);
    VarT<T> se = sin(pose.elevation), ce = cos(pose.elevation);

    VarT<T> fwd_x = neg(mul(sa, ce));
    VarT<T> fwd_y = neg(se);
    VarT<T> fwd_z = neg(mul(ca, ce));
    VarT<T> right_x = ca, right_z = neg(sa);
    VarT<T> up_x = neg(mul(sa, se));
    VarT<T> up_y = ce;
    VarT<T> up_z = neg(mul(ca, se));

    // pixel-center offsets on the image plane at focal distance 1
    const double scale = 2.0 * std::tan(intr.field_of_view / 2.0) / static_cast<double>(res);
    TensorT<T> ut(n, 1), vt(n, 1);
    for (int64_t k = 0; k < n; ++k) {
        int64_t px = (i0 + k) % res, py = (i0 + k) / res;
        ut.at(k) = static_cast<T>((static_cast<double>(px) + 0.5 - res / 2.0) * scale);
        vt.at(k) = static_cast<T>((res / 2.0 - (static_cast<double>(py) + 0.5)) * scale);
    }
    VarT<T> u = VarT<T>::constant(ut), v = VarT<T>::constant(vt);

    auto axis = [&](const VarT<T>& rx, const VarT<T>& ux, const VarT<T>& fx) {
        return add(add(matmul(u, rx), matmul(v, ux)), tile_rows(fx, n));
    };
    VarT<T> zero = VarT<T>::constant(TensorT<T>::zeros(1, 1));
    VarT<T> raw_x = axis(right_x, up_x, fwd_x);
    VarT<T> raw_y = axis(zero, up_y, fwd_y);
    VarT<T> raw_z = axis(right_z, up_z, fwd_z);

    VarT<T> norm = sqrt(add(add(mul(raw_x, raw_x), mul(raw_y, raw_y)), mul(raw_z, raw_z)));

    RayChunkT<T> out;
    out.directions = concat_cols<T>({div(raw_x, norm), div(raw_y, norm), div(raw_z, norm)});
    T r = static_cast<T>(intr.orbit_radius);
    VarT<T> center = concat_cols<T>({mul_scalar(neg(fwd_x), r), mul_scalar(neg(fwd_y), r),
                                     mul_scalar(neg(fwd_z), r)});
    out.origins = tile_rows(center, n);
    return out;
}

}  // namespace pfgan::camera
