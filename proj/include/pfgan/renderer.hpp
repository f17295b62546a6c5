// Copyright 2026 pfgan contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Differentiable volume rendering: stratified ray sampling and quadrature
// accumulation of color, opacity and expected depth. Images live in [-1, 1]
// everywhere; compositing uses a fixed background color.

#include "pfgan/autodiff.hpp"
#include "pfgan/camera.hpp"
#include "pfgan/field.hpp"
#include "pfgan/ray_graph.hpp"
#include "pfgan/rng.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <stdexcept>

namespace pfgan::renderer {

struct RenderConfig {
    int64_t n_samples = 48;
    bool stratified = false;
    uint64_t seed = 0;
    std::array<double, 3> background = {1.0, 1.0, 1.0};
    int64_t ray_chunk = 2048;
    double depth_eps = 1e-10;  // guards the expected-depth division at zero alpha
};

// Plain render result for evaluation and IO.
struct RenderOutput {
    Tensord image;  // [res*res, 3] in [-1, 1]
    Tensord depth;  // [res*res, 1], expected termination distance (world units)
    Tensord alpha;  // [res*res, 1] in [0, 1]
    int64_t resolution = 0;
};

template <class T>
using FieldFnT =
    std::function<pfgan::field::FieldBatchT<T>(const VarT<T>& points, const VarT<T>& dirs)>;

// Per-ray sample depths and interval widths, both [n_rays, n_samples].
// Deterministic mode uses bin midpoints; stratified mode jitters uniformly
// inside each bin, keyed only by (seed, global ray index, sample index) so the
// result is independent of chunking and scheduling.
template <class T>
struct RaySamplesT {
    TensorT<T> t;
    TensorT<T> delta;
};

template <class T>
RaySamplesT<T> sample_along_rays(int64_t n_rays, double near, double far, int64_t n_samples,
                                 bool stratified, uint64_t seed, int64_t ray_offset = 0) {
    if (n_samples < 2) throw std::invalid_argument("pfgan: renderer: n_samples must be >= 2");
    if (!(near < far)) throw std::invalid_argument("pfgan: renderer: need near < far");
    RaySamplesT<T> s;
    s.t = TensorT<T>(n_rays, n_samples);
    s.delta = TensorT<T>(n_rays, n_samples);
    const double bin = (far - near) / static_cast<double>(n_samples);
    for (int64_t r = 0; r < n_rays; ++r)
        for (int64_t i = 0; i < n_samples; ++i) {
            double u = 0.5;
            if (stratified) {
                uint64_t h = splitmix64(seed ^ splitmix64(static_cast<uint64_t>(ray_offset + r) ^
                                                          0x9e3779b97f4a7c15ULL * (i + 1)));
                u = static_cast<double>(h >> 11) * 0x1.0p-53;
            }
            s.t(r, i) = static_cast<T>(near + (static_cast<double>(i) + u) * bin);
            s.delta(r, i) = static_cast<T>(bin);
        }
    return s;
}

template <class T>
struct AccumulatedT {
    VarT<T> color;  // [R, 3] premultiplied by opacity
    VarT<T> alpha;  // [R, 1]
    VarT<T> depth;  // [R, 1]
};

// Standard quadrature: alpha_i = 1 - exp(-sigma_i delta_i), T_i = prod_{j<i}
// (1 - alpha_j), w_i = T_i alpha_i. Transmittance goes through the exp of an
// exclusive prefix sum, keeping the whole chain smooth.
template <class T>
AccumulatedT<T> accumulate(const VarT<T>& sigma /*[R,S]*/, const VarT<T>& color /*[R*S,3]*/,
                           const TensorT<T>& t, const TensorT<T>& delta, double depth_eps = 1e-10) {
    const int64_t rays = sigma.rows(), samples = sigma.cols();
    if (color.rows() != rays * samples || color.cols() != 3)
        throw std::invalid_argument("pfgan: accumulate: color shape");
    if (t.rows() != rays || t.cols() != samples || !delta.same_shape(t))
        throw std::invalid_argument("pfgan: accumulate: depth grid shape");

    VarT<T> dv = VarT<T>::constant(delta);
    VarT<T> sd = mul(sigma, dv);
    VarT<T> trans = exp(neg(row_cumsum_exclusive(sd)));
    VarT<T> a = add_scalar(neg(exp(neg(sd))), T(1));
    VarT<T> w = mul(trans, a);  // [R,S], non-negative, rows sum to <= 1

    AccumulatedT<T> out;
    out.alpha = row_sum(w);
    std::vector<VarT<T>> ch;
    for (int64_t k = 0; k < 3; ++k)
        ch.push_back(row_sum(mul(w, reshape(slice_cols(color, k, k + 1), rays, samples))));
    out.color = concat_cols(ch);
    VarT<T> tw = row_sum(mul(w, VarT<T>::constant(t)));
    out.depth = div(tw, maximum_scalar(out.alpha, static_cast<T>(depth_eps)));
    return out;
}

template <class T>
struct RenderChunkT {
    VarT<T> image;  // [R, 3] in [-1, 1]
    VarT<T> depth;  // [R, 1]
    VarT<T> alpha;  // [R, 1]
};

// Renders pixels [i0, i1) of the image for a pose given as graph variables.
// Gradients flow to the field parameters, to w (through the field closure),
// and to the pose (through ray origins and directions).
template <class T>
RenderChunkT<T> render_chunk(const FieldFnT<T>& field_fn, const camera::PoseVarsT<T>& pose,
                             const camera::CameraIntrinsics& intr, const RenderConfig& cfg,
                             int64_t i0, int64_t i1) {
    camera::RayChunkT<T> rays = camera::build_pose_rays(pose, intr, i0, i1);
    const int64_t n = i1 - i0;
    RaySamplesT<T> rs = sample_along_rays<T>(n, intr.near, intr.far, cfg.n_samples, cfg.stratified,
                                             cfg.seed, i0);
    VarT<T> tv = VarT<T>::constant(rs.t);

    // points[r, s] = origin[r] + t[r, s] * dir[r], per coordinate
    std::vector<VarT<T>> pcoord, dcoord;
    for (int64_t k = 0; k < 3; ++k) {
        VarT<T> dk = slice_cols(rays.directions, k, k + 1);
        VarT<T> ok = slice_cols(rays.origins, k, k + 1);
        VarT<T> pk = add_colvec(mul_colvec(tv, dk), ok);
        pcoord.push_back(reshape(pk, n * cfg.n_samples, 1));
        dcoord.push_back(reshape(tile_cols(dk, cfg.n_samples), n * cfg.n_samples, 1));
    }
    VarT<T> points = concat_cols(pcoord);
    VarT<T> dirs = concat_cols(dcoord);

    pfgan::field::FieldBatchT<T> fb = field_fn(points, dirs);
    VarT<T> sigma = reshape(fb.density, n, cfg.n_samples);
    AccumulatedT<T> acc = accumulate(sigma, fb.color, rs.t, rs.delta, cfg.depth_eps);

    // composite onto the background and map [0,1] -> [-1,1]
    TensorT<T> bg(1, 3);
    for (int k = 0; k < 3; ++k) bg.at(k) = static_cast<T>(cfg.background[k]);
    VarT<T> bgfill = matmul(add_scalar(neg(acc.alpha), T(1)), VarT<T>::constant(bg));
    RenderChunkT<T> out;
    out.image = add_scalar(mul_scalar(add(acc.color, bgfill), T(2)), T(-1));
    out.depth = acc.depth;
    out.alpha = acc.alpha;
    return out;
}

// Full-image inference render; no graph is kept.
template <class T>
RenderOutput render(const FieldFnT<T>& field_fn, const camera::CameraPose& pose,
                    const camera::CameraIntrinsics& intr, const RenderConfig& cfg) {
    NoGradGuard ng;
    const int64_t res = intr.image_resolution;
    const int64_t n = res * res;
    RenderOutput out;
    out.resolution = res;
    out.image = Tensord(n, 3);
    out.depth = Tensord(n, 1);
    out.alpha = Tensord(n, 1);
    camera::PoseVarsT<T> pv = camera::PoseVarsT<T>::constant(pose);
    for (int64_t i0 = 0; i0 < n; i0 += cfg.ray_chunk) {
        int64_t i1 = std::min(n, i0 + cfg.ray_chunk);
        RenderChunkT<T> c = render_chunk(field_fn, pv, intr, cfg, i0, i1);
        for (int64_t r = 0; r < i1 - i0; ++r) {
            for (int k = 0; k < 3; ++k)
                out.image(i0 + r, k) = static_cast<double>(c.image.val()(r, k));
            out.depth.at(i0 + r) = static_cast<double>(c.depth.val().at(r));
            out.alpha.at(i0 + r) = static_cast<double>(c.alpha.val().at(r));
        }
    }
    return out;
}

}  // namespace pfgan::renderer
