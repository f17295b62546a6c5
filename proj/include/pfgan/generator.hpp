// Copyright 2026 pfgan contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Pose-free generator: one latent code yields both a radiance field and the
// camera pose it is rendered from. The pose learner is the only path from z
// to a pose; generate() takes no pose argument and draws from no pose prior.

#include "pfgan/camera.hpp"
#include "pfgan/field.hpp"
#include "pfgan/nn.hpp"
#include "pfgan/ray_graph.hpp"
#include "pfgan/renderer.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pfgan::generator {

struct PoseLearnerConfig {
    int64_t hidden = 64;
    double max_azimuth = 1.2;    // radians; tanh-bounded span around canonical
    double max_elevation = 0.6;
};

// Two linear layers with a leaky ReLU in between; raw outputs are squashed by
// tanh and scaled to the configured spans. The final layer starts at zero, so
// a fresh generator emits the canonical pose for every latent.
template <class T>
class PoseLearnerT {
  public:
    PoseLearnerT() = default;
    PoseLearnerT(ParamStoreT<T>& ps, const std::string& prefix, const PoseLearnerConfig& cfg,
                 int64_t style_dim, Rng& rng)
        : cfg_(cfg),
          fc0_(ps, prefix + ".fc0", style_dim, cfg.hidden, rng),
          fc1_(ps, prefix + ".fc1", cfg.hidden, 2, rng, /*zero_init=*/true) {}

    const PoseLearnerConfig& config() const { return cfg_; }

    // w [1, style_dim] -> bounded (azimuth, elevation) as graph scalars.
    camera::PoseVarsT<T> forward(const VarT<T>& w) const {
        VarT<T> raw = tanh(fc1_.forward(leaky_relu(fc0_.forward(w), T(0.2))));
        camera::PoseVarsT<T> p;
        p.azimuth = mul_scalar(slice_cols(raw, 0, 1), static_cast<T>(cfg_.max_azimuth));
        p.elevation = mul_scalar(slice_cols(raw, 1, 2), static_cast<T>(cfg_.max_elevation));
        return p;
    }

  private:
    PoseLearnerConfig cfg_;
    LinearT<T> fc0_;
    LinearT<T> fc1_;
};

struct GeneratorConfig {
    field::FieldConfig field;
    PoseLearnerConfig pose;
};

struct GeneratorOutput {
    renderer::RenderOutput image;
    camera::CameraPose pose;
    Tensord style;  // [1, style_dim]
};

template <class T>
class GeneratorT {
  public:
    GeneratorT() = default;
    GeneratorT(const GeneratorConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
        Rng rng(splitmix64(init_seed ^ 0x67656e65726174ULL));
        mapping_ = field::MappingT<T>(params_, "map", cfg.field, rng);
        field_ = field::FieldT<T>(params_, "field", cfg.field, rng);
        pose_learner_ = PoseLearnerT<T>(params_, "pose", cfg.pose, cfg.field.style_dim, rng);
    }

    const GeneratorConfig& config() const { return cfg_; }
    ParamStoreT<T>& params() { return params_; }
    const ParamStoreT<T>& params() const { return params_; }
    const field::FieldT<T>& field() const { return field_; }

    VarT<T> map_latent(const VarT<T>& z) const {
        if (z.cols() != cfg_.field.latent_dim || z.rows() != 1)
            throw std::invalid_argument("pfgan: generator: z must be [1, latent_dim]");
        if (!z.val().all_finite()) throw std::invalid_argument("pfgan: generator: non-finite z");
        return mapping_.forward(z);
    }

    camera::PoseVarsT<T> pose_learner(const VarT<T>& w) const { return pose_learner_.forward(w); }

    renderer::FieldFnT<T> field_fn(const VarT<T>& w) const {
        return [this, w](const VarT<T>& pts, const VarT<T>& dirs) {
            return field_.query(w, pts, dirs);
        };
    }

    // z -> (image rendered at the learned pose, that pose, w).
    GeneratorOutput generate(const TensorT<T>& z, const camera::CameraIntrinsics& intr,
                             const renderer::RenderConfig& rcfg) const {
        NoGradGuard ng;
        VarT<T> w = map_latent(VarT<T>::constant(z));
        camera::PoseVarsT<T> pv = pose_learner_.forward(w);
        GeneratorOutput out;
        out.pose = pv.to_pose();
        out.style = w.val().template cast<double>();
        out.image = renderer::render<T>(field_fn(w), out.pose, intr, rcfg);
        return out;
    }

    // Same field (same w), caller-supplied pose. Serves the mirrored second
    // view and novel-view synthesis.
    renderer::RenderOutput generate_at(const TensorT<T>& z, const camera::CameraPose& pose,
                                       const camera::CameraIntrinsics& intr,
                                       const renderer::RenderConfig& rcfg) const {
        NoGradGuard ng;
        VarT<T> w = map_latent(VarT<T>::constant(z));
        return renderer::render<T>(field_fn(w), pose, intr, rcfg);
    }

    renderer::RenderOutput render_style(const TensorT<T>& w, const camera::CameraPose& pose,
                                        const camera::CameraIntrinsics& intr,
                                        const renderer::RenderConfig& rcfg) const {
        NoGradGuard ng;
        return renderer::render<T>(field_fn(VarT<T>::constant(w)), pose, intr, rcfg);
    }

  private:
    GeneratorConfig cfg_;
    ParamStoreT<T> params_;
    field::MappingT<T> mapping_;
    field::FieldT<T> field_;
    PoseLearnerT<T> pose_learner_;
};

}  // namespace pfgan::generator
