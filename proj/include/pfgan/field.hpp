// Copyright 2026 pfgan contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Latent-conditioned radiance field: a mapping network takes the latent code
// z to style space w, and a style-modulated MLP answers per-point color and
// density queries. Density never sees the view direction; color only does when
// view_dependent_color is switched on.

#include "pfgan/autodiff.hpp"
#include "pfgan/nn.hpp"
#include "pfgan/rng.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace pfgan::field {

struct FieldConfig {
    int64_t latent_dim = 64;
    int64_t style_dim = 64;
    int64_t mapping_layers = 2;
    int64_t hidden = 64;
    int64_t depth = 3;            // modulated hidden layers
    int64_t posenc_bands = 6;     // frequency bands for positions
    int64_t posenc_bands_dir = 2; // frequency bands for view directions
    bool view_dependent_color = false;
    double density_bias = -3.0;   // raw-density shift; keeps fresh fields near-transparent
    double style_mod_init = 0.05; // scale of the style->modulation weights at init
};

inline int64_t posenc_dim(int64_t input_dim, int64_t bands) {
    return input_dim + 2 * input_dim * bands;
}

// [x, sin(pi x), cos(pi x), sin(2 pi x), cos(2 pi x), ...] with frequencies
// 2^l pi. Higher bands come from the double-angle recursion, which keeps the
// graph cheap (one sin/cos evaluation regardless of the band count).
template <class T>
VarT<T> positional_encoding(const VarT<T>& x, int64_t bands) {
    if (bands <= 0) return x;
    std::vector<VarT<T>> parts{x};
    VarT<T> s = sin(mul_scalar(x, static_cast<T>(3.14159265358979323846)));
    VarT<T> c = cos(mul_scalar(x, static_cast<T>(3.14159265358979323846)));
    parts.push_back(s);
    parts.push_back(c);
    for (int64_t l = 1; l < bands; ++l) {
        VarT<T> s2 = mul_scalar(mul(s, c), T(2));
        VarT<T> c2 = add_scalar(mul_scalar(mul(s, s), T(-2)), T(1));
        parts.push_back(s2);
        parts.push_back(c2);
        s = s2;
        c = c2;
    }
    return concat_cols(parts);
}

template <class T>
TensorT<T> sample_latent(Rng& rng, int64_t dim) {
    TensorT<T> z(1, dim);
    for (int64_t k = 0; k < dim; ++k) z.at(k) = static_cast<T>(rng.normal());
    return z;
}

// z -> w. Leaky-ReLU MLP; the final layer is linear.
template <class T>
class MappingT {
  public:
    MappingT() = default;
    MappingT(ParamStoreT<T>& ps, const std::string& prefix, const FieldConfig& cfg, Rng& rng) {
        int64_t in = cfg.latent_dim;
        for (int64_t i = 0; i < cfg.mapping_layers; ++i) {
            layers_.emplace_back(ps, prefix + ".fc" + std::to_string(i), in, cfg.style_dim, rng);
            in = cfg.style_dim;
        }
    }

    VarT<T> forward(const VarT<T>& z) const {
        VarT<T> h = z;
        for (size_t i = 0; i < layers_.size(); ++i) {
            h = layers_[i].forward(h);
            if (i + 1 < layers_.size()) h = leaky_relu(h, T(0.2));
        }
        return h;
    }

  private:
    std::vector<LinearT<T>> layers_;
};

template <class T>
struct FieldBatchT {
    VarT<T> color;    // [P, 3] in [0, 1]
    VarT<T> density;  // [P, 1], >= 0
};

template <class T>
class FieldT {
  public:
    FieldT() = default;
    FieldT(ParamStoreT<T>& ps, const std::string& prefix, const FieldConfig& cfg, Rng& rng)
        : cfg_(cfg) {
        int64_t in = posenc_dim(3, cfg.posenc_bands);
        for (int64_t i = 0; i < cfg.depth; ++i) {
            std::string nm = prefix + ".l" + std::to_string(i);
            layers_.emplace_back(ps, nm, in, cfg.hidden, rng);
            // modulation starts small so fresh fields differ gently across w
            mod_scale_.push_back(LinearT<T>(ps, nm + ".ms", cfg.style_dim, cfg.hidden, rng));
            mod_scale_.back().weight.assign_value(
                init::normal<T>(rng, cfg.style_dim, cfg.hidden, cfg.style_mod_init));
            mod_shift_.push_back(LinearT<T>(ps, nm + ".mt", cfg.style_dim, cfg.hidden, rng));
            mod_shift_.back().weight.assign_value(
                init::normal<T>(rng, cfg.style_dim, cfg.hidden, cfg.style_mod_init));
            in = cfg.hidden;
        }
        density_head_ = LinearT<T>(ps, prefix + ".density", cfg.hidden, 1, rng);
        int64_t cin = cfg.hidden;
        if (cfg.view_dependent_color) cin += posenc_dim(3, cfg.posenc_bands_dir);
        color_head_ = LinearT<T>(ps, prefix + ".color", cin, 3, rng);
    }

    const FieldConfig& config() const { return cfg_; }

    // points [P,3], view_dirs [P,3] (unit). Batched and stateless; density is
    // view-independent by construction.
    FieldBatchT<T> query(const VarT<T>& w, const VarT<T>& points, const VarT<T>& view_dirs) const {
        if (points.cols() != 3) throw std::invalid_argument("pfgan: field: points must be [P,3]");
        if (cfg_.view_dependent_color &&
            (view_dirs.rows() != points.rows() || view_dirs.cols() != 3))
            throw std::invalid_argument("pfgan: field: view dirs must match points");
        if (!points.val().all_finite())
            throw std::invalid_argument("pfgan: field: non-finite points");

        VarT<T> h = positional_encoding(points, cfg_.posenc_bands);
        for (size_t i = 0; i < layers_.size(); ++i) {
            VarT<T> a = layers_[i].forward(h);
            VarT<T> s = add_scalar(mod_scale_[i].forward(w), T(1));
            VarT<T> t = mod_shift_[i].forward(w);
            h = leaky_relu(add_rowvec(mul_rowvec(a, s), t), T(0.2));
        }

        FieldBatchT<T> out;
        out.density = softplus(add_scalar(density_head_.forward(h), static_cast<T>(cfg_.density_bias)));
        VarT<T> cin = h;
        if (cfg_.view_dependent_color)
            cin = concat_cols<T>({h, positional_encoding(view_dirs, cfg_.posenc_bands_dir)});
        out.color = sigmoid(color_head_.forward(cin));
        return out;
    }

  private:
    FieldConfig cfg_;
    std::vector<LinearT<T>> layers_;
    std::vector<LinearT<T>> mod_scale_;
    std::vector<LinearT<T>> mod_shift_;
    LinearT<T> density_head_;
    LinearT<T> color_head_;
};

}  // namespace pfgan::field
