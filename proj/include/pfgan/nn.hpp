// Copyright 2026 pfgan contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pfgan/autodiff.hpp"
#include "pfgan/rng.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace pfgan {

// Ordered, named collection of trainable leaves. Construction order is the
// serialization order, so checkpoints are stable across runs.
template <class T>
class ParamStoreT {
  public:
    VarT<T> add(const std::string& name, TensorT<T> init) {
        if (index_.count(name)) throw std::invalid_argument("pfgan: params: duplicate name " + name);
        VarT<T> v = VarT<T>::leaf(std::move(init));
        index_[name] = items_.size();
        items_.push_back({name, v});
        return v;
    }

    const std::vector<std::pair<std::string, VarT<T>>>& items() const { return items_; }
    size_t size() const { return items_.size(); }

    VarT<T> get(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::invalid_argument("pfgan: params: unknown name " + name);
        return items_[it->second].second;
    }

    std::vector<VarT<T>> vars() const {
        std::vector<VarT<T>> v;
        v.reserve(items_.size());
        for (const auto& [n, p] : items_) v.push_back(p);
        return v;
    }

    int64_t scalar_count() const {
        int64_t n = 0;
        for (const auto& [name, p] : items_) n += p.val().numel();
        return n;
    }

    // FNV-1a over raw parameter bytes; used by tests that assert parameters
    // were not touched.
    uint64_t content_hash() const {
        uint64_t h = 1469598103934665603ULL;
        for (const auto& [name, p] : items_) {
            const auto* bytes = reinterpret_cast<const unsigned char*>(p.val().data());
            size_t nb = static_cast<size_t>(p.val().numel()) * sizeof(T);
            for (size_t i = 0; i < nb; ++i) h = (h ^ bytes[i]) * 1099511628211ULL;
        }
        return h;
    }

    std::map<std::string, TensorT<T>> state_dict() const {
        std::map<std::string, TensorT<T>> d;
        for (const auto& [n, p] : items_) d.emplace(n, p.val().clone());
        return d;
    }

    void load_state_dict(const std::map<std::string, TensorT<T>>& d) {
        if (d.size() != items_.size())
            throw std::invalid_argument("pfgan: params: state dict size mismatch");
        for (auto& [n, p] : items_) {
            auto it = d.find(n);
            if (it == d.end()) throw std::invalid_argument("pfgan: params: missing key " + n);
            p.assign_value(it->second);
        }
    }

  private:
    std::vector<std::pair<std::string, VarT<T>>> items_;
    std::map<std::string, size_t> index_;
};

namespace init {

template <class T>
TensorT<T> he_normal(Rng& rng, int64_t fan_in, int64_t fan_out, double gain = 1.0) {
    TensorT<T> t(fan_in, fan_out);
    double std = gain * std::sqrt(2.0 / static_cast<double>(fan_in));
    for (int64_t k = 0; k < t.numel(); ++k) t.at(k) = static_cast<T>(rng.normal(0.0, std));
    return t;
}

template <class T>
TensorT<T> normal(Rng& rng, int64_t r, int64_t c, double std) {
    TensorT<T> t(r, c);
    for (int64_t k = 0; k < t.numel(); ++k) t.at(k) = static_cast<T>(rng.normal(0.0, std));
    return t;
}

}  // namespace init

template <class T>
struct LinearT {
    VarT<T> weight;  // [in, out]
    VarT<T> bias;    // [1, out]

    LinearT() = default;
    LinearT(ParamStoreT<T>& ps, const std::string& name, int64_t in, int64_t out, Rng& rng,
            bool zero_init = false, double gain = 1.0) {
        TensorT<T> w = zero_init ? TensorT<T>::zeros(in, out) : init::he_normal<T>(rng, in, out, gain);
        weight = ps.add(name + ".w", std::move(w));
        bias = ps.add(name + ".b", TensorT<T>::zeros(1, out));
    }

    VarT<T> forward(const VarT<T>& x) const { return add_rowvec(matmul(x, weight), bias); }
};

// im2col index table for one (H, W, in_channels, kernel, stride, pad) layout.
// Input and output feature maps are stored as [H*W, C] matrices.
struct Im2ColPlan {
    int64_t out_h = 0, out_w = 0;
    std::shared_ptr<const std::vector<int64_t>> idx;  // [out_h*out_w, C*K*K] flattened
};

inline Im2ColPlan make_im2col_plan(int64_t h, int64_t w, int64_t c, int64_t k, int64_t stride,
                                   int64_t pad) {
    Im2ColPlan plan;
    plan.out_h = (h + 2 * pad - k) / stride + 1;
    plan.out_w = (w + 2 * pad - k) / stride + 1;
    auto idx = std::make_shared<std::vector<int64_t>>();
    idx->reserve(static_cast<size_t>(plan.out_h * plan.out_w * c * k * k));
    for (int64_t oy = 0; oy < plan.out_h; ++oy)
        for (int64_t ox = 0; ox < plan.out_w; ++ox)
            for (int64_t ky = 0; ky < k; ++ky)
                for (int64_t kx = 0; kx < k; ++kx)
                    for (int64_t ci = 0; ci < c; ++ci) {
                        int64_t y = oy * stride + ky - pad;
                        int64_t x = ox * stride + kx - pad;
                        bool in = y >= 0 && y < h && x >= 0 && x < w;
                        idx->push_back(in ? (y * w + x) * c + ci : -1);
                    }
    plan.idx = std::move(idx);
    return plan;
}

template <class T>
struct Conv2dT {
    VarT<T> weight;  // [K*K*C_in, C_out]
    VarT<T> bias;    // [1, C_out]
    int64_t in_ch = 0, out_ch = 0, kernel = 3, stride = 1, pad = 1;

    Conv2dT() = default;
    Conv2dT(ParamStoreT<T>& ps, const std::string& name, int64_t cin, int64_t cout, int64_t k,
            int64_t s, int64_t p, Rng& rng)
        : in_ch(cin), out_ch(cout), kernel(k), stride(s), pad(p) {
        weight = ps.add(name + ".w", init::he_normal<T>(rng, k * k * cin, cout));
        bias = ps.add(name + ".b", TensorT<T>::zeros(1, cout));
    }

    // x is [H*W, C_in]; returns [H'*W', C_out].
    VarT<T> forward(const VarT<T>& x, int64_t h, int64_t w) const {
        if (x.rows() != h * w || x.cols() != in_ch)
            throw std::invalid_argument("pfgan: conv2d: input shape mismatch");
        const Im2ColPlan& plan = plan_for(h, w);
        int64_t rows = plan.out_h * plan.out_w;
        VarT<T> cols = gather_elems(x, plan.idx, rows, kernel * kernel * in_ch);
        return add_rowvec(matmul(cols, weight), bias);
    }

    std::pair<int64_t, int64_t> out_size(int64_t h, int64_t w) const {
        const Im2ColPlan& plan = plan_for(h, w);
        return {plan.out_h, plan.out_w};
    }

  private:
    const Im2ColPlan& plan_for(int64_t h, int64_t w) const {
        auto key = std::make_pair(h, w);
        auto it = plans_.find(key);
        if (it == plans_.end())
            it = plans_.emplace(key, make_im2col_plan(h, w, in_ch, kernel, stride, pad)).first;
        return it->second;
    }
    mutable std::map<std::pair<int64_t, int64_t>, Im2ColPlan> plans_;
};

// Adam with per-entry learning-rate multipliers (the pose branch trains at a
// different rate from the rest of its network).
template <class T>
class AdamT {
  public:
    struct Entry {
        VarT<T> param;
        TensorT<T> m, v;
        double lr_mult = 1.0;
    };

    void add(const VarT<T>& p, double lr_mult = 1.0) {
        entries_.push_back({p, TensorT<T>::zeros(p.rows(), p.cols()),
                            TensorT<T>::zeros(p.rows(), p.cols()), lr_mult});
    }

    void add_store(const ParamStoreT<T>& ps, double lr_mult = 1.0) {
        for (const auto& [n, p] : ps.items()) add(p, lr_mult);
    }

    size_t size() const { return entries_.size(); }
    std::vector<Entry>& entries() { return entries_; }
    int64_t step_count() const { return t_; }

    // grads[i] aligned with entries_[i]; empty tensors are skipped.
    void step(const std::vector<TensorT<T>>& grads, double lr, double beta1, double beta2,
              double eps) {
        if (grads.size() != entries_.size())
            throw std::invalid_argument("pfgan: adam: grad count mismatch");
        ++t_;
        double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
        double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
        for (size_t i = 0; i < entries_.size(); ++i) {
            if (grads[i].empty()) continue;
            Entry& e = entries_[i];
            TensorT<T> pv = e.param.val().clone();
            const T b1 = static_cast<T>(beta1), b2 = static_cast<T>(beta2);
            const double step_lr = lr * e.lr_mult;
            for (int64_t k = 0; k < pv.numel(); ++k) {
                T g = grads[i].at(k);
                e.m.at(k) = b1 * e.m.at(k) + (T(1) - b1) * g;
                e.v.at(k) = b2 * e.v.at(k) + (T(1) - b2) * g * g;
                double mh = static_cast<double>(e.m.at(k)) / bc1;
                double vh = static_cast<double>(e.v.at(k)) / bc2;
                pv.at(k) -= static_cast<T>(step_lr * mh / (std::sqrt(vh) + eps));
            }
            e.param.assign_value(pv);
        }
    }

    void serialize_state(std::vector<TensorT<T>>& ms, std::vector<TensorT<T>>& vs,
                         int64_t& t) const {
        ms.clear();
        vs.clear();
        for (const auto& e : entries_) {
            ms.push_back(e.m.clone());
            vs.push_back(e.v.clone());
        }
        t = t_;
    }

    void load_state(const std::vector<TensorT<T>>& ms, const std::vector<TensorT<T>>& vs,
                    int64_t t) {
        if (ms.size() != entries_.size() || vs.size() != entries_.size())
            throw std::invalid_argument("pfgan: adam: state size mismatch");
        for (size_t i = 0; i < entries_.size(); ++i) {
            entries_[i].m = ms[i].clone();
            entries_[i].v = vs[i].clone();
        }
        t_ = t;
    }

  private:
    std::vector<Entry> entries_;
    int64_t t_ = 0;
};

// Exponential moving average of a parameter store.
template <class T>
class EmaT {
  public:
    EmaT() = default;
    explicit EmaT(const ParamStoreT<T>& ps) {
        for (const auto& [n, p] : ps.items()) shadow_.push_back(p.val().clone());
    }

    void update(const ParamStoreT<T>& ps, double decay) {
        const auto& items = ps.items();
        if (items.size() != shadow_.size()) throw std::invalid_argument("pfgan: ema: size mismatch");
        const T d = static_cast<T>(decay);
        for (size_t i = 0; i < items.size(); ++i) {
            TensorT<T>& s = shadow_[i];
            const TensorT<T>& p = items[i].second.val();
            for (int64_t k = 0; k < s.numel(); ++k) s.at(k) = d * s.at(k) + (T(1) - d) * p.at(k);
        }
    }

    const std::vector<TensorT<T>>& tensors() const { return shadow_; }
    std::vector<TensorT<T>>& tensors() { return shadow_; }

    void copy_to(const ParamStoreT<T>& ps) const {
        const auto& items = ps.items();
        if (items.size() != shadow_.size()) throw std::invalid_argument("pfgan: ema: size mismatch");
        for (size_t i = 0; i < items.size(); ++i) items[i].second.assign_value(shadow_[i]);
    }

  private:
    std::vector<TensorT<T>> shadow_;
};

}  // namespace pfgan
