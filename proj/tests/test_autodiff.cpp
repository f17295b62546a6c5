// Copyright 2026 pfgan contributors
// SPDX-License-Identifier: Apache-2.0
#include "pfgan/autodiff.hpp"
#include "pfgan/nn.hpp"
#include "pfgan/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

using namespace pfgan;

namespace {

// Central-difference check of d(scalar out)/d(leaf) for every leaf entry.
void gradcheck(const std::function<Vard(const std::vector<Vard>&)>& f, std::vector<Tensord> inits,
               double tol = 1e-6, double h = 1e-6) {
    std::vector<Vard> leaves;
    for (auto& t : inits) leaves.push_back(Vard::leaf(t.clone()));
    Vard out = f(leaves);
    REQUIRE(out.val().numel() == 1);
    auto gs = grad<double>(out, leaves, false);

    for (size_t li = 0; li < leaves.size(); ++li) {
        for (int64_t k = 0; k < inits[li].numel(); ++k) {
            double orig = inits[li].at(k);
            auto eval_at = [&](double v) {
                std::vector<Vard> ls;
                for (size_t j = 0; j < inits.size(); ++j) {
                    Tensord t = inits[j].clone();
                    if (j == li) t.at(k) = v;
                    ls.push_back(Vard::leaf(std::move(t)));
                }
                return f(ls).val().at(0);
            };
            double fd = (eval_at(orig + h) - eval_at(orig - h)) / (2 * h);
            double ad = gs[li].val().at(k);
            double denom = std::max({std::fabs(fd), std::fabs(ad), 1.0});
            CHECK(std::fabs(fd - ad) / denom < tol);
        }
    }
}

Tensord randn(Rng& rng, int64_t r, int64_t c, double scale = 1.0) {
    Tensord t(r, c);
    for (int64_t k = 0; k < t.numel(); ++k) t.at(k) = scale * rng.normal();
    return t;
}

}  // namespace

TEST_CASE("elementwise and broadcast ops match finite differences") {
    Rng rng(7);
    gradcheck([](const std::vector<Vard>& v) { return mean_all(mul(add(v[0], v[1]), sub(v[0], v[1]))); },
              {randn(rng, 3, 4), randn(rng, 3, 4)});
    gradcheck([](const std::vector<Vard>& v) { return mean_all(div(v[0], add_scalar(mul(v[1], v[1]), 1.0))); },
              {randn(rng, 2, 5), randn(rng, 2, 5)});
    gradcheck([](const std::vector<Vard>& v) { return mean_all(add_rowvec(mul_rowvec(v[0], v[1]), v[2])); },
              {randn(rng, 4, 3), randn(rng, 1, 3), randn(rng, 1, 3)});
    gradcheck([](const std::vector<Vard>& v) { return mean_all(div_colvec(add_colvec(v[0], v[1]), add_scalar(mul(v[1], v[1]), 0.5))); },
              {randn(rng, 4, 3), randn(rng, 4, 1)});
}

TEST_CASE("nonlinearities match finite differences") {
    Rng rng(11);
    gradcheck([](const std::vector<Vard>& v) { return mean_all(sin(mul_scalar(v[0], 2.0))); },
              {randn(rng, 3, 3)});
    gradcheck([](const std::vector<Vard>& v) { return mean_all(cos(v[0])); }, {randn(rng, 3, 3)});
    gradcheck([](const std::vector<Vard>& v) { return mean_all(exp(mul_scalar(v[0], 0.5))); },
              {randn(rng, 3, 3)});
    gradcheck([](const std::vector<Vard>& v) { return mean_all(log(add_scalar(mul(v[0], v[0]), 1.0))); },
              {randn(rng, 3, 3)});
    gradcheck([](const std::vector<Vard>& v) { return mean_all(sqrt(add_scalar(mul(v[0], v[0]), 1.0))); },
              {randn(rng, 3, 3)});
    gradcheck([](const std::vector<Vard>& v) { return mean_all(tanh(v[0])); }, {randn(rng, 3, 3)});
    gradcheck([](const std::vector<Vard>& v) { return mean_all(sigmoid(v[0])); }, {randn(rng, 3, 3)});
    gradcheck([](const std::vector<Vard>& v) { return mean_all(softplus(v[0])); }, {randn(rng, 3, 3)});
    gradcheck([](const std::vector<Vard>& v) { return mean_all(leaky_relu(v[0], 0.2)); },
              {randn(rng, 4, 4)});
}

TEST_CASE("matmul, reductions, scans, shape ops match finite differences") {
    Rng rng(13);
    gradcheck([](const std::vector<Vard>& v) { return mean_all(matmul(v[0], v[1])); },
              {randn(rng, 3, 4), randn(rng, 4, 2)});
    gradcheck([](const std::vector<Vard>& v) { return mean_all(mul(row_cumsum_exclusive(v[0]), v[0])); },
              {randn(rng, 3, 5)});
    gradcheck([](const std::vector<Vard>& v) {
        return mean_all(mul(row_cumsum_exclusive(v[0], true), v[0]));
    }, {randn(rng, 3, 5)});
    gradcheck([](const std::vector<Vard>& v) {
        auto c = concat_cols<double>({slice_cols(v[0], 0, 2), slice_cols(v[0], 2, 3), v[1]});
        return mean_all(mul(c, c));
    }, {randn(rng, 3, 3), randn(rng, 3, 2)});
    gradcheck([](const std::vector<Vard>& v) {
        auto c = concat_rows<double>({slice_rows(v[0], 1, 3), v[1]});
        return mean_all(mul(c, transpose(transpose(c))));
    }, {randn(rng, 3, 2), randn(rng, 2, 2)});
    gradcheck([](const std::vector<Vard>& v) {
        return mean_all(mul(tile_rows(v[0], 4), tile_cols(v[1], 3)));
    }, {randn(rng, 1, 3), randn(rng, 4, 1)});
    gradcheck([](const std::vector<Vard>& v) { return mean_all(maximum_scalar(v[0], 0.1)); },
              {randn(rng, 4, 4)});
    gradcheck([](const std::vector<Vard>& v) { return mean_all(mul(reshape(v[0], 2, 6), reshape(v[1], 2, 6))); },
              {randn(rng, 3, 4), randn(rng, 4, 3)});
}

TEST_CASE("gather/scatter round trip and gradients") {
    Rng rng(17);
    auto idx = std::make_shared<std::vector<int64_t>>(std::vector<int64_t>{0, 2, -1, 5, 5, 1});
    Tensord x = randn(rng, 2, 3);
    Vard vx = Vard::leaf(x.clone());
    Vard g = gather_elems<double>(vx, idx, 3, 2);
    CHECK(g.val()(0, 0) == x.at(0));
    CHECK(g.val()(1, 0) == 0.0);  // padding
    CHECK(g.val()(2, 0) == x.at(5));
    CHECK(g.val()(2, 1) == x.at(1));

    gradcheck([&](const std::vector<Vard>& v) {
        auto ge = gather_elems<double>(v[0], idx, 3, 2);
        return mean_all(mul(ge, ge));
    }, {x});
}

TEST_CASE("grad accumulates over shared subexpressions") {
    Tensord x = Tensord::full(1, 1, 3.0);
    Vard vx = Vard::leaf(x);
    Vard y = mul(vx, vx);          // x^2
    Vard z = add(mul(y, vx), y);   // x^3 + x^2
    auto gs = grad<double>(z, std::vector<Vard>{vx});
    CHECK(gs[0].val().at(0) == doctest::Approx(3 * 9.0 + 2 * 3.0).epsilon(1e-12));
}

TEST_CASE("second-order gradients (grad of grad)") {
    // f(x) = sum(x^3), df/dx = 3x^2, d/dx sum(df/dx) = 6x
    Tensord x0(2, 2);
    x0.at(0) = 0.7; x0.at(1) = -1.3; x0.at(2) = 2.1; x0.at(3) = 0.4;
    Vard x = Vard::leaf(x0.clone());
    Vard f = sum_all(mul(mul(x, x), x));
    auto g1 = grad<double>(f, std::vector<Vard>{x}, /*create_graph=*/true);
    Vard gnorm = sum_all(g1[0]);
    auto g2 = grad<double>(gnorm, std::vector<Vard>{x}, false);
    for (int64_t k = 0; k < 4; ++k)
        CHECK(g2[0].val().at(k) == doctest::Approx(6.0 * x0.at(k)).epsilon(1e-12));

    // Squared-gradient-norm penalty through a tanh layer, checked against
    // finite differences of the analytically-known first derivative.
    Rng rng(23);
    Tensord w0 = randn(rng, 3, 1);
    Tensord xin = randn(rng, 1, 3);
    auto penalty_value = [&](const Tensord& w) {
        Vard vw = Vard::leaf(w.clone());
        Vard vx = Vard::leaf(xin.clone());
        Vard out = tanh(matmul(vx, vw));
        auto gx = grad<double>(out, std::vector<Vard>{vx}, true);
        Vard pen = sum_all(mul(gx[0], gx[0]));
        return pen;
    };
    // d(penalty)/dw via autodiff
    Vard vw = Vard::leaf(w0.clone());
    Vard vx = Vard::leaf(xin.clone());
    Vard out = tanh(matmul(vx, vw));
    auto gx = grad<double>(out, std::vector<Vard>{vx}, true);
    Vard pen = sum_all(mul(gx[0], gx[0]));
    auto gw = grad<double>(pen, std::vector<Vard>{vw}, false);
    for (int64_t k = 0; k < 3; ++k) {
        double h = 1e-6;
        Tensord wp = w0.clone(); wp.at(k) += h;
        Tensord wm = w0.clone(); wm.at(k) -= h;
        double fd = (penalty_value(wp).val().at(0) - penalty_value(wm).val().at(0)) / (2 * h);
        CHECK(gw[0].val().at(k) == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("grad returns zeros for unreachable leaves and prunes dead paths") {
    Vard a = Vard::leaf(Tensord::full(2, 2, 1.0));
    Vard b = Vard::leaf(Tensord::full(2, 2, 2.0));
    Vard out = sum_all(mul(a, a));
    auto gs = grad<double>(out, std::vector<Vard>{a, b});
    CHECK(gs[1].val().at(0) == 0.0);
    CHECK(gs[0].val().at(0) == doctest::Approx(2.0));
}

TEST_CASE("no-grad mode produces constant results") {
    Vard a = Vard::leaf(Tensord::full(1, 1, 2.0));
    {
        NoGradGuard ng;
        Vard y = mul(a, a);
        CHECK(!y.requires_grad());
    }
    Vard y = mul(a, a);
    CHECK(y.requires_grad());
}

TEST_CASE("linear layer and adam smoke: fits a tiny least squares problem") {
    Rng rng(31);
    ParamStoreT<double> ps;
    LinearT<double> lin(ps, "fc", 3, 1, rng);
    Tensord X = randn(rng, 64, 3);
    Tensord wtrue(3, 1);
    wtrue.at(0) = 0.5; wtrue.at(1) = -1.0; wtrue.at(2) = 2.0;
    Tensord Y(64, 1);
    Y.map() = X.cmap() * wtrue.cmap();

    AdamT<double> opt;
    opt.add_store(ps);
    auto leaves = ps.vars();
    for (int it = 0; it < 400; ++it) {
        Vard pred = lin.forward(Vard::constant(X));
        Vard err = sub(pred, Vard::constant(Y));
        Vard loss = mean_all(mul(err, err));
        auto gs = grad<double>(loss, leaves);
        std::vector<Tensord> gt;
        for (auto& g : gs) gt.push_back(g.val());
        opt.step(gt, 0.05, 0.9, 0.99, 1e-8);
    }
    Vard pred = lin.forward(Vard::constant(X));
    Vard err = sub(pred, Vard::constant(Y));
    double mse = mean_all(mul(err, err)).val().at(0);
    CHECK(mse < 1e-6);
}

TEST_CASE("conv2d forward matches a naive direct convolution") {
    Rng rng(37);
    ParamStoreT<double> ps;
    int64_t H = 6, W = 6, Cin = 2, Cout = 3, K = 3, S = 2, P = 1;
    Conv2dT<double> conv(ps, "c", Cin, Cout, K, S, P, rng);
    Tensord x = randn(rng, H * W, Cin);
    Vard y = conv.forward(Vard::constant(x), H, W);
    auto [oh, ow] = conv.out_size(H, W);
    REQUIRE(y.rows() == oh * ow);
    REQUIRE(y.cols() == Cout);

    const Tensord& wt = conv.weight.val();
    const Tensord& bt = conv.bias.val();
    for (int64_t oy = 0; oy < oh; ++oy)
        for (int64_t ox = 0; ox < ow; ++ox)
            for (int64_t co = 0; co < Cout; ++co) {
                double acc = bt.at(co);
                for (int64_t ky = 0; ky < K; ++ky)
                    for (int64_t kx = 0; kx < K; ++kx)
                        for (int64_t ci = 0; ci < Cin; ++ci) {
                            int64_t iy = oy * S + ky - P, ix = ox * S + kx - P;
                            if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                            acc += x(iy * W + ix, ci) * wt((ky * K + kx) * Cin + ci, co);
                        }
                CHECK(y.val()(oy * ow + ox, co) == doctest::Approx(acc).epsilon(1e-12));
            }
}

TEST_CASE("ema converges geometrically to frozen parameters") {
    Rng rng(41);
    ParamStoreT<double> ps;
    ps.add("p", randn(rng, 2, 2));
    EmaT<double> ema(ps);
    Tensord target = randn(rng, 2, 2);
    ps.get("p").assign_value(target);
    double d = 0.5;
    for (int i = 0; i < 30; ++i) ema.update(ps, d);
    // shadow - target shrinks by d each update
    for (int64_t k = 0; k < 4; ++k)
        CHECK(std::fabs(ema.tensors()[0].at(k) - target.at(k)) < std::pow(d, 29));
}
