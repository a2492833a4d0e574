#include "rseed/autodiff.hpp"
#include "rseed/rng.hpp"

#include "support/synth.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace rseed;

namespace {

Tensor vec(std::initializer_list<float> vals) {
    Tensor t(Shape::vec(static_cast<int>(vals.size())));
    std::copy(vals.begin(), vals.end(), t.data.begin());
    return t;
}

} // namespace

TEST_CASE("elementwise arithmetic matches hand values") {
    Tape t;
    NodeId a = t.constant(vec({0.8f}));
    NodeId b = t.constant(vec({0.25f}));
    CHECK(t.value(t.mul(a, b)).data[0] == 0.2f);
    CHECK(t.value(t.add(a, b)).data[0] == 0.8f + 0.25f);
    CHECK(t.value(t.sub(a, b)).data[0] == 0.8f - 0.25f);
    CHECK(t.value(t.div(a, b)).data[0] == 0.8f / 0.25f);
    CHECK(t.value(t.neg(a)).data[0] == -0.8f);
    CHECK(t.value(t.abs_(t.neg(a))).data[0] == 0.8f);
}

TEST_CASE("power with a node exponent of one is the identity") {
    Tape t;
    Tensor base = vec({0.25f, 0.7f, 1.3f});
    NodeId out = t.pow_node(t.constant(base), t.constant_scalar(1.0f));
    CHECK(synth::bitwise_equal(t.value(out), base));
}

TEST_CASE("power special exponents agree with their direct forms") {
    Tape t;
    Tensor x = vec({0.3f, 1.7f, 0.04f, 2.5f});
    NodeId xn = t.constant(x);
    // copy: the reference returned by value() is invalidated by later node creation
    Tensor sq = t.value(t.pow_scalar(xn, 2.0f));
    Tensor rt = t.value(t.pow_scalar(xn, 0.5f));
    Tensor id = t.value(t.pow_scalar(xn, 1.0f));
    for (size_t i = 0; i < x.data.size(); ++i) {
        CHECK(sq.data[i] == x.data[i] * x.data[i]);
        CHECK(rt.data[i] == std::sqrt(x.data[i]));
        CHECK(id.data[i] == x.data[i]);
    }

    // gradient of x² is 2x, of x^1 is 1, of √x is 1/(2√x)
    Tape g;
    NodeId leaf = g.leaf(x, true);
    g.backward(g.sum(g.pow_scalar(leaf, 2.0f)));
    for (size_t i = 0; i < x.data.size(); ++i)
        CHECK(g.grad(leaf).data[i] == doctest::Approx(2.0f * x.data[i]).epsilon(1e-6));

    Tape g1;
    NodeId leaf1 = g1.leaf(x, true);
    g1.backward(g1.sum(g1.pow_scalar(leaf1, 1.0f)));
    for (size_t i = 0; i < x.data.size(); ++i) CHECK(g1.grad(leaf1).data[i] == 1.0f);

    Tape gh;
    NodeId leafh = gh.leaf(x, true);
    gh.backward(gh.sum(gh.pow_scalar(leafh, 0.5f)));
    for (size_t i = 0; i < x.data.size(); ++i)
        CHECK(gh.grad(leafh).data[i] ==
              doctest::Approx(0.5 / std::sqrt(static_cast<double>(x.data[i]))).epsilon(1e-5));
}

TEST_CASE("negative bases are valid for integer exponents only") {
    Tape t;
    NodeId x = t.constant(vec({-2.0f}));
    CHECK(t.value(t.pow_scalar(x, 2.0f)).data[0] == 4.0f);
    CHECK_THROWS_AS(t.pow_scalar(x, 2.5f), Error);
    CHECK_THROWS_AS(t.pow_node(x, t.constant_scalar(0.5f)), Error);
}

TEST_CASE("exp gradient matches finite differences") {
    const float x0 = 0.3f;
    Tape t;
    NodeId x = t.leaf(vec({x0}), true);
    t.backward(t.sum(t.exp_(x)));
    const double h = 1e-3;
    const double fd = (std::exp(x0 + h) - std::exp(x0 - h)) / (2 * h);
    CHECK(t.grad(x).data[0] == doctest::Approx(fd).epsilon(1e-3));
}

TEST_CASE("pointwise convolution with an identity kernel copies the input") {
    Rng rng(3);
    Tensor img = synth::uniform_tensor(Shape::chw(3, 5, 6), rng, 0.0f, 1.0f);
    Tensor w(Shape::conv(3, 3, 1, 1));
    for (int o = 0; o < 3; ++o) w.data[static_cast<size_t>(o) * 3 + o] = 1.0f;
    Tensor bias(Shape::vec(3));

    Tape t;
    NodeId out = t.conv2d(t.constant(img), t.constant(w), t.constant(bias), PadMode::Zero);
    CHECK(synth::bitwise_equal(t.value(out), img));
}

TEST_CASE("a normalized kernel preserves constant images under reflect padding") {
    Tensor img(Shape::chw(3, 6, 6), 0.7f);
    Tensor w(Shape::conv(1, 3, 3, 3), 1.0f / 27.0f);
    Tensor bias(Shape::vec(1));

    Tape t;
    NodeId out = t.conv2d(t.constant(img), t.constant(w), t.constant(bias), PadMode::Reflect);
    CHECK(t.shape(out) == Shape::chw(1, 6, 6));
    for (float v : t.value(out).data) CHECK(v == doctest::Approx(0.7f).epsilon(1e-5));
}

namespace {

// Quadruple-loop padded convolution in double precision.
Tensor conv_oracle(const Tensor& in, const Tensor& w, const Tensor& bias, PadMode mode) {
    const int ic = in.shape.d[0], h = in.shape.d[1], wd = in.shape.d[2];
    const int oc = w.shape.d[0], k = w.shape.d[2], p = (k - 1) / 2;
    auto reflect = [](int i, int n) {
        if (n == 1) return 0;
        const int m = 2 * (n - 1);
        i = std::abs(i) % m;
        return i < n ? i : m - i;
    };
    Tensor out(Shape::chw(oc, h, wd));
    for (int o = 0; o < oc; ++o)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < wd; ++x) {
                double acc = bias.data.empty() ? 0.0 : bias.data[static_cast<size_t>(o)];
                for (int i = 0; i < ic; ++i)
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            int sy = y + ky - p, sx = x + kx - p;
                            float v;
                            if (mode == PadMode::Reflect) {
                                v = in.at(i, reflect(sy, h), reflect(sx, wd));
                            } else {
                                v = (sy < 0 || sy >= h || sx < 0 || sx >= wd)
                                        ? 0.0f
                                        : in.at(i, sy, sx);
                            }
                            acc += static_cast<double>(
                                       w.data[((static_cast<size_t>(o) * ic + i) * k + ky) * k +
                                              kx]) *
                                   v;
                        }
                out.at(o, y, x) = static_cast<float>(acc);
            }
    return out;
}

} // namespace

TEST_CASE("padded convolution matches a quadruple-loop oracle") {
    Rng rng(17);
    Tensor img = synth::uniform_tensor(Shape::chw(3, 5, 5), rng, -1.0f, 1.0f);
    Tensor w = synth::uniform_tensor(Shape::conv(2, 3, 3, 3), rng, -0.5f, 0.5f);
    Tensor bias = synth::uniform_tensor(Shape::vec(2), rng, -0.1f, 0.1f);

    for (PadMode mode : {PadMode::Reflect, PadMode::Zero}) {
        Tape t;
        NodeId out = t.conv2d(t.constant(img), t.constant(w), t.constant(bias), mode);
        Tensor want = conv_oracle(img, w, bias, mode);
        CHECK(synth::max_abs_diff(t.value(out), want) <= 1e-5f);
    }
}

TEST_CASE("upsampling duplicates pixels exactly and folds gradients back") {
    Tape t;
    Tensor in(Shape::chw(1, 2, 2));
    in.data = {1.0f, 2.0f, 3.0f, 4.0f};
    NodeId x = t.leaf(in, true);
    NodeId up = t.upsample2x(x);
    const float want[16] = {1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
    REQUIRE(t.shape(up) == Shape::chw(1, 4, 4));
    for (int i = 0; i < 16; ++i) CHECK(t.value(up).data[static_cast<size_t>(i)] == want[i]);

    t.backward(t.sum(up));
    for (float g : t.grad(x).data) CHECK(g == 4.0f);
}

TEST_CASE("average-pooling an upsampled image recovers it exactly") {
    Rng rng(5);
    Tensor img = synth::uniform_tensor(Shape::chw(3, 4, 4), rng, 0.0f, 1.0f);
    Tape t;
    const Tensor& up = t.value(t.upsample2x(t.constant(img)));
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x) {
                const float s = (up.at(c, 2 * y, 2 * x) + up.at(c, 2 * y, 2 * x + 1) +
                                 up.at(c, 2 * y + 1, 2 * x) + up.at(c, 2 * y + 1, 2 * x + 1)) /
                                4.0f;
                CHECK(s == img.at(c, y, x));
            }
}

TEST_CASE("spatial gradient: constants vanish, a ramp differences, boundary is zero") {
    Tape t;
    CHECK(synth::mean_of(t.value(t.spatial_gradient(
              t.constant(Tensor(Shape::chw(2, 4, 5), 0.31f))))) == 0.0);

    Tensor row(Shape::chw(1, 1, 3));
    row.data = {0.0f, 0.5f, 1.0f};
    const Tensor& g = t.value(t.spatial_gradient(t.constant(row)));
    REQUIRE(g.shape == Shape::chw(2, 1, 3));
    CHECK(g.data[0] == 0.5f); // ∂x
    CHECK(g.data[1] == 0.5f);
    CHECK(g.data[2] == 0.0f); // last column
    CHECK(g.data[3] == 0.0f); // ∂y of a single row
    CHECK(g.data[4] == 0.0f);
    CHECK(g.data[5] == 0.0f);
}

TEST_CASE("spatial gradient matches a loop oracle on random input") {
    Rng rng(29);
    Tensor img = synth::uniform_tensor(Shape::chw(1, 5, 5), rng, -1.0f, 1.0f);
    Tape t;
    const Tensor& g = t.value(t.spatial_gradient(t.constant(img)));
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x) {
            const float gx = x + 1 < 5 ? img.at(0, y, x + 1) - img.at(0, y, x) : 0.0f;
            const float gy = y + 1 < 5 ? img.at(0, y + 1, x) - img.at(0, y, x) : 0.0f;
            CHECK(g.at(0, y, x) == gx);
            CHECK(g.at(1, y, x) == gy);
        }
}

TEST_CASE("spatial gradient adjoint telescopes under an all-ones upstream") {
    Tape t;
    Rng rng(31);
    NodeId x = t.leaf(synth::uniform_tensor(Shape::chw(1, 3, 3), rng, 0.0f, 1.0f), true);
    t.backward(t.sum(t.spatial_gradient(x)));
    // each direction contributes -1 at its low edge, +1 at its high edge
    const float part[3] = {-1.0f, 0.0f, 1.0f};
    for (int y = 0; y < 3; ++y)
        for (int x2 = 0; x2 < 3; ++x2)
            CHECK(t.grad(x).at(0, y, x2) == part[x2] + part[y]);
}

TEST_CASE("reductions and channel max match hand values") {
    Tape t;
    CHECK(t.value(t.mean(t.constant(vec({1.0f, 2.0f, 3.0f})))).data[0] == 2.0f);
    CHECK(t.value(t.sum(t.constant(vec({1.5f, -0.5f})))).data[0] == 1.0f);

    Tensor px(Shape::chw(3, 1, 1));
    px.data = {0.2f, 0.5f, 0.3f};
    NodeId mx = t.channel_max(t.constant(px));
    CHECK(t.shape(mx) == Shape::chw(1, 1, 1));
    CHECK(t.value(mx).data[0] == 0.5f);
}

TEST_CASE("reduction gradients are uniform") {
    Tape t;
    NodeId x = t.leaf(Tensor(Shape::chw(2, 2, 2), 0.4f), true);
    t.backward(t.sum(x));
    for (float g : t.grad(x).data) CHECK(g == 1.0f);

    Tape t2;
    NodeId y = t2.leaf(Tensor(Shape::chw(2, 2, 2), 0.4f), true);
    t2.backward(t2.mean(y));
    for (float g : t2.grad(y).data) CHECK(g == 1.0f / 8.0f);
}

TEST_CASE("gradient of a sum of squares is twice the input") {
    Tape t;
    NodeId z = t.leaf(vec({1.0f, -2.0f}), true);
    t.backward(t.sum(t.mul(z, z)));
    CHECK(t.grad(z).data[0] == 2.0f);
    CHECK(t.grad(z).data[1] == -4.0f);
}

TEST_CASE("backward is linear in the objective") {
    Rng rng(41);
    Tensor x0 = synth::uniform_tensor(Shape::chw(1, 4, 4), rng, 0.1f, 0.9f);
    auto grad_of = [&](float a, float b) {
        Tape t;
        NodeId x = t.leaf(x0, true);
        NodeId f = t.mean(t.mul(x, x));
        NodeId g = t.sum(t.abs_(x));
        NodeId y = t.add(t.mul(t.constant_scalar(a), f), t.mul(t.constant_scalar(b), g));
        t.backward(y);
        return t.grad(x);
    };
    Tensor gf = grad_of(1.0f, 0.0f);
    Tensor gg = grad_of(0.0f, 1.0f);
    Tensor gmix = grad_of(2.0f, 0.5f);
    for (size_t i = 0; i < gmix.data.size(); ++i)
        CHECK(gmix.data[i] ==
              doctest::Approx(2.0f * gf.data[i] + 0.5f * gg.data[i]).epsilon(1e-6));
}

TEST_CASE("repeated backward accumulates leaf gradients") {
    Tape t;
    NodeId x = t.leaf(vec({0.7f, -0.3f}), true);
    NodeId y = t.sum(t.mul(x, x));
    t.backward(y);
    Tensor once = t.grad(x);
    t.backward(y);
    for (size_t i = 0; i < once.data.size(); ++i)
        CHECK(t.grad(x).data[i] == 2.0f * once.data[i]);
    t.zero_grads();
    t.backward(y);
    for (size_t i = 0; i < once.data.size(); ++i) CHECK(t.grad(x).data[i] == once.data[i]);
}

TEST_CASE("frozen leaves receive no gradient and do not change values") {
    Rng rng(43);
    Tensor img = synth::uniform_tensor(Shape::chw(1, 4, 4), rng, 0.0f, 1.0f);
    Tensor w = synth::uniform_tensor(Shape::conv(1, 1, 3, 3), rng, -0.5f, 0.5f);
    Tensor bias(Shape::vec(1));

    auto value_with = [&](bool freeze) {
        Tape t;
        NodeId x = t.leaf(img, true);
        NodeId wn = t.leaf(w, !freeze);
        NodeId out = t.mean(t.conv2d(x, wn, t.constant(bias), PadMode::Reflect));
        t.backward(out);
        CHECK(t.has_grad(wn) == !freeze);
        CHECK(t.has_grad(x));
        return t.value(out);
    };
    CHECK(synth::bitwise_equal(value_with(true), value_with(false)));
}

TEST_CASE("scalar and channel broadcasts route gradients correctly") {
    Tape t;
    Tensor full(Shape::chw(3, 2, 2));
    for (size_t i = 0; i < full.data.size(); ++i) full.data[i] = static_cast<float>(i) * 0.125f;
    Tensor plane(Shape::chw(1, 2, 2));
    plane.data = {0.5f, 1.0f, 1.5f, 2.0f};

    NodeId r = t.leaf(full, true);
    NodeId l = t.leaf(plane, true);
    NodeId s = t.leaf(Tensor::scalar(0.75f), true);
    NodeId y = t.sum(t.mul(t.mul(r, l), s));
    t.backward(y);

    // d/dl sums over channels, d/dr sees the broadcast plane, d/ds reduces all
    double want_s = 0.0;
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 4; ++i) {
            const float rl = full.data[static_cast<size_t>(c) * 4 + i] * plane.data[i];
            want_s += rl;
            CHECK(t.grad(r).data[static_cast<size_t>(c) * 4 + i] ==
                  doctest::Approx(plane.data[i] * 0.75f).epsilon(1e-6));
        }
    for (int i = 0; i < 4; ++i) {
        const float want_l = (full.data[i] + full.data[4 + i] + full.data[8 + i]) * 0.75f;
        CHECK(t.grad(l).data[i] == doctest::Approx(want_l).epsilon(1e-6));
    }
    CHECK(t.grad(s).data[0] == doctest::Approx(want_s).epsilon(1e-6));
}

TEST_CASE("identical graphs evaluate identically") {
    auto build = [] {
        Rng rng(47);
        Tape t;
        NodeId x = t.leaf(synth::uniform_tensor(Shape::chw(2, 6, 6), rng, 0.0f, 1.0f), true);
        NodeId y = t.mean(t.sigmoid(t.spatial_gradient(t.leaky_relu(x, 0.2f))));
        t.backward(y);
        return std::pair<Tensor, Tensor>(t.value(y), t.grad(x));
    };
    auto [v1, g1] = build();
    auto [v2, g2] = build();
    CHECK(synth::bitwise_equal(v1, v2));
    CHECK(synth::bitwise_equal(g1, g2));
}

TEST_CASE("shape and usage violations are rejected") {
    Tape t;
    NodeId a = t.constant(vec({1.0f, 2.0f, 3.0f}));
    NodeId b = t.constant(vec({1.0f, 2.0f, 3.0f, 4.0f}));
    CHECK_THROWS_AS(t.add(a, b), Error);

    // channel broadcast requires matching spatial extents
    NodeId c3 = t.constant(Tensor(Shape::chw(3, 4, 4), 1.0f));
    NodeId c1 = t.constant(Tensor(Shape::chw(1, 4, 5), 1.0f));
    CHECK_THROWS_AS(t.mul(c3, c1), Error);

    NodeId learnable = t.leaf(Tensor(Shape::chw(3, 2, 2), 0.5f), true);
    CHECK_THROWS_AS(t.channel_max(learnable), Error);

    CHECK_THROWS_AS(t.backward(a), Error); // non-scalar objective

    NodeId img = t.constant(Tensor(Shape::chw(1, 4, 4), 0.5f));
    NodeId even_k = t.constant(Tensor(Shape::conv(1, 1, 2, 2), 0.1f));
    NodeId bias = t.constant(Tensor(Shape::vec(1)));
    CHECK_THROWS_AS(t.conv2d(img, even_k, bias, PadMode::Zero), Error);

    CHECK_THROWS_AS(t.slice_channels(img, 0, 2), Error);
}
