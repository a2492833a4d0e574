#include "rseed/kernels/kernels.hpp"
#include "rseed/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

using namespace rseed;
using kernels::Ops;

namespace {

std::vector<float> random_vec(Rng& rng, size_t n, float lo = -2.0f, float hi = 2.0f) {
    std::vector<float> v(n);
    for (float& x : v) x = lo + (hi - lo) * rng.uniform();
    return v;
}

bool same_bits(const std::vector<float>& a, const std::vector<float>& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), sizeof(float) * a.size()) == 0;
}

// Lengths straddling the SIMD width, including scalar-only tails.
const size_t kLens[] = {1, 3, 7, 8, 9, 16, 31, 100};

} // namespace

TEST_CASE("active kernel table is one of the known ISAs") {
    const std::string isa = kernels::active_isa();
    CHECK((isa == "scalar" || isa == "avx2" || isa == "neon"));
    CHECK(std::string(kernels::ops().isa) == isa);
    CHECK(std::string(kernels::scalar_ops().isa) == "scalar");
}

TEST_CASE("elementwise kernels match the scalar reference bit for bit") {
    const Ops& act = kernels::ops();
    const Ops& ref = kernels::scalar_ops();
    if (std::string(act.isa) == "scalar")
        MESSAGE("active ISA is scalar; comparison is vacuous on this machine");

    Rng rng(7);
    for (size_t n : kLens) {
        const auto a = random_vec(rng, n);
        const auto b = random_vec(rng, n, 0.1f, 2.0f); // away from 0 for vdiv
        const auto y0 = random_vec(rng, n);

        CAPTURE(n);
        {
            std::vector<float> o1(n), o2(n);
            act.vadd(a.data(), b.data(), o1.data(), n);
            ref.vadd(a.data(), b.data(), o2.data(), n);
            CHECK(same_bits(o1, o2));
            act.vsub(a.data(), b.data(), o1.data(), n);
            ref.vsub(a.data(), b.data(), o2.data(), n);
            CHECK(same_bits(o1, o2));
            act.vmul(a.data(), b.data(), o1.data(), n);
            ref.vmul(a.data(), b.data(), o2.data(), n);
            CHECK(same_bits(o1, o2));
            act.vdiv(a.data(), b.data(), o1.data(), n);
            ref.vdiv(a.data(), b.data(), o2.data(), n);
            CHECK(same_bits(o1, o2));
        }
        {
            std::vector<float> y1 = y0, y2 = y0;
            act.vacc(y1.data(), a.data(), n);
            ref.vacc(y2.data(), a.data(), n);
            CHECK(same_bits(y1, y2));
        }
        {
            std::vector<float> y1 = y0, y2 = y0;
            act.vaxpy(y1.data(), a.data(), 0.37f, n);
            ref.vaxpy(y2.data(), a.data(), 0.37f, n);
            CHECK(same_bits(y1, y2));
        }
        {
            std::vector<float> y1 = y0, y2 = y0;
            act.vmulacc(y1.data(), a.data(), b.data(), n);
            ref.vmulacc(y2.data(), a.data(), b.data(), n);
            CHECK(same_bits(y1, y2));
        }
        {
            std::vector<float> o1(n), o2(n);
            act.lrelu(a.data(), 0.2f, o1.data(), n);
            ref.lrelu(a.data(), 0.2f, o2.data(), n);
            CHECK(same_bits(o1, o2));
            std::vector<float> y1 = y0, y2 = y0;
            act.lrelu_bwd(a.data(), b.data(), 0.2f, y1.data(), n);
            ref.lrelu_bwd(a.data(), b.data(), 0.2f, y2.data(), n);
            CHECK(same_bits(y1, y2));
        }
        {
            // sigmoid outputs live in (0,1)
            const auto s = random_vec(rng, n, 0.01f, 0.99f);
            std::vector<float> y1 = y0, y2 = y0;
            act.sigmoid_bwd(s.data(), a.data(), y1.data(), n);
            ref.sigmoid_bwd(s.data(), a.data(), y2.data(), n);
            CHECK(same_bits(y1, y2));
        }
        {
            std::vector<float> o1(2 * n), o2(2 * n);
            act.dup2(a.data(), o1.data(), n);
            ref.dup2(a.data(), o2.data(), n);
            CHECK(same_bits(o1, o2));
            for (size_t i = 0; i < n; ++i) {
                CHECK(o1[2 * i] == a[i]);
                CHECK(o1[2 * i + 1] == a[i]);
            }
        }
        {
            const auto g = random_vec(rng, 2 * n);
            std::vector<float> y1 = y0, y2 = y0;
            act.fold2(g.data(), y1.data(), n);
            ref.fold2(g.data(), y2.data(), n);
            CHECK(same_bits(y1, y2));
            for (size_t i = 0; i < n; ++i)
                CHECK(y1[i] == y0[i] + (g[2 * i] + g[2 * i + 1]));
        }
    }
}

namespace {

struct ConvCase {
    int ic, ih, iw, oc, k;
};

void check_conv_equivalence(const ConvCase& c, bool with_bias) {
    CAPTURE(c.ic);
    CAPTURE(c.ih);
    CAPTURE(c.iw);
    CAPTURE(c.oc);
    CAPTURE(c.k);
    Rng rng(static_cast<uint64_t>(c.ic * 1000003 + c.ih * 7919 + c.iw * 131 + c.oc * 17 + c.k));
    const auto in = random_vec(rng, static_cast<size_t>(c.ic) * c.ih * c.iw, -1.0f, 1.0f);
    const auto w =
        random_vec(rng, static_cast<size_t>(c.oc) * c.ic * c.k * c.k, -0.5f, 0.5f);
    const auto bias = random_vec(rng, static_cast<size_t>(c.oc), -0.1f, 0.1f);
    const int oh = c.ih - c.k + 1, ow = c.iw - c.k + 1;
    const size_t on = static_cast<size_t>(c.oc) * oh * ow;

    std::vector<float> o1(on), o2(on);
    kernels::ops().conv_valid(in.data(), w.data(), with_bias ? bias.data() : nullptr, o1.data(),
                              c.ic, c.ih, c.iw, c.oc, c.k, 0, c.oc);
    kernels::scalar_ops().conv_valid(in.data(), w.data(), with_bias ? bias.data() : nullptr,
                                     o2.data(), c.ic, c.ih, c.iw, c.oc, c.k, 0, c.oc);
    for (size_t i = 0; i < on; ++i) {
        const float tol = 1e-5f * std::max(1.0f, std::fabs(o2[i]));
        CHECK(std::fabs(o1[i] - o2[i]) <= tol);
    }
}

} // namespace

TEST_CASE("convolution variants agree with the naive reference") {
    // 3x3 cases cover even/odd output extents (whole tiles, remainder strips)
    check_conv_equivalence({3, 6, 6, 4, 3}, true);    // even/even
    check_conv_equivalence({3, 7, 6, 4, 3}, true);    // odd rows
    check_conv_equivalence({3, 6, 9, 4, 3}, false);   // odd cols
    check_conv_equivalence({8, 17, 13, 5, 3}, true);  // both odd, more channels
    check_conv_equivalence({3, 4, 4, 2, 3}, true);    // minimum tiled size
    check_conv_equivalence({2, 3, 8, 2, 3}, true);    // too short to tile
    check_conv_equivalence({1, 130, 130, 1, 3}, true); // production-scale plane
    check_conv_equivalence({4, 5, 5, 3, 1}, true);    // pointwise
    check_conv_equivalence({1, 30, 30, 1, 25}, true); // blur-sized kernel
}

TEST_CASE("convolution respects the output-channel restriction") {
    Rng rng(19);
    const int ic = 3, ih = 8, iw = 8, oc = 4, k = 3;
    const auto in = random_vec(rng, static_cast<size_t>(ic) * ih * iw);
    const auto w = random_vec(rng, static_cast<size_t>(oc) * ic * k * k, -0.3f, 0.3f);
    const int oh = ih - k + 1, ow = iw - k + 1;
    const size_t plane = static_cast<size_t>(oh) * ow;

    std::vector<float> full(oc * plane), part(oc * plane, -77.0f);
    kernels::ops().conv_valid(in.data(), w.data(), nullptr, full.data(), ic, ih, iw, oc, k, 0, oc);
    kernels::ops().conv_valid(in.data(), w.data(), nullptr, part.data(), ic, ih, iw, oc, k, 1, 3);

    for (size_t i = 0; i < plane; ++i) {
        CHECK(part[i] == -77.0f);                       // channel 0 untouched
        CHECK(part[3 * plane + i] == -77.0f);           // channel 3 untouched
        CHECK(part[plane + i] == full[plane + i]);      // channels 1,2 written
        CHECK(part[2 * plane + i] == full[2 * plane + i]);
    }
}

TEST_CASE("weight-gradient kernels agree across variants") {
    Rng rng(23);
    const int ic = 3, ih = 9, iw = 7, oc = 4, k = 3;
    const int oh = ih - k + 1, ow = iw - k + 1;
    const auto in = random_vec(rng, static_cast<size_t>(ic) * ih * iw);
    const auto gout = random_vec(rng, static_cast<size_t>(oc) * oh * ow);
    const size_t wn = static_cast<size_t>(oc) * ic * k * k;

    std::vector<float> gw1(wn, 0.5f), gw2(wn, 0.5f); // accumulates on top
    std::vector<float> gb1(oc, -0.25f), gb2(oc, -0.25f);
    kernels::ops().conv_wgrad(gout.data(), in.data(), gw1.data(), gb1.data(), ic, ih, iw, oc,
                              k, 0, oc);
    kernels::scalar_ops().conv_wgrad(gout.data(), in.data(), gw2.data(), gb2.data(), ic, ih,
                                     iw, oc, k, 0, oc);
    for (size_t i = 0; i < wn; ++i)
        CHECK(std::fabs(gw1[i] - gw2[i]) <= 1e-5f * std::max(1.0f, std::fabs(gw2[i])));
    for (int o = 0; o < oc; ++o)
        CHECK(std::fabs(gb1[o] - gb2[o]) <= 1e-5f * std::max(1.0f, std::fabs(gb2[o])));
}
