#include "rseed/losses.hpp"

#include "rseed/kernels/kernels.hpp"

#include <cmath>

namespace rseed {

void LossWeights::validate() const {
    check_shape(lambda_re >= 0 && lambda_e >= 0 && lambda_s >= 0 && lambda_i >= 0,
                "loss weights must be non-negative");
    check_shape(tau >= 0, "tau must be non-negative");
    check_shape(exposure_e > 0 && exposure_e < 1, "exposure level must lie in (0,1)");
}

namespace {

constexpr int kBlurSize = 25;
constexpr double kBlurSigma = 2.0;

// 25×25 kernel as the outer product of a 1-D Gaussian, normalized to sum
// exactly 1 in double before the cast, so constant images stay constant.
Tensor gaussian_kernel_25() {
    double g1[kBlurSize];
    const int c = kBlurSize / 2;
    for (int i = 0; i < kBlurSize; ++i) {
        const double d = i - c;
        g1[i] = std::exp(-d * d / (2.0 * kBlurSigma * kBlurSigma));
    }
    double sum = 0.0;
    for (int y = 0; y < kBlurSize; ++y)
        for (int x = 0; x < kBlurSize; ++x) sum += g1[y] * g1[x];
    Tensor k(Shape::conv(1, 1, kBlurSize, kBlurSize));
    for (int y = 0; y < kBlurSize; ++y)
        for (int x = 0; x < kBlurSize; ++x)
            k.data[static_cast<size_t>(y) * kBlurSize + x] =
                static_cast<float>(g1[y] * g1[x] / sum);
    return k;
}

} // namespace

Tensor illumination_target(const Tensor& i_low) {
    check_shape(i_low.shape.rank == 3 && i_low.shape.d[0] == 3,
                "illumination target expects a 3×H×W image, got " + i_low.shape.str());
    const int h = i_low.shape.d[1], w = i_low.shape.d[2];
    const int p = kBlurSize / 2;
    const Tensor kern = gaussian_kernel_25();
    const Tensor padded = pad_chw(i_low, p, PadMode::Reflect);
    const size_t plane = static_cast<size_t>(h) * w;
    const size_t pplane = static_cast<size_t>(h + 2 * p) * (w + 2 * p);

    Tensor out(Shape::chw(1, h, w));
    Tensor blurred(Shape::chw(1, h, w));
    const auto& K = kernels::ops();
    for (int c = 0; c < 3; ++c) {
        K.conv_valid(padded.data.data() + static_cast<size_t>(c) * pplane, kern.data.data(),
                     nullptr, blurred.data.data(), 1, h + 2 * p, w + 2 * p, 1, kBlurSize, 0, 1);
        if (c == 0) {
            out.data = blurred.data;
        } else {
            for (size_t i = 0; i < plane; ++i)
                out.data[i] = std::max(out.data[i], blurred.data[i]);
        }
    }
    return out;
}

NodeId loss_reconstruction(Tape& tape, NodeId i_low, NodeId reconstruction) {
    check_shape(tape.shape(i_low) == tape.shape(reconstruction),
                "reconstruction loss shape mismatch: " + tape.shape(i_low).str() + " vs " +
                    tape.shape(reconstruction).str());
    NodeId d = tape.sub(i_low, reconstruction);
    return tape.mean(tape.mul(d, d));
}

NodeId loss_illumination_consistency(Tape& tape, NodeId target, NodeId illumination) {
    check_shape(tape.shape(target) == tape.shape(illumination),
                "illumination consistency shape mismatch: " + tape.shape(target).str() +
                    " vs " + tape.shape(illumination).str());
    return tape.mean(tape.abs_(tape.sub(target, illumination)));
}

NodeId loss_smoothness(Tape& tape, NodeId illumination, NodeId reflectance, float tau) {
    const Shape& ls = tape.shape(illumination);
    const Shape& rs = tape.shape(reflectance);
    check_shape(ls.rank == 3 && rs.rank == 3 && ls.d[1] == rs.d[1] && ls.d[2] == rs.d[2],
                "smoothness loss dim mismatch: " + ls.str() + " vs " + rs.str());
    check_shape(rs.d[0] == 3, "smoothness loss expects 3-channel reflectance");

    NodeId grad_l = tape.abs_(tape.spatial_gradient(illumination)); // 2×H×W
    NodeId grad_r = tape.abs_(tape.spatial_gradient(reflectance));  // 6×H×W

    // per-direction channel mean of |∇R|: (|∂R0|+|∂R1|+|∂R2|)/3 for x then y
    NodeId third = tape.constant_scalar(1.0f / 3.0f);
    auto dir_mean = [&](int c0) {
        NodeId s = tape.add(tape.slice_channels(grad_r, c0, c0 + 1),
                            tape.slice_channels(grad_r, c0 + 1, c0 + 2));
        s = tape.add(s, tape.slice_channels(grad_r, c0 + 2, c0 + 3));
        return tape.mul(s, third);
    };
    NodeId w = tape.concat_channels(dir_mean(0), dir_mean(3)); // 2×H×W
    NodeId term_l = tape.mean(tape.div(grad_l, tape.exp_(w)));
    NodeId term_r = tape.mean(grad_r);
    return tape.add(term_l, tape.mul(tape.constant_scalar(tau), term_r));
}

NodeId loss_illumination_control(Tape& tape, NodeId reflectance, NodeId illumination,
                                 NodeId gamma, float exposure_e) {
    NodeId composed = tape.mul(reflectance, tape.pow_node(illumination, gamma));
    NodeId e = tape.constant_scalar(exposure_e);
    return tape.mean(tape.abs_(tape.sub(e, composed)));
}

LossNodes loss_total(Tape& tape, NodeId re, NodeId e, NodeId s, NodeId i,
                     const LossWeights& w) {
    w.validate();
    LossNodes out;
    out.re = re;
    out.e = e;
    out.s = s;
    out.i = i;
    NodeId t = tape.mul(tape.constant_scalar(w.lambda_re), re);
    t = tape.add(t, tape.mul(tape.constant_scalar(w.lambda_e), e));
    t = tape.add(t, tape.mul(tape.constant_scalar(w.lambda_s), s));
    t = tape.add(t, tape.mul(tape.constant_scalar(w.lambda_i), i));
    out.total = t;
    return out;
}

} // namespace rseed
