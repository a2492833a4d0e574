#include "rseed/autodiff.hpp"

#include "rseed/kernels/kernels.hpp"
#include "rseed/threadpool.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

namespace rseed {

namespace {

// Broadcast pattern of a binary op, decided from the operand shapes.
enum class Bc { Same, AScalar, BScalar, AChan, BChan };

Bc bc_of(const Shape& a, const Shape& b) {
    if (a == b) return Bc::Same;
    if (a.rank == 0) return Bc::AScalar;
    if (b.rank == 0) return Bc::BScalar;
    if (a.rank == 3 && b.rank == 3 && a.d[1] == b.d[1] && a.d[2] == b.d[2]) {
        if (a.d[0] == 1 && b.d[0] > 1) return Bc::AChan;
        if (b.d[0] == 1 && a.d[0] > 1) return Bc::BChan;
    }
    throw Error("shape mismatch beyond broadcast rules: " + a.str() + " vs " + b.str());
}

Shape bc_out(const Shape& a, const Shape& b, Bc bc) {
    switch (bc) {
    case Bc::Same:
    case Bc::BScalar:
    case Bc::BChan: return a;
    default: return b;
    }
}

// Maps an output index to the operand index under a broadcast pattern.
struct BcIndex {
    size_t plane; // H*W, used for channel broadcast
    bool scalar;
    bool chan;
    size_t operator()(size_t i) const {
        if (scalar) return 0;
        if (chan) return i % plane;
        return i;
    }
};

BcIndex index_a(const Shape& out, Bc bc) {
    return {static_cast<size_t>(out.rank == 3 ? out.d[1] * out.d[2] : 1),
            bc == Bc::AScalar, bc == Bc::AChan};
}

BcIndex index_b(const Shape& out, Bc bc) {
    return {static_cast<size_t>(out.rank == 3 ? out.d[1] * out.d[2] : 1),
            bc == Bc::BScalar, bc == Bc::BChan};
}

template <class F>
void bc_forward(const Tensor& a, const Tensor& b, Tensor& out, Bc bc, F f) {
    const BcIndex ia = index_a(out.shape, bc);
    const BcIndex ib = index_b(out.shape, bc);
    const size_t n = out.data.size();
    const float* pa = a.data.data();
    const float* pb = b.data.data();
    float* po = out.data.data();
    for (size_t i = 0; i < n; ++i) po[i] = f(pa[ia(i)], pb[ib(i)]);
}

// Accumulates per-output-element contributions f(i) into an operand gradient,
// reducing over broadcast positions. Scalar reductions run in double so the
// result does not depend on how large the map is.
template <class F>
void bc_accumulate(float* dst, const Shape& out, const BcIndex& ix, F f) {
    const size_t n = static_cast<size_t>(out.numel());
    if (ix.scalar) {
        double s = 0.0;
        for (size_t i = 0; i < n; ++i) s += static_cast<double>(f(i));
        dst[0] += static_cast<float>(s);
    } else if (ix.chan) {
        for (size_t c0 = 0; c0 < n; c0 += ix.plane)
            for (size_t j = 0; j < ix.plane; ++j) dst[j] += f(c0 + j);
    } else {
        for (size_t i = 0; i < n; ++i) dst[i] += f(i);
    }
}

int reflect_ix(int i, int n) {
    if (n == 1) return 0;
    if (i < 0) i = -i;
    const int m = 2 * (n - 1);
    i %= m;
    return i < n ? i : m - i;
}

bool is_integer(float e) { return std::isfinite(e) && std::nearbyint(e) == e; }

// Splits [0, oc) convolution output channels across the pool. Chunks own
// disjoint output planes, so the result is schedule-independent.
template <class F>
void for_channel_chunks(int oc, F run_range) {
    const int nt = std::min(max_threads(), oc);
    if (nt <= 1) {
        run_range(0, oc);
        return;
    }
    const int step = (oc + nt - 1) / nt;
    parallel_for(nt, [&](int ci) {
        const int c0 = ci * step;
        const int c1 = std::min(oc, c0 + step);
        if (c0 < c1) run_range(c0, c1);
    });
}

void conv_valid_mt(const float* in, const float* w, const float* bias, float* out,
                   int ic, int ih, int iw, int oc, int k) {
    const auto& K = kernels::ops();
    for_channel_chunks(oc, [&](int c0, int c1) {
        K.conv_valid(in, w, bias, out, ic, ih, iw, oc, k, c0, c1);
    });
}

void conv_wgrad_mt(const float* gout, const float* in, float* gw, float* gbias,
                   int ic, int ih, int iw, int oc, int k) {
    const auto& K = kernels::ops();
    for_channel_chunks(oc, [&](int c0, int c1) {
        K.conv_wgrad(gout, in, gw, gbias, ic, ih, iw, oc, k, c0, c1);
    });
}

} // namespace

Tensor pad_chw(const Tensor& t, int p, PadMode mode) {
    check_shape(t.shape.rank == 3, "pad expects a C×H×W tensor, got " + t.shape.str());
    const int c = t.shape.d[0], h = t.shape.d[1], w = t.shape.d[2];
    if (mode == PadMode::Reflect)
        check_shape(p <= h - 1 && p <= w - 1,
                    "reflect padding " + std::to_string(p) + " too large for " + t.shape.str());
    const int hp = h + 2 * p, wp = w + 2 * p;
    Tensor out = Tensor::uninit(Shape::chw(c, hp, wp));
    for (int ci = 0; ci < c; ++ci) {
        const float* src = t.data.data() + static_cast<size_t>(ci) * h * w;
        float* dst = out.data.data() + static_cast<size_t>(ci) * hp * wp;
        for (int y = 0; y < hp; ++y) {
            const int sy = y - p;
            float* drow = dst + static_cast<size_t>(y) * wp;
            if (mode == PadMode::Zero) {
                if (sy < 0 || sy >= h) {
                    std::memset(drow, 0, sizeof(float) * static_cast<size_t>(wp));
                    continue;
                }
                std::memset(drow, 0, sizeof(float) * static_cast<size_t>(p));
                std::memcpy(drow + p, src + static_cast<size_t>(sy) * w,
                            sizeof(float) * static_cast<size_t>(w));
                std::memset(drow + p + w, 0, sizeof(float) * static_cast<size_t>(p));
            } else {
                const float* row = src + static_cast<size_t>(reflect_ix(sy, h)) * w;
                for (int x = 0; x < p; ++x) drow[x] = row[reflect_ix(x - p, w)];
                std::memcpy(drow + p, row, sizeof(float) * static_cast<size_t>(w));
                for (int x = p + w; x < wp; ++x) drow[x] = row[reflect_ix(x - p, w)];
            }
        }
    }
    return out;
}

namespace {

// Adjoint of pad_chw: folds a gradient on the padded tensor back onto the
// original extent.
void pad_adjoint(const Tensor& gp, int p, PadMode mode, int h, int w, float* dst) {
    const auto& K = kernels::ops();
    const int c = gp.shape.d[0], hp = gp.shape.d[1], wp = gp.shape.d[2];
    for (int ci = 0; ci < c; ++ci) {
        const float* g = gp.data.data() + static_cast<size_t>(ci) * hp * wp;
        float* d = dst + static_cast<size_t>(ci) * h * w;
        for (int y = 0; y < hp; ++y) {
            const int sy = y - p;
            if (mode == PadMode::Zero) {
                if (sy < 0 || sy >= h) continue;
                K.vacc(d + static_cast<size_t>(sy) * w, g + static_cast<size_t>(y) * wp + p,
                       static_cast<size_t>(w));
            } else {
                const int ry = reflect_ix(sy, h);
                const float* grow = g + static_cast<size_t>(y) * wp;
                float* drow = d + static_cast<size_t>(ry) * w;
                for (int x = 0; x < p; ++x) drow[reflect_ix(x - p, w)] += grow[x];
                K.vacc(drow, grow + p, static_cast<size_t>(w));
                for (int x = p + w; x < wp; ++x) drow[reflect_ix(x - p, w)] += grow[x];
            }
        }
    }
}

} // namespace

NodeId Tape::push(Node&& n) {
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::leaf(const Tensor& value, bool requires_grad) {
    Node n;
    n.kind = OpKind::Leaf;
    n.val = value;
    n.requires_grad = requires_grad;
    return push(std::move(n));
}

NodeId Tape::binary(OpKind kind, NodeId a, NodeId b) {
    const Tensor& A = nodes_[a].val;
    const Tensor& B = nodes_[b].val;
    const Bc bc = bc_of(A.shape, B.shape);
    Node n;
    n.kind = kind;
    n.in0 = a;
    n.in1 = b;
    n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
    n.val = Tensor::uninit(bc_out(A.shape, B.shape, bc));
    const auto& K = kernels::ops();
    const size_t cnt = n.val.data.size();
    if (bc == Bc::Same) {
        switch (kind) {
        case OpKind::Add: K.vadd(A.data.data(), B.data.data(), n.val.data.data(), cnt); break;
        case OpKind::Sub: K.vsub(A.data.data(), B.data.data(), n.val.data.data(), cnt); break;
        case OpKind::Mul: K.vmul(A.data.data(), B.data.data(), n.val.data.data(), cnt); break;
        case OpKind::Div: K.vdiv(A.data.data(), B.data.data(), n.val.data.data(), cnt); break;
        default: throw Error("internal: bad binary op");
        }
    } else {
        switch (kind) {
        case OpKind::Add: bc_forward(A, B, n.val, bc, [](float x, float y) { return x + y; }); break;
        case OpKind::Sub: bc_forward(A, B, n.val, bc, [](float x, float y) { return x - y; }); break;
        case OpKind::Mul: bc_forward(A, B, n.val, bc, [](float x, float y) { return x * y; }); break;
        case OpKind::Div: bc_forward(A, B, n.val, bc, [](float x, float y) { return x / y; }); break;
        default: throw Error("internal: bad binary op");
        }
    }
    return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) { return binary(OpKind::Add, a, b); }
NodeId Tape::sub(NodeId a, NodeId b) { return binary(OpKind::Sub, a, b); }
NodeId Tape::mul(NodeId a, NodeId b) { return binary(OpKind::Mul, a, b); }
NodeId Tape::div(NodeId a, NodeId b) { return binary(OpKind::Div, a, b); }

NodeId Tape::pow_scalar(NodeId base, float exponent) {
    const Tensor& A = nodes_[base].val;
    if (!is_integer(exponent))
        for (float v : A.data)
            if (v <= 0.0f)
                throw Error("pow: non-positive base with non-integer exponent");
    Node n;
    n.kind = OpKind::PowScalar;
    n.in0 = base;
    n.f0 = exponent;
    n.requires_grad = nodes_[base].requires_grad;
    n.val = Tensor::uninit(A.shape);
    // x^1, x^2 and x^0.5 keep powf off the hot path; each form rounds
    // identically to the library call
    if (exponent == 1.0f) {
        std::memcpy(n.val.data.data(), A.data.data(), sizeof(float) * A.data.size());
    } else if (exponent == 2.0f) {
        kernels::ops().vmul(A.data.data(), A.data.data(), n.val.data.data(), A.data.size());
    } else if (exponent == 0.5f) {
        for (size_t i = 0; i < A.data.size(); ++i) n.val.data[i] = std::sqrt(A.data[i]);
    } else {
        for (size_t i = 0; i < A.data.size(); ++i) n.val.data[i] = std::pow(A.data[i], exponent);
    }
    return push(std::move(n));
}

NodeId Tape::pow_node(NodeId base, NodeId exponent) {
    const Tensor& A = nodes_[base].val;
    const Tensor& E = nodes_[exponent].val;
    check_shape(E.shape.rank == 0, "pow exponent must be a scalar node, got " + E.shape.str());
    for (float v : A.data)
        if (v <= 0.0f)
            throw Error("pow: non-positive base with tensor exponent");
    Node n;
    n.kind = OpKind::PowNode;
    n.in0 = base;
    n.in1 = exponent;
    n.requires_grad = nodes_[base].requires_grad || nodes_[exponent].requires_grad;
    n.val = Tensor::uninit(A.shape);
    const float e = E.data[0];
    if (e == 1.0f) {
        std::memcpy(n.val.data.data(), A.data.data(), sizeof(float) * A.data.size());
    } else {
        for (size_t i = 0; i < A.data.size(); ++i) n.val.data[i] = std::pow(A.data[i], e);
    }
    return push(std::move(n));
}

NodeId Tape::exp_(NodeId a) {
    const Tensor& A = nodes_[a].val;
    Node n;
    n.kind = OpKind::Exp;
    n.in0 = a;
    n.requires_grad = nodes_[a].requires_grad;
    n.val = Tensor::uninit(A.shape);
    for (size_t i = 0; i < A.data.size(); ++i) n.val.data[i] = std::exp(A.data[i]);
    return push(std::move(n));
}

NodeId Tape::neg(NodeId a) {
    const Tensor& A = nodes_[a].val;
    Node n;
    n.kind = OpKind::Neg;
    n.in0 = a;
    n.requires_grad = nodes_[a].requires_grad;
    n.val = Tensor::uninit(A.shape);
    for (size_t i = 0; i < A.data.size(); ++i) n.val.data[i] = -A.data[i];
    return push(std::move(n));
}

NodeId Tape::abs_(NodeId a) {
    const Tensor& A = nodes_[a].val;
    Node n;
    n.kind = OpKind::Abs;
    n.in0 = a;
    n.requires_grad = nodes_[a].requires_grad;
    n.val = Tensor::uninit(A.shape);
    for (size_t i = 0; i < A.data.size(); ++i) n.val.data[i] = std::fabs(A.data[i]);
    return push(std::move(n));
}

NodeId Tape::sigmoid(NodeId a) {
    const Tensor& A = nodes_[a].val;
    Node n;
    n.kind = OpKind::Sigmoid;
    n.in0 = a;
    n.requires_grad = nodes_[a].requires_grad;
    n.val = Tensor::uninit(A.shape);
    for (size_t i = 0; i < A.data.size(); ++i)
        n.val.data[i] = 1.0f / (1.0f + std::exp(-A.data[i]));
    return push(std::move(n));
}

NodeId Tape::leaky_relu(NodeId a, float slope) {
    const Tensor& A = nodes_[a].val;
    Node n;
    n.kind = OpKind::LeakyRelu;
    n.in0 = a;
    n.f0 = slope;
    n.requires_grad = nodes_[a].requires_grad;
    n.val = Tensor::uninit(A.shape);
    kernels::ops().lrelu(A.data.data(), slope, n.val.data.data(), A.data.size());
    return push(std::move(n));
}

NodeId Tape::conv2d(NodeId input, NodeId kernel, NodeId bias, PadMode pad) {
    const Tensor& X = nodes_[input].val;
    const Tensor& W = nodes_[kernel].val;
    check_shape(X.shape.rank == 3, "conv2d input must be C×H×W, got " + X.shape.str());
    check_shape(W.shape.rank == 4, "conv2d kernel must be OC×IC×K×K, got " + W.shape.str());
    const int oc = W.shape.d[0], wic = W.shape.d[1], kh = W.shape.d[2], kw = W.shape.d[3];
    check_shape(kh == kw, "conv2d kernel must be square, got " + W.shape.str());
    check_shape(kh % 2 == 1, "conv2d kernel size must be odd, got " + std::to_string(kh));
    const int ic = X.shape.d[0], h = X.shape.d[1], w = X.shape.d[2];
    if (wic != ic)
        throw Error("conv2d channel mismatch: input has " + std::to_string(ic) +
                    " channels, kernel expects " + std::to_string(wic));
    bool bias_grad = false;
    const float* bias_ptr = nullptr;
    if (bias >= 0) {
        const Tensor& B = nodes_[bias].val;
        check_shape(B.shape.rank == 1 && B.shape.d[0] == oc,
                    "conv2d bias must be a vector of length " + std::to_string(oc) +
                        ", got " + B.shape.str());
        bias_ptr = B.data.data();
        bias_grad = nodes_[bias].requires_grad;
    }

    const int p = (kh - 1) / 2;
    Node n;
    n.kind = OpKind::Conv2d;
    n.in0 = input;
    n.in1 = kernel;
    n.in2 = bias;
    n.pad = pad;
    n.requires_grad =
        nodes_[input].requires_grad || nodes_[kernel].requires_grad || bias_grad;
    n.saved = pad_chw(X, p, pad);
    n.val = Tensor::uninit(Shape::chw(oc, h, w));
    conv_valid_mt(n.saved.data.data(), W.data.data(), bias_ptr, n.val.data.data(),
                  ic, h + 2 * p, w + 2 * p, oc, kh);
    return push(std::move(n));
}

NodeId Tape::upsample2x(NodeId a) {
    const Tensor& A = nodes_[a].val;
    check_shape(A.shape.rank == 3, "upsample2x expects C×H×W, got " + A.shape.str());
    const int c = A.shape.d[0], h = A.shape.d[1], w = A.shape.d[2];
    Node n;
    n.kind = OpKind::Upsample2x;
    n.in0 = a;
    n.requires_grad = nodes_[a].requires_grad;
    n.val = Tensor::uninit(Shape::chw(c, 2 * h, 2 * w));
    const auto& K = kernels::ops();
    for (int ci = 0; ci < c; ++ci) {
        const float* src = A.data.data() + static_cast<size_t>(ci) * h * w;
        float* dst = n.val.data.data() + static_cast<size_t>(ci) * 4 * h * w;
        for (int y = 0; y < h; ++y) {
            float* drow = dst + static_cast<size_t>(2 * y) * 2 * w;
            K.dup2(src + static_cast<size_t>(y) * w, drow, static_cast<size_t>(w));
            std::memcpy(drow + 2 * w, drow, sizeof(float) * static_cast<size_t>(2 * w));
        }
    }
    return push(std::move(n));
}

NodeId Tape::spatial_gradient(NodeId a) {
    const Tensor& A = nodes_[a].val;
    check_shape(A.shape.rank == 3, "spatial_gradient expects C×H×W, got " + A.shape.str());
    const int c = A.shape.d[0], h = A.shape.d[1], w = A.shape.d[2];
    Node n;
    n.kind = OpKind::SpatialGradient;
    n.in0 = a;
    n.requires_grad = nodes_[a].requires_grad;
    n.val = Tensor::uninit(Shape::chw(2 * c, h, w));
    const size_t plane = static_cast<size_t>(h) * w;
    const auto& K = kernels::ops();
    for (int ci = 0; ci < c; ++ci) {
        const float* src = A.data.data() + static_cast<size_t>(ci) * plane;
        float* gx = n.val.data.data() + static_cast<size_t>(ci) * plane;
        float* gy = n.val.data.data() + static_cast<size_t>(c + ci) * plane;
        for (int y = 0; y < h; ++y) {
            const size_t r = static_cast<size_t>(y) * w;
            K.vsub(src + r + 1, src + r, gx + r, static_cast<size_t>(w - 1));
            gx[r + w - 1] = 0.0f;
            if (y + 1 < h)
                K.vsub(src + r + w, src + r, gy + r, static_cast<size_t>(w));
        }
        std::memset(gy + static_cast<size_t>(h - 1) * w, 0, sizeof(float) * w);
    }
    return push(std::move(n));
}

NodeId Tape::slice_channels(NodeId a, int c0, int c1) {
    const Tensor& A = nodes_[a].val;
    check_shape(A.shape.rank == 3, "slice_channels expects C×H×W, got " + A.shape.str());
    check_shape(0 <= c0 && c0 < c1 && c1 <= A.shape.d[0],
                "slice_channels range [" + std::to_string(c0) + "," + std::to_string(c1) +
                    ") out of bounds for " + A.shape.str());
    const int h = A.shape.d[1], w = A.shape.d[2];
    const size_t plane = static_cast<size_t>(h) * w;
    Node n;
    n.kind = OpKind::SliceChannels;
    n.in0 = a;
    n.i0 = c0;
    n.i1 = c1;
    n.requires_grad = nodes_[a].requires_grad;
    n.val = Tensor::uninit(Shape::chw(c1 - c0, h, w));
    std::memcpy(n.val.data.data(), A.data.data() + static_cast<size_t>(c0) * plane,
                sizeof(float) * plane * static_cast<size_t>(c1 - c0));
    return push(std::move(n));
}

NodeId Tape::concat_channels(NodeId a, NodeId b) {
    const Tensor& A = nodes_[a].val;
    const Tensor& B = nodes_[b].val;
    check_shape(A.shape.rank == 3 && B.shape.rank == 3 && A.shape.d[1] == B.shape.d[1] &&
                    A.shape.d[2] == B.shape.d[2],
                "concat_channels needs matching H×W: " + A.shape.str() + " vs " + B.shape.str());
    Node n;
    n.kind = OpKind::ConcatChannels;
    n.in0 = a;
    n.in1 = b;
    n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
    n.val = Tensor::uninit(Shape::chw(A.shape.d[0] + B.shape.d[0], A.shape.d[1], A.shape.d[2]));
    std::memcpy(n.val.data.data(), A.data.data(), sizeof(float) * A.data.size());
    std::memcpy(n.val.data.data() + A.data.size(), B.data.data(), sizeof(float) * B.data.size());
    return push(std::move(n));
}

NodeId Tape::mean(NodeId a) {
    const Tensor& A = nodes_[a].val;
    Node n;
    n.kind = OpKind::Mean;
    n.in0 = a;
    n.requires_grad = nodes_[a].requires_grad;
    double s = 0.0;
    for (float v : A.data) s += v;
    n.val = Tensor::scalar(static_cast<float>(s / static_cast<double>(A.data.size())));
    return push(std::move(n));
}

NodeId Tape::sum(NodeId a) {
    const Tensor& A = nodes_[a].val;
    Node n;
    n.kind = OpKind::Sum;
    n.in0 = a;
    n.requires_grad = nodes_[a].requires_grad;
    double s = 0.0;
    for (float v : A.data) s += v;
    n.val = Tensor::scalar(static_cast<float>(s));
    return push(std::move(n));
}

NodeId Tape::channel_max(NodeId a) {
    const Tensor& A = nodes_[a].val;
    check_shape(A.shape.rank == 3 && A.shape.d[0] == 3,
                "channel_max expects a 3×H×W tensor, got " + A.shape.str());
    if (nodes_[a].requires_grad)
        throw Error("channel_max requires a constant (non-grad) input");
    const int h = A.shape.d[1], w = A.shape.d[2];
    const size_t plane = static_cast<size_t>(h) * w;
    Node n;
    n.kind = OpKind::ChannelMax;
    n.in0 = a;
    n.requires_grad = false;
    n.val = Tensor::uninit(Shape::chw(1, h, w));
    const float* p = A.data.data();
    for (size_t i = 0; i < plane; ++i)
        n.val.data[i] = std::max(p[i], std::max(p[i + plane], p[i + 2 * plane]));
    return push(std::move(n));
}

const Tensor& Tape::grad(NodeId leaf_id) const {
    const Node& n = nodes_[leaf_id];
    if (n.kind != OpKind::Leaf || !n.requires_grad)
        throw Error("grad requested for a node that is not a grad-requiring leaf");
    if (n.grad.data.empty()) throw Error("grad requested before any backward pass reached this leaf");
    return n.grad;
}

bool Tape::has_grad(NodeId leaf_id) const {
    const Node& n = nodes_[leaf_id];
    return n.kind == OpKind::Leaf && !n.grad.data.empty();
}

void Tape::zero_grads() {
    for (Node& n : nodes_)
        if (!n.grad.data.empty()) std::fill(n.grad.data.begin(), n.grad.data.end(), 0.0f);
}

void Tape::backward(NodeId loss) {
    Node& top = nodes_[loss];
    if (top.val.shape.rank != 0) throw Error("backward requires a scalar loss");
    if (!top.requires_grad) return;

    const auto& K = kernels::ops();

    // Per-call adjoint buffers; only allocated for nodes a gradient reaches.
    std::vector<std::vector<float>> adj(nodes_.size());
    auto buf = [&](NodeId id) -> float* {
        auto& v = adj[id];
        if (v.empty()) v.assign(nodes_[id].val.data.size(), 0.0f);
        return v.data();
    };
    buf(loss)[0] = 1.0f;

    for (NodeId id = loss; id >= 0; --id) {
        if (adj[id].empty()) continue;
        Node& n = nodes_[id];
        const float* g = adj[id].data();
        const size_t cnt = n.val.data.size();

        switch (n.kind) {
        case OpKind::Leaf: {
            if (n.requires_grad) {
                if (n.grad.data.empty()) n.grad = Tensor(n.val.shape);
                K.vacc(n.grad.data.data(), g, cnt);
            }
            break;
        }
        case OpKind::Add:
        case OpKind::Sub:
        case OpKind::Mul:
        case OpKind::Div: {
            const Node& A = nodes_[n.in0];
            const Node& B = nodes_[n.in1];
            const Bc bc = bc_of(A.val.shape, B.val.shape);
            const BcIndex ia = index_a(n.val.shape, bc);
            const BcIndex ib = index_b(n.val.shape, bc);
            const float* av = A.val.data.data();
            const float* bv = B.val.data.data();
            if (A.requires_grad) {
                float* da = buf(n.in0);
                switch (n.kind) {
                case OpKind::Add:
                case OpKind::Sub:
                    if (bc == Bc::Same) {
                        K.vacc(da, g, cnt);
                    } else {
                        bc_accumulate(da, n.val.shape, ia, [&](size_t i) { return g[i]; });
                    }
                    break;
                case OpKind::Mul:
                    if (bc == Bc::Same) {
                        K.vmulacc(da, g, bv, cnt);
                    } else if (bc == Bc::BScalar) {
                        K.vaxpy(da, g, bv[0], cnt);
                    } else if (bc == Bc::BChan) {
                        for (size_t c0 = 0; c0 < cnt; c0 += ia.plane)
                            K.vmulacc(da + c0, g + c0, bv, ia.plane);
                    } else if (bc == Bc::AChan) {
                        for (size_t c0 = 0; c0 < cnt; c0 += ia.plane)
                            K.vmulacc(da, g + c0, bv + c0, ia.plane);
                    } else {
                        bc_accumulate(da, n.val.shape, ia,
                                      [&](size_t i) { return g[i] * bv[ib(i)]; });
                    }
                    break;
                default: // Div
                    bc_accumulate(da, n.val.shape, ia,
                                  [&](size_t i) { return g[i] / bv[ib(i)]; });
                    break;
                }
            }
            if (B.requires_grad) {
                float* db = buf(n.in1);
                switch (n.kind) {
                case OpKind::Add:
                    if (bc == Bc::Same) {
                        K.vacc(db, g, cnt);
                    } else {
                        bc_accumulate(db, n.val.shape, ib, [&](size_t i) { return g[i]; });
                    }
                    break;
                case OpKind::Sub:
                    bc_accumulate(db, n.val.shape, ib, [&](size_t i) { return -g[i]; });
                    break;
                case OpKind::Mul:
                    if (bc == Bc::Same) {
                        K.vmulacc(db, g, av, cnt);
                    } else if (bc == Bc::AScalar) {
                        K.vaxpy(db, g, av[0], cnt);
                    } else if (bc == Bc::AChan) {
                        for (size_t c0 = 0; c0 < cnt; c0 += ib.plane)
                            K.vmulacc(db + c0, g + c0, av, ib.plane);
                    } else if (bc == Bc::BChan) {
                        for (size_t c0 = 0; c0 < cnt; c0 += ib.plane)
                            K.vmulacc(db, g + c0, av + c0, ib.plane);
                    } else {
                        bc_accumulate(db, n.val.shape, ib,
                                      [&](size_t i) { return g[i] * av[ia(i)]; });
                    }
                    break;
                default: { // Div
                    bc_accumulate(db, n.val.shape, ib, [&](size_t i) {
                        const float b = bv[ib(i)];
                        return -g[i] * av[ia(i)] / (b * b);
                    });
                    break;
                }
                }
            }
            break;
        }
        case OpKind::PowScalar: {
            if (nodes_[n.in0].requires_grad) {
                float* da = buf(n.in0);
                const float* av = nodes_[n.in0].val.data.data();
                const float e = n.f0;
                if (e == 1.0f) {
                    K.vacc(da, g, cnt);
                } else if (e == 2.0f) {
                    for (size_t i = 0; i < cnt; ++i) da[i] += g[i] * 2.0f * av[i];
                } else if (e == 0.5f) {
                    const float* ov = n.val.data.data();
                    for (size_t i = 0; i < cnt; ++i) da[i] += g[i] * 0.5f / ov[i];
                } else {
                    for (size_t i = 0; i < cnt; ++i)
                        da[i] += g[i] * e * std::pow(av[i], e - 1.0f);
                }
            }
            break;
        }
        case OpKind::PowNode: {
            const float* av = nodes_[n.in0].val.data.data();
            const float* ov = n.val.data.data();
            const float e = nodes_[n.in1].val.data[0];
            if (nodes_[n.in0].requires_grad) {
                // a > 0 is checked at construction, so a^(e-1) = out / a
                float* da = buf(n.in0);
                for (size_t i = 0; i < cnt; ++i)
                    da[i] += g[i] * e * (ov[i] / av[i]);
            }
            if (nodes_[n.in1].requires_grad) {
                float* de = buf(n.in1);
                double s = 0.0;
                for (size_t i = 0; i < cnt; ++i)
                    s += static_cast<double>(g[i]) * ov[i] * std::log(av[i]);
                de[0] += static_cast<float>(s);
            }
            break;
        }
        case OpKind::Exp: {
            if (nodes_[n.in0].requires_grad)
                K.vmulacc(buf(n.in0), g, n.val.data.data(), cnt);
            break;
        }
        case OpKind::Neg: {
            if (nodes_[n.in0].requires_grad) {
                float* da = buf(n.in0);
                for (size_t i = 0; i < cnt; ++i) da[i] -= g[i];
            }
            break;
        }
        case OpKind::Abs: {
            if (nodes_[n.in0].requires_grad) {
                float* da = buf(n.in0);
                const float* av = nodes_[n.in0].val.data.data();
                for (size_t i = 0; i < cnt; ++i) {
                    if (av[i] > 0.0f) da[i] += g[i];
                    else if (av[i] < 0.0f) da[i] -= g[i];
                }
            }
            break;
        }
        case OpKind::Sigmoid: {
            if (nodes_[n.in0].requires_grad)
                K.sigmoid_bwd(n.val.data.data(), g, buf(n.in0), cnt);
            break;
        }
        case OpKind::LeakyRelu: {
            if (nodes_[n.in0].requires_grad)
                K.lrelu_bwd(nodes_[n.in0].val.data.data(), g, n.f0, buf(n.in0), cnt);
            break;
        }
        case OpKind::Conv2d: {
            const Node& X = nodes_[n.in0];
            const Node& W = nodes_[n.in1];
            const int oc = W.val.shape.d[0], ic = W.val.shape.d[1], k = W.val.shape.d[2];
            const int h = X.val.shape.d[1], w = X.val.shape.d[2];
            const int p = (k - 1) / 2;
            const bool want_w = W.requires_grad;
            const bool want_b = n.in2 >= 0 && nodes_[n.in2].requires_grad;
            if (want_w || want_b) {
                Node& Wn = nodes_[n.in1];
                Tensor scratch_w;
                float* gw;
                if (want_w) {
                    if (Wn.grad.data.empty()) Wn.grad = Tensor(Wn.val.shape);
                    gw = Wn.grad.data.data();
                } else {
                    scratch_w = Tensor(Wn.val.shape);
                    gw = scratch_w.data.data();
                }
                float* gb = nullptr;
                if (want_b) {
                    Node& Bn = nodes_[n.in2];
                    if (Bn.grad.data.empty()) Bn.grad = Tensor(Bn.val.shape);
                    gb = Bn.grad.data.data();
                }
                conv_wgrad_mt(g, n.saved.data.data(), gw, gb,
                              ic, h + 2 * p, w + 2 * p, oc, k);
            }
            if (X.requires_grad) {
                // Gradient of a padded VALID conv is itself a VALID conv: pad the
                // output gradient by k-1 and convolve with the kernel flipped in
                // both spatial axes and transposed in its channel axes; the
                // result has the padded-input extent and folds through the
                // padding adjoint.
                Tensor gp = Tensor::uninit(Shape::chw(oc, h + 2 * (k - 1), w + 2 * (k - 1)));
                {
                    const int hp = gp.shape.d[1], wp = gp.shape.d[2];
                    const int off = k - 1;
                    const size_t band = sizeof(float) * static_cast<size_t>(off) * wp;
                    for (int o = 0; o < oc; ++o) {
                        const float* src = g + static_cast<size_t>(o) * h * w;
                        float* dst = gp.data.data() + static_cast<size_t>(o) * hp * wp;
                        std::memset(dst, 0, band);
                        std::memset(dst + static_cast<size_t>(off + h) * wp, 0, band);
                        for (int y = 0; y < h; ++y) {
                            float* drow = dst + static_cast<size_t>(y + off) * wp;
                            std::memset(drow, 0, sizeof(float) * static_cast<size_t>(off));
                            std::memcpy(drow + off, src + static_cast<size_t>(y) * w,
                                        sizeof(float) * static_cast<size_t>(w));
                            std::memset(drow + off + w, 0,
                                        sizeof(float) * static_cast<size_t>(off));
                        }
                    }
                }
                Tensor wt = Tensor::uninit(Shape::conv(ic, oc, k, k));
                for (int o = 0; o < oc; ++o)
                    for (int i = 0; i < ic; ++i)
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx)
                                wt.data[((static_cast<size_t>(i) * oc + o) * k + (k - 1 - ky)) * k +
                                        (k - 1 - kx)] =
                                    W.val.data[((static_cast<size_t>(o) * ic + i) * k + ky) * k + kx];
                Tensor gxp = Tensor::uninit(Shape::chw(ic, h + 2 * p, w + 2 * p));
                conv_valid_mt(gp.data.data(), wt.data.data(), nullptr, gxp.data.data(),
                              oc, gp.shape.d[1], gp.shape.d[2], ic, k);
                pad_adjoint(gxp, p, n.pad, h, w, buf(n.in0));
            }
            break;
        }
        case OpKind::Upsample2x: {
            if (nodes_[n.in0].requires_grad) {
                float* da = buf(n.in0);
                const Shape& s = nodes_[n.in0].val.shape;
                const int c = s.d[0], h = s.d[1], w = s.d[2];
                for (int ci = 0; ci < c; ++ci) {
                    const float* gc = g + static_cast<size_t>(ci) * 4 * h * w;
                    float* dc = da + static_cast<size_t>(ci) * h * w;
                    for (int y = 0; y < h; ++y) {
                        float* drow = dc + static_cast<size_t>(y) * w;
                        K.fold2(gc + static_cast<size_t>(2 * y) * 2 * w, drow, w);
                        K.fold2(gc + static_cast<size_t>(2 * y + 1) * 2 * w, drow, w);
                    }
                }
            }
            break;
        }
        case OpKind::SpatialGradient: {
            if (nodes_[n.in0].requires_grad) {
                float* da = buf(n.in0);
                const Shape& s = nodes_[n.in0].val.shape;
                const int c = s.d[0], h = s.d[1], w = s.d[2];
                const size_t plane = static_cast<size_t>(h) * w;
                for (int ci = 0; ci < c; ++ci) {
                    const float* ggx = g + static_cast<size_t>(ci) * plane;
                    const float* ggy = g + static_cast<size_t>(c + ci) * plane;
                    float* dc = da + static_cast<size_t>(ci) * plane;
                    for (int y = 0; y < h; ++y) {
                        const size_t r = static_cast<size_t>(y) * w;
                        K.vacc(dc + r + 1, ggx + r, static_cast<size_t>(w - 1));
                        K.vaxpy(dc + r, ggx + r, -1.0f, static_cast<size_t>(w - 1));
                        if (y + 1 < h) {
                            K.vacc(dc + r + w, ggy + r, static_cast<size_t>(w));
                            K.vaxpy(dc + r, ggy + r, -1.0f, static_cast<size_t>(w));
                        }
                    }
                }
            }
            break;
        }
        case OpKind::SliceChannels: {
            if (nodes_[n.in0].requires_grad) {
                float* da = buf(n.in0);
                const Shape& s = nodes_[n.in0].val.shape;
                const size_t plane = static_cast<size_t>(s.d[1]) * s.d[2];
                K.vacc(da + static_cast<size_t>(n.i0) * plane, g, cnt);
            }
            break;
        }
        case OpKind::ConcatChannels: {
            const size_t na = nodes_[n.in0].val.data.size();
            if (nodes_[n.in0].requires_grad) K.vacc(buf(n.in0), g, na);
            if (nodes_[n.in1].requires_grad)
                K.vacc(buf(n.in1), g + na, nodes_[n.in1].val.data.size());
            break;
        }
        case OpKind::Mean: {
            if (nodes_[n.in0].requires_grad) {
                float* da = buf(n.in0);
                const size_t m = nodes_[n.in0].val.data.size();
                const float gi = g[0] / static_cast<float>(m);
                for (size_t i = 0; i < m; ++i) da[i] += gi;
            }
            break;
        }
        case OpKind::Sum: {
            if (nodes_[n.in0].requires_grad) {
                float* da = buf(n.in0);
                const size_t m = nodes_[n.in0].val.data.size();
                for (size_t i = 0; i < m; ++i) da[i] += g[0];
            }
            break;
        }
        case OpKind::ChannelMax:
            throw Error("internal: channel_max reached in backward");
        }

        std::vector<float>().swap(adj[id]);
    }
}

} // namespace rseed
