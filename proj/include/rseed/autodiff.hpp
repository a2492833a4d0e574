#pragma once

#include "rseed/tensor.hpp"

#include <cstdint>
#include <vector>

namespace rseed {

using NodeId = int32_t;

enum class PadMode : uint8_t { Zero, Reflect };

enum class OpKind : uint8_t {
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    PowScalar,
    PowNode,
    Exp,
    Neg,
    Abs,
    Sigmoid,
    LeakyRelu,
    Conv2d,
    Upsample2x,
    SpatialGradient,
    SliceChannels,
    ConcatChannels,
    Mean,
    Sum,
    ChannelMax,
};

// Reverse-mode tape. Ops evaluate eagerly on construction; the node list is
// append-only, so a reverse scan is a reverse topological order. One tape is
// built per optimization step and discarded.
//
// Broadcasting is limited to what the model needs: a scalar against anything,
// and a 1-channel map against a multi-channel map of the same height/width.
//
// Gradients accumulate on leaves only; repeated backward() calls without
// zero_grads() add up. Intermediate adjoints are scratch, freed per call.
class Tape {
public:
    NodeId leaf(const Tensor& value, bool requires_grad);
    NodeId constant(const Tensor& value) { return leaf(value, false); }
    NodeId constant_scalar(float v) { return leaf(Tensor::scalar(v), false); }

    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId div(NodeId a, NodeId b);
    // base^e for fixed e; non-positive bases allowed only for integer e
    NodeId pow_scalar(NodeId base, float exponent);
    // base^e where e is a scalar node (the learnable gamma); base must be > 0
    NodeId pow_node(NodeId base, NodeId exponent);
    NodeId exp_(NodeId a);
    NodeId neg(NodeId a);
    NodeId abs_(NodeId a); // subgradient 0 at x == 0
    NodeId sigmoid(NodeId a);
    NodeId leaky_relu(NodeId a, float slope);

    // stride 1, odd k, spatial dims preserved via (k-1)/2 padding
    NodeId conv2d(NodeId input, NodeId kernel, NodeId bias, PadMode pad);
    NodeId upsample2x(NodeId a);
    // C×H×W -> 2C×H×W: first C channels are forward differences in x,
    // next C in y; last column/row is 0 (replicate boundary)
    NodeId spatial_gradient(NodeId a);
    NodeId slice_channels(NodeId a, int c0, int c1);
    NodeId concat_channels(NodeId a, NodeId b);
    NodeId mean(NodeId a);
    NodeId sum(NodeId a);
    // per-pixel max over 3 channels; forward-only, rejects grad-requiring input
    NodeId channel_max(NodeId a);

    const Tensor& value(NodeId id) const { return nodes_[id].val; }
    const Shape& shape(NodeId id) const { return nodes_[id].val.shape; }
    bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }

    void backward(NodeId loss);
    // accumulated gradient of a grad-requiring leaf
    const Tensor& grad(NodeId leaf_id) const;
    bool has_grad(NodeId leaf_id) const;
    void zero_grads();

    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        OpKind kind;
        Tensor val;
        Tensor grad; // leaves only
        bool requires_grad = false;
        NodeId in0 = -1, in1 = -1, in2 = -1;
        float f0 = 0.0f;   // slope or fixed exponent
        int i0 = 0, i1 = 0; // slice range
        PadMode pad = PadMode::Zero;
        Tensor saved; // conv: padded input
    };

    NodeId push(Node&& n);
    const Node& node(NodeId id) const { return nodes_[id]; }

    NodeId binary(OpKind kind, NodeId a, NodeId b);

    std::vector<Node> nodes_;
};

// Padding helpers shared with the out-of-graph Gaussian blur.
Tensor pad_chw(const Tensor& t, int p, PadMode mode);

} // namespace rseed
