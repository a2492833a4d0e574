#include "rseed/decoder.hpp"

#include <cmath>

namespace rseed {

void DecoderArch::validate() const {
    check_shape(n_stages >= 1, "decoder needs at least one stage");
    check_shape(static_cast<int>(stage_channels.size()) == n_stages,
                "stage_channels has " + std::to_string(stage_channels.size()) +
                    " entries for " + std::to_string(n_stages) + " stages");
    check_shape(seed_channels >= 1, "seed_channels must be positive");
    check_shape(out_channels == 1 || out_channels == 3,
                "out_channels must be 1 or 3, got " + std::to_string(out_channels));
    for (int c : stage_channels)
        check_shape(c >= 1, "stage channel counts must be positive");
}

std::string DecoderArch::str() const {
    std::string s = "n_stages=" + std::to_string(n_stages) +
                    " seed_channels=" + std::to_string(seed_channels) + " stage_channels=[";
    for (size_t i = 0; i < stage_channels.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(stage_channels[i]);
    }
    s += "] out_channels=" + std::to_string(out_channels);
    return s;
}

const Tensor& DecoderWeights::find(const std::string& name) const {
    for (const Layer& l : layers)
        if (l.name == name) return l.tensor;
    throw Error("no layer named '" + name + "'");
}

namespace {

// (name, shape) sequence implied by an arch; load and init both follow it.
std::vector<std::pair<std::string, Shape>> layer_plan(const DecoderArch& arch) {
    std::vector<std::pair<std::string, Shape>> plan;
    int prev = arch.seed_channels;
    for (int i = 0; i < arch.n_stages; ++i) {
        const int oc = arch.stage_channels[i];
        const std::string stem = "stage" + std::to_string(i);
        plan.emplace_back(stem + ".kernel", Shape::conv(oc, prev, 3, 3));
        plan.emplace_back(stem + ".bias", Shape::vec(oc));
        prev = oc;
    }
    plan.emplace_back("final.kernel", Shape::conv(arch.out_channels, prev, 3, 3));
    plan.emplace_back("final.bias", Shape::vec(arch.out_channels));
    return plan;
}

} // namespace

DecoderWeights init_random(const DecoderArch& arch, uint64_t rng_seed) {
    arch.validate();
    DecoderWeights w;
    w.arch = arch;
    Rng rng(rng_seed);
    for (auto& [name, shape] : layer_plan(arch)) {
        Tensor t(shape);
        if (shape.rank == 4) {
            const float fan_in = static_cast<float>(shape.d[1] * shape.d[2] * shape.d[3]);
            const float sigma = std::sqrt(2.0f / fan_in);
            for (float& v : t.data) v = sigma * rng.normal();
        }
        // biases stay zero
        w.layers.push_back({name, std::move(t)});
    }
    return w;
}

Seed make_seed(const DecoderArch& arch, int padded_h, int padded_w, Rng& rng) {
    arch.validate();
    const int s = arch.scale();
    check_shape(padded_h % s == 0 && padded_w % s == 0,
                "decode target " + std::to_string(padded_h) + "×" + std::to_string(padded_w) +
                    " not divisible by 2^" + std::to_string(arch.n_stages));
    Seed seed;
    seed.rng_seed = 0;
    seed.tensor = Tensor(Shape::chw(arch.seed_channels, padded_h / s, padded_w / s));
    for (float& v : seed.tensor.data) v = rng.normal();
    return seed;
}

DecodeHandles decode_graph(Tape& tape, const Seed& seed, bool seed_requires_grad,
                           const DecoderWeights& weights, bool freeze) {
    const DecoderArch& arch = weights.arch;
    arch.validate();
    check_shape(seed.tensor.shape.rank == 3 && seed.tensor.shape.d[0] == arch.seed_channels,
                "seed shape " + seed.tensor.shape.str() + " does not match arch (" +
                    std::to_string(arch.seed_channels) + " channels)");

    DecodeHandles h;
    h.seed = tape.leaf(seed.tensor, seed_requires_grad);
    const bool wgrad = !freeze;
    auto plan = layer_plan(arch);
    size_t li = 0;
    NodeId x = h.seed;
    for (int i = 0; i <= arch.n_stages; ++i) {
        const bool last = i == arch.n_stages;
        const auto& [kname, kshape] = plan[li];
        const Tensor& kt = weights.layers[li].tensor;
        check_shape(weights.layers[li].name == kname && kt.shape == kshape,
                    "weights do not match arch at layer '" + kname + "'");
        const Tensor& bt = weights.layers[li + 1].tensor;
        li += 2;
        NodeId k = tape.leaf(kt, wgrad);
        NodeId b = tape.leaf(bt, wgrad);
        h.kernels.push_back(k);
        h.biases.push_back(b);
        if (!last) x = tape.upsample2x(x);
        x = tape.conv2d(x, k, b, PadMode::Reflect);
        x = last ? tape.sigmoid(x) : tape.leaky_relu(x, 0.2f);
    }
    h.output = x;
    return h;
}

Tensor decode(const Seed& seed, const DecoderWeights& weights, bool freeze) {
    Tape tape;
    DecodeHandles h = decode_graph(tape, seed, false, weights, freeze);
    return tape.value(h.output);
}

} // namespace rseed
