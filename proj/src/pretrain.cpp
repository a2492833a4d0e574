#include "rseed/pretrain.hpp"

#include "rseed/autodiff.hpp"
#include "rseed/metrics.hpp"
#include "rseed/optimizer.hpp"

#include "alloc_tuning.hpp"

#include <algorithm>

namespace rseed {

PretrainReport pretrain(const std::vector<std::pair<std::string, Tensor>>& corpus,
                        const DecoderArch& arch, const PretrainConfig& cfg) {
    detail::tune_allocator_for_iteration_churn();
    arch.validate();
    if (corpus.empty()) throw Error("pretrain corpus is empty");
    check_shape(cfg.resolution % arch.scale() == 0,
                "training resolution " + std::to_string(cfg.resolution) +
                    " not divisible by 2^" + std::to_string(arch.n_stages));
    check_shape(cfg.epochs >= 0 && cfg.batch >= 1, "bad pretrain config");
    for (const auto& [path, img] : corpus)
        check_shape(img.shape == Shape::chw(arch.out_channels, cfg.resolution, cfg.resolution),
                    "corpus image '" + path + "' is " + img.shape.str() + ", expected " +
                        Shape::chw(arch.out_channels, cfg.resolution, cfg.resolution).str());

    const int k = static_cast<int>(corpus.size());
    const int batch = std::min(cfg.batch, k);

    PretrainReport rep;
    rep.weights = init_random(arch, cfg.rng_seed);

    Rng seed_rng(derive_seed(cfg.rng_seed, 0x5eedULL));
    std::vector<Seed> seeds;
    seeds.reserve(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) {
        Seed s = make_seed(arch, cfg.resolution, cfg.resolution, seed_rng);
        s.rng_seed = cfg.rng_seed;
        seeds.push_back(std::move(s));
    }

    const size_t nlayers = rep.weights.layers.size();
    AdamState adam;
    adam.lr = cfg.lr;
    adam.slots.resize(nlayers + static_cast<size_t>(k));

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double epoch_loss = 0.0;
        for (int b0 = 0; b0 < k; b0 += batch) {
            const int b1 = std::min(k, b0 + batch);
            Tape tape;
            // every image in the batch decodes through its own weight leaves;
            // the shared-θ gradient is the sum over them
            std::vector<DecodeHandles> handles;
            NodeId batch_loss = -1;
            for (int i = b0; i < b1; ++i) {
                DecodeHandles h = decode_graph(tape, seeds[static_cast<size_t>(i)], true,
                                               rep.weights, false);
                NodeId d = tape.sub(h.output, tape.constant(corpus[static_cast<size_t>(i)].second));
                NodeId l = tape.mean(tape.mul(d, d));
                batch_loss = batch_loss < 0 ? l : tape.add(batch_loss, l);
                handles.push_back(std::move(h));
            }
            const int bsz = b1 - b0;
            batch_loss = tape.mul(tape.constant_scalar(1.0f / static_cast<float>(bsz)), batch_loss);
            epoch_loss += static_cast<double>(tape.value(batch_loss).data[0]) * bsz;
            if (!std::isfinite(tape.value(batch_loss).data[0]))
                throw NanAbort("pretrain loss is not finite at epoch " + std::to_string(epoch),
                               epoch);
            tape.backward(batch_loss);

            // sum the per-image weight-leaf gradients
            std::vector<Tensor> wgrads(nlayers);
            for (size_t li = 0; li < nlayers; ++li) {
                wgrads[li] = Tensor(rep.weights.layers[li].tensor.shape);
                for (const DecodeHandles& h : handles) {
                    const NodeId leaf = li % 2 == 0 ? h.kernels[li / 2] : h.biases[li / 2];
                    const Tensor& g = tape.grad(leaf);
                    for (size_t j = 0; j < g.data.size(); ++j) wgrads[li].data[j] += g.data[j];
                }
            }

            std::vector<LeafUpdate> ups;
            for (size_t li = 0; li < nlayers; ++li)
                ups.push_back({rep.weights.layers[li].name, &rep.weights.layers[li].tensor,
                               &wgrads[li], static_cast<int>(li)});
            for (int i = b0; i < b1; ++i)
                ups.push_back({"seed[" + corpus[static_cast<size_t>(i)].first + "]",
                               &seeds[static_cast<size_t>(i)].tensor,
                               &tape.grad(handles[static_cast<size_t>(i - b0)].seed),
                               static_cast<int>(nlayers) + i});
            adam_step(ups, adam, epoch);
        }
        rep.epoch_loss.emplace_back(epoch, static_cast<float>(epoch_loss / k));
    }

    for (int i = 0; i < k; ++i) {
        const Tensor out = decode(seeds[static_cast<size_t>(i)], rep.weights);
        rep.final_psnr.emplace_back(corpus[static_cast<size_t>(i)].first,
                                    psnr(out, corpus[static_cast<size_t>(i)].second));
    }
    return rep;
}

} // namespace rseed
