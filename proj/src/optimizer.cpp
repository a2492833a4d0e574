#include "rseed/optimizer.hpp"

#include "rseed/image_io.hpp"
#include "rseed/weights_io.hpp"

#include "alloc_tuning.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace rseed {

Tensor gd_step(const Tensor& leaf, const Tensor& grad, float lr) {
    check_shape(leaf.shape == grad.shape, "gd_step shape mismatch: " + leaf.shape.str() +
                                              " vs " + grad.shape.str());
    Tensor out(leaf.shape);
    for (size_t i = 0; i < leaf.data.size(); ++i)
        out.data[i] = leaf.data[i] - lr * grad.data[i];
    return out;
}

void adam_step(const std::vector<LeafUpdate>& leaves, AdamState& state, int iteration) {
    for (const LeafUpdate& lu : leaves) {
        check_shape(lu.value->shape == lu.grad->shape,
                    "adam_step shape mismatch for leaf '" + lu.name + "'");
        for (float g : lu.grad->data)
            if (!std::isfinite(g))
                throw NanAbort("non-finite gradient in leaf '" + lu.name + "' at iteration " +
                                   std::to_string(iteration),
                               iteration);
        AdamState::Slot& s = state.slots[static_cast<size_t>(lu.slot)];
        const size_t n = lu.value->data.size();
        if (s.m.empty()) {
            s.m.assign(n, 0.0);
            s.v.assign(n, 0.0);
        }
        s.t += 1;
        const double bc1 = 1.0 - std::pow(static_cast<double>(state.beta1), static_cast<double>(s.t));
        const double bc2 = 1.0 - std::pow(static_cast<double>(state.beta2), static_cast<double>(s.t));
        for (size_t i = 0; i < n; ++i) {
            const double g = static_cast<double>(lu.grad->data[i]);
            s.m[i] = state.beta1 * s.m[i] + (1.0 - state.beta1) * g;
            s.v[i] = state.beta2 * s.v[i] + (1.0 - state.beta2) * g * g;
            const double mh = s.m[i] / bc1;
            const double vh = s.v[i] / bc2;
            float x = static_cast<float>(static_cast<double>(lu.value->data[i]) -
                                         static_cast<double>(state.lr) * mh /
                                             (std::sqrt(vh) + static_cast<double>(state.eps)));
            if (lu.clamp) x = std::clamp(x, lu.clamp_min, lu.clamp_max);
            lu.value->data[i] = x;
        }
    }
}

// The decoder's sigmoid can underflow to exact zero once pre-activations
// saturate, which happens when the weights themselves are being optimized.
// Flooring keeps the gamma transform's base positive; adding 1e-12 is a
// bit-exact no-op for any pixel above ~3e-5.
constexpr float kIlluminationFloor = 1e-12f;

EnhanceResult run(const Tensor& i_low, const DecoderWeights& weights_r,
                  const DecoderWeights& weights_l, const RunConfig& cfg) {
    detail::tune_allocator_for_iteration_churn();
    check_shape(i_low.shape.rank == 3 && i_low.shape.d[0] == 3,
                "run expects a 3×H×W image, got " + i_low.shape.str());
    check_shape(cfg.iterations >= 0, "iteration count must be non-negative");
    cfg.loss.validate();
    weights_r.arch.validate();
    weights_l.arch.validate();
    check_shape(weights_r.arch.out_channels == 3, "reflectance decoder must output 3 channels");
    check_shape(weights_l.arch.out_channels == 1, "illumination decoder must output 1 channel");
    check_shape(weights_r.arch.scale() == weights_l.arch.scale(),
                "decoders disagree on upsampling factor");

    const int orig_h = i_low.shape.d[1], orig_w = i_low.shape.d[2];
    const Tensor padded = pad_reflect_to_multiple(i_low, weights_r.arch.scale());
    const int ph = padded.shape.d[1], pw = padded.shape.d[2];
    const Tensor target = illumination_target(padded);

    DecoderWeights wr = weights_r;
    DecoderWeights wl = weights_l;
    EnhanceResult res;
    res.hash_r_before = weights_sha256(wr);
    res.hash_l_before = weights_sha256(wl);

    Rng rng(cfg.rng_seed);
    Seed seed_r = make_seed(wr.arch, ph, pw, rng);
    Seed seed_l = make_seed(wl.arch, ph, pw, rng);
    seed_r.rng_seed = cfg.rng_seed;
    seed_l.rng_seed = cfg.rng_seed;
    Tensor gamma_t = Tensor::scalar(cfg.gamma.clamped(cfg.gamma.value));

    const bool seeds_learn = cfg.mode != OptMode::ParamsOnly;
    const bool weights_learn = cfg.mode != OptMode::SeedOnly;

    // slots: 0 seed_r, 1 seed_l, 2 gamma, then every weight layer
    AdamState adam;
    adam.lr = cfg.lr;
    adam.slots.resize(3 + wr.layers.size() + wl.layers.size());

    std::ofstream snap_log;
    if (cfg.snapshot_every > 0) {
        std::filesystem::create_directories(cfg.snapshot_dir.empty() ? "." : cfg.snapshot_dir);
        snap_log.open((std::filesystem::path(cfg.snapshot_dir) / "snapshots.log").string(),
                      std::ios::trunc);
    }

    res.trace.reserve(static_cast<size_t>(cfg.iterations));
    double total_seconds = 0.0;

    for (int t = 0; t < cfg.iterations; ++t) {
        const auto t0 = std::chrono::steady_clock::now();

        Tape tape;
        DecodeHandles hr = decode_graph(tape, seed_r, seeds_learn, wr, !weights_learn);
        DecodeHandles hl = decode_graph(tape, seed_l, seeds_learn, wl, !weights_learn);
        NodeId illum = tape.add(hl.output, tape.constant_scalar(kIlluminationFloor));
        NodeId gamma_n = tape.leaf(gamma_t, true);
        NodeId ilow_n = tape.constant(padded);
        NodeId target_n = tape.constant(target);

        NodeId recon = reconstruct(tape, hr.output, illum);
        NodeId l_re = loss_reconstruction(tape, ilow_n, recon);
        NodeId l_e = loss_illumination_consistency(tape, target_n, illum);
        NodeId l_s = loss_smoothness(tape, illum, hr.output, cfg.loss.tau);
        NodeId l_i = loss_illumination_control(tape, hr.output, illum, gamma_n,
                                               cfg.loss.exposure_e);
        LossNodes L = loss_total(tape, l_re, l_e, l_s, l_i, cfg.loss);

        TraceRow row{t,
                     tape.value(l_re).data[0],
                     tape.value(l_e).data[0],
                     tape.value(l_s).data[0],
                     tape.value(l_i).data[0],
                     tape.value(L.total).data[0],
                     gamma_t.data[0]};
        if (!std::isfinite(row.total))
            throw NanAbort("loss is not finite at iteration " + std::to_string(t), t);

        tape.backward(L.total);

        std::vector<LeafUpdate> ups;
        if (seeds_learn) {
            ups.push_back({"seed_r", &seed_r.tensor, &tape.grad(hr.seed), 0});
            ups.push_back({"seed_l", &seed_l.tensor, &tape.grad(hl.seed), 1});
        }
        ups.push_back({"gamma", &gamma_t, &tape.grad(gamma_n), 2, true, cfg.gamma.min,
                       cfg.gamma.max});
        if (weights_learn) {
            auto add_weights = [&](DecoderWeights& w, const DecodeHandles& h,
                                   const char* prefix, int slot0) {
                for (size_t j = 0; j * 2 < w.layers.size(); ++j) {
                    ups.push_back({std::string(prefix) + w.layers[2 * j].name,
                                   &w.layers[2 * j].tensor, &tape.grad(h.kernels[j]),
                                   slot0 + static_cast<int>(2 * j)});
                    ups.push_back({std::string(prefix) + w.layers[2 * j + 1].name,
                                   &w.layers[2 * j + 1].tensor, &tape.grad(h.biases[j]),
                                   slot0 + static_cast<int>(2 * j + 1)});
                }
            };
            add_weights(wr, hr, "r.", 3);
            add_weights(wl, hl, "l.", 3 + static_cast<int>(wr.layers.size()));
        }

        if (cfg.rule == StepRule::Adam) {
            adam_step(ups, adam, t);
        } else {
            for (LeafUpdate& lu : ups) {
                *lu.value = gd_step(*lu.value, *lu.grad, cfg.lr);
                if (lu.clamp)
                    for (float& v : lu.value->data)
                        v = std::clamp(v, lu.clamp_min, lu.clamp_max);
            }
        }

        total_seconds +=
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        res.trace.push_back(row);
        if (cfg.on_iteration) cfg.on_iteration(row);

        if (cfg.snapshot_every > 0 && (t + 1) % cfg.snapshot_every == 0) {
            const Tensor r_now = crop_top_left(tape.value(hr.output), orig_h, orig_w);
            const Tensor l_now = crop_top_left(tape.value(illum), orig_h, orig_w);
            const Tensor composed = enhance_compose(r_now, l_now, gamma_t.data[0]);
            char stem[32];
            std::snprintf(stem, sizeof(stem), "iter_%06d", t + 1);
            const std::filesystem::path dir(cfg.snapshot_dir);
            write_png((dir / (std::string(stem) + "_r.png")).string(), r_now);
            write_png((dir / (std::string(stem) + "_l.png")).string(), l_now);
            write_png((dir / (std::string(stem) + "_result.png")).string(), composed);
            snap_log << "iter=" << t + 1 << " l_re=" << row.l_re << " l_e=" << row.l_e
                     << " l_s=" << row.l_s << " l_i=" << row.l_i << " total=" << row.total
                     << " gamma=" << row.gamma << "\n";
        }
    }

    Tape ftape;
    DecodeHandles fhr = decode_graph(ftape, seed_r, false, wr, true);
    DecodeHandles fhl = decode_graph(ftape, seed_l, false, wl, true);
    NodeId fillum = ftape.add(fhl.output, ftape.constant_scalar(kIlluminationFloor));
    NodeId composed = enhance_compose(ftape, fhr.output, fillum,
                                      ftape.constant_scalar(gamma_t.data[0]));
    res.reflectance = crop_top_left(ftape.value(fhr.output), orig_h, orig_w);
    res.illumination = crop_top_left(ftape.value(fillum), orig_h, orig_w);
    res.enhanced = crop_top_left(ftape.value(composed), orig_h, orig_w);
    res.gamma_final = gamma_t.data[0];
    res.mean_iter_seconds = cfg.iterations > 0 ? total_seconds / cfg.iterations : 0.0;
    res.hash_r_after = weights_sha256(wr);
    res.hash_l_after = weights_sha256(wl);
    return res;
}

} // namespace rseed
