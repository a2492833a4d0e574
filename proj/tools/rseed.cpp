#include "rseed/config.hpp"
#include "rseed/decoder.hpp"
#include "rseed/image_io.hpp"
#include "rseed/metrics.hpp"
#include "rseed/optimizer.hpp"
#include "rseed/pretrain.hpp"
#include "rseed/refcheck.hpp"
#include "rseed/rng.hpp"
#include "rseed/weights_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using rseed::Error;

namespace {

// 0 ok, 1 config violation, 2 unreadable file, 3 NaN abort,
// 4 eval pair failure, 5 gradient check failure
constexpr int kOk = 0;
constexpr int kBadConfig = 1;
constexpr int kBadFile = 2;
constexpr int kNanAbort = 3;
constexpr int kEvalFailed = 4;
constexpr int kGradcheckFailed = 5;

std::mutex io_mutex;

int fail(int code, const std::string& msg) {
    std::lock_guard<std::mutex> lk(io_mutex);
    std::cerr << "error: " << msg << "\n";
    return code;
}

nlohmann::json config_json(const rseed::EnhanceConfig& cfg) {
    nlohmann::json j = nlohmann::json::object();
    std::istringstream in(rseed::emit_config(cfg));
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find(" = ");
        if (eq != std::string::npos) j[line.substr(0, eq)] = line.substr(eq + 3);
    }
    return j;
}

struct EnhanceOpts {
    std::vector<std::string> inputs;
    std::string output_dir = ".";
    std::string config_path;
    std::string preset;
    bool print_config = false;
    int jobs = 1;

    int iterations = 0;
    float lr = 0;
    std::string mode, init, optimizer, weights_r, weights_l;
    float lambda_re = 0, lambda_e = 0, lambda_s = 0, lambda_i = 0;
    float tau = 0, exposure = 0, gamma_init = 0;
    uint64_t rng_seed = 0;
    int snapshot_every = 0;
    std::string snapshot_dir;
};

int enhance_one(const std::string& input, const rseed::EnhanceConfig& cfg,
                const rseed::DecoderWeights& wr, const rseed::DecoderWeights& wl,
                const std::string& output_dir, bool many) {
    rseed::Tensor img;
    try {
        img = rseed::read_image(input);
    } catch (const Error& e) {
        return fail(kBadFile, e.what());
    }

    const std::string stem = fs::path(input).stem().string();
    rseed::RunConfig rc;
    rc.iterations = cfg.iterations;
    rc.lr = cfg.lr;
    rc.mode = cfg.mode;
    rc.rule = cfg.rule;
    rc.loss = cfg.loss;
    rc.gamma.value = cfg.gamma_init;
    rc.rng_seed = cfg.rng_seed;
    rc.snapshot_every = cfg.snapshot_every;
    if (cfg.snapshot_every > 0) {
        // per-image subdirectory so batch runs do not clobber each other
        rc.snapshot_dir = many ? cfg.snapshot_dir + "/" + stem : cfg.snapshot_dir;
    }
    rc.on_iteration = [](const rseed::TraceRow& t) {
        std::lock_guard<std::mutex> lk(io_mutex);
        std::printf("iter=%d l_re=%.6g l_e=%.6g l_s=%.6g l_i=%.6g total=%.6g gamma=%.6g\n",
                    t.iter, t.l_re, t.l_e, t.l_s, t.l_i, t.total, t.gamma);
    };

    rseed::EnhanceResult res;
    try {
        res = rseed::run(img, wr, wl, rc);
    } catch (const rseed::NanAbort& e) {
        return fail(kNanAbort, e.what());
    } catch (const Error& e) {
        return fail(kBadConfig, e.what());
    }

    const fs::path out_png = fs::path(output_dir) / (stem + "_enhanced.png");
    const fs::path out_json = fs::path(output_dir) / (stem + "_enhanced.json");
    try {
        fs::create_directories(output_dir);
        rseed::write_png(out_png.string(), res.enhanced);

        nlohmann::json j;
        j["input"] = input;
        j["output"] = out_png.string();
        j["config"] = config_json(cfg);
        j["gamma_final"] = res.gamma_final;
        j["mean_iteration_seconds"] = res.mean_iter_seconds;
        j["weight_hashes"] = {{"r_before", res.hash_r_before},
                              {"r_after", res.hash_r_after},
                              {"l_before", res.hash_l_before},
                              {"l_after", res.hash_l_after}};
        j["trace_columns"] = {"iter", "l_re", "l_e", "l_s", "l_i", "total", "gamma"};
        nlohmann::json rows = nlohmann::json::array();
        for (const rseed::TraceRow& t : res.trace)
            rows.push_back({t.iter, t.l_re, t.l_e, t.l_s, t.l_i, t.total, t.gamma});
        j["trace"] = std::move(rows);
        std::ofstream out(out_json);
        if (!out) throw Error("cannot open '" + out_json.string() + "' for writing");
        out << j.dump() << "\n";
    } catch (const std::exception& e) {
        return fail(kBadFile, e.what());
    }

    {
        std::lock_guard<std::mutex> lk(io_mutex);
        std::printf("%s -> %s (gamma=%.6g, %.4g s/iter)\n", input.c_str(),
                    out_png.string().c_str(), res.gamma_final, res.mean_iter_seconds);
        std::fflush(stdout);
    }
    return kOk;
}

int cmd_enhance(const EnhanceOpts& o, const std::vector<const CLI::Option*>& set,
                const std::vector<std::function<void(rseed::EnhanceConfig&)>>& apply) {
    rseed::EnhanceConfig cfg;
    try {
        if (!o.preset.empty()) rseed::apply_preset(cfg, o.preset);
        if (!o.config_path.empty()) {
            std::ifstream f(o.config_path);
            if (!f) return fail(kBadFile, "cannot open config file '" + o.config_path + "'");
            std::stringstream buf;
            buf << f.rdbuf();
            cfg = rseed::parse_config(buf.str(), cfg);
        }
        for (size_t i = 0; i < set.size(); ++i)
            if (set[i]->count() > 0) apply[i](cfg);
        cfg.validate();
    } catch (const Error& e) {
        return fail(kBadConfig, e.what());
    }

    if (o.print_config) {
        std::cout << rseed::emit_config(cfg);
        return kOk;
    }
    if (o.inputs.empty()) return fail(kBadConfig, "no input images given");

    rseed::DecoderArch arch_r;
    rseed::DecoderArch arch_l;
    arch_l.out_channels = 1;
    rseed::DecoderWeights wr, wl;
    try {
        const bool load_r = cfg.init != rseed::InitSetting::RandomAll;
        const bool load_l = cfg.init == rseed::InitSetting::PretrainedBoth;
        wr = load_r ? rseed::import_weights(cfg.weights_r, arch_r)
                    : rseed::init_random(arch_r, rseed::derive_seed(cfg.rng_seed, 1));
        wl = load_l ? rseed::import_weights(cfg.weights_l, arch_l)
                    : rseed::init_random(arch_l, rseed::derive_seed(cfg.rng_seed, 2));
    } catch (const Error& e) {
        return fail(kBadFile, e.what());
    }

    const bool many = o.inputs.size() > 1;
    const int n = static_cast<int>(o.inputs.size());
    const int jobs = std::clamp(o.jobs, 1, n);
    if (jobs == 1) {
        for (const std::string& input : o.inputs) {
            const int code = enhance_one(input, cfg, wr, wl, o.output_dir, many);
            if (code != kOk) return code;
        }
        return kOk;
    }

    std::atomic<size_t> next{0};
    std::atomic<int> code{kOk};
    auto worker = [&] {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= o.inputs.size()) break;
            const int c = enhance_one(o.inputs[i], cfg, wr, wl, o.output_dir, many);
            if (c != kOk) {
                int expected = kOk;
                code.compare_exchange_strong(expected, c);
            }
        }
    };
    std::vector<std::thread> threads;
    for (int t = 1; t < jobs; ++t) threads.emplace_back(worker);
    worker();
    for (std::thread& t : threads) t.join();
    return code.load();
}

struct PretrainOpts {
    std::string corpus_dir;
    std::string out;
    int epochs = 200;
    int batch = 8;
    int resolution = 128;
    int channels = 3;
    float lr = 3e-4f;
    uint64_t rng_seed = 1;
};

int cmd_pretrain(const PretrainOpts& o) {
    if (!fs::is_directory(o.corpus_dir))
        return fail(kBadFile, "corpus directory '" + o.corpus_dir + "' does not exist");
    if (o.channels != 1 && o.channels != 3)
        return fail(kBadConfig, "--channels must be 1 or 3");

    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(o.corpus_dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (ext == ".png" || ext == ".jpg" || ext == ".jpeg")
            files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    if (files.empty())
        return fail(kBadFile, "no PNG/JPEG images in '" + o.corpus_dir + "'");

    std::vector<std::pair<std::string, rseed::Tensor>> corpus;
    try {
        for (const std::string& f : files) {
            rseed::Tensor img = rseed::resize_cover(rseed::read_image(f), o.resolution);
            if (o.channels == 1) {
                rseed::Tensor gray(rseed::Shape::chw(1, o.resolution, o.resolution));
                const size_t plane = gray.data.size();
                for (size_t i = 0; i < plane; ++i)
                    gray.data[i] =
                        (img.data[i] + img.data[plane + i] + img.data[2 * plane + i]) / 3.0f;
                img = std::move(gray);
            }
            corpus.emplace_back(fs::path(f).filename().string(), std::move(img));
        }
    } catch (const Error& e) {
        return fail(kBadFile, e.what());
    }

    rseed::DecoderArch arch;
    arch.out_channels = o.channels;
    rseed::PretrainConfig pc;
    pc.lr = o.lr;
    pc.epochs = o.epochs;
    pc.batch = o.batch;
    pc.resolution = o.resolution;
    pc.rng_seed = o.rng_seed;

    rseed::PretrainReport report;
    try {
        report = rseed::pretrain(corpus, arch, pc);
    } catch (const rseed::NanAbort& e) {
        return fail(kNanAbort, e.what());
    } catch (const Error& e) {
        return fail(kBadConfig, e.what());
    }

    try {
        if (fs::path(o.out).has_parent_path())
            fs::create_directories(fs::path(o.out).parent_path());
        rseed::save_weights(report.weights, o.out);
        std::ofstream log(o.out + ".log");
        if (!log) throw Error("cannot open '" + o.out + ".log' for writing");
        for (const auto& [epoch, loss] : report.epoch_loss)
            log << epoch << " " << loss << "\n";
    } catch (const std::exception& e) {
        return fail(kBadFile, e.what());
    }

    for (const auto& [name, db] : report.final_psnr)
        std::printf("%s reconstruction_psnr_db=%.4f\n", name.c_str(), db);
    std::printf("wrote %s (%d images, %d epochs)\n", o.out.c_str(),
                static_cast<int>(corpus.size()), o.epochs);
    return kOk;
}

struct EvalOpts {
    std::string manifest;
    std::string format = "text";
};

int cmd_eval(const EvalOpts& o) {
    if (o.format != "text" && o.format != "csv")
        return fail(kBadConfig, "--format must be text or csv");
    std::ifstream f(o.manifest);
    if (!f) return fail(kBadFile, "cannot open manifest '" + o.manifest + "'");

    struct Pair {
        std::string enhanced, reference;
    };
    std::vector<Pair> pairs;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size())
            return fail(kBadConfig, "manifest line " + std::to_string(lineno) +
                                        " is not tab-separated: '" + line + "'");
        pairs.push_back({line.substr(0, tab), line.substr(tab + 1)});
    }
    if (pairs.empty()) return fail(kBadConfig, "manifest '" + o.manifest + "' is empty");

    const bool csv = o.format == "csv";
    if (csv) std::printf("path,psnr_db,ssim\n");
    int failed = 0;
    double sum_psnr = 0.0, sum_ssim = 0.0;
    int ok = 0;
    for (const Pair& p : pairs) {
        try {
            const rseed::Tensor a = rseed::read_image(p.enhanced);
            const rseed::Tensor b = rseed::read_image(p.reference);
            const double pd = rseed::psnr(a, b);
            const double sd = rseed::ssim(a, b);
            if (csv) std::printf("%s,%.6g,%.6g\n", p.enhanced.c_str(), pd, sd);
            else std::printf("%s psnr_db=%.6g ssim=%.6g\n", p.enhanced.c_str(), pd, sd);
            sum_psnr += pd;
            sum_ssim += sd;
            ++ok;
        } catch (const Error& e) {
            std::lock_guard<std::mutex> lk(io_mutex);
            std::cerr << "error: pair '" << p.enhanced << "': " << e.what() << "\n";
            ++failed;
        }
    }
    if (ok > 0) {
        const double mp = sum_psnr / ok, ms = sum_ssim / ok;
        if (csv) std::printf("mean,%.6g,%.6g\n", mp, ms);
        else std::printf("mean psnr_db=%.6g ssim=%.6g\n", mp, ms);
    }
    return failed > 0 ? kEvalFailed : kOk;
}

struct GradcheckOpts {
    uint64_t seed = 1;
    int instances = 20;
    std::string defect;
    bool verbose = false;
};

int cmd_gradcheck(const GradcheckOpts& o) {
    if (o.instances < 1) return fail(kBadConfig, "--instances must be >= 1");
    const rseed::refcheck::Report report =
        rseed::refcheck::run_gradchecks(o.seed, o.instances, o.defect);
    std::cout << rseed::refcheck::format_report(report, o.verbose);
    return report.all_pass ? kOk : kGradcheckFailed;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Zero-shot low-light enhancement by seed optimization"};
    app.require_subcommand(1);

    EnhanceOpts eo;
    std::vector<const CLI::Option*> eset;
    std::vector<std::function<void(rseed::EnhanceConfig&)>> eapply;
    CLI::App* enh = app.add_subcommand("enhance", "Enhance one or more low-light images");
    enh->add_option("inputs", eo.inputs, "Input PNG/JPEG images");
    enh->add_option("-o,--output-dir", eo.output_dir, "Output directory");
    enh->add_option("--config", eo.config_path, "Config file (key = value lines)");
    enh->add_option("--preset", eo.preset, "Preset: paired, noref, or fast");
    enh->add_flag("--print-config", eo.print_config, "Print the effective config and exit");
    enh->add_option("-j,--jobs", eo.jobs, "Images optimized in parallel");

    auto override_opt = [&](CLI::Option* opt, std::function<void(rseed::EnhanceConfig&)> fn) {
        eset.push_back(opt);
        eapply.push_back(std::move(fn));
    };
    override_opt(enh->add_option("--iterations", eo.iterations, "Optimization steps"),
                 [&eo](rseed::EnhanceConfig& c) { c.iterations = eo.iterations; });
    override_opt(enh->add_option("--lr", eo.lr, "Learning rate"),
                 [&eo](rseed::EnhanceConfig& c) { c.lr = eo.lr; });
    override_opt(enh->add_option("--mode", eo.mode, "seed, params, or joint"),
                 [&eo](rseed::EnhanceConfig& c) { c.mode = rseed::mode_from(eo.mode); });
    override_opt(enh->add_option("--init", eo.init, "pretrained-r, random, or pretrained-both"),
                 [&eo](rseed::EnhanceConfig& c) { c.init = rseed::init_from(eo.init); });
    override_opt(enh->add_option("--optimizer", eo.optimizer, "adam or gd"),
                 [&eo](rseed::EnhanceConfig& c) { c.rule = rseed::rule_from(eo.optimizer); });
    override_opt(enh->add_option("--weights-r", eo.weights_r, "Reflectance decoder weights"),
                 [&eo](rseed::EnhanceConfig& c) { c.weights_r = eo.weights_r; });
    override_opt(enh->add_option("--weights-l", eo.weights_l, "Illumination decoder weights"),
                 [&eo](rseed::EnhanceConfig& c) { c.weights_l = eo.weights_l; });
    override_opt(enh->add_option("--lambda-re", eo.lambda_re, "Reconstruction loss weight"),
                 [&eo](rseed::EnhanceConfig& c) { c.loss.lambda_re = eo.lambda_re; });
    override_opt(enh->add_option("--lambda-e", eo.lambda_e, "Illumination consistency weight"),
                 [&eo](rseed::EnhanceConfig& c) { c.loss.lambda_e = eo.lambda_e; });
    override_opt(enh->add_option("--lambda-s", eo.lambda_s, "Smoothness loss weight"),
                 [&eo](rseed::EnhanceConfig& c) { c.loss.lambda_s = eo.lambda_s; });
    override_opt(enh->add_option("--lambda-i", eo.lambda_i, "Exposure control weight"),
                 [&eo](rseed::EnhanceConfig& c) { c.loss.lambda_i = eo.lambda_i; });
    override_opt(enh->add_option("--tau", eo.tau, "Reflectance gradient penalty"),
                 [&eo](rseed::EnhanceConfig& c) { c.loss.tau = eo.tau; });
    override_opt(enh->add_option("--exposure", eo.exposure, "Target mean intensity"),
                 [&eo](rseed::EnhanceConfig& c) { c.loss.exposure_e = eo.exposure; });
    override_opt(enh->add_option("--gamma-init", eo.gamma_init, "Initial gamma"),
                 [&eo](rseed::EnhanceConfig& c) { c.gamma_init = eo.gamma_init; });
    override_opt(enh->add_option("--rng-seed", eo.rng_seed, "Seed for weights and latents"),
                 [&eo](rseed::EnhanceConfig& c) { c.rng_seed = eo.rng_seed; });
    override_opt(enh->add_option("--snapshot-every", eo.snapshot_every,
                                 "Write R/L/result every k iterations"),
                 [&eo](rseed::EnhanceConfig& c) { c.snapshot_every = eo.snapshot_every; });
    override_opt(enh->add_option("--snapshot-dir", eo.snapshot_dir, "Snapshot directory"),
                 [&eo](rseed::EnhanceConfig& c) { c.snapshot_dir = eo.snapshot_dir; });

    PretrainOpts po;
    CLI::App* pre = app.add_subcommand("pretrain", "Fit decoder weights to an image corpus");
    pre->add_option("corpus", po.corpus_dir, "Directory of PNG/JPEG images")->required();
    pre->add_option("--out", po.out, "Output weight file")->required();
    pre->add_option("--epochs", po.epochs, "Training epochs");
    pre->add_option("--batch", po.batch, "Batch size");
    pre->add_option("--lr", po.lr, "Learning rate");
    pre->add_option("--resolution", po.resolution, "Square training resolution");
    pre->add_option("--channels", po.channels, "Decoder output channels (3 or 1)");
    pre->add_option("--rng-seed", po.rng_seed, "Init seed");

    EvalOpts vo;
    CLI::App* ev = app.add_subcommand("eval", "PSNR/SSIM over (enhanced, reference) pairs");
    ev->add_option("manifest", vo.manifest, "Tab-separated pair list")->required();
    ev->add_option("--format", vo.format, "text or csv");

    GradcheckOpts go;
    CLI::App* gc = app.add_subcommand("gradcheck", "Finite-difference gradient self-check");
    gc->add_option("--seed", go.seed, "RNG seed");
    gc->add_option("--instances", go.instances, "Random instances per op");
    gc->add_option("--defect", go.defect, "Flip the analytic sign for one op (self-test)");
    gc->add_flag("--verbose", go.verbose, "Per-instance detail");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kBadConfig;
    }

    try {
        if (app.got_subcommand(enh)) return cmd_enhance(eo, eset, eapply);
        if (app.got_subcommand(pre)) return cmd_pretrain(po);
        if (app.got_subcommand(ev)) return cmd_eval(vo);
        if (app.got_subcommand(gc)) return cmd_gradcheck(go);
    } catch (const std::exception& e) {
        return fail(kBadConfig, e.what());
    }
    return kBadConfig;
}
