#include "rseed/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace rseed {

void EnhanceConfig::validate() const {
    check_shape(iterations >= 0, "iterations must be non-negative");
    check_shape(lr > 0.0f, "learning rate must be positive");
    loss.validate();
    check_shape(gamma_init > 0.0f, "gamma_init must be positive");
    check_shape(snapshot_every >= 0, "snapshot_every must be non-negative");
    if (init == InitSetting::PretrainedReflectance && weights_r.empty())
        throw Error("init=pretrained-r requires weights_r");
    if (init == InitSetting::PretrainedBoth && (weights_r.empty() || weights_l.empty()))
        throw Error("init=pretrained-both requires weights_r and weights_l");
}

void apply_preset(EnhanceConfig& cfg, const std::string& preset) {
    if (preset == "paired") {
        cfg.iterations = 2500;
        cfg.loss.tau = 0.6f;
    } else if (preset == "noref") {
        cfg.iterations = 5000;
        cfg.loss.tau = 0.2f;
    } else if (preset == "fast") {
        cfg.iterations = 900;
        cfg.loss.tau = 0.6f;
    } else {
        throw Error("unknown preset '" + preset + "' (noref, paired, fast)");
    }
}

const char* mode_name(OptMode m) {
    switch (m) {
    case OptMode::SeedOnly: return "seed";
    case OptMode::ParamsOnly: return "params";
    default: return "joint";
    }
}

const char* init_name(InitSetting s) {
    switch (s) {
    case InitSetting::PretrainedReflectance: return "pretrained-r";
    case InitSetting::RandomAll: return "random";
    default: return "pretrained-both";
    }
}

const char* rule_name(StepRule r) { return r == StepRule::Adam ? "adam" : "gd"; }

OptMode mode_from(const std::string& s) {
    if (s == "seed") return OptMode::SeedOnly;
    if (s == "params") return OptMode::ParamsOnly;
    if (s == "joint") return OptMode::Joint;
    throw Error("unknown mode '" + s + "' (seed, params, joint)");
}

InitSetting init_from(const std::string& s) {
    if (s == "pretrained-r") return InitSetting::PretrainedReflectance;
    if (s == "random") return InitSetting::RandomAll;
    if (s == "pretrained-both") return InitSetting::PretrainedBoth;
    throw Error("unknown init '" + s + "' (pretrained-r, random, pretrained-both)");
}

StepRule rule_from(const std::string& s) {
    if (s == "adam") return StepRule::Adam;
    if (s == "gd") return StepRule::Gd;
    throw Error("unknown optimizer '" + s + "' (adam, gd)");
}

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

float parse_float(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const float f = std::stof(v, &used);
        if (used != v.size()) throw Error("");
        return f;
    } catch (...) {
        throw Error("bad value for " + key + ": '" + v + "'");
    }
}

int parse_int(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const int i = std::stoi(v, &used);
        if (used != v.size()) throw Error("");
        return i;
    } catch (...) {
        throw Error("bad value for " + key + ": '" + v + "'");
    }
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const uint64_t i = std::stoull(v, &used);
        if (used != v.size()) throw Error("");
        return i;
    } catch (...) {
        throw Error("bad value for " + key + ": '" + v + "'");
    }
}

std::string fmt_float(float v) {
    // shortest decimal that parses back to exactly the same float
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

} // namespace

EnhanceConfig parse_config(const std::string& text, const EnhanceConfig& base) {
    EnhanceConfig cfg = base;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw Error("config line " + std::to_string(lineno) + " is not key = value: '" +
                        line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));

        if (key == "iterations") cfg.iterations = parse_int(key, val);
        else if (key == "lr") cfg.lr = parse_float(key, val);
        else if (key == "mode") cfg.mode = mode_from(val);
        else if (key == "init") cfg.init = init_from(val);
        else if (key == "optimizer") cfg.rule = rule_from(val);
        else if (key == "weights_r") cfg.weights_r = val;
        else if (key == "weights_l") cfg.weights_l = val;
        else if (key == "lambda_re") cfg.loss.lambda_re = parse_float(key, val);
        else if (key == "lambda_e") cfg.loss.lambda_e = parse_float(key, val);
        else if (key == "lambda_s") cfg.loss.lambda_s = parse_float(key, val);
        else if (key == "lambda_i") cfg.loss.lambda_i = parse_float(key, val);
        else if (key == "tau") cfg.loss.tau = parse_float(key, val);
        else if (key == "exposure") cfg.loss.exposure_e = parse_float(key, val);
        else if (key == "gamma_init") cfg.gamma_init = parse_float(key, val);
        else if (key == "rng_seed") cfg.rng_seed = parse_u64(key, val);
        else if (key == "snapshot_every") cfg.snapshot_every = parse_int(key, val);
        else if (key == "snapshot_dir") cfg.snapshot_dir = val;
        else throw Error("unknown config key '" + key + "' at line " + std::to_string(lineno));
    }
    return cfg;
}

EnhanceConfig load_config(const std::string& path, const EnhanceConfig& base) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str(), base);
}

std::string emit_config(const EnhanceConfig& cfg) {
    std::string s;
    s += "iterations = " + std::to_string(cfg.iterations) + "\n";
    s += "lr = " + fmt_float(cfg.lr) + "\n";
    s += "mode = " + std::string(mode_name(cfg.mode)) + "\n";
    s += "init = " + std::string(init_name(cfg.init)) + "\n";
    s += "optimizer = " + std::string(rule_name(cfg.rule)) + "\n";
    s += "weights_r = " + cfg.weights_r + "\n";
    s += "weights_l = " + cfg.weights_l + "\n";
    s += "lambda_re = " + fmt_float(cfg.loss.lambda_re) + "\n";
    s += "lambda_e = " + fmt_float(cfg.loss.lambda_e) + "\n";
    s += "lambda_s = " + fmt_float(cfg.loss.lambda_s) + "\n";
    s += "lambda_i = " + fmt_float(cfg.loss.lambda_i) + "\n";
    s += "tau = " + fmt_float(cfg.loss.tau) + "\n";
    s += "exposure = " + fmt_float(cfg.loss.exposure_e) + "\n";
    s += "gamma_init = " + fmt_float(cfg.gamma_init) + "\n";
    s += "rng_seed = " + std::to_string(cfg.rng_seed) + "\n";
    s += "snapshot_every = " + std::to_string(cfg.snapshot_every) + "\n";
    s += "snapshot_dir = " + cfg.snapshot_dir + "\n";
    return s;
}

} // namespace rseed
