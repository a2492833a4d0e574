#include "rseed/config.hpp"

#include <doctest.h>

#include <string>

using namespace rseed;

TEST_CASE("defaults describe the paired preset") {
    EnhanceConfig c;
    CHECK(c.iterations == 2500);
    CHECK(c.lr == 1e-2f);
    CHECK(c.mode == OptMode::SeedOnly);
    CHECK(c.init == InitSetting::RandomAll);
    CHECK(c.rule == StepRule::Adam);
    CHECK(c.loss.lambda_re == 12.0f);
    CHECK(c.loss.lambda_e == 0.05f);
    CHECK(c.loss.lambda_s == 0.03f);
    CHECK(c.loss.lambda_i == 0.01f);
    CHECK(c.loss.tau == 0.6f);
    CHECK(c.loss.exposure_e == 0.6f);
    CHECK(c.gamma_init == 0.5f);
    CHECK(c.rng_seed == 0);
    CHECK(c.snapshot_every == 0);
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("presets") {
    EnhanceConfig c;
    apply_preset(c, "noref");
    CHECK(c.iterations == 5000);
    CHECK(c.loss.tau == 0.2f);

    apply_preset(c, "paired");
    CHECK(c.iterations == 2500);
    CHECK(c.loss.tau == 0.6f);

    apply_preset(c, "fast");
    CHECK(c.iterations == 900);
    CHECK(c.loss.tau == 0.6f);

    CHECK_THROWS_WITH_AS(apply_preset(c, "turbo"), doctest::Contains("turbo"), Error);
}

TEST_CASE("emit is a fixed point of parse") {
    EnhanceConfig c;
    c.iterations = 123;
    c.lr = 0.0321f;
    c.mode = OptMode::Joint;
    c.init = InitSetting::PretrainedBoth;
    c.rule = StepRule::Gd;
    c.weights_r = "/tmp/r.rswt";
    c.weights_l = "/tmp/l.rswt";
    c.loss.tau = 0.25f;
    c.gamma_init = 0.8f;
    c.rng_seed = 42;
    c.snapshot_every = 50;
    c.snapshot_dir = "/tmp/snaps";

    const std::string emitted = emit_config(c);
    EnhanceConfig back = parse_config(emitted, EnhanceConfig{});
    CHECK(emit_config(back) == emitted);

    CHECK(back.iterations == 123);
    CHECK(back.lr == 0.0321f);
    CHECK(back.mode == OptMode::Joint);
    CHECK(back.init == InitSetting::PretrainedBoth);
    CHECK(back.rule == StepRule::Gd);
    CHECK(back.weights_r == "/tmp/r.rswt");
    CHECK(back.loss.tau == 0.25f);
    CHECK(back.gamma_init == 0.8f);
    CHECK(back.rng_seed == 42);
    CHECK(back.snapshot_every == 50);
    CHECK(back.snapshot_dir == "/tmp/snaps");
}

TEST_CASE("a partial file overrides only its keys") {
    EnhanceConfig base;
    base.rng_seed = 7;
    EnhanceConfig c = parse_config("# comment only\niterations = 40\n\ntau = 0.3\n", base);
    CHECK(c.iterations == 40);
    CHECK(c.loss.tau == 0.3f);
    CHECK(c.rng_seed == 7);          // untouched
    CHECK(c.lr == 1e-2f);            // untouched
    CHECK(c.loss.lambda_re == 12.0f); // untouched
}

TEST_CASE("parse rejects what it cannot understand") {
    EnhanceConfig base;
    CHECK_THROWS_WITH_AS(parse_config("iterations = 5\n\nspeed = 9\n", base),
                         doctest::Contains("speed"), Error);
    CHECK_THROWS_WITH_AS(parse_config("iterations = 5\n\nspeed = 9\n", base),
                         doctest::Contains("line 3"), Error);
    CHECK_THROWS_WITH_AS(parse_config("lr = fast\n", base), doctest::Contains("fast"), Error);
    CHECK_THROWS_WITH_AS(parse_config("lr = 0.01 uh\n", base), doctest::Contains("lr"), Error);
    CHECK_THROWS_AS(parse_config("just some words\n", base), Error);
    CHECK_THROWS_AS(parse_config("mode = sideways\n", base), Error);
    CHECK_THROWS_AS(parse_config("rng_seed = not-a-number\n", base), Error);
}

TEST_CASE("comments and whitespace are tolerated") {
    EnhanceConfig c = parse_config("  iterations =  77   # inline comment\n", EnhanceConfig{});
    CHECK(c.iterations == 77);
}

TEST_CASE("load_config reads from disk and reports missing files") {
    CHECK_THROWS_WITH_AS(load_config("/nonexistent/nope.cfg", EnhanceConfig{}),
                         doctest::Contains("nope.cfg"), Error);
}

TEST_CASE("validation catches inconsistent settings") {
    EnhanceConfig c;
    c.init = InitSetting::PretrainedReflectance;
    CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("weights_r"), Error);
    c.weights_r = "r.rswt";
    CHECK_NOTHROW(c.validate());

    c.init = InitSetting::PretrainedBoth;
    CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("weights_l"), Error);

    c = EnhanceConfig{};
    c.lr = 0.0f;
    CHECK_THROWS_AS(c.validate(), Error);
    c = EnhanceConfig{};
    c.iterations = -1;
    CHECK_THROWS_AS(c.validate(), Error);
    c = EnhanceConfig{};
    c.gamma_init = -0.5f;
    CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("enum names round trip") {
    for (OptMode m : {OptMode::SeedOnly, OptMode::ParamsOnly, OptMode::Joint})
        CHECK(mode_from(mode_name(m)) == m);
    for (InitSetting s : {InitSetting::PretrainedReflectance, InitSetting::RandomAll,
                          InitSetting::PretrainedBoth})
        CHECK(init_from(init_name(s)) == s);
    for (StepRule r : {StepRule::Adam, StepRule::Gd})
        CHECK(rule_from(rule_name(r)) == r);
    CHECK_THROWS_AS(mode_from("weights"), Error);
    CHECK_THROWS_AS(init_from(""), Error);
    CHECK_THROWS_AS(rule_from("sgd"), Error);
}
