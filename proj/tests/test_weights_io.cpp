#include "rseed/decoder.hpp"
#include "rseed/weights_io.hpp"

#include "support/util.hpp"

#include <doctest.h>
#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <string>
#include <vector>

using namespace rseed;

namespace {

// Rewrites the trailing checksum so a deliberately patched payload is
// structurally valid and exercises the parser, not the integrity check.
void fix_crc(std::vector<uint8_t>& bytes) {
    const size_t body = bytes.size() - 4;
    const uint32_t crc =
        static_cast<uint32_t>(crc32(0, bytes.data(), static_cast<uInt>(body)));
    std::memcpy(bytes.data() + body, &crc, 4);
}

std::string error_of(const std::vector<uint8_t>& bytes) {
    try {
        deserialize_weights(bytes.data(), bytes.size());
        return "";
    } catch (const Error& e) {
        return e.what();
    }
}

} // namespace

TEST_CASE("weights survive a save/load round trip byte for byte") {
    testutil::TempDir dir;
    DecoderWeights w = init_random(DecoderArch{}, 123);
    const std::string path = dir.file("w.rswt");
    save_weights(w, path);

    DecoderWeights r = load_weights(path);
    CHECK(r.arch == w.arch);
    CHECK(serialize_weights(r) == serialize_weights(w));
    CHECK(weights_sha256(r) == weights_sha256(w));
    CHECK(r.find("stage2.kernel").shape == w.find("stage2.kernel").shape);
}

TEST_CASE("distinct corruption modes are reported distinctly") {
    std::vector<uint8_t> good = serialize_weights(init_random(DecoderArch{}, 5));
    REQUIRE(error_of(good) == "");

    SUBCASE("bad magic") {
        auto bytes = good;
        bytes[0] = 'X';
        CHECK(error_of(bytes).find("magic") != std::string::npos);
    }
    SUBCASE("checksum mismatch from a flipped payload byte") {
        auto bytes = good;
        bytes[bytes.size() / 2] ^= 0x40;
        CHECK(error_of(bytes).find("checksum") != std::string::npos);
    }
    SUBCASE("unsupported version") {
        auto bytes = good;
        const uint32_t v2 = 2;
        std::memcpy(bytes.data() + 4, &v2, 4);
        fix_crc(bytes);
        CHECK(error_of(bytes).find("version") != std::string::npos);
    }
    SUBCASE("truncated mid-layer") {
        std::vector<uint8_t> bytes(good.begin(), good.begin() + 200);
        bytes.resize(204);
        fix_crc(bytes);
        CHECK(error_of(bytes).find("truncated") != std::string::npos);
    }
    SUBCASE("trailing bytes after the last layer") {
        auto bytes = good;
        bytes.insert(bytes.end() - 4, {0, 0, 0, 0});
        fix_crc(bytes);
        CHECK(error_of(bytes).find("trailing") != std::string::npos);
    }
    SUBCASE("layer dims disagreeing with the declared arch") {
        // Swapping two unequal dims keeps the element count — and therefore the
        // record framing — intact, so only the arch cross-check can object.
        auto bytes = good;
        const char* name = "stage0.kernel";
        auto it = std::search(bytes.begin(), bytes.end(), name, name + std::strlen(name));
        REQUIRE(it != bytes.end());
        const size_t dim0 = static_cast<size_t>(it - bytes.begin()) + std::strlen(name) + 4;
        uint32_t d0, d3;
        std::memcpy(&d0, bytes.data() + dim0, 4);
        std::memcpy(&d3, bytes.data() + dim0 + 12, 4);
        REQUIRE(d0 == 64);
        REQUIRE(d3 == 3);
        std::memcpy(bytes.data() + dim0, &d3, 4);
        std::memcpy(bytes.data() + dim0 + 12, &d0, 4);
        fix_crc(bytes);
        CHECK(error_of(bytes).find("inconsistent with arch") != std::string::npos);
        CHECK(error_of(bytes).find("stage0.kernel") != std::string::npos);
    }
    SUBCASE("a shrunken dim derails the record stream") {
        auto bytes = good;
        const char* name = "stage0.kernel";
        auto it = std::search(bytes.begin(), bytes.end(), name, name + std::strlen(name));
        REQUIRE(it != bytes.end());
        const size_t dim0 = static_cast<size_t>(it - bytes.begin()) + std::strlen(name) + 4;
        const uint32_t patched = 63;
        std::memcpy(bytes.data() + dim0, &patched, 4);
        fix_crc(bytes);
        // the tensor payload that follows is now misread, so the parser trips
        // on whatever it decodes next rather than on this record itself
        CHECK(error_of(bytes) != "");
    }
}

TEST_CASE("importing checks the architecture and names both sides") {
    testutil::TempDir dir;
    const std::string path = dir.file("r.rswt");
    save_weights(init_random(DecoderArch{}, 9), path);

    DecoderArch mono;
    mono.out_channels = 1;
    try {
        import_weights(path, mono);
        FAIL("arch mismatch not detected");
    } catch (const Error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("mismatch") != std::string::npos);
        CHECK(msg.find(DecoderArch{}.str()) != std::string::npos);
        CHECK(msg.find(mono.str()) != std::string::npos);
    }

    // matching arch loads fine
    DecoderWeights ok = import_weights(path, DecoderArch{});
    CHECK(ok.arch == DecoderArch{});
}
