#include "rseed/weights_io.hpp"

#include <openssl/evp.h>
#include <zlib.h>

#include <cstdio>
#include <cstring>
#include <fstream>

namespace rseed {

namespace {

constexpr char kMagic[4] = {'R', 'S', 'W', 'T'};
constexpr uint32_t kVersion = 1;

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 24));
}

struct Reader {
    const uint8_t* p;
    size_t n;
    size_t pos = 0;
    std::string context = "header";

    void need(size_t k) {
        if (pos + k > n)
            throw Error("weight file truncated while reading " + context);
    }
    uint32_t u32() {
        need(4);
        uint32_t v = static_cast<uint32_t>(p[pos]) | static_cast<uint32_t>(p[pos + 1]) << 8 |
                     static_cast<uint32_t>(p[pos + 2]) << 16 |
                     static_cast<uint32_t>(p[pos + 3]) << 24;
        pos += 4;
        return v;
    }
    void bytes(void* dst, size_t k) {
        need(k);
        std::memcpy(dst, p + pos, k);
        pos += k;
    }
};

} // namespace

std::vector<uint8_t> serialize_weights(const DecoderWeights& w) {
    std::vector<uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<uint32_t>(w.arch.n_stages));
    put_u32(out, static_cast<uint32_t>(w.arch.seed_channels));
    put_u32(out, static_cast<uint32_t>(w.arch.out_channels));
    put_u32(out, static_cast<uint32_t>(w.arch.stage_channels.size()));
    for (int c : w.arch.stage_channels) put_u32(out, static_cast<uint32_t>(c));
    put_u32(out, static_cast<uint32_t>(w.layers.size()));
    for (const auto& layer : w.layers) {
        put_u32(out, static_cast<uint32_t>(layer.name.size()));
        out.insert(out.end(), layer.name.begin(), layer.name.end());
        put_u32(out, static_cast<uint32_t>(layer.tensor.shape.rank));
        for (int i = 0; i < layer.tensor.shape.rank; ++i)
            put_u32(out, static_cast<uint32_t>(layer.tensor.shape.d[i]));
        const size_t bytes = layer.tensor.data.size() * sizeof(float);
        const size_t at = out.size();
        out.resize(at + bytes);
        std::memcpy(out.data() + at, layer.tensor.data.data(), bytes);
    }
    const uint32_t crc = static_cast<uint32_t>(
        crc32(0L, out.data(), static_cast<uInt>(out.size())));
    put_u32(out, crc);
    return out;
}

DecoderWeights deserialize_weights(const uint8_t* data, size_t size) {
    if (size < 8 || std::memcmp(data, kMagic, 4) != 0)
        throw Error("not a decoder weight file (bad magic)");
    if (size < 12) throw Error("weight file truncated while reading header");
    const uint32_t stored_crc = static_cast<uint32_t>(data[size - 4]) |
                                static_cast<uint32_t>(data[size - 3]) << 8 |
                                static_cast<uint32_t>(data[size - 2]) << 16 |
                                static_cast<uint32_t>(data[size - 1]) << 24;
    const uint32_t crc = static_cast<uint32_t>(
        crc32(0L, data, static_cast<uInt>(size - 4)));
    if (crc != stored_crc) throw Error("weight file checksum mismatch");

    Reader r{data, size - 4};
    r.pos = 4;
    const uint32_t version = r.u32();
    if (version != kVersion)
        throw Error("unsupported weight file version " + std::to_string(version));

    DecoderWeights w;
    w.arch.n_stages = static_cast<int>(r.u32());
    w.arch.seed_channels = static_cast<int>(r.u32());
    w.arch.out_channels = static_cast<int>(r.u32());
    const uint32_t nsc = r.u32();
    if (nsc > 64) throw Error("weight file arch block implausible (stage count " +
                              std::to_string(nsc) + ")");
    w.arch.stage_channels.resize(nsc);
    for (uint32_t i = 0; i < nsc; ++i) w.arch.stage_channels[i] = static_cast<int>(r.u32());
    w.arch.validate();

    const uint32_t nlayers = r.u32();
    for (uint32_t li = 0; li < nlayers; ++li) {
        r.context = "layer " + std::to_string(li) + " name";
        const uint32_t name_len = r.u32();
        if (name_len > 4096) throw Error("weight file layer name implausibly long");
        std::string name(name_len, '\0');
        r.bytes(name.data(), name_len);
        r.context = "layer '" + name + "'";
        const uint32_t rank = r.u32();
        if (rank < 1 || rank > 4)
            throw Error("layer '" + name + "' has unsupported rank " + std::to_string(rank));
        Shape shape;
        shape.rank = static_cast<int>(rank);
        size_t numel = 1;
        for (uint32_t d = 0; d < rank; ++d) {
            shape.d[d] = static_cast<int>(r.u32());
            if (shape.d[d] <= 0 || numel > (1u << 28))
                throw Error("layer '" + name + "' has implausible dims");
            numel *= static_cast<size_t>(shape.d[d]);
        }
        Tensor t(shape);
        r.bytes(t.data.data(), numel * sizeof(float));
        w.layers.push_back({std::move(name), std::move(t)});
    }
    if (r.pos != r.n) throw Error("weight file has trailing bytes after last layer");

    // shape consistency against the declared arch
    int prev = w.arch.seed_channels;
    size_t li = 0;
    auto expect = [&](const std::string& name, const Shape& shape) {
        if (li >= w.layers.size() || w.layers[li].name != name ||
            !(w.layers[li].tensor.shape == shape))
            throw Error("layer shapes inconsistent with arch: expected '" + name + "' " +
                        shape.str() +
                        (li < w.layers.size()
                             ? ", found '" + w.layers[li].name + "' " +
                                   w.layers[li].tensor.shape.str()
                             : ", found end of layer list"));
        ++li;
    };
    for (int i = 0; i < w.arch.n_stages; ++i) {
        const int oc = w.arch.stage_channels[i];
        expect("stage" + std::to_string(i) + ".kernel", Shape::conv(oc, prev, 3, 3));
        expect("stage" + std::to_string(i) + ".bias", Shape::vec(oc));
        prev = oc;
    }
    expect("final.kernel", Shape::conv(w.arch.out_channels, prev, 3, 3));
    expect("final.bias", Shape::vec(w.arch.out_channels));
    if (li != w.layers.size())
        throw Error("layer shapes inconsistent with arch: " +
                    std::to_string(w.layers.size() - li) + " unexpected extra layers");
    return w;
}

void save_weights(const DecoderWeights& w, const std::string& path) {
    const std::vector<uint8_t> bytes = serialize_weights(w);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open '" + path + "' for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw Error("short write to '" + path + "'");
}

DecoderWeights load_weights(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw Error("cannot open '" + path + "'");
    const std::streamsize size = f.tellg();
    f.seekg(0);
    std::vector<uint8_t> bytes(static_cast<size_t>(size));
    f.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!f) throw Error("short read from '" + path + "'");
    return deserialize_weights(bytes.data(), bytes.size());
}

DecoderWeights import_weights(const std::string& path, const DecoderArch& expected) {
    DecoderWeights w = load_weights(path);
    if (!(w.arch == expected))
        throw Error("weight file arch mismatch: file has (" + w.arch.str() +
                    "), expected (" + expected.str() + ")");
    return w;
}

std::string weights_sha256(const DecoderWeights& w) {
    const std::vector<uint8_t> bytes = serialize_weights(w);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr))
        throw Error("sha256 failed");
    std::string hex(static_cast<size_t>(len) * 2, '0');
    static const char* digits = "0123456789abcdef";
    for (unsigned int i = 0; i < len; ++i) {
        hex[2 * i] = digits[digest[i] >> 4];
        hex[2 * i + 1] = digits[digest[i] & 0xf];
    }
    return hex;
}

} // namespace rseed
