#include "rseed/image_io.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

namespace rseed {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

Tensor from_rgb8(const std::vector<uint8_t>& rgb, int h, int w) {
    Tensor t(Shape::chw(3, h, w));
    const size_t plane = static_cast<size_t>(h) * w;
    for (size_t i = 0; i < plane; ++i) {
        t.data[i] = static_cast<float>(rgb[3 * i]) / 255.0f;
        t.data[i + plane] = static_cast<float>(rgb[3 * i + 1]) / 255.0f;
        t.data[i + 2 * plane] = static_cast<float>(rgb[3 * i + 2]) / 255.0f;
    }
    return t;
}

Tensor read_png_file(FILE* f, const std::string& path) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error("png init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw Error("png init failed");
    }
    std::vector<uint8_t> rgb;
    int h = 0, w = 0;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("cannot decode PNG '" + path + "'");
    }
    png_init_io(png, f);
    png_read_info(png, info);
    w = static_cast<int>(png_get_image_width(png, info));
    h = static_cast<int>(png_get_image_height(png, info));
    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);
    rgb.resize(static_cast<size_t>(h) * w * 3);
    std::vector<png_bytep> rows(static_cast<size_t>(h));
    for (int y = 0; y < h; ++y) rows[y] = rgb.data() + static_cast<size_t>(y) * w * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return from_rgb8(rgb, h, w);
}

struct JpegErr {
    jpeg_error_mgr mgr;
    jmp_buf jump;
};

void jpeg_err_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErr*>(cinfo->err);
    longjmp(err->jump, 1);
}

Tensor read_jpeg_file(FILE* f, const std::string& path) {
    jpeg_decompress_struct cinfo;
    JpegErr jerr;
    cinfo.err = jpeg_std_error(&jerr.mgr);
    jerr.mgr.error_exit = jpeg_err_exit;
    if (setjmp(jerr.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw Error("cannot decode JPEG '" + path + "'");
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, f);
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    const int w = static_cast<int>(cinfo.output_width);
    const int h = static_cast<int>(cinfo.output_height);
    std::vector<uint8_t> rgb(static_cast<size_t>(h) * w * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = rgb.data() + static_cast<size_t>(cinfo.output_scanline) * w * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return from_rgb8(rgb, h, w);
}

} // namespace

Tensor read_image(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw Error("cannot open image '" + path + "'");
    uint8_t magic[8] = {};
    const size_t got = std::fread(magic, 1, sizeof(magic), f.get());
    std::rewind(f.get());
    static const uint8_t png_sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    if (got >= 8 && std::memcmp(magic, png_sig, 8) == 0) return read_png_file(f.get(), path);
    if (got >= 2 && magic[0] == 0xff && magic[1] == 0xd8) return read_jpeg_file(f.get(), path);
    throw Error("'" + path + "' is not a PNG or JPEG image");
}

void write_png(const std::string& path, const Tensor& img) {
    check_shape(img.shape.rank == 3 && (img.shape.d[0] == 3 || img.shape.d[0] == 1),
                "write_png expects 3×H×W or 1×H×W, got " + img.shape.str());
    const int c = img.shape.d[0], h = img.shape.d[1], w = img.shape.d[2];
    const size_t plane = static_cast<size_t>(h) * w;
    std::vector<uint8_t> bytes(plane * static_cast<size_t>(c));
    for (int ch = 0; ch < c; ++ch) {
        for (size_t i = 0; i < plane; ++i) {
            const float v = std::round(img.data[ch * plane + i] * 255.0f);
            bytes[i * c + ch] = static_cast<uint8_t>(std::clamp(v, 0.0f, 255.0f));
        }
    }
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw Error("cannot open '" + path + "' for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error("png init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error("png init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("cannot write PNG '" + path + "'");
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 c == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(static_cast<size_t>(h));
    for (int y = 0; y < h; ++y) rows[y] = bytes.data() + static_cast<size_t>(y) * w * c;
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Tensor resize_bilinear(const Tensor& img, int out_h, int out_w) {
    check_shape(img.shape.rank == 3, "resize expects C×H×W, got " + img.shape.str());
    check_shape(out_h >= 1 && out_w >= 1, "resize target must be positive");
    const int c = img.shape.d[0], h = img.shape.d[1], w = img.shape.d[2];
    Tensor out(Shape::chw(c, out_h, out_w));
    const float sy = static_cast<float>(h) / static_cast<float>(out_h);
    const float sx = static_cast<float>(w) / static_cast<float>(out_w);
    for (int ch = 0; ch < c; ++ch) {
        const float* src = img.data.data() + static_cast<size_t>(ch) * h * w;
        float* dst = out.data.data() + static_cast<size_t>(ch) * out_h * out_w;
        for (int y = 0; y < out_h; ++y) {
            const float fy = std::max((y + 0.5f) * sy - 0.5f, 0.0f);
            const int y0 = std::min(static_cast<int>(fy), h - 1);
            const int y1 = std::min(y0 + 1, h - 1);
            const float wy = fy - static_cast<float>(y0);
            for (int x = 0; x < out_w; ++x) {
                const float fx = std::max((x + 0.5f) * sx - 0.5f, 0.0f);
                const int x0 = std::min(static_cast<int>(fx), w - 1);
                const int x1 = std::min(x0 + 1, w - 1);
                const float wx = fx - static_cast<float>(x0);
                const float a = src[static_cast<size_t>(y0) * w + x0];
                const float b = src[static_cast<size_t>(y0) * w + x1];
                const float cc = src[static_cast<size_t>(y1) * w + x0];
                const float d = src[static_cast<size_t>(y1) * w + x1];
                dst[static_cast<size_t>(y) * out_w + x] =
                    (1 - wy) * ((1 - wx) * a + wx * b) + wy * ((1 - wx) * cc + wx * d);
            }
        }
    }
    return out;
}

Tensor center_crop(const Tensor& img, int h, int w) {
    check_shape(img.shape.rank == 3 && img.shape.d[1] >= h && img.shape.d[2] >= w,
                "center_crop target larger than image");
    const int c = img.shape.d[0], ih = img.shape.d[1], iw = img.shape.d[2];
    const int y0 = (ih - h) / 2, x0 = (iw - w) / 2;
    Tensor out(Shape::chw(c, h, w));
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            std::memcpy(out.data.data() + (static_cast<size_t>(ch) * h + y) * w,
                        img.data.data() +
                            (static_cast<size_t>(ch) * ih + y0 + y) * iw + x0,
                        sizeof(float) * static_cast<size_t>(w));
    return out;
}

Tensor resize_cover(const Tensor& img, int size) {
    const int h = img.shape.d[1], w = img.shape.d[2];
    int rh, rw;
    if (h < w) {
        rh = size;
        rw = std::max(size, static_cast<int>(std::lround(
                                static_cast<double>(w) * size / h)));
    } else {
        rw = size;
        rh = std::max(size, static_cast<int>(std::lround(
                                static_cast<double>(h) * size / w)));
    }
    return center_crop(resize_bilinear(img, rh, rw), size, size);
}

Tensor pad_reflect_to_multiple(const Tensor& img, int multiple) {
    check_shape(img.shape.rank == 3, "pad expects C×H×W, got " + img.shape.str());
    const int c = img.shape.d[0], h = img.shape.d[1], w = img.shape.d[2];
    const int th = (h + multiple - 1) / multiple * multiple;
    const int tw = (w + multiple - 1) / multiple * multiple;
    if (th - h > h - 1 || tw - w > w - 1)
        throw Error("image " + std::to_string(h) + "×" + std::to_string(w) +
                    " too small to pad to a multiple of " + std::to_string(multiple) +
                    "; each side must be at least " + std::to_string(multiple / 2 + 1));
    if (th == h && tw == w) return img;
    Tensor out(Shape::chw(c, th, tw));
    for (int ch = 0; ch < c; ++ch) {
        const float* src = img.data.data() + static_cast<size_t>(ch) * h * w;
        float* dst = out.data.data() + static_cast<size_t>(ch) * th * tw;
        for (int y = 0; y < th; ++y) {
            const int sy = y < h ? y : 2 * h - 2 - y;
            for (int x = 0; x < tw; ++x) {
                const int sx = x < w ? x : 2 * w - 2 - x;
                dst[static_cast<size_t>(y) * tw + x] = src[static_cast<size_t>(sy) * w + sx];
            }
        }
    }
    return out;
}

Tensor crop_top_left(const Tensor& img, int h, int w) {
    check_shape(img.shape.rank == 3 && img.shape.d[1] >= h && img.shape.d[2] >= w,
                "crop target larger than image");
    if (img.shape.d[1] == h && img.shape.d[2] == w) return img;
    const int c = img.shape.d[0], ih = img.shape.d[1], iw = img.shape.d[2];
    Tensor out(Shape::chw(c, h, w));
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            std::memcpy(out.data.data() + (static_cast<size_t>(ch) * h + y) * w,
                        img.data.data() + (static_cast<size_t>(ch) * ih + y) * iw,
                        sizeof(float) * static_cast<size_t>(w));
    return out;
}

} // namespace rseed
