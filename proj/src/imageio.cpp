#include "sat/imageio.hpp"

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>

#include <jpeglib.h>
#include <png.h>

namespace sat::io {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

bool has_suffix(const std::string& s, const std::string& suffix) {
    if (s.size() < suffix.size()) return false;
    std::string tail = s.substr(s.size() - suffix.size());
    for (auto& c : tail) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return tail == suffix;
}

ImageU8 read_jpeg(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw std::runtime_error("cannot open " + path);
    jpeg_decompress_struct cinfo{};
    jpeg_error_mgr jerr{};
    cinfo.err = jpeg_std_error(&jerr);
    jerr.error_exit = [](j_common_ptr info) {
        char msg[JMSG_LENGTH_MAX];
        (*info->err->format_message)(info, msg);
        throw std::runtime_error(std::string("jpeg: ") + msg);
    };
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, f.get());
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    ImageU8 img(3, static_cast<int>(cinfo.output_height), static_cast<int>(cinfo.output_width));
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = img.data.data() + static_cast<size_t>(cinfo.output_scanline) * img.width * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return img;
}

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    FilePtr file;

    explicit PngReader(const std::string& path) : file(std::fopen(path.c_str(), "rb")) {
        if (!file) throw std::runtime_error("cannot open " + path);
        unsigned char sig[8];
        if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8))
            throw std::runtime_error("not a png file: " + path);
        png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        info = png_create_info_struct(png);
        if (!png || !info) throw std::runtime_error("png init failed");
        png_init_io(png, file.get());
        png_set_sig_bytes(png, 8);
    }
    ~PngReader() { png_destroy_read_struct(&png, &info, nullptr); }
};

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    FilePtr file;

    explicit PngWriter(const std::string& path) : file(std::fopen(path.c_str(), "wb")) {
        if (!file) throw std::runtime_error("cannot open for writing: " + path);
        png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        info = png_create_info_struct(png);
        if (!png || !info) throw std::runtime_error("png init failed");
        png_init_io(png, file.get());
        png_set_compression_level(png, 6);
    }
    ~PngWriter() { png_destroy_write_struct(&png, &info); }
};

ImageU8 read_png_rgb(const std::string& path) {
    PngReader r(path);
    if (setjmp(png_jmpbuf(r.png))) throw std::runtime_error("png read failed: " + path);
    png_read_info(r.png, r.info);
    png_set_palette_to_rgb(r.png);
    png_set_expand_gray_1_2_4_to_8(r.png);
    if (png_get_valid(r.png, r.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(r.png);
    png_set_strip_16(r.png);
    png_set_strip_alpha(r.png);
    png_set_gray_to_rgb(r.png);
    png_read_update_info(r.png, r.info);
    const int h = static_cast<int>(png_get_image_height(r.png, r.info));
    const int w = static_cast<int>(png_get_image_width(r.png, r.info));
    if (png_get_channels(r.png, r.info) != 3) throw std::runtime_error("unexpected png channels: " + path);
    ImageU8 img(3, h, w);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y) rows[y] = img.data.data() + static_cast<size_t>(y) * w * 3;
    png_read_image(r.png, rows.data());
    png_read_end(r.png, nullptr);
    return img;
}

} // namespace

ImageU8 read_image_rgb(const std::string& path) {
    if (has_suffix(path, ".jpg") || has_suffix(path, ".jpeg")) return read_jpeg(path);
    if (has_suffix(path, ".png")) return read_png_rgb(path);
    throw std::runtime_error("unsupported image format: " + path);
}

void write_png_rgb(const std::string& path, const ImageU8& img) {
    if (img.channels != 3) throw std::invalid_argument("write_png_rgb: 3 channels required");
    PngWriter wtr(path);
    if (setjmp(png_jmpbuf(wtr.png))) throw std::runtime_error("png write failed: " + path);
    png_set_IHDR(wtr.png, wtr.info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(wtr.png, wtr.info);
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y)
        rows[y] = const_cast<png_bytep>(img.data.data() + static_cast<size_t>(y) * img.width * 3);
    png_write_image(wtr.png, rows.data());
    png_write_end(wtr.png, nullptr);
}

std::array<uint8_t, 3> palette_color(int id) {
    std::array<uint8_t, 3> c{0, 0, 0};
    int v = id;
    for (int shift = 7; shift >= 0 && v; --shift) {
        c[0] = static_cast<uint8_t>(c[0] | ((v & 1) << shift));
        c[1] = static_cast<uint8_t>(c[1] | (((v >> 1) & 1) << shift));
        c[2] = static_cast<uint8_t>(c[2] | (((v >> 2) & 1) << shift));
        v >>= 3;
    }
    return c;
}

LabelMap read_indexed_png(const std::string& path) {
    PngReader r(path);
    if (setjmp(png_jmpbuf(r.png))) throw std::runtime_error("png read failed: " + path);
    png_read_info(r.png, r.info);
    const int color_type = png_get_color_type(r.png, r.info);
    if (color_type != PNG_COLOR_TYPE_PALETTE && color_type != PNG_COLOR_TYPE_GRAY)
        throw std::runtime_error("annotation must be palette- or gray-indexed: " + path);
    png_set_strip_16(r.png);
    png_set_packing(r.png); // one byte per index regardless of bit depth
    png_read_update_info(r.png, r.info);
    LabelMap out;
    out.height = static_cast<int>(png_get_image_height(r.png, r.info));
    out.width = static_cast<int>(png_get_image_width(r.png, r.info));
    if (png_get_channels(r.png, r.info) != 1) throw std::runtime_error("unexpected annotation channels: " + path);
    out.ids.resize(static_cast<size_t>(out.height) * out.width);
    std::vector<png_bytep> rows(out.height);
    for (int y = 0; y < out.height; ++y) rows[y] = out.ids.data() + static_cast<size_t>(y) * out.width;
    png_read_image(r.png, rows.data());
    png_read_end(r.png, nullptr);
    return out;
}

void write_indexed_png(const std::string& path, const LabelMap& labels) {
    PngWriter wtr(path);
    if (setjmp(png_jmpbuf(wtr.png))) throw std::runtime_error("png write failed: " + path);
    png_set_IHDR(wtr.png, wtr.info, labels.width, labels.height, 8, PNG_COLOR_TYPE_PALETTE,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    std::vector<png_color> palette(256);
    for (int i = 0; i < 256; ++i) {
        const auto c = palette_color(i);
        palette[i] = {c[0], c[1], c[2]};
    }
    png_set_PLTE(wtr.png, wtr.info, palette.data(), 256);
    png_write_info(wtr.png, wtr.info);
    std::vector<png_bytep> rows(labels.height);
    for (int y = 0; y < labels.height; ++y)
        rows[y] = const_cast<png_bytep>(labels.ids.data() + static_cast<size_t>(y) * labels.width);
    png_write_image(wtr.png, rows.data());
    png_write_end(wtr.png, nullptr);
}

} // namespace sat::io
