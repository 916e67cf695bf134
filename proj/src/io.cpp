#include <stbn/io.h>

#include <stbn/error.h>

#include <png.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

namespace stbn {

void write_pfm(const std::filesystem::path &path, const Image2D &img) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
    f << "Pf\n" << img.width << ' ' << img.height << "\n-1.0\n";
    for (int y = img.height - 1; y >= 0; --y)
        for (int x = 0; x < img.width; ++x) {
            const uint32_t bits = std::bit_cast<uint32_t>(float(img.at(x, y)));
            const char b[4] = {char(bits & 0xff), char((bits >> 8) & 0xff), char((bits >> 16) & 0xff),
                               char((bits >> 24) & 0xff)};
            f.write(b, 4);
        }
    if (!f) throw IoError("failed writing '" + path.string() + "'");
}

Image2D read_pfm(const std::filesystem::path &path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path.string() + "'");
    std::string magic;
    int w = 0, h = 0;
    double scale = 0.0;
    if (!(f >> magic >> w >> h >> scale) || magic != "Pf" || w <= 0 || h <= 0 || scale == 0.0)
        throw IoError("'" + path.string() + "' is not a single-channel PFM");
    f.get();
    const bool little = scale < 0.0;
    Image2D img(w, h);
    for (int y = h - 1; y >= 0; --y)
        for (int x = 0; x < w; ++x) {
            unsigned char b[4];
            if (!f.read(reinterpret_cast<char *>(b), 4)) throw IoError("'" + path.string() + "' is truncated");
            const uint32_t bits = little ? (uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 |
                                            uint32_t(b[3]) << 24)
                                         : (uint32_t(b[3]) | uint32_t(b[2]) << 8 | uint32_t(b[1]) << 16 |
                                            uint32_t(b[0]) << 24);
            img.at(x, y) = double(std::bit_cast<float>(bits));
        }
    return img;
}

namespace {

std::filesystem::path stack_path(const std::filesystem::path &prefix, int t) {
    char suffix[32];
    std::snprintf(suffix, sizeof(suffix), "_%03d.pfm", t);
    return prefix.string() + suffix;
}

}  // namespace

std::vector<std::filesystem::path> write_pfm_stack(const std::filesystem::path &prefix, const FrameSequence &seq) {
    std::vector<std::filesystem::path> paths;
    for (int t = 0; t < seq.dims().t; ++t) {
        paths.push_back(stack_path(prefix, t));
        write_pfm(paths.back(), xy_slice(seq, t));
    }
    return paths;
}

FrameSequence read_pfm_stack(const std::filesystem::path &prefix) {
    std::vector<Image2D> frames;
    while (std::filesystem::exists(stack_path(prefix, int(frames.size()))))
        frames.push_back(read_pfm(stack_path(prefix, int(frames.size()))));
    if (frames.empty()) throw IoError("no PFM frames found at '" + stack_path(prefix, 0).string() + "'");
    FrameSequence seq(Dims3{frames[0].width, frames[0].height, int(frames.size())});
    for (int t = 0; t < seq.dims().t; ++t) {
        const Image2D &img = frames[std::size_t(t)];
        if (img.width != seq.dims().x || img.height != seq.dims().y)
            throw IoError("PFM frame " + std::to_string(t) + " has a different size");
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) seq.at(x, y, t) = img.at(x, y);
    }
    return seq;
}

void write_spectrum_png(const std::filesystem::path &path, const SpectrumImage &spec) {
    const double mean = spec.values.empty() ? 0.0 : spec.total() / double(spec.values.size());
    std::vector<double> v(spec.values.size(), 0.0);
    double peak = 0.0;
    if (mean > 0.0)
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = std::log1p(spec.values[i] / mean);
            peak = std::max(peak, v[i]);
        }
    std::vector<png_byte> pixels(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) pixels[i] = png_byte(peak > 0.0 ? std::lround(255.0 * v[i] / peak) : 0);

    std::unique_ptr<FILE, int (*)(FILE *)> fp(std::fopen(path.string().c_str(), "wb"), &std::fclose);
    if (!fp) throw IoError("cannot open '" + path.string() + "' for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng failed writing '" + path.string() + "'");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, png_uint_32(spec.width), png_uint_32(spec.height), 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < spec.height; ++y) png_write_row(png, pixels.data() + std::size_t(y) * std::size_t(spec.width));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace stbn
