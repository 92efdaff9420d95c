#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "afif4/error.hpp"

namespace afif4 {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

struct Rect {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    bool contains(const Point& p) const {
        return p.x >= x && p.x <= x + w && p.y >= y && p.y <= y + h;
    }
};

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

// Planar image of real-valued pixels in [0,1]. Layout is one full
// row-major plane per channel, so plane c of a WxH image starts at
// index c*W*H.
struct ImageBuffer {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<double> pixels;

    ImageBuffer() = default;
    ImageBuffer(int w, int h, int c, double fill = 0.0)
        : width(w), height(h), channels(c),
          pixels(static_cast<std::size_t>(w) * h * c, fill) {
        if (w <= 0 || h <= 0 || (c != 1 && c != 3))
            throw Error("ImageBuffer: invalid dimensions " + std::to_string(w) + "x" +
                        std::to_string(h) + "x" + std::to_string(c));
    }

    double& at(int x, int y, int c) {
        return pixels[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    double at(int x, int y, int c) const {
        return pixels[(static_cast<std::size_t>(c) * height + y) * width + x];
    }

    // Replicate-border access.
    double at_clamped(int x, int y, int c) const {
        x = std::clamp(x, 0, width - 1);
        y = std::clamp(y, 0, height - 1);
        return at(x, y, c);
    }

    std::size_t plane_size() const { return static_cast<std::size_t>(width) * height; }
    bool same_shape(const ImageBuffer& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
    Rect bounds() const {
        return Rect{0.0, 0.0, static_cast<double>(width), static_cast<double>(height)};
    }
};

namespace detail {

inline int pnm_next_token(std::istream& in, std::string& tok) {
    tok.clear();
    int ch = in.get();
    while (ch != EOF) {
        if (ch == '#') {  // comment to end of line
            while (ch != EOF && ch != '\n') ch = in.get();
        } else if (std::isspace(ch)) {
            ch = in.get();
        } else {
            break;
        }
    }
    while (ch != EOF && !std::isspace(ch)) {
        tok.push_back(static_cast<char>(ch));
        ch = in.get();
    }
    return tok.empty() ? EOF : 0;
}

inline int pnm_int(std::istream& in, const std::string& path, const char* what) {
    std::string tok;
    if (pnm_next_token(in, tok) == EOF)
        throw Error(path + ": truncated header (missing " + std::string(what) + ")");
    try {
        std::size_t used = 0;
        int v = std::stoi(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw Error(path + ": bad " + std::string(what) + " '" + tok + "'");
    }
}

}  // namespace detail

// Reads a PGM/PPM file (P2/P3 ascii or P5/P6 binary, 8-bit). Gray maps
// to one channel, color to three; values are scaled to [0,1].
inline ImageBuffer load_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open image file: " + path);

    std::string magic;
    if (detail::pnm_next_token(in, magic) == EOF) throw Error(path + ": empty file");
    int channels;
    bool binary;
    if (magic == "P2") { channels = 1; binary = false; }
    else if (magic == "P3") { channels = 3; binary = false; }
    else if (magic == "P5") { channels = 1; binary = true; }
    else if (magic == "P6") { channels = 3; binary = true; }
    else throw Error(path + ": unsupported image format '" + magic + "' (PGM/PPM expected)");

    const int w = detail::pnm_int(in, path, "width");
    const int h = detail::pnm_int(in, path, "height");
    const int maxval = detail::pnm_int(in, path, "maxval");
    if (w <= 0 || h <= 0) throw Error(path + ": zero-dimension image");
    if (maxval <= 0 || maxval > 255) throw Error(path + ": unsupported maxval " + std::to_string(maxval));

    ImageBuffer img(w, h, channels);
    const std::size_t n = img.plane_size() * channels;
    if (binary) {
        // single whitespace byte separates the header from raster data;
        // pnm_int already consumed it as the terminator of the maxval token
        std::vector<unsigned char> raw(n);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in.gcount()) != n) throw Error(path + ": truncated raster data");
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t px = i / channels, c = i % channels;
            img.pixels[c * img.plane_size() + px] = static_cast<double>(raw[i]) / maxval;
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const int v = detail::pnm_int(in, path, "pixel value");
            if (v < 0 || v > maxval) throw Error(path + ": pixel value out of range");
            const std::size_t px = i / channels, c = i % channels;
            img.pixels[c * img.plane_size() + px] = static_cast<double>(v) / maxval;
        }
    }
    return img;
}

// Writes P5 (1 channel) or P6 (3 channels), 8-bit.
inline void save_image(const ImageBuffer& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write image file: " + path);
    out << (img.channels == 1 ? "P5" : "P6") << "\n"
        << img.width << " " << img.height << "\n255\n";
    const std::size_t n = img.plane_size() * img.channels;
    std::vector<unsigned char> raw(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t px = i / img.channels, c = i % img.channels;
        const double v = clamp01(img.pixels[c * img.plane_size() + px]);
        raw[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(n));
    if (!out) throw Error("short write: " + path);
}

// out(x,y) = in(width-1-x, y) on every channel.
inline ImageBuffer horizontal_flip(const ImageBuffer& img) {
    ImageBuffer out(img.width, img.height, img.channels);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                out.at(x, y, c) = img.at(img.width - 1 - x, y, c);
    return out;
}

// Bilinear resample of the rect region of img into an out_w x out_h
// buffer. Sample positions outside the image clamp to the border, so
// rects may lean over the edge. Output pixel (i,j) samples the source
// at rect.x + (i+0.5)*rect.w/out_w - 0.5 (identity when rect spans the
// whole image at native size).
inline ImageBuffer crop_resize(const ImageBuffer& img, const Rect& rect, int out_w, int out_h) {
    if (out_w <= 0 || out_h <= 0)
        throw Error("crop_resize: output dimensions must be positive");
    if (rect.w <= 0.0 || rect.h <= 0.0 ||
        rect.x >= img.width || rect.y >= img.height ||
        rect.x + rect.w <= 0.0 || rect.y + rect.h <= 0.0)
        throw Error("crop_resize: rect does not intersect the image");

    ImageBuffer out(out_w, out_h, img.channels);
    const double sx_scale = rect.w / out_w;
    const double sy_scale = rect.h / out_h;
    for (int j = 0; j < out_h; ++j) {
        const double sy = rect.y + (j + 0.5) * sy_scale - 0.5;
        const int y0 = static_cast<int>(std::floor(sy));
        const double fy = sy - y0;
        for (int i = 0; i < out_w; ++i) {
            const double sx = rect.x + (i + 0.5) * sx_scale - 0.5;
            const int x0 = static_cast<int>(std::floor(sx));
            const double fx = sx - x0;
            for (int c = 0; c < img.channels; ++c) {
                const double v00 = img.at_clamped(x0, y0, c);
                const double v10 = img.at_clamped(x0 + 1, y0, c);
                const double v01 = img.at_clamped(x0, y0 + 1, c);
                const double v11 = img.at_clamped(x0 + 1, y0 + 1, c);
                const double v = (1 - fy) * ((1 - fx) * v00 + fx * v10) +
                                 fy * ((1 - fx) * v01 + fx * v11);
                out.at(i, j, c) = clamp01(v);
            }
        }
    }
    return out;
}

// Arithmetic mean of every pixel, one value per channel.
inline std::vector<double> mean_intensity(const ImageBuffer& img) {
    std::vector<double> mean(img.channels, 0.0);
    for (int c = 0; c < img.channels; ++c) {
        double sum = 0.0;
        const double* plane = img.pixels.data() + c * img.plane_size();
        for (std::size_t i = 0; i < img.plane_size(); ++i) sum += plane[i];
        mean[c] = sum / static_cast<double>(img.plane_size());
    }
    return mean;
}

}  // namespace afif4
