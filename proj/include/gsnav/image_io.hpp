#pragma once

// Binary PNM dumps: P6 pixmaps for color, 16-bit P5 graymaps holding
// millimeter-quantized depth.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gsnav::imgio {

inline void write_ppm(const std::string& path, int width, int height,
                      const std::vector<double>& rgb) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << "P6\n" << width << " " << height << "\n255\n";
    std::vector<unsigned char> row(static_cast<size_t>(width) * 3);
    for (int v = 0; v < height; ++v) {
        for (int u = 0; u < width; ++u)
            for (int c = 0; c < 3; ++c) {
                const double x = rgb[3 * (static_cast<size_t>(v) * width + u) + c];
                row[3 * u + c] = static_cast<unsigned char>(
                    std::clamp(x, 0.0, 1.0) * 255.0 + 0.5);
            }
        os.write(reinterpret_cast<const char*>(row.data()), row.size());
    }
}

// depth in meters -> millimeters, clamped to the 16-bit range; 0 stays the
// no-hit sentinel. Stored big-endian per the PNM convention.
inline void write_depth_pgm(const std::string& path, int width, int height,
                            const std::vector<double>& depth) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << "P5\n" << width << " " << height << "\n65535\n";
    std::vector<unsigned char> row(static_cast<size_t>(width) * 2);
    for (int v = 0; v < height; ++v) {
        for (int u = 0; u < width; ++u) {
            const double m = depth[static_cast<size_t>(v) * width + u];
            const auto mm = static_cast<std::uint16_t>(
                std::clamp(m * 1000.0 + 0.5, 0.0, 65535.0));
            row[2 * u] = static_cast<unsigned char>(mm >> 8);
            row[2 * u + 1] = static_cast<unsigned char>(mm & 0xff);
        }
        os.write(reinterpret_cast<const char*>(row.data()), row.size());
    }
}

// scalar field -> 8-bit graymap scaled by its max (debug dumps)
inline void write_scaled_pgm(const std::string& path, int width, int height,
                             const std::vector<double>& values) {
    double vmax = 0;
    for (double v : values) vmax = std::max(vmax, v);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << "P5\n" << width << " " << height << "\n255\n";
    for (int v = 0; v < height; ++v)
        for (int u = 0; u < width; ++u) {
            const double x = values[static_cast<size_t>(v) * width + u];
            const auto b = static_cast<unsigned char>(
                vmax > 0 ? std::clamp(x / vmax, 0.0, 1.0) * 255.0 + 0.5 : 0.0);
            os.put(static_cast<char>(b));
        }
}

namespace detail {

inline void skip_pnm_space(std::istream& is) {
    while (true) {
        const int c = is.peek();
        if (c == '#') {
            std::string line;
            std::getline(is, line);
        } else if (std::isspace(c)) {
            is.get();
        } else {
            break;
        }
    }
}

inline int read_pnm_int(std::istream& is) {
    skip_pnm_space(is);
    int v = 0;
    is >> v;
    return v;
}

}  // namespace detail

struct LoadedRgb {
    int width = 0, height = 0;
    std::vector<double> rgb;
};

inline LoadedRgb read_ppm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + path);
    std::string magic;
    is >> magic;
    if (magic != "P6") throw std::runtime_error(path + ": not a P6 pixmap");
    LoadedRgb img;
    img.width = detail::read_pnm_int(is);
    img.height = detail::read_pnm_int(is);
    const int maxval = detail::read_pnm_int(is);
    is.get();  // single whitespace after the header
    if (maxval != 255) throw std::runtime_error(path + ": unsupported maxval");
    std::vector<unsigned char> raw(static_cast<size_t>(img.width) * img.height * 3);
    is.read(reinterpret_cast<char*>(raw.data()), raw.size());
    if (!is) throw std::runtime_error(path + ": truncated pixel data");
    img.rgb.resize(raw.size());
    for (size_t i = 0; i < raw.size(); ++i) img.rgb[i] = raw[i] / 255.0;
    return img;
}

struct LoadedDepth {
    int width = 0, height = 0;
    std::vector<double> depth;  // meters
};

inline LoadedDepth read_depth_pgm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + path);
    std::string magic;
    is >> magic;
    if (magic != "P5") throw std::runtime_error(path + ": not a P5 graymap");
    LoadedDepth img;
    img.width = detail::read_pnm_int(is);
    img.height = detail::read_pnm_int(is);
    const int maxval = detail::read_pnm_int(is);
    is.get();
    if (maxval != 65535) throw std::runtime_error(path + ": expected 16-bit depth graymap");
    std::vector<unsigned char> raw(static_cast<size_t>(img.width) * img.height * 2);
    is.read(reinterpret_cast<char*>(raw.data()), raw.size());
    if (!is) throw std::runtime_error(path + ": truncated pixel data");
    img.depth.resize(static_cast<size_t>(img.width) * img.height);
    for (size_t i = 0; i < img.depth.size(); ++i) {
        const std::uint16_t mm = static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
        img.depth[i] = mm / 1000.0;
    }
    return img;
}

}  // namespace gsnav::imgio
