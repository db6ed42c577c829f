// slices.cpp - Grayscale PGM export of volume slices.

#include "tagflow/slices.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "tagflow/vvol.hpp"

namespace tagflow {

namespace fs = std::filesystem;

namespace {

std::uint8_t to_gray(double v, const SliceWindow &w) {
    const double t = std::clamp((v - w.lo) / (w.hi - w.lo), 0.0, 1.0);
    return static_cast<std::uint8_t>(std::lround(255.0 * t));
}

std::size_t axis_extent(const Geometry &g, SliceAxis axis) {
    switch (axis) {
    case SliceAxis::X:
        return g.dims[0];
    case SliceAxis::Y:
        return g.dims[1];
    case SliceAxis::Z:
        return g.dims[2];
    }
    return 0;
}

ScalarVolume select_channel(const VvolData &data, std::size_t channel) {
    if (channel >= data.channels) {
        throw std::out_of_range("export_slices: channel " + std::to_string(channel) + " out of range (volume has " +
                                std::to_string(data.channels) + ")");
    }
    ScalarVolume out(data.geometry);
    for (std::size_t n = 0; n < out.size(); ++n) {
        out[n] = data.values[n * data.channels + channel];
    }
    return out;
}

} // namespace

SliceAxis parse_slice_axis(char c) {
    switch (c) {
    case 'x':
        return SliceAxis::X;
    case 'y':
        return SliceAxis::Y;
    case 'z':
        return SliceAxis::Z;
    default:
        throw std::invalid_argument(std::string("slice axis must be x, y or z, got '") + c + "'");
    }
}

char slice_axis_name(SliceAxis axis) {
    switch (axis) {
    case SliceAxis::X:
        return 'x';
    case SliceAxis::Y:
        return 'y';
    case SliceAxis::Z:
        return 'z';
    }
    return '?';
}

SliceWindow default_window(const ScalarVolume &vol) {
    const auto [lo, hi] = std::minmax_element(vol.values().begin(), vol.values().end());
    if (lo == vol.values().end()) {
        return {};
    }
    if (*hi > *lo) {
        return {*lo, *hi};
    }
    return {*lo - 0.5, *lo + 0.5};
}

GrayImage extract_slice(const ScalarVolume &vol, SliceAxis axis, std::size_t index, const SliceWindow &window) {
    const Geometry &g = vol.geometry();
    if (index >= axis_extent(g, axis)) {
        throw std::out_of_range("slice index " + std::to_string(index) + " out of range along " +
                                slice_axis_name(axis) + " (size " + std::to_string(axis_extent(g, axis)) + ")");
    }
    if (!(window.hi > window.lo)) {
        throw std::invalid_argument("slice window must have hi > lo");
    }
    GrayImage img;
    switch (axis) {
    case SliceAxis::Z:
        img.rows = g.dims[1];
        img.cols = g.dims[0];
        break;
    case SliceAxis::X:
        img.rows = g.dims[2];
        img.cols = g.dims[1];
        break;
    case SliceAxis::Y:
        img.rows = g.dims[2];
        img.cols = g.dims[0];
        break;
    }
    img.pixels.resize(img.rows * img.cols);
    for (std::size_t r = 0; r < img.rows; ++r) {
        for (std::size_t c = 0; c < img.cols; ++c) {
            double v = 0.0;
            switch (axis) {
            case SliceAxis::Z:
                v = vol(c, r, index);
                break;
            case SliceAxis::X:
                v = vol(index, c, r);
                break;
            case SliceAxis::Y:
                v = vol(c, index, r);
                break;
            }
            img.pixels[r * img.cols + c] = to_gray(v, window);
        }
    }
    return img;
}

void write_pgm(const fs::path &path, const GrayImage &image) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << "P5\n" << image.cols << " " << image.rows << "\n255\n";
    out.write(reinterpret_cast<const char *>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
    if (!out) {
        throw std::runtime_error("short write to " + path.string());
    }
}

GrayImage read_pgm(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot read " + path.string());
    }
    std::string magic;
    GrayImage img;
    int maxval = 0;
    in >> magic >> img.cols >> img.rows >> maxval;
    if (magic != "P5" || maxval != 255) {
        throw std::runtime_error(path.string() + " is not an 8-bit binary PGM");
    }
    in.get();
    img.pixels.resize(img.rows * img.cols);
    in.read(reinterpret_cast<char *>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (!in) {
        throw std::runtime_error("truncated PGM " + path.string());
    }
    return img;
}

SliceExport export_slices(const fs::path &vvol, SliceAxis axis, const std::vector<std::size_t> &indices,
                          const fs::path &out_dir, std::optional<SliceWindow> window, std::size_t channel) {
    const ScalarVolume vol = select_channel(read_vvol(vvol), channel);
    const std::size_t extent = axis_extent(vol.geometry(), axis);
    for (std::size_t idx : indices) {
        if (idx >= extent) {
            throw std::out_of_range("slice index " + std::to_string(idx) + " out of range along " +
                                    slice_axis_name(axis) + " (size " + std::to_string(extent) + ")");
        }
    }

    SliceExport result;
    result.window = window.value_or(default_window(vol));
    fs::create_directories(out_dir);
    const std::string stem = vvol.stem().string();
    nlohmann::json files = nlohmann::json::array();
    for (std::size_t idx : indices) {
        const fs::path p = out_dir / (stem + "_" + slice_axis_name(axis) + std::to_string(idx) + ".pgm");
        write_pgm(p, extract_slice(vol, axis, idx, result.window));
        result.images.push_back(p);
        files.push_back(p.filename().string());
    }

    nlohmann::json side;
    side["source"] = vvol.filename().string();
    side["channel"] = channel;
    side["axis"] = std::string(1, slice_axis_name(axis));
    side["indices"] = indices;
    side["window"] = {{"lo", result.window.lo}, {"hi", result.window.hi}};
    side["mapping"] = "gray = round(255 * clamp((v - lo) / (hi - lo), 0, 1))";
    side["files"] = files;
    result.sidecar = out_dir / (stem + "_slices.json");
    std::ofstream out(result.sidecar);
    if (!out) {
        throw std::runtime_error("cannot write " + result.sidecar.string());
    }
    out << side.dump(2) << "\n";
    return result;
}

} // namespace tagflow
