// slices.hpp - Grayscale PGM export of volume slices.
//
// Gray level g = round(255 * clamp((v - lo) / (hi - lo), 0, 1)). The default
// window is the volume's [min, max]; a constant volume v gets [v - 0.5, v + 0.5],
// so it maps to mid-gray 128. Image orientation per axis:
//   z: rows = y, cols = x      x: rows = z, cols = y      y: rows = z, cols = x

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "tagflow/volume.hpp"

namespace tagflow {

enum class SliceAxis { X, Y, Z };

SliceAxis parse_slice_axis(char c); // 'x', 'y' or 'z'; throws std::invalid_argument
char slice_axis_name(SliceAxis axis);

struct SliceWindow {
    double lo = 0.0;
    double hi = 1.0;
};

SliceWindow default_window(const ScalarVolume &vol);

struct GrayImage {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> pixels; // row-major
};

// Throws std::out_of_range if index is outside the volume along axis.
GrayImage extract_slice(const ScalarVolume &vol, SliceAxis axis, std::size_t index, const SliceWindow &window);

void write_pgm(const std::filesystem::path &path, const GrayImage &image);
GrayImage read_pgm(const std::filesystem::path &path);

struct SliceExport {
    std::vector<std::filesystem::path> images;
    std::filesystem::path sidecar;
    SliceWindow window;
};

// Writes <stem>_<axis><index>.pgm for each index plus <stem>_slices.json holding
// the window and mapping. channel selects a component of multi-channel volumes.
// All indices are checked before anything is written.
SliceExport export_slices(const std::filesystem::path &vvol, SliceAxis axis, const std::vector<std::size_t> &indices,
                          const std::filesystem::path &out_dir, std::optional<SliceWindow> window = std::nullopt,
                          std::size_t channel = 0);

} // namespace tagflow
