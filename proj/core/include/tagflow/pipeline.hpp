// pipeline.hpp - The tagflow commands: phantom, harp, register, evaluate, pipeline, export-slices.
//
// Each cmd_* returns a process exit code. On failure it writes one line of JSON
// to opts.err ({"status":"error","stage":...,"kind":...,"field":...,"message":...})
// and returns 1; "field" is present for configuration errors.

#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tagflow/harp.hpp"
#include "tagflow/metrics.hpp"
#include "tagflow/optim.hpp"
#include "tagflow/slices.hpp"
#include "tagflow/vvol.hpp"

namespace tagflow {

std::string_view tool_version();

struct CommandOptions {
    unsigned threads = 0; // 0: TAGFLOW_THREADS, else 1
    std::optional<std::uint64_t> seed;
    bool f64 = false; // f64 VVOL payloads
    std::ostream *err = nullptr; // defaults to std::cerr
};

int cmd_phantom(const std::optional<std::filesystem::path> &config, const std::filesystem::path &out_dir,
                const CommandOptions &opts);

// dir is 'x', 'y' or 'z'; label defaults to av/sh/sv for x/y/z and suffixes every
// output name (sin_<label>.vvol, ...). target_spacing resamples first when set.
int cmd_harp(const std::filesystem::path &in, char dir, double wavelength, const std::filesystem::path &out_dir,
             const std::optional<std::string> &label, std::optional<double> target_spacing, double phase_floor,
             const CommandOptions &opts);

int cmd_register(const std::filesystem::path &fixed_dir, const std::filesystem::path &moving_dir,
                 const std::optional<std::filesystem::path> &config, const std::filesystem::path &out_dir,
                 const CommandOptions &opts);

int cmd_evaluate(const std::filesystem::path &result_dir, const std::optional<std::filesystem::path> &truth_dir,
                 const std::filesystem::path &out, int n_bins, const CommandOptions &opts);

// out_dir overrides the config's output_dir when set.
int cmd_pipeline(const std::filesystem::path &config, const std::optional<std::filesystem::path> &out_dir,
                 const CommandOptions &opts);

int cmd_export_slices(const std::filesystem::path &vvol, char axis, const std::vector<std::size_t> &indices,
                      const std::filesystem::path &out_dir, std::optional<SliceWindow> window, std::size_t channel,
                      const CommandOptions &opts);

// Building blocks shared with the tests.

// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path &path);

std::string error_json(std::string_view stage, const std::exception &e);

// Deterministic report (no timings or paths) and its histogram CSV
// (bin, lo, hi, weight, cdf).
std::string report_json_text(const MetricsReport &report);
std::string histogram_csv_text(const DetHistogram &histogram);

// Columns iter, sim, smooth, incompress, total.
std::string loss_history_csv_text(const std::vector<LossBreakdown> &history);

// Reads sin_/cos_<label>.vvol for av, sh, sv from dir.
SinCosTrio load_sincos_trio(const std::filesystem::path &dir);

// Mean of magnitude_<label>.vvol for av, sh, sv.
ScalarVolume load_combined_magnitude(const std::filesystem::path &dir);

} // namespace tagflow
