// tagflow - command line front end for phantom generation, HARP, registration and evaluation.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "tagflow/harp.hpp"
#include "tagflow/metrics.hpp"
#include "tagflow/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

template <typename T> std::optional<T> if_set(const CLI::Option *opt, const T &value) {
    return opt->count() > 0 ? std::optional<T>(value) : std::nullopt;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"tagflow: incompressible registration of tagged MRI volumes"};
    app.set_version_flag("--version", std::string(tagflow::tool_version()));
    app.require_subcommand(1);
    app.fallthrough();

    tagflow::CommandOptions opts;
    std::uint64_t seed = 0;
    app.add_option("--threads", opts.threads, "Worker threads (default: TAGFLOW_THREADS, else 1)")
        ->check(CLI::PositiveNumber);
    const CLI::Option *seed_opt = app.add_option("--seed", seed, "Override the random seed");
    app.add_flag("--f64", opts.f64, "Write VVOL payloads as f64");

    std::optional<fs::path> config;
    fs::path out;

    CLI::App *phantom = app.add_subcommand("phantom", "Generate a synthetic tagged phantom pair");
    std::string phantom_config;
    const CLI::Option *phantom_config_opt =
        phantom->add_option("--config", phantom_config, "Phantom config JSON")->check(CLI::ExistingFile);
    phantom->add_option("--out", out, "Output directory")->required();

    CLI::App *harp = app.add_subcommand("harp", "HARP-filter one tagged volume");
    fs::path harp_in;
    std::string harp_dir;
    double wavelength = 0.0;
    std::string label;
    double target_spacing = 1.0;
    double phase_floor = tagflow::kHarpPhaseFloor;
    harp->add_option("--in", harp_in, "Tagged VVOL")->required()->check(CLI::ExistingFile);
    harp->add_option("--dir", harp_dir, "Tag direction")->required()->check(CLI::IsMember({"x", "y", "z"}));
    harp->add_option("--wavelength", wavelength, "Tag wavelength in voxels")->required();
    harp->add_option("--out", out, "Output directory")->required();
    const CLI::Option *label_opt = harp->add_option("--label", label, "Output name suffix (default av/sh/sv)");
    const CLI::Option *spacing_opt =
        harp->add_option("--target-spacing", target_spacing, "Resample to isotropic spacing first");
    harp->add_option("--phase-floor", phase_floor, "Zero the phase below this normalized magnitude")
        ->capture_default_str();

    CLI::App *reg = app.add_subcommand("register", "Register a fixed/moving HARP trio");
    fs::path fixed_dir;
    fs::path moving_dir;
    std::string reg_config;
    reg->add_option("--fixed-dir", fixed_dir, "Fixed HARP directory")->required()->check(CLI::ExistingDirectory);
    reg->add_option("--moving-dir", moving_dir, "Moving HARP directory")->required()->check(CLI::ExistingDirectory);
    const CLI::Option *reg_config_opt =
        reg->add_option("--config", reg_config, "Registration config JSON")->check(CLI::ExistingFile);
    reg->add_option("--out", out, "Output directory")->required();

    CLI::App *eval = app.add_subcommand("evaluate", "Compute metrics for a registration result");
    fs::path result_dir;
    fs::path truth_dir;
    int n_bins = tagflow::kDefaultDetAucBins;
    eval->add_option("--result-dir", result_dir, "Registration output directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    const CLI::Option *truth_opt =
        eval->add_option("--truth-dir", truth_dir, "Phantom directory with ground truth")->check(CLI::ExistingDirectory);
    eval->add_option("--out", out, "Report JSON path")->required();
    eval->add_option("--n-bins", n_bins, "Det_AUC histogram bins")->capture_default_str();

    CLI::App *pipe = app.add_subcommand("pipeline", "Run phantom, HARP, registration and evaluation");
    fs::path pipe_config;
    pipe->add_option("--config", pipe_config, "Pipeline config JSON")->required()->check(CLI::ExistingFile);
    const CLI::Option *pipe_out_opt = pipe->add_option("--out", out, "Override the config's output_dir");

    CLI::App *slices = app.add_subcommand("export-slices", "Write PGM slices of a VVOL volume");
    fs::path slice_in;
    std::string axis;
    std::vector<std::size_t> indices;
    std::vector<double> window;
    std::size_t channel = 0;
    slices->add_option("--in", slice_in, "VVOL file")->required()->check(CLI::ExistingFile);
    slices->add_option("--axis", axis, "Slice axis")->required()->check(CLI::IsMember({"x", "y", "z"}));
    slices->add_option("--indices", indices, "Slice indices")->required()->delimiter(',');
    slices->add_option("--out", out, "Output directory")->required();
    const CLI::Option *window_opt = slices->add_option("--window", window, "Gray window: lo hi")->expected(2);
    slices->add_option("--channel", channel, "Component of a multi-channel volume")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        std::cerr << tagflow::error_json("cli", std::invalid_argument(e.what())) << std::endl;
        return 1;
    }
    opts.seed = if_set(seed_opt, seed);

    if (phantom->parsed()) {
        if (phantom_config_opt->count() > 0) {
            config = phantom_config;
        }
        return tagflow::cmd_phantom(config, out, opts);
    }
    if (harp->parsed()) {
        return tagflow::cmd_harp(harp_in, harp_dir.front(), wavelength, out, if_set(label_opt, label),
                                 if_set(spacing_opt, target_spacing), phase_floor, opts);
    }
    if (reg->parsed()) {
        if (reg_config_opt->count() > 0) {
            config = reg_config;
        }
        return tagflow::cmd_register(fixed_dir, moving_dir, config, out, opts);
    }
    if (eval->parsed()) {
        return tagflow::cmd_evaluate(result_dir, if_set(truth_opt, truth_dir), out, n_bins, opts);
    }
    if (pipe->parsed()) {
        return tagflow::cmd_pipeline(pipe_config, if_set(pipe_out_opt, out), opts);
    }
    std::optional<tagflow::SliceWindow> win;
    if (window_opt->count() > 0) {
        win = tagflow::SliceWindow{window[0], window[1]};
    }
    return tagflow::cmd_export_slices(slice_in, axis.front(), indices, out, win, channel, opts);
}
