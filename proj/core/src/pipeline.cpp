// pipeline.cpp - The tagflow commands and their on-disk artifacts.

#include "tagflow/pipeline.hpp"

#include <openssl/evp.h>

#include <array>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "tagflow/config.hpp"
#include "tagflow/errors.hpp"
#include "tagflow/grid.hpp"
#include "tagflow/parallel.hpp"
#include "tagflow/phantom.hpp"

#ifndef TAGFLOW_VERSION
#define TAGFLOW_VERSION "0.0.0"
#endif

namespace tagflow {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

constexpr std::array<std::string_view, 3> kLabels{"av", "sh", "sv"};

std::ostream &err_stream(const CommandOptions &opts) { return opts.err != nullptr ? *opts.err : std::cerr; }

VvolDtype dtype_of(const CommandOptions &opts) { return opts.f64 ? VvolDtype::F64 : VvolDtype::F32; }

std::string read_text(const fs::path &p) {
    std::ifstream in(p);
    if (!in) {
        throw std::runtime_error("cannot read " + p.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path &p, const std::string &text) {
    std::ofstream out(p);
    if (!out) {
        throw std::runtime_error("cannot write " + p.string());
    }
    out << text;
    if (!out) {
        throw std::runtime_error("short write to " + p.string());
    }
}

std::string utc_timestamp() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::array<char, 32> buf{};
    std::strftime(buf.data(), buf.size(), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf.data();
}

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt_double(double v) {
    std::array<char, 32> buf{};
    std::snprintf(buf.data(), buf.size(), "%.17g", v);
    return buf.data();
}

// Files and their hashes, recorded relative to base.
json inventory(const fs::path &base, const std::vector<fs::path> &files) {
    json out = json::array();
    for (const fs::path &f : files) {
        out.push_back({{"path", fs::relative(f, base).generic_string()},
                       {"bytes", fs::file_size(f)},
                       {"sha256", sha256_file(f)}});
    }
    return out;
}

// Headers plus their payloads.
void add_vvol(std::vector<fs::path> &files, const fs::path &header) {
    files.push_back(header);
    files.push_back(vvol_payload_path(header));
}

template <typename F> int run_command(std::string_view stage, const CommandOptions &opts, F &&body) {
    try {
        set_thread_count(opts.threads);
        body();
        return 0;
    } catch (const std::exception &e) {
        err_stream(opts) << error_json(stage, e) << std::endl;
        return 1;
    }
}

Vec3 axis_direction(char dir) {
    switch (dir) {
    case 'x':
        return {1.0, 0.0, 0.0};
    case 'y':
        return {0.0, 1.0, 0.0};
    case 'z':
        return {0.0, 0.0, 1.0};
    default:
        throw ConfigError("dir", std::string("must be x, y or z, got '") + dir + "'");
    }
}

std::string default_label(char dir) {
    switch (dir) {
    case 'x':
        return "av";
    case 'y':
        return "sh";
    default:
        return "sv";
    }
}

void write_harp_image(const fs::path &dir, const std::string &label, const HarpImage &h, VvolDtype dtype,
                      std::vector<fs::path> &files) {
    const SinCosPair sc = sincos_transform(h.phase);
    const std::array<std::pair<std::string, const ScalarVolume *>, 4> outputs{
        {{"magnitude", &h.magnitude}, {"phase", &h.phase}, {"sin", &sc.sin}, {"cos", &sc.cos}}};
    for (const auto &[name, vol] : outputs) {
        const fs::path p = dir / (name + "_" + label + ".vvol");
        write_vvol(p, *vol, dtype);
        add_vvol(files, p);
    }
}

struct PhantomFiles {
    std::vector<fs::path> files;
};

PhantomFiles write_phantom(const fs::path &dir, const PhantomPair &pair, VvolDtype dtype) {
    fs::create_directories(dir);
    PhantomFiles out;
    for (std::size_t o = 0; o < 3; ++o) {
        const std::string label(kLabels[o]);
        write_vvol(dir / ("fixed_" + label + ".vvol"), pair.fixed[o], dtype);
        add_vvol(out.files, dir / ("fixed_" + label + ".vvol"));
        write_vvol(dir / ("moving_" + label + ".vvol"), pair.moving[o], dtype);
        add_vvol(out.files, dir / ("moving_" + label + ".vvol"));
    }
    write_vvol(dir / "truth_velocity.vvol", pair.truth_velocity, dtype);
    add_vvol(out.files, dir / "truth_velocity.vvol");
    write_vvol(dir / "truth_displacement.vvol", pair.truth_displacement, dtype);
    add_vvol(out.files, dir / "truth_displacement.vvol");
    write_vvol(dir / "tissue_mask.vvol", pair.tissue_mask, dtype);
    add_vvol(out.files, dir / "tissue_mask.vvol");
    return out;
}

struct RegistrationFiles {
    std::vector<fs::path> files;
};

RegistrationFiles write_registration(const fs::path &dir, const RegistrationResult &r, const ScalarVolume &i_mag,
                                     VvolDtype dtype) {
    fs::create_directories(dir);
    RegistrationFiles out;
    write_vvol(dir / "velocity.vvol", r.velocity, dtype);
    add_vvol(out.files, dir / "velocity.vvol");
    write_vvol(dir / "displacement.vvol", r.displacement, dtype);
    add_vvol(out.files, dir / "displacement.vvol");
    write_vvol(dir / "determinant.vvol", jacobian_determinant(r.displacement), dtype);
    add_vvol(out.files, dir / "determinant.vvol");
    write_vvol(dir / "i_mag.vvol", i_mag, dtype);
    add_vvol(out.files, dir / "i_mag.vvol");
    write_text(dir / "loss_history.csv", loss_history_csv_text(r.loss_history));
    out.files.push_back(dir / "loss_history.csv");
    return out;
}

json loss_json(const LossBreakdown &b) {
    return {{"sim", b.sim}, {"smooth", b.smooth}, {"incompress", b.incompress}, {"total", b.total}};
}

json result_summary(const RegistrationResult &r) {
    return {{"iterations_run", r.iterations_run},
            {"best_iteration", r.best_iteration},
            {"initial_loss", loss_json(r.loss_history.front())},
            {"best_loss", loss_json(r.loss_history.at(static_cast<std::size_t>(r.best_iteration)))}};
}

// Writes the report and its histogram CSV (<stem>_histogram.csv beside it).
std::vector<fs::path> write_report(const fs::path &out, const MetricsReport &report) {
    if (out.has_parent_path()) {
        fs::create_directories(out.parent_path());
    }
    write_text(out, report_json_text(report));
    const fs::path csv = out.parent_path() / (out.stem().string() + "_histogram.csv");
    write_text(csv, histogram_csv_text(report.histogram));
    return {out, csv};
}

// Resamples a displacement field given in input-voxel units onto the isotropic
// grid and converts it to output-voxel units.
VectorField resample_displacement(const VectorField &u, double target_spacing) {
    std::array<ScalarVolume, 3> comps;
    for (std::size_t c = 0; c < 3; ++c) {
        comps[c] = resample_isotropic(u.component(c), target_spacing);
        const double scale = u.geometry().spacing[c] / target_spacing;
        for (double &v : comps[c].values()) {
            v *= scale;
        }
    }
    VectorField out(comps[0].geometry());
    for (std::size_t n = 0; n < out.size(); ++n) {
        out[n] = {comps[0][n], comps[1][n], comps[2][n]};
    }
    return out;
}

bool needs_resample(const Geometry &g, double target_spacing) {
    for (double s : g.spacing) {
        if (s != target_spacing) {
            return true;
        }
    }
    return false;
}

// Metrics of a registration directory, optionally against a phantom directory.
// Truth volumes on a different lattice are resampled onto the result's spacing.
MetricsReport evaluate_result(const fs::path &result_dir, const std::optional<fs::path> &truth_dir, int n_bins) {
    const json result = json::parse(read_text(result_dir / "result.json"));
    const SinCosTrio fixed = load_sincos_trio(result_dir / result.at("fixed_dir").get<std::string>());
    const SinCosTrio moving = load_sincos_trio(result_dir / result.at("moving_dir").get<std::string>());
    const ScalarVolume i_mag = read_scalar_vvol(result_dir / "i_mag.vvol");
    const VectorField disp = read_vector_vvol(result_dir / "displacement.vvol");
    std::optional<VectorField> truth;
    std::optional<ScalarVolume> mask;
    if (truth_dir) {
        truth = read_vector_vvol(*truth_dir / "truth_displacement.vvol");
        mask = read_scalar_vvol(*truth_dir / "tissue_mask.vvol");
        const double spacing = disp.geometry().spacing[0];
        if (!(truth->geometry() == disp.geometry()) && needs_resample(truth->geometry(), spacing)) {
            truth = resample_displacement(*truth, spacing);
            mask = resample_isotropic(*mask, spacing);
        }
    }
    return evaluate_registration(fixed, moving, i_mag, disp, n_bins, truth ? &*truth : nullptr,
                                 mask ? &*mask : nullptr);
}

} // namespace

std::string_view tool_version() { return TAGFLOW_VERSION; }

std::string sha256_file(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot read " + path.string());
    }
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256: digest initialization failed");
    }
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        const std::streamsize got = in.gcount();
        if (got > 0 && EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(got)) != 1) {
            throw std::runtime_error("sha256: digest update failed");
        }
    }
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1) {
        throw std::runtime_error("sha256: digest finalization failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string hex;
    for (unsigned int i = 0; i < len; ++i) {
        hex.push_back(kHex[md[i] >> 4]);
        hex.push_back(kHex[md[i] & 0xf]);
    }
    return hex;
}

std::string error_json(std::string_view stage, const std::exception &e) {
    json j;
    j["status"] = "error";
    j["stage"] = std::string(stage);
    if (const auto *c = dynamic_cast<const ConfigError *>(&e)) {
        j["kind"] = "config";
        j["field"] = c->field();
    } else if (const auto *n = dynamic_cast<const NonFiniteLoss *>(&e)) {
        j["kind"] = "non_finite_loss";
        j["field"] = n->term();
        j["iteration"] = n->iteration();
    } else if (dynamic_cast<const GeometryMismatch *>(&e) != nullptr) {
        j["kind"] = "geometry";
    } else if (dynamic_cast<const std::out_of_range *>(&e) != nullptr) {
        j["kind"] = "out_of_range";
    } else if (dynamic_cast<const std::invalid_argument *>(&e) != nullptr) {
        j["kind"] = "invalid_argument";
    } else {
        j["kind"] = "runtime";
    }
    j["message"] = e.what();
    return j.dump();
}

std::string report_json_text(const MetricsReport &report) {
    json j;
    j["rmse_global"] = report.rmse_global;
    j["rmse_masked"] = report.rmse_masked;
    j["det_auc"] = report.det_auc;
    j["negdet_percent"] = report.negdet_percent;
    if (report.endpoint) {
        j["endpoint_error"] = {{"mean", report.endpoint->mean}, {"median", report.endpoint->median}};
    } else {
        j["endpoint_error"] = nullptr;
    }
    j["histogram"] = {{"n_bins", report.histogram.counts.size()},
                      {"error_clip", 1.0},
                      {"edges", report.histogram.edges},
                      {"counts", report.histogram.counts},
                      {"cdf", report.histogram.cdf}};
    return j.dump(2) + "\n";
}

std::string histogram_csv_text(const DetHistogram &h) {
    std::string out = "bin,lo,hi,weight,cdf\n";
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
        out += std::to_string(b) + "," + fmt_double(h.edges[b]) + "," + fmt_double(h.edges[b + 1]) + "," +
               fmt_double(h.counts[b]) + "," + fmt_double(h.cdf[b]) + "\n";
    }
    return out;
}

std::string loss_history_csv_text(const std::vector<LossBreakdown> &history) {
    std::string out = "iter,sim,smooth,incompress,total\n";
    for (std::size_t i = 0; i < history.size(); ++i) {
        const LossBreakdown &b = history[i];
        out += std::to_string(i) + "," + fmt_double(b.sim) + "," + fmt_double(b.smooth) + "," +
               fmt_double(b.incompress) + "," + fmt_double(b.total) + "\n";
    }
    return out;
}

SinCosTrio load_sincos_trio(const fs::path &dir) {
    SinCosTrio t;
    for (std::size_t o = 0; o < 3; ++o) {
        const std::string label(kLabels[o]);
        t.pairs[o].sin = read_scalar_vvol(dir / ("sin_" + label + ".vvol"));
        t.pairs[o].cos = read_scalar_vvol(dir / ("cos_" + label + ".vvol"));
    }
    t.validate();
    return t;
}

ScalarVolume load_combined_magnitude(const fs::path &dir) {
    std::array<ScalarVolume, 3> m;
    for (std::size_t o = 0; o < 3; ++o) {
        m[o] = read_scalar_vvol(dir / ("magnitude_" + std::string(kLabels[o]) + ".vvol"));
    }
    return combine_magnitude(m[0], m[1], m[2]);
}

int cmd_phantom(const std::optional<fs::path> &config, const fs::path &out_dir, const CommandOptions &opts) {
    return run_command("phantom", opts, [&] {
        const auto start = Clock::now();
        const std::string started = utc_timestamp();
        PhantomConfig cfg = config ? parse_phantom_config(read_text(*config)) : PhantomConfig{};
        if (opts.seed) {
            cfg.seed = *opts.seed;
        }
        const PhantomPair pair = make_phantom_pair(cfg);
        PhantomFiles files = write_phantom(out_dir, pair, dtype_of(opts));

        json m;
        m["tool"] = "tagflow";
        m["version"] = std::string(tool_version());
        m["command"] = "phantom";
        m["seed"] = cfg.seed;
        m["config"] = json::parse(to_json_text(cfg));
        m["inputs"] = config ? inventory(config->parent_path().empty() ? "." : config->parent_path(), {*config})
                             : json::array();
        m["outputs"] = inventory(out_dir, files.files);
        m["started_at"] = started;
        m["finished_at"] = utc_timestamp();
        m["wall_time_seconds"] = seconds_since(start);
        write_text(out_dir / "manifest.json", m.dump(2) + "\n");
    });
}

int cmd_harp(const fs::path &in, char dir, double wavelength, const fs::path &out_dir,
             const std::optional<std::string> &label, std::optional<double> target_spacing, double phase_floor,
             const CommandOptions &opts) {
    return run_command("harp", opts, [&] {
        const auto start = Clock::now();
        const std::string started = utc_timestamp();
        const Vec3 direction = axis_direction(dir);
        if (!(wavelength >= 3.0)) {
            throw ConfigError("wavelength", "must be >= 3 voxels");
        }
        if (!(phase_floor >= 0.0 && phase_floor < 1.0)) {
            throw ConfigError("phase_floor", "must lie in [0, 1)");
        }
        const std::string name = label.value_or(default_label(dir));
        if (name.empty() || name.find_first_of("/\\") != std::string::npos) {
            throw ConfigError("label", "must be a non-empty file-name fragment");
        }
        ScalarVolume vol = read_scalar_vvol(in);
        if (target_spacing) {
            vol = resample_isotropic(vol, *target_spacing);
        }
        const HarpImage h = harp_filter(vol, direction, wavelength, phase_floor);
        fs::create_directories(out_dir);
        std::vector<fs::path> files;
        write_harp_image(out_dir, name, h, dtype_of(opts), files);

        json m;
        m["tool"] = "tagflow";
        m["version"] = std::string(tool_version());
        m["command"] = "harp";
        m["parameters"] = {{"dir", std::string(1, dir)},
                           {"wavelength", wavelength},
                           {"label", name},
                           {"phase_floor", phase_floor},
                           {"target_spacing", target_spacing ? json(*target_spacing) : json(nullptr)}};
        m["inputs"] = json::array({{{"path", fs::absolute(in).lexically_normal().generic_string()},
                                    {"sha256", sha256_file(in)}}});
        m["outputs"] = inventory(out_dir, files);
        m["started_at"] = started;
        m["finished_at"] = utc_timestamp();
        m["wall_time_seconds"] = seconds_since(start);
        write_text(out_dir / ("manifest_harp_" + name + ".json"), m.dump(2) + "\n");
    });
}

int cmd_register(const fs::path &fixed_dir, const fs::path &moving_dir, const std::optional<fs::path> &config,
                 const fs::path &out_dir, const CommandOptions &opts) {
    return run_command("register", opts, [&] {
        const auto start = Clock::now();
        const std::string started = utc_timestamp();
        const RegistrationConfig cfg = config ? parse_registration_config(read_text(*config)) : RegistrationConfig{};
        const SinCosTrio fixed = load_sincos_trio(fixed_dir);
        const SinCosTrio moving = load_sincos_trio(moving_dir);
        const ScalarVolume i_mag = load_combined_magnitude(fixed_dir);
        const RegistrationResult r = register_pair(fixed, moving, i_mag, cfg);
        RegistrationFiles files = write_registration(out_dir, r, i_mag, dtype_of(opts));

        json m;
        m["tool"] = "tagflow";
        m["version"] = std::string(tool_version());
        m["command"] = "register";
        m["config"] = json::parse(to_json_text(cfg));
        m["fixed_dir"] = fs::relative(fixed_dir, out_dir).generic_string();
        m["moving_dir"] = fs::relative(moving_dir, out_dir).generic_string();
        m["result"] = result_summary(r);
        m["outputs"] = inventory(out_dir, files.files);
        m["started_at"] = started;
        m["finished_at"] = utc_timestamp();
        m["wall_time_seconds"] = seconds_since(start);
        m["optimizer_wall_time_seconds"] = r.wall_time_seconds;
        write_text(out_dir / "result.json", m.dump(2) + "\n");
    });
}

int cmd_evaluate(const fs::path &result_dir, const std::optional<fs::path> &truth_dir, const fs::path &out,
                 int n_bins, const CommandOptions &opts) {
    return run_command("evaluate", opts, [&] {
        if (n_bins < 2) {
            throw ConfigError("n_bins", "must be >= 2");
        }
        const MetricsReport report = evaluate_result(result_dir, truth_dir, n_bins);
        write_report(out, report);
    });
}

int cmd_pipeline(const fs::path &config, const std::optional<fs::path> &out_dir, const CommandOptions &opts) {
    return run_command("pipeline", opts, [&] {
        const auto start = Clock::now();
        const std::string started = utc_timestamp();
        PipelineConfig cfg = parse_pipeline_config(read_text(config));
        if (opts.seed) {
            cfg.seed = *opts.seed;
            cfg.phantom.seed = *opts.seed;
        }
        if (out_dir) {
            cfg.output_dir = out_dir->string();
        }
        const fs::path root = cfg.output_dir;
        const VvolDtype dtype = dtype_of(opts);
        fs::create_directories(root);
        std::vector<fs::path> files;
        json stage_times;

        auto t = Clock::now();
        const fs::path phantom_dir = root / "phantom";
        const PhantomFiles pf = write_phantom(phantom_dir, make_phantom_pair(cfg.phantom), dtype);
        files.insert(files.end(), pf.files.begin(), pf.files.end());
        stage_times["phantom"] = seconds_since(t);

        t = Clock::now();
        const bool resample = needs_resample(cfg.phantom.geometry, cfg.harp.target_spacing);
        const fs::path fixed_dir = root / "harp" / "fixed";
        const fs::path moving_dir = root / "harp" / "moving";
        fs::create_directories(fixed_dir);
        fs::create_directories(moving_dir);
        for (std::size_t o = 0; o < 3; ++o) {
            const std::string label(kLabels[o]);
            for (const auto &[side, dir] : {std::pair{"fixed_", fixed_dir}, std::pair{"moving_", moving_dir}}) {
                ScalarVolume vol = read_scalar_vvol(phantom_dir / (side + label + ".vvol"));
                if (resample) {
                    vol = resample_isotropic(vol, cfg.harp.target_spacing);
                }
                write_harp_image(dir, label,
                                 harp_filter(vol, cfg.harp.directions[o], cfg.harp.wavelength, cfg.harp.phase_floor),
                                 dtype, files);
            }
        }
        stage_times["harp"] = seconds_since(t);

        t = Clock::now();
        const fs::path reg_dir = root / "registration";
        const RegistrationResult r = register_pair(load_sincos_trio(fixed_dir), load_sincos_trio(moving_dir),
                                                   load_combined_magnitude(fixed_dir), cfg.registration);
        RegistrationFiles rf = write_registration(reg_dir, r, load_combined_magnitude(fixed_dir), dtype);
        files.insert(files.end(), rf.files.begin(), rf.files.end());
        json result;
        result["tool"] = "tagflow";
        result["version"] = std::string(tool_version());
        result["command"] = "pipeline";
        result["config"] = json::parse(to_json_text(cfg.registration));
        result["fixed_dir"] = "../harp/fixed";
        result["moving_dir"] = "../harp/moving";
        result["result"] = result_summary(r);
        result["optimizer_wall_time_seconds"] = r.wall_time_seconds;
        write_text(reg_dir / "result.json", result.dump(2) + "\n");
        files.push_back(reg_dir / "result.json");
        stage_times["register"] = seconds_since(t);

        t = Clock::now();
        for (const fs::path &p : write_report(root / "report.json", evaluate_result(reg_dir, phantom_dir, cfg.evaluation.n_bins))) {
            files.push_back(p);
        }
        stage_times["evaluate"] = seconds_since(t);

        json m;
        m["tool"] = "tagflow";
        m["version"] = std::string(tool_version());
        m["command"] = "pipeline";
        m["seed"] = cfg.seed;
        m["config"] = json::parse(to_json_text(cfg));
        m["inputs"] = json::array({{{"path", fs::absolute(config).lexically_normal().generic_string()},
                                    {"sha256", sha256_file(config)}}});
        m["outputs"] = inventory(root, files);
        m["started_at"] = started;
        m["finished_at"] = utc_timestamp();
        m["stage_wall_time_seconds"] = stage_times;
        m["wall_time_seconds"] = seconds_since(start);
        write_text(root / "manifest.json", m.dump(2) + "\n");
    });
}

int cmd_export_slices(const fs::path &vvol, char axis, const std::vector<std::size_t> &indices,
                      const fs::path &out_dir, std::optional<SliceWindow> window, std::size_t channel,
                      const CommandOptions &opts) {
    return run_command("export-slices", opts, [&] {
        if (indices.empty()) {
            throw ConfigError("indices", "at least one slice index is required");
        }
        if (window && !(window->hi > window->lo)) {
            throw ConfigError("window", "hi must exceed lo");
        }
        export_slices(vvol, parse_slice_axis(axis), indices, out_dir, window, channel);
    });
}

} // namespace tagflow
