// config.hpp - JSON configuration for the phantom, registration and pipeline commands.
//
// Every parser rejects unknown keys and reports failures as ConfigError with the
// dotted path of the offending field ("registration.learning_rate").

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "tagflow/harp.hpp"
#include "tagflow/metrics.hpp"
#include "tagflow/optim.hpp"
#include "tagflow/phantom.hpp"

namespace tagflow {

struct HarpSettings {
    double wavelength = 6.0;
    std::array<Vec3, 3> directions{Vec3{1.0, 0.0, 0.0}, Vec3{0.0, 1.0, 0.0}, Vec3{0.0, 0.0, 1.0}};
    double target_spacing = 1.0; // mm
    double phase_floor = kHarpPhaseFloor;

    void validate() const;
};

struct EvaluationSettings {
    int n_bins = kDefaultDetAucBins;

    void validate() const;
};

struct PipelineConfig {
    PhantomConfig phantom;
    HarpSettings harp;
    RegistrationConfig registration;
    EvaluationSettings evaluation;
    std::string output_dir = "tagflow_out";
    std::uint64_t seed = 42;

    void validate() const;
};

// A missing "harp" wavelength or directions entry inherits the phantom's value.
PipelineConfig parse_pipeline_config(std::string_view json_text);

// Phantom configs may carry an optional top-level "seed".
PhantomConfig parse_phantom_config(std::string_view json_text);

RegistrationConfig parse_registration_config(std::string_view json_text);

// Canonical JSON (two-space indent, keys sorted) of the full effective configuration.
std::string to_json_text(const PipelineConfig &config);
std::string to_json_text(const PhantomConfig &config);
std::string to_json_text(const RegistrationConfig &config);

std::string_view penalty_name(IncompressPenalty p); // "log", "l1", "l2"

} // namespace tagflow
