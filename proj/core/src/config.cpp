// config.cpp - Strict JSON configuration parsing.

#include "tagflow/config.hpp"

#include <cmath>
#include <set>
#include <string>

#include "json.hpp"

#include "tagflow/errors.hpp"

namespace tagflow {

namespace {

using nlohmann::json;

std::string join(const std::string &prefix, const std::string &key) {
    return prefix.empty() ? key : prefix + "." + key;
}

// Rethrows a module-level ConfigError with its field qualified by prefix.
template <typename F> void qualified(const std::string &prefix, F &&f) {
    try {
        f();
    } catch (const ConfigError &e) {
        const std::string msg = e.what();
        const std::string tail = msg.substr(std::min(msg.size(), e.field().size() + 2));
        throw ConfigError(join(prefix, e.field()), tail);
    }
}

class ObjectReader {
  public:
    ObjectReader(const json &j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
        if (!j_.is_object()) {
            throw ConfigError(prefix_.empty() ? "<root>" : prefix_, "expected a JSON object");
        }
    }

    bool has(const std::string &key) const { return j_.contains(key); }

    const json *find(const std::string &key) {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void number(const std::string &key, double &out) {
        if (const json *v = find(key)) {
            if (!v->is_number()) {
                throw ConfigError(field(key), "expected a number");
            }
            out = v->get<double>();
        }
    }

    template <typename Int> void integer(const std::string &key, Int &out) {
        if (const json *v = find(key)) {
            if (!v->is_number_integer() && !v->is_number_unsigned()) {
                throw ConfigError(field(key), "expected an integer");
            }
            if constexpr (std::is_unsigned_v<Int>) {
                if (v->is_number_integer() && v->get<std::int64_t>() < 0) {
                    throw ConfigError(field(key), "must be >= 0");
                }
                out = v->get<Int>();
            } else {
                out = static_cast<Int>(v->get<std::int64_t>());
            }
        }
    }

    void boolean(const std::string &key, bool &out) {
        if (const json *v = find(key)) {
            if (!v->is_boolean()) {
                throw ConfigError(field(key), "expected true or false");
            }
            out = v->get<bool>();
        }
    }

    void string(const std::string &key, std::string &out) {
        if (const json *v = find(key)) {
            if (!v->is_string()) {
                throw ConfigError(field(key), "expected a string");
            }
            out = v->get<std::string>();
        }
    }

    template <typename T, std::size_t N> void array(const std::string &key, std::array<T, N> &out) {
        if (const json *v = find(key)) {
            if (!v->is_array() || v->size() != N) {
                throw ConfigError(field(key), "expected an array of " + std::to_string(N) + " numbers");
            }
            for (std::size_t i = 0; i < N; ++i) {
                const json &e = (*v)[i];
                if constexpr (std::is_integral_v<T>) {
                    if (!e.is_number_unsigned()) {
                        throw ConfigError(field(key), "expected non-negative integers");
                    }
                } else if (!e.is_number()) {
                    throw ConfigError(field(key), "expected numbers");
                }
                out[i] = e.get<T>();
            }
        }
    }

    void directions(const std::string &key, std::array<Vec3, 3> &out) {
        if (const json *v = find(key)) {
            if (!v->is_array() || v->size() != 3) {
                throw ConfigError(field(key), "expected three 3-vectors");
            }
            for (std::size_t o = 0; o < 3; ++o) {
                const json &d = (*v)[o];
                if (!d.is_array() || d.size() != 3 || !d[0].is_number() || !d[1].is_number() || !d[2].is_number()) {
                    throw ConfigError(field(key), "expected three 3-vectors");
                }
                out[o] = {d[0].get<double>(), d[1].get<double>(), d[2].get<double>()};
            }
        }
    }

    const json *object(const std::string &key) {
        const json *v = find(key);
        if (v != nullptr && !v->is_object()) {
            throw ConfigError(field(key), "expected a JSON object");
        }
        return v;
    }

    void finish() const {
        for (const auto &item : j_.items()) {
            if (!seen_.contains(item.key())) {
                throw ConfigError(field(item.key()), "unknown key");
            }
        }
    }

    std::string field(const std::string &key) const { return join(prefix_, key); }

  private:
    const json &j_;
    std::string prefix_;
    std::set<std::string> seen_;
};

json parse_text(std::string_view text) {
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error &e) {
        throw ConfigError("<root>", std::string("malformed JSON: ") + e.what());
    }
}

IncompressPenalty parse_penalty(const std::string &name, const std::string &field) {
    if (name == "log") {
        return IncompressPenalty::LogDeterminant;
    }
    if (name == "l1") {
        return IncompressPenalty::L1;
    }
    if (name == "l2") {
        return IncompressPenalty::L2;
    }
    throw ConfigError(field, "expected one of \"log\", \"l1\", \"l2\"");
}

void read_phantom(ObjectReader &r, PhantomConfig &c) {
    r.array("dims", c.geometry.dims);
    r.array("spacing", c.geometry.spacing);
    r.number("tag_wavelength", c.tag_wavelength);
    if (const json *t = r.object("tissue")) {
        ObjectReader tr(*t, r.field("tissue"));
        tr.array("center", c.tissue.center);
        tr.array("semi_axes", c.tissue.semi_axes);
        tr.finish();
    }
    r.number("velocity_amplitude", c.velocity_amplitude);
    r.integer("velocity_bandlimit", c.velocity_bandlimit);
    r.number("fading_factor", c.fading_factor);
    r.number("noise_sigma", c.noise_sigma);
    r.integer("n_steps", c.n_steps);
    r.directions("tag_directions", c.tag_directions);
}

void read_registration(ObjectReader &r, RegistrationConfig &c) {
    r.number("lambda_smooth", c.weights.lambda_smooth);
    r.number("beta_incompress", c.weights.beta_incompress);
    r.number("epsilon", c.weights.epsilon);
    std::string penalty = std::string(penalty_name(c.weights.penalty));
    r.string("penalty", penalty);
    c.weights.penalty = parse_penalty(penalty, r.field("penalty"));
    r.integer("n_steps", c.n_steps);
    r.number("learning_rate", c.learning_rate);
    r.integer("max_iters", c.max_iters);
    r.number("adam_beta1", c.adam_beta1);
    r.number("adam_beta2", c.adam_beta2);
    r.number("adam_eps", c.adam_eps);
    std::string init = "zero";
    r.string("init", init);
    if (init != "zero") {
        throw ConfigError(r.field("init"), "only \"zero\" is supported");
    }
    r.boolean("coarse_to_fine", c.coarse_to_fine);
    r.number("stop_tol", c.stop_tol);
    r.integer("stop_window", c.stop_window);
}

json vec_json(const Vec3 &v) { return json::array({v[0], v[1], v[2]}); }

json directions_json(const std::array<Vec3, 3> &d) {
    return json::array({vec_json(d[0]), vec_json(d[1]), vec_json(d[2])});
}

json phantom_json(const PhantomConfig &c) {
    json j;
    j["dims"] = c.geometry.dims;
    j["spacing"] = c.geometry.spacing;
    j["tag_wavelength"] = c.tag_wavelength;
    j["tissue"] = {{"center", c.tissue.center}, {"semi_axes", c.tissue.semi_axes}};
    j["velocity_amplitude"] = c.velocity_amplitude;
    j["velocity_bandlimit"] = c.velocity_bandlimit;
    j["fading_factor"] = c.fading_factor;
    j["noise_sigma"] = c.noise_sigma;
    j["n_steps"] = c.n_steps;
    j["tag_directions"] = directions_json(c.tag_directions);
    return j;
}

json registration_json(const RegistrationConfig &c) {
    json j;
    j["lambda_smooth"] = c.weights.lambda_smooth;
    j["beta_incompress"] = c.weights.beta_incompress;
    j["epsilon"] = c.weights.epsilon;
    j["penalty"] = std::string(penalty_name(c.weights.penalty));
    j["n_steps"] = c.n_steps;
    j["learning_rate"] = c.learning_rate;
    j["max_iters"] = c.max_iters;
    j["adam_beta1"] = c.adam_beta1;
    j["adam_beta2"] = c.adam_beta2;
    j["adam_eps"] = c.adam_eps;
    j["init"] = "zero";
    j["coarse_to_fine"] = c.coarse_to_fine;
    j["stop_tol"] = c.stop_tol;
    j["stop_window"] = c.stop_window;
    return j;
}

} // namespace

std::string_view penalty_name(IncompressPenalty p) {
    switch (p) {
    case IncompressPenalty::LogDeterminant:
        return "log";
    case IncompressPenalty::L1:
        return "l1";
    case IncompressPenalty::L2:
        return "l2";
    }
    return "log";
}

void HarpSettings::validate() const {
    if (!(wavelength >= 3.0) || !std::isfinite(wavelength)) {
        throw ConfigError("wavelength", "must be >= 3 voxels");
    }
    for (const Vec3 &d : directions) {
        if (!(norm(d) > 0.0) || !std::isfinite(norm(d))) {
            throw ConfigError("directions", "must be non-zero finite vectors");
        }
    }
    if (!(target_spacing > 0.0) || !std::isfinite(target_spacing)) {
        throw ConfigError("target_spacing", "must be > 0");
    }
    if (!(phase_floor >= 0.0 && phase_floor < 1.0)) {
        throw ConfigError("phase_floor", "must lie in [0, 1)");
    }
}

void EvaluationSettings::validate() const {
    if (n_bins < 2) {
        throw ConfigError("n_bins", "must be >= 2");
    }
}

void PipelineConfig::validate() const {
    qualified("phantom", [&] { phantom.validate(); });
    qualified("harp", [&] { harp.validate(); });
    const double finest = std::min({phantom.geometry.spacing[0], phantom.geometry.spacing[1],
                                    phantom.geometry.spacing[2]});
    if (harp.target_spacing > finest * (1.0 + 1e-12)) {
        throw ConfigError("harp.target_spacing", "must not exceed the finest phantom spacing");
    }
    qualified("registration", [&] { registration.validate(); });
    qualified("evaluation", [&] { evaluation.validate(); });
    if (output_dir.empty()) {
        throw ConfigError("output_dir", "must not be empty");
    }
}

PipelineConfig parse_pipeline_config(std::string_view json_text) {
    const json root = parse_text(json_text);
    ObjectReader r(root, "");
    PipelineConfig c;
    r.integer("seed", c.seed);
    r.string("output_dir", c.output_dir);
    if (const json *p = r.object("phantom")) {
        ObjectReader pr(*p, "phantom");
        read_phantom(pr, c.phantom);
        pr.finish();
    }
    c.phantom.seed = c.seed;
    c.harp.wavelength = c.phantom.tag_wavelength;
    c.harp.directions = c.phantom.tag_directions;
    if (const json *h = r.object("harp")) {
        ObjectReader hr(*h, "harp");
        hr.number("wavelength", c.harp.wavelength);
        hr.directions("directions", c.harp.directions);
        hr.number("target_spacing", c.harp.target_spacing);
        hr.number("phase_floor", c.harp.phase_floor);
        hr.finish();
    }
    if (const json *g = r.object("registration")) {
        ObjectReader gr(*g, "registration");
        read_registration(gr, c.registration);
        gr.finish();
    }
    if (const json *e = r.object("evaluation")) {
        ObjectReader er(*e, "evaluation");
        er.integer("n_bins", c.evaluation.n_bins);
        er.finish();
    }
    r.finish();
    c.validate();
    return c;
}

PhantomConfig parse_phantom_config(std::string_view json_text) {
    const json root = parse_text(json_text);
    ObjectReader r(root, "");
    PhantomConfig c;
    read_phantom(r, c);
    r.integer("seed", c.seed);
    r.finish();
    c.validate();
    return c;
}

RegistrationConfig parse_registration_config(std::string_view json_text) {
    const json root = parse_text(json_text);
    ObjectReader r(root, "");
    RegistrationConfig c;
    read_registration(r, c);
    r.finish();
    c.validate();
    return c;
}

std::string to_json_text(const PipelineConfig &c) {
    json j;
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir;
    j["phantom"] = phantom_json(c.phantom);
    j["harp"] = {{"wavelength", c.harp.wavelength},
                 {"directions", directions_json(c.harp.directions)},
                 {"target_spacing", c.harp.target_spacing},
                 {"phase_floor", c.harp.phase_floor}};
    j["registration"] = registration_json(c.registration);
    j["evaluation"] = {{"n_bins", c.evaluation.n_bins}};
    return j.dump(2);
}

std::string to_json_text(const PhantomConfig &c) {
    json j = phantom_json(c);
    j["seed"] = c.seed;
    return j.dump(2);
}

std::string to_json_text(const RegistrationConfig &c) { return registration_json(c).dump(2); }

} // namespace tagflow
