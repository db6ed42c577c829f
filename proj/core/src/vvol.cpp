// vvol.cpp - VVOL volume files.

#include "tagflow/vvol.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace tagflow {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

template <typename Uint> Uint to_little(Uint v) {
    if constexpr (std::endian::native == std::endian::little) {
        return v;
    } else {
        Uint out = 0;
        for (std::size_t b = 0; b < sizeof(Uint); ++b) {
            out = static_cast<Uint>((out << 8) | ((v >> (8 * b)) & 0xffu));
        }
        return out;
    }
}

std::vector<char> encode(const std::vector<double> &values, VvolDtype dtype) {
    const std::size_t width = dtype == VvolDtype::F32 ? 4 : 8;
    std::vector<char> bytes(values.size() * width);
    for (std::size_t n = 0; n < values.size(); ++n) {
        if (dtype == VvolDtype::F32) {
            const auto bits = to_little(std::bit_cast<std::uint32_t>(static_cast<float>(values[n])));
            std::memcpy(bytes.data() + n * width, &bits, width);
        } else {
            const auto bits = to_little(std::bit_cast<std::uint64_t>(values[n]));
            std::memcpy(bytes.data() + n * width, &bits, width);
        }
    }
    return bytes;
}

std::vector<double> decode(const std::vector<char> &bytes, VvolDtype dtype) {
    const std::size_t width = dtype == VvolDtype::F32 ? 4 : 8;
    std::vector<double> values(bytes.size() / width);
    for (std::size_t n = 0; n < values.size(); ++n) {
        if (dtype == VvolDtype::F32) {
            std::uint32_t bits = 0;
            std::memcpy(&bits, bytes.data() + n * width, width);
            values[n] = static_cast<double>(std::bit_cast<float>(to_little(bits)));
        } else {
            std::uint64_t bits = 0;
            std::memcpy(&bits, bytes.data() + n * width, width);
            values[n] = std::bit_cast<double>(to_little(bits));
        }
    }
    return values;
}

void write_raw(const fs::path &header, const Geometry &g, std::size_t channels, const std::vector<double> &values,
               VvolDtype dtype) {
    fs::path payload = header;
    payload.replace_extension(".raw");

    json h;
    h["dims"] = {g.dims[0], g.dims[1], g.dims[2]};
    h["spacing"] = {g.spacing[0], g.spacing[1], g.spacing[2]};
    h["channels"] = channels;
    h["dtype"] = dtype == VvolDtype::F32 ? "f32" : "f64";
    h["data"] = payload.filename().string();

    if (header.has_parent_path()) {
        fs::create_directories(header.parent_path());
    }
    std::ofstream hf(header);
    hf << h.dump(2) << "\n";
    if (!hf) {
        throw Error("write_vvol: cannot write " + header.string());
    }

    const std::vector<char> bytes = encode(values, dtype);
    std::ofstream pf(payload, std::ios::binary);
    pf.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!pf) {
        throw Error("write_vvol: cannot write " + payload.string());
    }
}

json read_header(const fs::path &header) {
    std::ifstream hf(header);
    if (!hf) {
        throw Error("read_vvol: cannot open " + header.string());
    }
    json h;
    try {
        h = json::parse(hf);
    } catch (const json::exception &e) {
        throw Error("read_vvol: malformed header " + header.string() + ": " + e.what());
    }
    if (!h.is_object()) {
        throw Error("read_vvol: header " + header.string() + " is not an object");
    }
    for (const auto &[key, value] : h.items()) {
        if (key != "dims" && key != "spacing" && key != "channels" && key != "dtype" && key != "data") {
            throw Error("read_vvol: unknown header key " + key);
        }
    }
    return h;
}

} // namespace

fs::path vvol_payload_path(const fs::path &header) {
    const json h = read_header(header);
    return header.parent_path() / h.at("data").get<std::string>();
}

void write_vvol(const fs::path &header, const ScalarVolume &vol, VvolDtype dtype) {
    write_raw(header, vol.geometry(), 1, std::vector<double>(vol.values().begin(), vol.values().end()), dtype);
}

void write_vvol(const fs::path &header, const VectorField &field, VvolDtype dtype) {
    std::vector<double> flat;
    flat.reserve(3 * field.size());
    for (const auto &v : field.vectors()) {
        flat.insert(flat.end(), v.begin(), v.end());
    }
    write_raw(header, field.geometry(), 3, flat, dtype);
}

VvolData read_vvol(const fs::path &header) {
    const json h = read_header(header);
    VvolData out;
    try {
        const auto dims = h.at("dims").get<std::vector<std::size_t>>();
        const auto spacing = h.at("spacing").get<std::vector<double>>();
        if (dims.size() != 3 || spacing.size() != 3) {
            throw Error("read_vvol: dims and spacing must have three entries");
        }
        for (std::size_t a = 0; a < 3; ++a) {
            out.geometry.dims[a] = dims[a];
            out.geometry.spacing[a] = spacing[a];
        }
        out.channels = h.at("channels").get<std::size_t>();
        const auto dtype = h.at("dtype").get<std::string>();
        if (dtype == "f32") {
            out.dtype = VvolDtype::F32;
        } else if (dtype == "f64") {
            out.dtype = VvolDtype::F64;
        } else {
            throw Error("read_vvol: unsupported dtype '" + dtype + "'");
        }
    } catch (const json::exception &e) {
        throw Error("read_vvol: bad header " + header.string() + ": " + e.what());
    }
    out.geometry.validate();
    if (out.channels == 0) {
        throw Error("read_vvol: channels must be >= 1");
    }

    const fs::path payload = header.parent_path() / h.at("data").get<std::string>();
    std::ifstream pf(payload, std::ios::binary);
    if (!pf) {
        throw Error("read_vvol: cannot open payload " + payload.string());
    }
    std::vector<char> bytes((std::istreambuf_iterator<char>(pf)), std::istreambuf_iterator<char>());
    const std::size_t width = out.dtype == VvolDtype::F32 ? 4 : 8;
    const std::size_t expected = out.geometry.voxel_count() * out.channels * width;
    if (bytes.size() != expected) {
        throw Error("read_vvol: payload " + payload.string() + " has " + std::to_string(bytes.size()) +
                    " bytes, expected " + std::to_string(expected));
    }
    out.values = decode(bytes, out.dtype);
    return out;
}

ScalarVolume read_scalar_vvol(const fs::path &header) {
    VvolData d = read_vvol(header);
    if (d.channels != 1) {
        throw Error("read_scalar_vvol: " + header.string() + " has " + std::to_string(d.channels) + " channels");
    }
    return ScalarVolume(d.geometry, std::move(d.values));
}

VectorField read_vector_vvol(const fs::path &header) {
    const VvolData d = read_vvol(header);
    if (d.channels != 3) {
        throw Error("read_vector_vvol: " + header.string() + " has " + std::to_string(d.channels) + " channels");
    }
    std::vector<Vec3> vecs(d.geometry.voxel_count());
    for (std::size_t n = 0; n < vecs.size(); ++n) {
        vecs[n] = {d.values[3 * n], d.values[3 * n + 1], d.values[3 * n + 2]};
    }
    return VectorField(d.geometry, std::move(vecs));
}

} // namespace tagflow
