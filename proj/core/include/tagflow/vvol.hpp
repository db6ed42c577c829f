// vvol.hpp - VVOL volume files.
//
// A VVOL is a JSON header
//     {"dims":[nx,ny,nz],"spacing":[sx,sy,sz],"channels":c,"dtype":"f32","data":"name.raw"}
// next to a raw little-endian payload. Voxels are stored x fastest; the c channel
// values of one voxel are adjacent. "data" is relative to the header's directory.
// dtype is "f32" by default; "f64" is accepted for full-precision dumps.

#pragma once

#include <filesystem>
#include <vector>

#include "tagflow/volume.hpp"

namespace tagflow {

enum class VvolDtype { F32, F64 };

struct VvolData {
    Geometry geometry;
    std::size_t channels = 1;
    VvolDtype dtype = VvolDtype::F32;
    std::vector<double> values; // voxel-major, channel-minor
};

// Writes <header> and a payload named after the header stem with extension ".raw".
void write_vvol(const std::filesystem::path &header, const ScalarVolume &vol, VvolDtype dtype = VvolDtype::F32);
void write_vvol(const std::filesystem::path &header, const VectorField &field, VvolDtype dtype = VvolDtype::F32);

VvolData read_vvol(const std::filesystem::path &header);
ScalarVolume read_scalar_vvol(const std::filesystem::path &header);
VectorField read_vector_vvol(const std::filesystem::path &header);

// The payload path a header points at.
std::filesystem::path vvol_payload_path(const std::filesystem::path &header);

} // namespace tagflow
