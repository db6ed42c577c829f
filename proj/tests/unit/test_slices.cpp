// test_slices.cpp - PGM slice export.

#include <filesystem>
#include <fstream>
#include <string>

#include <unistd.h>

#include "doctest.h"
#include "test_support.hpp"

#include "json.hpp"
#include "tagflow/grid.hpp"
#include "tagflow/slices.hpp"
#include "tagflow/vvol.hpp"

using namespace tagflow;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / ("tagflow_slices_" + std::to_string(::getpid()))) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

bool uniform(const GrayImage &img, std::uint8_t value) {
    for (std::uint8_t p : img.pixels) {
        if (p != value) {
            return false;
        }
    }
    return !img.pixels.empty();
}

} // namespace

TEST_CASE("axis names") {
    CHECK(parse_slice_axis('x') == SliceAxis::X);
    CHECK(parse_slice_axis('z') == SliceAxis::Z);
    CHECK(slice_axis_name(SliceAxis::Y) == 'y');
    CHECK_THROWS_AS(parse_slice_axis('w'), std::invalid_argument);
}

TEST_CASE("a constant volume maps to uniform mid gray") {
    const ScalarVolume v(Geometry{{4, 5, 6}, {1.0, 1.0, 1.0}}, 3.25);
    const SliceWindow w = default_window(v);
    CHECK(w.lo == 2.75);
    CHECK(w.hi == 3.75);
    for (SliceAxis a : {SliceAxis::X, SliceAxis::Y, SliceAxis::Z}) {
        CHECK(uniform(extract_slice(v, a, 2, w), 128));
    }
}

TEST_CASE("slice orientation per axis") {
    const Geometry g{{4, 5, 6}, {1.0, 1.0, 1.0}};
    const ScalarVolume v(g, 0.0);
    const SliceWindow w{0.0, 1.0};
    const GrayImage z = extract_slice(v, SliceAxis::Z, 0, w);
    CHECK(z.rows == 5);
    CHECK(z.cols == 4);
    const GrayImage x = extract_slice(v, SliceAxis::X, 0, w);
    CHECK(x.rows == 6);
    CHECK(x.cols == 5);
    const GrayImage y = extract_slice(v, SliceAxis::Y, 0, w);
    CHECK(y.rows == 6);
    CHECK(y.cols == 4);
}

TEST_CASE("the identity determinant map is uniform at the gray level of 1.0") {
    const Geometry g = cube_geometry(8);
    const ScalarVolume det = jacobian_determinant(VectorField(g));
    const SliceWindow w{0.0, 2.0};
    CHECK(uniform(extract_slice(det, SliceAxis::Z, 4, w), 128));
    CHECK(uniform(extract_slice(det, SliceAxis::X, 0, w), 128));
}

TEST_CASE("a ramp gives strictly monotone rows") {
    const Geometry g = cube_geometry(10);
    ScalarVolume v(g);
    for (std::size_t n = 0; n < v.size(); ++n) {
        v[n] = static_cast<double>(g.coords(n)[0]);
    }
    const GrayImage img = extract_slice(v, SliceAxis::Z, 3, default_window(v));
    for (std::size_t r = 0; r < img.rows; ++r) {
        for (std::size_t c = 1; c < img.cols; ++c) {
            CHECK(img.pixels[r * img.cols + c] > img.pixels[r * img.cols + c - 1]);
        }
        CHECK(img.pixels[r * img.cols] == 0);
        CHECK(img.pixels[r * img.cols + img.cols - 1] == 255);
    }
}

TEST_CASE("values outside the window saturate") {
    const Geometry g = cube_geometry(3);
    ScalarVolume v(g, -5.0);
    v[0] = 5.0;
    const GrayImage img = extract_slice(v, SliceAxis::Z, 0, {0.0, 1.0});
    CHECK(img.pixels[0] == 255);
    CHECK(img.pixels[1] == 0);
}

TEST_CASE("out of range indices throw") {
    const ScalarVolume v(cube_geometry(4), 1.0);
    CHECK_THROWS_AS(extract_slice(v, SliceAxis::Y, 4, {0.0, 1.0}), std::out_of_range);
}

TEST_CASE("pgm round trip") {
    TempDir dir;
    GrayImage img{3, 4, {}};
    for (std::size_t i = 0; i < 12; ++i) {
        img.pixels.push_back(static_cast<std::uint8_t>(i * 20));
    }
    write_pgm(dir.path / "a.pgm", img);
    const GrayImage back = read_pgm(dir.path / "a.pgm");
    CHECK(back.rows == 3);
    CHECK(back.cols == 4);
    CHECK(back.pixels == img.pixels);
}

TEST_CASE("export writes images and a sidecar, checking indices first") {
    TempDir dir;
    const fs::path src = dir.path / "vol.vvol";
    write_vvol(src, test::random_volume(cube_geometry(6), 1, 0.0, 1.0));
    const fs::path out = dir.path / "out";
    CHECK_THROWS_AS(export_slices(src, SliceAxis::Z, {1, 6}, out), std::out_of_range);
    CHECK(!fs::exists(out / "vol_z1.pgm"));

    const SliceExport e = export_slices(src, SliceAxis::Z, {0, 5}, out, SliceWindow{0.0, 1.0});
    REQUIRE(e.images.size() == 2);
    CHECK(e.images[0] == out / "vol_z0.pgm");
    CHECK(fs::exists(e.images[1]));
    std::ifstream in(e.sidecar);
    const nlohmann::json j = nlohmann::json::parse(in);
    CHECK(j.at("window").at("lo") == 0.0);
    CHECK(j.at("window").at("hi") == 1.0);
    CHECK(j.at("axis") == "z");
    CHECK(j.at("indices") == nlohmann::json::array({0, 5}));
}

TEST_CASE("export selects a channel of a vector field") {
    TempDir dir;
    const fs::path src = dir.path / "u.vvol";
    write_vvol(src, VectorField(cube_geometry(4), {0.0, 1.0, 2.0}));
    const SliceExport e = export_slices(src, SliceAxis::X, {2}, dir.path, SliceWindow{0.0, 2.0}, 1);
    CHECK(uniform(read_pgm(e.images[0]), 128));
    CHECK_THROWS(export_slices(src, SliceAxis::X, {2}, dir.path, std::nullopt, 3));
}
