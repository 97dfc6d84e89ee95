#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include "depthscale/errors.hpp"
#include "depthscale/io.hpp"

using namespace depthscale;
namespace fs = std::filesystem;

namespace {

fs::path tmp_dir() {
    static fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "depthscale_io_test";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

void spit(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string f32le(float v) {
    char b[4];
    std::memcpy(b, &v, 4);
    return std::string(b, 4);
}

}  // namespace

TEST_CASE("pfm write produces the exact expected bytes") {
    // 2x2 raster; PFM payload is bottom row first, little-endian scale is
    // negative
    DepthRaster r = DepthRaster::filled(2, 2, 0.0f);
    r.at(0, 0) = 1.0f;
    r.at(0, 1) = 2.0f;
    r.at(1, 0) = 3.0f;
    r.at(1, 1) = 4.0f;
    const fs::path p = tmp_dir() / "exact.pfm";
    write_pfm(r, p.string());
    const std::string expected =
        std::string("Pf\n2 2\n-1\n") + f32le(3.0f) + f32le(4.0f) + f32le(1.0f) + f32le(2.0f);
    CHECK(slurp(p) == expected);
}

TEST_CASE("pfm read decodes a hand-assembled little-endian file") {
    const fs::path p = tmp_dir() / "hand.pfm";
    spit(p, std::string("Pf\n3 1\n-1.0\n") + f32le(0.5f) + f32le(-2.0f) + f32le(7.25f));
    DepthRaster r = read_pfm(p.string());
    REQUIRE(r.height == 1);
    REQUIRE(r.width == 3);
    CHECK(r.at(0, 0) == 0.5f);
    CHECK(r.at(0, 1) == -2.0f);
    CHECK(r.at(0, 2) == 7.25f);
    CHECK(r.is_valid(0, 0));
    CHECK_FALSE(r.is_valid(0, 1));  // non-positive
    CHECK(r.is_valid(0, 2));
}

TEST_CASE("pfm read decodes a big-endian file by byte swapping") {
    const float v = 6.5f;
    char be[4];
    std::memcpy(be, &v, 4);
    std::swap(be[0], be[3]);
    std::swap(be[1], be[2]);
    const fs::path p = tmp_dir() / "big.pfm";
    spit(p, std::string("Pf\n1 1\n1.0\n") + std::string(be, 4));
    DepthRaster r = read_pfm(p.string());
    CHECK(r.at(0, 0) == 6.5f);
}

TEST_CASE("pfm round trip preserves values and validity") {
    DepthRaster r = DepthRaster::filled(3, 4, 0.0f);
    for (int i = 0; i < 12; ++i) r.values[static_cast<size_t>(i)] = 0.25f * (i - 2);
    r.values[5] = std::numeric_limits<float>::quiet_NaN();
    for (size_t i = 0; i < r.pixel_count(); ++i)
        r.valid[i] = std::isfinite(r.values[i]) && r.values[i] > 0.0f;
    const fs::path p = tmp_dir() / "round.pfm";
    write_pfm(r, p.string());
    DepthRaster back = read_pfm(p.string());
    REQUIRE(back.height == 3);
    REQUIRE(back.width == 4);
    for (size_t i = 0; i < r.pixel_count(); ++i) {
        CHECK(back.valid[i] == r.valid[i]);
        if (r.valid[i]) CHECK(back.values[i] == r.values[i]);
    }
}

TEST_CASE("pfm parse errors carry a byte offset") {
    const fs::path bad_magic = tmp_dir() / "bad_magic.pfm";
    spit(bad_magic, "PF\n1 1\n-1.0\n" + f32le(1.0f) + f32le(1.0f) + f32le(1.0f));
    CHECK_THROWS_AS(read_pfm(bad_magic.string()), ParseError);

    const fs::path truncated = tmp_dir() / "truncated.pfm";
    spit(truncated, std::string("Pf\n2 2\n-1.0\n") + f32le(1.0f));
    try {
        read_pfm(truncated.string());
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.byte_offset > 0);
    }

    const fs::path bad_dims = tmp_dir() / "bad_dims.pfm";
    spit(bad_dims, "Pf\n0 2\n-1.0\n");
    CHECK_THROWS_AS(read_pfm(bad_dims.string()), ParseError);
}

TEST_CASE("ppm writes binary P6 with maxval 255 and reads it back") {
    ImageRaster img;
    img.height = 1;
    img.width = 2;
    img.rgb = {0.0f, 0.5f, 1.0f, 1.0f, 0.0f, 0.25f};
    const fs::path p = tmp_dir() / "img.ppm";
    write_ppm(img, p.string());
    const std::string bytes = slurp(p);
    CHECK(bytes.substr(0, 2) == "P6");
    CHECK(bytes.find("255") != std::string::npos);
    // payload: last 6 bytes, one per channel
    REQUIRE(bytes.size() >= 6);
    const auto* px = reinterpret_cast<const unsigned char*>(bytes.data() + bytes.size() - 6);
    CHECK(px[0] == 0);
    CHECK(px[2] == 255);
    CHECK(px[3] == 255);

    ImageRaster back = read_ppm(p.string());
    REQUIRE(back.height == 1);
    REQUIRE(back.width == 2);
    for (size_t i = 0; i < img.rgb.size(); ++i)
        CHECK(back.rgb[i] == doctest::Approx(img.rgb[i]).epsilon(1.0 / 255.0));
}

TEST_CASE("valid mask combines raster validity with depth caps") {
    DepthRaster gt = DepthRaster::filled(1, 4, 0.0f);
    gt.values = {0.0005f, 2.0f, 15.0f, 5.0f};
    gt.valid = {1, 1, 1, 0};
    auto mask = make_valid_mask(gt, 0.001f, 10.0f);
    CHECK(mask == std::vector<uint8_t>{0, 1, 0, 0});
}

TEST_CASE("manifest round trip resolves paths against its own directory") {
    const fs::path dir = tmp_dir() / "mani";
    fs::create_directories(dir);
    std::vector<SampleManifestEntry> entries = {
        {"a", "a/image.ppm", "a/rel.pfm", "a/gt.pfm", "a/tok.txt", "indoor"},
        {"b", "b/image.ppm", "b/rel.pfm", "b/gt.pfm", "b/tok.txt", "outdoor"},
    };
    const fs::path mp = dir / "manifest.tsv";
    write_manifest(entries, mp.string());
    auto back = read_manifest(mp.string());
    REQUIRE(back.size() == 2);
    CHECK(back[0].id == "a");
    CHECK(back[1].domain == "outdoor");
    CHECK(fs::path(back[0].image_path) == dir / "a/image.ppm");
    CHECK(fs::path(back[1].gt_path) == dir / "b/gt.pfm");
}

TEST_CASE("manifest rejects a malformed line with its byte offset") {
    const fs::path mp = tmp_dir() / "bad.tsv";
    spit(mp, "a\tim\trel\tgt\ttok\tindoor\nb\tim\trel\n");
    try {
        read_manifest(mp.string());
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.byte_offset == 23);  // start of the second line
    }
}

TEST_CASE("token files split on whitespace") {
    const fs::path p = tmp_dir() / "tok.txt";
    spit(p, "indoor  scene\nscale2\ttilt1\n");
    auto toks = read_tokens(p.string());
    CHECK(toks == std::vector<std::string>{"indoor", "scene", "scale2", "tilt1"});
    write_tokens(toks, p.string());
    CHECK(read_tokens(p.string()) == toks);
}

TEST_CASE("pfm matrix io preserves doubles at f32 precision and checks shape") {
    std::vector<double> m = {1.0, -0.5, 0.125, 3.75, 2.0, -9.0};
    const fs::path p = tmp_dir() / "mat.pfm";
    write_pfm_matrix(m, 2, 3, p.string());
    auto back = read_pfm_matrix(p.string(), 2, 3);
    REQUIRE(back.size() == 6);
    for (size_t i = 0; i < 6; ++i) CHECK(back[i] == m[i]);
    CHECK_THROWS_AS(read_pfm_matrix(p.string(), 3, 2), DimensionError);
}
