#include "depthscale/io.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "depthscale/errors.hpp"

namespace depthscale {

namespace {

bool host_is_little_endian() {
    const uint32_t probe = 1;
    return *reinterpret_cast<const uint8_t*>(&probe) == 1;
}

void byteswap4(char* p) {
    std::swap(p[0], p[3]);
    std::swap(p[1], p[2]);
}

std::ifstream open_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open file: " + path, 0);
    return in;
}

// Reads one whitespace-delimited header token, tracking the byte offset.
std::string next_token(std::istream& in, long& offset) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        ++offset;
        if (c == ' ' || c == '\n' || c == '\r' || c == '\t') {
            if (!tok.empty()) return tok;
        } else {
            tok.push_back(static_cast<char>(c));
        }
    }
    if (tok.empty()) throw ParseError("unexpected end of header", offset);
    return tok;
}

struct PfmHeader {
    int width, height;
    bool little_endian;
    long payload_offset;
};

PfmHeader read_pfm_header(std::istream& in, const std::string& path) {
    long offset = 0;
    std::string magic = next_token(in, offset);
    if (magic != "Pf") throw ParseError("not a grayscale PFM file: " + path, 0);
    PfmHeader h{};
    try {
        h.width = std::stoi(next_token(in, offset));
        h.height = std::stoi(next_token(in, offset));
        double scale = std::stod(next_token(in, offset));
        h.little_endian = scale < 0.0;
    } catch (const std::exception&) {
        throw ParseError("malformed PFM header in " + path, offset);
    }
    if (h.width <= 0 || h.height <= 0)
        throw ParseError("non-positive PFM dimensions in " + path, offset);
    h.payload_offset = offset;
    return h;
}

std::vector<float> read_pfm_payload(std::istream& in, const PfmHeader& h,
                                    const std::string& path) {
    const size_t count = static_cast<size_t>(h.width) * h.height;
    std::vector<float> raw(count);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count * 4));
    if (static_cast<size_t>(in.gcount()) != count * 4)
        throw ParseError("truncated PFM payload in " + path,
                         h.payload_offset + static_cast<long>(in.gcount()));
    if (h.little_endian != host_is_little_endian())
        for (auto& f : raw) byteswap4(reinterpret_cast<char*>(&f));
    return raw;
}

void write_pfm_header_and_payload(std::ostream& out, int width, int height,
                                  const float* bottom_first_rows) {
    const double scale = host_is_little_endian() ? -1.0 : 1.0;
    out << "Pf\n" << width << " " << height << "\n" << scale << "\n";
    out.write(reinterpret_cast<const char*>(bottom_first_rows),
              static_cast<std::streamsize>(static_cast<size_t>(width) * height * 4));
}

}  // namespace

DepthRaster DepthRaster::filled(int h, int w, float v) {
    DepthRaster r;
    r.height = h;
    r.width = w;
    r.values.assign(static_cast<size_t>(h) * w, v);
    r.valid.assign(r.values.size(), std::isfinite(v) && v > 0.0f ? 1 : 0);
    return r;
}

DepthRaster read_pfm(const std::string& path) {
    auto in = open_binary(path);
    PfmHeader h = read_pfm_header(in, path);
    auto raw = read_pfm_payload(in, h, path);
    DepthRaster r;
    r.height = h.height;
    r.width = h.width;
    r.values.resize(raw.size());
    r.valid.resize(raw.size());
    // PFM stores the bottom row first
    for (int row = 0; row < h.height; ++row)
        for (int col = 0; col < h.width; ++col) {
            float v = raw[static_cast<size_t>(h.height - 1 - row) * h.width + col];
            const size_t idx = static_cast<size_t>(row) * h.width + col;
            r.values[idx] = v;
            r.valid[idx] = (std::isfinite(v) && v > 0.0f) ? 1 : 0;
        }
    return r;
}

void write_pfm(const DepthRaster& raster, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open file for writing: " + path, 0);
    std::vector<float> bottom_first(raster.pixel_count());
    for (int row = 0; row < raster.height; ++row)
        std::memcpy(&bottom_first[static_cast<size_t>(raster.height - 1 - row) * raster.width],
                    &raster.values[static_cast<size_t>(row) * raster.width],
                    static_cast<size_t>(raster.width) * 4);
    write_pfm_header_and_payload(out, raster.width, raster.height, bottom_first.data());
}

std::vector<double> read_pfm_matrix(const std::string& path, int expected_rows,
                                    int expected_cols) {
    auto in = open_binary(path);
    PfmHeader h = read_pfm_header(in, path);
    if (h.height != expected_rows || h.width != expected_cols)
        throw DimensionError("embedding matrix " + path + " has shape " +
                             std::to_string(h.height) + "x" + std::to_string(h.width) +
                             ", expected " + std::to_string(expected_rows) + "x" +
                             std::to_string(expected_cols));
    auto raw = read_pfm_payload(in, h, path);
    std::vector<double> data(raw.size());
    for (int row = 0; row < h.height; ++row)
        for (int col = 0; col < h.width; ++col)
            data[static_cast<size_t>(row) * h.width + col] =
                raw[static_cast<size_t>(h.height - 1 - row) * h.width + col];
    return data;
}

void write_pfm_matrix(const std::vector<double>& data, int rows, int cols,
                      const std::string& path) {
    if (data.size() != static_cast<size_t>(rows) * cols)
        throw DimensionError("write_pfm_matrix: data size != rows*cols");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open file for writing: " + path, 0);
    std::vector<float> bottom_first(data.size());
    for (int row = 0; row < rows; ++row)
        for (int col = 0; col < cols; ++col)
            bottom_first[static_cast<size_t>(rows - 1 - row) * cols + col] =
                static_cast<float>(data[static_cast<size_t>(row) * cols + col]);
    write_pfm_header_and_payload(out, cols, rows, bottom_first.data());
}

ImageRaster read_ppm(const std::string& path) {
    auto in = open_binary(path);
    long offset = 0;
    if (next_token(in, offset) != "P6") throw ParseError("not a binary PPM (P6): " + path, 0);
    int width, height, maxval;
    try {
        width = std::stoi(next_token(in, offset));
        height = std::stoi(next_token(in, offset));
        maxval = std::stoi(next_token(in, offset));
    } catch (const std::exception&) {
        throw ParseError("malformed PPM header in " + path, offset);
    }
    if (maxval != 255) throw ParseError("PPM maxval must be 255 in " + path, offset);
    if (width <= 0 || height <= 0)
        throw ParseError("non-positive PPM dimensions in " + path, offset);
    const size_t count = static_cast<size_t>(width) * height * 3;
    std::vector<uint8_t> bytes(count);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(count));
    if (static_cast<size_t>(in.gcount()) != count)
        throw ParseError("truncated PPM payload in " + path,
                         offset + static_cast<long>(in.gcount()));
    ImageRaster img;
    img.height = height;
    img.width = width;
    img.rgb.resize(count);
    for (size_t i = 0; i < count; ++i) img.rgb[i] = static_cast<float>(bytes[i]) / 255.0f;
    return img;
}

void write_ppm(const ImageRaster& image, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open file for writing: " + path, 0);
    out << "P6\n" << image.width << " " << image.height << "\n255\n";
    std::vector<uint8_t> bytes(image.rgb.size());
    for (size_t i = 0; i < image.rgb.size(); ++i) {
        float v = std::min(std::max(image.rgb[i], 0.0f), 1.0f);
        bytes[i] = static_cast<uint8_t>(std::lround(v * 255.0f));
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

std::vector<uint8_t> make_valid_mask(const DepthRaster& gt, float d_lo, float d_hi) {
    if (!(d_lo < d_hi) || d_lo <= 0.0f)
        throw InputError("make_valid_mask: require 0 < d_lo < d_hi");
    std::vector<uint8_t> mask(gt.pixel_count());
    for (size_t i = 0; i < mask.size(); ++i) {
        const float v = gt.values[i];
        mask[i] = (gt.valid[i] && std::isfinite(v) && v >= d_lo && v <= d_hi) ? 1 : 0;
    }
    return mask;
}

std::vector<SampleManifestEntry> read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open manifest: " + path, 0);
    const auto dir = std::filesystem::path(path).parent_path();
    auto resolve = [&](const std::string& p) {
        std::filesystem::path fp(p);
        return fp.is_absolute() ? fp.string() : (dir / fp).string();
    };
    std::vector<SampleManifestEntry> entries;
    std::string line;
    long line_no = 0;
    long line_offset = 0;
    while (true) {
        line_offset = static_cast<long>(in.tellg());
        if (!std::getline(in, line)) break;
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, '\t')) fields.push_back(field);
        if (fields.size() != 6)
            throw ParseError("manifest line " + std::to_string(line_no) + " has " +
                                 std::to_string(fields.size()) + " fields, expected 6",
                             line_offset);
        entries.push_back({fields[0], resolve(fields[1]), resolve(fields[2]), resolve(fields[3]),
                           resolve(fields[4]), fields[5]});
    }
    return entries;
}

void write_manifest(const std::vector<SampleManifestEntry>& entries, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open file for writing: " + path, 0);
    for (const auto& e : entries)
        out << e.id << '\t' << e.image_path << '\t' << e.rel_path << '\t' << e.gt_path << '\t'
            << e.tokens_path << '\t' << e.domain << '\n';
}

std::vector<std::string> read_tokens(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open token file: " + path, 0);
    std::vector<std::string> tokens;
    std::string tok;
    while (in >> tok) tokens.push_back(tok);
    return tokens;
}

void write_tokens(const std::vector<std::string>& tokens, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open file for writing: " + path, 0);
    for (size_t i = 0; i < tokens.size(); ++i) out << tokens[i] << (i + 1 < tokens.size() ? " " : "\n");
}

}  // namespace depthscale
