#include "depthscale/synth.hpp"

#include <cmath>
#include <filesystem>

#include "depthscale/errors.hpp"
#include "depthscale/rng.hpp"

namespace depthscale {

namespace {

constexpr double kTwoPi = 2.0 * 3.14159265358979323846;

// Token-addressable base magnitudes. The scale-level and tilt tokens make
// the A*/B* fields a function of observable inputs, so a trained model can
// recover them on held-out scenes.
constexpr double kScaleLevels[3] = {0.75, 1.0, 1.3};
constexpr double kSinAmplitude = 0.15;
constexpr double kJitter = 0.01;  // unlearnable per-scene wobble, +-1%

}  // namespace

SynthScene synth_scene(std::uint64_t seed, std::uint64_t index, const SynthConfig& cfg) {
    if (cfg.height < 16 || cfg.width < 16)
        throw InputError("synth_scene: height and width must be >= 16");
    const int h = cfg.height, w = cfg.width;
    Rng rng(derive_seed(seed, "scene", index));

    const bool outdoor = rng.below(2) == 1;
    const int level = static_cast<int>(rng.below(3));
    const int tilt = static_cast<int>(rng.below(4));
    const double phase = tilt * (kTwoPi / 4.0);

    const double base_a = (outdoor ? 0.10 : 0.50) * kScaleLevels[level];
    const double base_b = (outdoor ? 0.08 : 0.30) * kScaleLevels[level];
    const double jitter_a = 1.0 + kJitter * (2.0 * rng.uniform() - 1.0);
    const double jitter_b = 1.0 + kJitter * (2.0 * rng.uniform() - 1.0);

    SynthScene scene;
    scene.domain = outdoor ? "outdoor" : "indoor";
    scene.tokens = {scene.domain, "scene", "scale" + std::to_string(level),
                    "tilt" + std::to_string(tilt)};

    // piecewise-planar disparity layout: a base ramp plus a few rectangles
    // carrying their own planes
    const double c0 = rng.uniform(0.4, 0.8);
    const double gx = rng.uniform(-0.3, 0.3);
    const double gy = rng.uniform(-0.3, 0.3);
    scene.rel = DepthRaster::filled(h, w, 0.0f);
    std::vector<double> rel(static_cast<size_t>(h) * w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            rel[static_cast<size_t>(r) * w + c] =
                c0 + gx * (static_cast<double>(c) / w) + gy * (static_cast<double>(r) / h);
    const int n_rects = 2 + static_cast<int>(rng.below(3));
    for (int k = 0; k < n_rects; ++k) {
        const int rw = 4 + static_cast<int>(rng.below(static_cast<std::uint64_t>(w / 2)));
        const int rh = 4 + static_cast<int>(rng.below(static_cast<std::uint64_t>(h / 2)));
        const int r0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(h - rh)));
        const int col0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(w - rw)));
        const double dc = rng.uniform(-0.35, 0.35);
        const double dgx = rng.uniform(-0.2, 0.2);
        for (int r = r0; r < r0 + rh; ++r)
            for (int c = col0; c < col0 + rw; ++c)
                rel[static_cast<size_t>(r) * w + c] =
                    c0 + dc + dgx * (static_cast<double>(c - col0) / rw);
    }
    double rel_min = 1e30, rel_max = -1e30;
    for (size_t i = 0; i < rel.size(); ++i) {
        rel[i] = std::min(std::max(rel[i], 0.2), 1.2);
        rel_min = std::min(rel_min, rel[i]);
        rel_max = std::max(rel_max, rel[i]);
        scene.rel.values[i] = static_cast<float>(rel[i]);
        scene.rel.valid[i] = 1;
    }

    // rescale maps and exact metric depth
    scene.scale_map = DepthRaster::filled(h, w, 0.0f);
    scene.shift_map = DepthRaster::filled(h, w, 0.0f);
    scene.gt = DepthRaster::filled(h, w, 0.0f);
    Rng drop_rng(derive_seed(seed, "gt-drop", index));
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            const size_t i = static_cast<size_t>(r) * w + c;
            const double a = base_a * jitter_a *
                             (1.0 + kSinAmplitude * std::sin(kTwoPi * c / w + phase));
            const double b = base_b * jitter_b *
                             (1.0 + kSinAmplitude * std::sin(kTwoPi * r / h + phase));
            scene.scale_map.values[i] = static_cast<float>(a);
            scene.scale_map.valid[i] = 1;
            scene.shift_map.values[i] = static_cast<float>(b);
            scene.shift_map.valid[i] = 1;
            const float depth =
                1.0f / (scene.scale_map.values[i] * scene.rel.values[i] +
                        scene.shift_map.values[i]);
            const bool dropped = drop_rng.uniform() < cfg.gt_sparsity;
            scene.gt.values[i] = dropped ? 0.0f : depth;
            scene.gt.valid[i] = dropped ? 0 : 1;
        }

    // depth-correlated shading plus seeded texture
    scene.image.height = h;
    scene.image.width = w;
    scene.image.rgb.resize(static_cast<size_t>(h) * w * 3);
    const double tint[2][3] = {{1.0, 0.92, 0.82}, {0.82, 0.95, 1.0}};  // indoor, outdoor
    const double* t = tint[outdoor ? 1 : 0];
    Rng tex_rng(derive_seed(seed, "texture", index));
    const double span = std::max(rel_max - rel_min, 1e-6);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            const size_t i = static_cast<size_t>(r) * w + c;
            const double shade = 0.25 + 0.55 * (rel[i] - rel_min) / span;
            const double noise = 0.05 * (2.0 * tex_rng.uniform() - 1.0);
            for (int ch = 0; ch < 3; ++ch) {
                double v = shade * t[ch] + noise;
                scene.image.rgb[i * 3 + ch] =
                    static_cast<float>(std::min(std::max(v, 0.0), 1.0));
            }
        }
    return scene;
}

std::vector<SynthScene> synth_generate(std::uint64_t seed, int count, int height, int width) {
    SynthConfig cfg;
    cfg.height = height;
    cfg.width = width;
    std::vector<SynthScene> scenes;
    scenes.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i)
        scenes.push_back(synth_scene(seed, static_cast<std::uint64_t>(i), cfg));
    return scenes;
}

void synth_write_dataset(const std::vector<SynthScene>& scenes, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    std::vector<SampleManifestEntry> entries;
    for (size_t i = 0; i < scenes.size(); ++i) {
        char id[16];
        std::snprintf(id, sizeof(id), "scene%04zu", i);
        const fs::path dir = fs::path(out_dir) / id;
        fs::create_directories(dir);
        const auto& s = scenes[i];
        write_ppm(s.image, (dir / "image.ppm").string());
        write_pfm(s.rel, (dir / "rel.pfm").string());
        write_pfm(s.gt, (dir / "gt.pfm").string());
        write_pfm(s.scale_map, (dir / "scale.pfm").string());
        write_pfm(s.shift_map, (dir / "shift.pfm").string());
        write_tokens(s.tokens, (dir / "tokens.txt").string());
        // manifest paths are relative to the manifest location
        const std::string rel_dir = std::string(id) + "/";
        entries.push_back({id, rel_dir + "image.ppm", rel_dir + "rel.pfm", rel_dir + "gt.pfm",
                           rel_dir + "tokens.txt", s.domain});
    }
    write_manifest(entries, (fs::path(out_dir) / "manifest.tsv").string());
}

}  // namespace depthscale
