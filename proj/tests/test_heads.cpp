#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "depthscale/heads.hpp"
#include "depthscale/rng.hpp"
#include "depthscale/synth.hpp"

using namespace depthscale;

namespace {

Tensor random_tokens(Rng& rng, int n, int d) {
    std::vector<double> v(static_cast<size_t>(n) * d);
    for (auto& x : v) x = rng.normal();
    return Tensor::from_data({n, d}, std::move(v));
}

}  // namespace

TEST_CASE("zero final convolution decodes to a map of exactly one") {
    DecoderHead head = DecoderHead::random_init(16, 16, 3);
    head.conv_out_w = Tensor::zeros({1, 16, 1, 1}, true);
    head.conv_out_b = Tensor::zeros({1}, true);
    Rng rng(1);
    Tensor f = random_tokens(rng, 4 * 4, 16);
    Tensor out = head.decode(f, 4, 4, 32, 32);
    REQUIRE(out.shape() == std::vector<int>{32, 32});
    for (double v : out.value()) CHECK(v == 1.0);  // exp(0)
}

TEST_CASE("decoded maps are strictly positive across random heads and inputs") {
    Rng rng(9);
    for (int trial = 0; trial < 100; ++trial) {
        DecoderHead head = DecoderHead::random_init(8, 8, 1000 + trial);
        Tensor f = random_tokens(rng, 4, 8);
        Tensor out = head.decode(f, 2, 2, 8, 8);
        for (double v : out.value()) {
            REQUIRE(std::isfinite(v));
            REQUIRE(v > 0.0);
        }
    }
}

TEST_CASE("shape arithmetic from patch grid to image resolution") {
    DecoderHead head = DecoderHead::random_init(64, 32, 5);
    Rng rng(5);
    // 32x32 image, patch 8 -> 4x4 grid; internal upsampling to 16x16 then
    // final resize to the exact image size
    Tensor f = random_tokens(rng, 16, 64);
    CHECK(head.decode(f, 4, 4, 32, 32).shape() == std::vector<int>{32, 32});
    // non-square grids and odd output sizes must also work
    Tensor f2 = random_tokens(rng, 12, 64);
    CHECK(head.decode(f2, 3, 4, 17, 23).shape() == std::vector<int>{17, 23});
}

TEST_CASE("default initialization keeps the initial map near one") {
    // final convolution weights start at std 0.01, so exp(pre-activation)
    // lands close to exp(0)
    Rng rng(31);
    DecoderHead head = DecoderHead::random_init(16, 16, 77);
    Tensor f = random_tokens(rng, 16, 16);
    Tensor out = head.decode(f, 4, 4, 16, 16);
    for (double v : out.value()) {
        CHECK(v > 0.5);
        CHECK(v < 2.0);
    }
}

TEST_CASE("gradients flow to every decoder parameter") {
    DecoderHead head = DecoderHead::random_init(8, 8, 11);
    Rng rng(13);
    Tensor f = random_tokens(rng, 4, 8);
    sum(head.decode(f, 2, 2, 8, 8)).backward();
    for (const Tensor* t :
         {&head.conv_proj_w, &head.conv_proj_b, &head.conv_up1_w, &head.conv_up1_b,
          &head.conv_up2_w, &head.conv_up2_b, &head.conv_out_w, &head.conv_out_b}) {
        REQUIRE(!t->grad().empty());
        double mag = 0.0;
        for (double g : t->grad()) mag += std::fabs(g);
        CHECK(mag > 0.0);
    }
}

TEST_CASE("rescale map reproduces synthetic ground truth given the true fields") {
    SynthConfig cfg;
    cfg.height = 32;
    cfg.width = 32;
    SynthScene s = synth_scene(17, 2, cfg);
    const size_t n = s.rel.pixel_count();
    std::vector<double> rel(n), a(n), b(n);
    for (size_t i = 0; i < n; ++i) {
        rel[i] = s.rel.values[i];
        a[i] = s.scale_map.values[i];
        b[i] = s.shift_map.values[i];
    }
    Tensor pred = rescale_depth(Tensor::from_data({32, 32}, rel),
                                Tensor::from_data({32, 32}, a, true),
                                Tensor::from_data({32, 32}, b, true));
    for (size_t i = 0; i < n; ++i) {
        if (!s.gt.valid[i]) continue;
        CHECK(pred.value()[i] == doctest::Approx(s.gt.values[i]).epsilon(1e-6));
    }
}

TEST_CASE("rescale map is monotone: larger shift means smaller depth") {
    Tensor rel = Tensor::full({2, 2}, 0.5);
    Tensor a = Tensor::full({2, 2}, 0.3, true);
    Tensor lo = rescale_depth(rel, a, Tensor::full({2, 2}, 0.1, true));
    Tensor hi = rescale_depth(rel, a, Tensor::full({2, 2}, 0.2, true));
    for (int i = 0; i < 4; ++i)
        CHECK(hi.value()[static_cast<size_t>(i)] < lo.value()[static_cast<size_t>(i)]);
    // scalar oracle: 1/(0.3*0.5 + 0.1)
    CHECK(lo.value()[0] == doctest::Approx(1.0 / 0.25));
}

TEST_CASE("rescale map clamps a vanishing denominator instead of dividing by zero") {
    Tensor rel = Tensor::full({1, 1}, 1.0);
    Tensor a = Tensor::full({1, 1}, 0.0, true);
    Tensor b = Tensor::full({1, 1}, 0.0, true);
    Tensor pred = rescale_depth(rel, a, b);
    CHECK(pred.value()[0] == doctest::Approx(1.0 / kEps));
    sum(pred).backward();
    CHECK(a.grad()[0] == 0.0);  // clamped region carries no gradient
}
