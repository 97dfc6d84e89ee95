#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "depthscale/errors.hpp"
#include "depthscale/losses.hpp"
#include "depthscale/rng.hpp"

using namespace depthscale;

namespace {

DepthRaster raster_from(const std::vector<float>& v, int h, int w) {
    DepthRaster r = DepthRaster::filled(h, w, 0.0f);
    r.values = v;
    for (size_t i = 0; i < r.pixel_count(); ++i)
        r.valid[i] = std::isfinite(v[i]) && v[i] > 0.0f;
    return r;
}

ImageRaster flat_image(int h, int w, float v) {
    ImageRaster img;
    img.height = h;
    img.width = w;
    img.rgb.assign(static_cast<size_t>(h) * w * 3, v);
    return img;
}

}  // namespace

TEST_CASE("si loss matches a hand-computed two-pixel case") {
    // pred = {e^2, e}, target = {1, 1} -> eps = {2, 1}
    // mean(eps^2) = 2.5; (mean eps)^2 = 2.25; loss = 2.5 - 0.15 * 2.25 = 2.1625
    Tensor pred = Tensor::from_data({1, 2}, {std::exp(2.0), std::exp(1.0)}, true);
    DepthRaster target = raster_from({1.0f, 1.0f}, 1, 2);
    Tensor loss = si_log(pred, target, {1, 1}, 0.15);
    CHECK(loss.item() == doctest::Approx(2.1625).epsilon(1e-12));
}

TEST_CASE("si loss with lambda=1 is invariant to a global prediction rescale") {
    Rng rng(3);
    std::vector<double> pv(12);
    std::vector<float> tv(12);
    for (size_t i = 0; i < 12; ++i) {
        pv[i] = rng.uniform(0.5, 4.0);
        tv[i] = static_cast<float>(rng.uniform(0.5, 4.0));
    }
    DepthRaster target = raster_from(tv, 3, 4);
    std::vector<uint8_t> mask(12, 1);
    Tensor base = si_log(Tensor::from_data({3, 4}, pv), target, mask, 1.0);
    std::vector<double> scaled(pv);
    for (auto& v : scaled) v *= 7.3;
    Tensor shifted = si_log(Tensor::from_data({3, 4}, scaled), target, mask, 1.0);
    CHECK(shifted.item() == doctest::Approx(base.item()).epsilon(1e-9));
    // with lambda < 1 the invariance must break
    Tensor a = si_log(Tensor::from_data({3, 4}, pv), target, mask, 0.15);
    Tensor b = si_log(Tensor::from_data({3, 4}, scaled), target, mask, 0.15);
    CHECK(std::fabs(a.item() - b.item()) > 1e-6);
}

TEST_CASE("si loss skips masked and invalid target pixels") {
    Tensor pred = Tensor::from_data({1, 3}, {std::exp(2.0), 123.0, std::exp(1.0)});
    DepthRaster target = raster_from({1.0f, -5.0f, 1.0f}, 1, 3);
    // middle pixel invalid; same value as the two-pixel hand case
    Tensor loss = si_log(pred, target, {1, 1, 1}, 0.15);
    CHECK(loss.item() == doctest::Approx(2.1625).epsilon(1e-12));
    CHECK_THROWS_AS(si_log(pred, target, {0, 0, 0}, 0.15), EmptyMaskError);
}

TEST_CASE("gated pseudo loss vanishes with exactly zero gradient when the gate is shut") {
    Tensor pred = Tensor::from_data({1, 2}, {1.0, 2.0}, true);
    DepthRaster pseudo = raster_from({1.0f, 1.5f}, 1, 2);
    Tensor shut = tp_si(pred, pseudo, {1, 1}, 0.90, 0.9, 0.15);  // not strictly greater
    CHECK(shut.item() == 0.0);
    sum(mul(shut, Tensor::scalar(2.0))).backward();
    for (double g : pred.grad()) CHECK(g == 0.0);  // the graph never touched pred

    Tensor open = tp_si(pred, pseudo, {1, 1}, 0.91, 0.9, 0.15);
    CHECK(open.item() > 0.0);
    open.backward();
    double mag = 0.0;
    for (double g : pred.grad()) mag += std::fabs(g);
    CHECK(mag > 0.0);
}

TEST_CASE("gated pseudo loss also masks pixels the alignment marked invalid") {
    Tensor pred = Tensor::from_data({1, 2}, {std::exp(2.0), 99.0});
    DepthRaster pseudo = raster_from({1.0f, -1.0f}, 1, 2);
    // only the first pixel participates: eps = 2, loss = 4 - 0.15*4 = 3.4
    Tensor loss = tp_si(pred, pseudo, {1, 1}, 1.0, 0.9, 0.15);
    CHECK(loss.item() == doctest::Approx(3.4).epsilon(1e-12));
}

TEST_CASE("smoothness of a constant map is zero") {
    Tensor map = Tensor::full({4, 4}, 3.7, true);
    ImageRaster img = flat_image(4, 4, 0.5f);
    Tensor loss = edge_smooth(map, img);
    CHECK(loss.item() == doctest::Approx(0.0));
}

TEST_CASE("smoothness matches a hand-computed 2x2 case") {
    // map {1,2,3,4}, mean 2.5; normalized {0.4, 0.8, 1.2, 1.6}
    // flat image -> all edge weights exp(0) = 1
    // |dx| = {0.4, 0.4} mean 0.4; |dy| = {0.8, 0.8} mean 0.8; total 1.2
    Tensor map = Tensor::from_data({2, 2}, {1.0, 2.0, 3.0, 4.0}, true);
    ImageRaster img = flat_image(2, 2, 0.25f);
    Tensor loss = edge_smooth(map, img);
    CHECK(loss.item() == doctest::Approx(1.2).epsilon(1e-12));
}

TEST_CASE("strong image edges reduce the smoothness penalty") {
    // same map, but a vertical intensity edge aligned with the map's only
    // x-discontinuity down-weights it by exp(-1)
    Tensor map = Tensor::from_data({2, 2}, {1.0, 2.0, 1.0, 2.0}, true);
    ImageRaster flat = flat_image(2, 2, 0.5f);
    ImageRaster edged = flat_image(2, 2, 0.0f);
    for (int r = 0; r < 2; ++r)
        for (int ch = 0; ch < 3; ++ch) edged.at(r, 1, ch) = 1.0f;
    Tensor penalty_flat = edge_smooth(map, flat);
    Tensor penalty_edge = edge_smooth(map, edged);
    CHECK(penalty_edge.item() < penalty_flat.item());
    CHECK(penalty_edge.item() ==
          doctest::Approx(penalty_flat.item() * std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("smoothness is invariant to a global rescale of the map") {
    Rng rng(17);
    std::vector<double> mv(16);
    for (auto& v : mv) v = rng.uniform(0.5, 3.0);
    ImageRaster img = flat_image(4, 4, 0.3f);
    Tensor a = edge_smooth(Tensor::from_data({4, 4}, mv), img);
    for (auto& v : mv) v *= 42.0;
    Tensor b = edge_smooth(Tensor::from_data({4, 4}, mv), img);
    CHECK(a.item() == doctest::Approx(b.item()).epsilon(1e-9));
}

TEST_CASE("total loss combines components with the configured weights") {
    LossWeights w;  // 1, 0.5, 0.1, 0.01
    Tensor total = total_loss(Tensor::scalar(1.0), Tensor::scalar(1.0), Tensor::scalar(1.0),
                              Tensor::scalar(1.0), w);
    CHECK(total.item() == doctest::Approx(1.61).epsilon(1e-12));

    w.w_si = 2.0;
    w.w_tp_si = 3.0;
    w.w_soc = 5.0;
    w.w_smooth = 7.0;
    Tensor mixed = total_loss(Tensor::scalar(1.0), Tensor::scalar(10.0), Tensor::scalar(100.0),
                              Tensor::scalar(1000.0), w);
    CHECK(mixed.item() == doctest::Approx(2.0 + 30.0 + 500.0 + 7000.0).epsilon(1e-12));
}

TEST_CASE("total loss is linear in each component") {
    LossWeights w;
    Rng rng(23);
    const double a = rng.uniform(0.0, 2.0), b = rng.uniform(0.0, 2.0);
    Tensor t1 = total_loss(Tensor::scalar(a), Tensor::scalar(0.0), Tensor::scalar(0.0),
                           Tensor::scalar(0.0), w);
    Tensor t2 = total_loss(Tensor::scalar(b), Tensor::scalar(0.0), Tensor::scalar(0.0),
                           Tensor::scalar(0.0), w);
    Tensor t12 = total_loss(Tensor::scalar(a + b), Tensor::scalar(0.0), Tensor::scalar(0.0),
                            Tensor::scalar(0.0), w);
    CHECK(t12.item() == doctest::Approx(t1.item() + t2.item()).epsilon(1e-12));
}

TEST_CASE("total loss rejects non-finite components by name") {
    LossWeights w;
    try {
        total_loss(Tensor::scalar(1.0), Tensor::scalar(std::nan("")), Tensor::scalar(0.0),
                   Tensor::scalar(0.0), w);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("tp-si") != std::string::npos);
    }
}

TEST_CASE("gradient of the si loss drives predictions toward the target") {
    // single pixel: d/dpred of (log pred - log t)^2 * (1 - lambda) has the
    // sign of log(pred/t)
    Tensor high = Tensor::from_data({1, 1}, {2.0}, true);
    DepthRaster target = raster_from({1.0f}, 1, 1);
    si_log(high, target, {1}, 0.15).backward();
    CHECK(high.grad()[0] > 0.0);  // predicts too deep, gradient pushes down

    Tensor low = Tensor::from_data({1, 1}, {0.5}, true);
    si_log(low, target, {1}, 0.15).backward();
    CHECK(low.grad()[0] < 0.0);
}
