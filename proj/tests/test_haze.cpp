#include "support.hpp"

#include "nde/errors.hpp"
#include "nde/haze.hpp"

#include <cmath>

using namespace nde;

namespace {

HazeParams with_transmission(const Image& t, double airlight = 1.0) {
    HazeParams p;
    p.airlight = airlight;
    p.transmission = t;
    return p;
}

double hue_distance(double a, double b) {
    const double d = std::abs(a - b);
    return std::min(d, 1.0 - d);
}

}  // namespace

TEST_SUITE("haze") {

TEST_CASE("zero haze leaves the image unchanged") {
    std::mt19937_64 rng(1);
    const Image j = testing::random_image(rng, 6, 6, 3);
    CHECK(max_abs_difference(synthesize_haze(j, with_transmission(Image(6, 6, 1, 1.0))), j) < 1e-15);
}

TEST_CASE("airlight is a fixed point") {
    std::mt19937_64 rng(2);
    const Image a(5, 5, 3, 0.7);
    const Image t = testing::random_image(rng, 5, 5, 1, 0.01, 1.0);
    CHECK(max_abs_difference(synthesize_haze(a, with_transmission(t, 0.7)), a) < 1e-15);
    CHECK(max_abs_difference(dehaze_oracle(a, with_transmission(t, 0.7)), a) < 1e-12);
}

TEST_CASE("scalar forward and inverse examples") {
    const auto p = with_transmission(Image(1, 1, 1, 0.5));
    CHECK(synthesize_haze(Image(1, 1, 3, 0.2), p)(0, 0, 0) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(dehaze_oracle(Image(1, 1, 3, 0.6), p)(0, 0, 1) == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("round trip holds down to the transmission floor") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 25; ++trial) {
        const Image j = testing::random_image(rng, 8, 8, 3);
        const Image t = testing::random_image(rng, 8, 8, 1, kTransmissionFloor, 1.0);
        const auto p = with_transmission(t, 0.6 + 0.4 * (trial % 2));
        const Image back = dehaze_oracle(synthesize_haze(j, p), p, false);
        CHECK(max_abs_difference(back, j) < 1e-6);
    }
}

TEST_CASE("transmission from depth") {
    Image depth(1, 3, 1);
    depth(0, 0, 0) = 0.0;
    depth(0, 1, 0) = 0.5;
    depth(0, 2, 0) = 1.0;
    const Image t = transmission_from_depth(depth, 0.16, 10.0);
    CHECK(t(0, 0, 0) == doctest::Approx(1.0));
    CHECK(t(0, 1, 0) == doctest::Approx(std::exp(-0.8)));
    CHECK(t(0, 2, 0) == doctest::Approx(std::exp(-1.6)));
    CHECK(transmission_from_depth(depth, 1000.0)(0, 2, 0) == doctest::Approx(kTransmissionFloor));
}

TEST_CASE("haze parameter errors") {
    HazeParams none;
    CHECK_THROWS_AS(synthesize_haze(Image(2, 2, 3), none), ConfigError);
    CHECK_THROWS_AS(synthesize_haze(Image(2, 2, 3), with_transmission(Image(3, 2, 1, 0.5))), ShapeError);
}

TEST_CASE("denser haze moves every pixel toward the airlight") {
    std::mt19937_64 rng(4);
    const Image j = testing::random_image(rng, 10, 10, 3);
    const Image depth = testing::random_image(rng, 10, 10, 1);
    Image previous = j;
    for (double beta : {0.02, 0.08, 0.16, 0.5, 2.0}) {
        HazeParams p;
        p.beta = beta;
        p.depth = depth;
        p.depth_scale = 5.0;
        const Image hazy = synthesize_haze(j, p);
        for (std::size_t i = 0; i < hazy.size(); ++i) {
            CHECK(std::abs(hazy.data()[i] - 1.0) <= std::abs(previous.data()[i] - 1.0) + 1e-15);
        }
        previous = hazy;
    }
}

TEST_CASE("darken_night examples") {
    std::mt19937_64 rng(5);
    const Image img = testing::random_image(rng, 6, 6, 3);
    CHECK(max_abs_difference(darken_night(img, {1.0, 1.0}), img) < 1e-12);

    const Image gray(3, 3, 3, 0.8);
    const Image dark = darken_night(gray, {0.5, 2.0});
    for (double v : dark.data()) CHECK(v == doctest::Approx(0.16).epsilon(1e-12));

    CHECK_THROWS_AS(darken_night(img, {0.0, 2.0}), DomainError);
    CHECK_THROWS_AS(darken_night(img, {0.5, 0.5}), DomainError);
}

TEST_CASE("value scaling keeps hue on arbitrary colours") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 10; ++trial) {
        const Image img = testing::random_image(rng, 6, 6, 3);
        const Image before = rgb_to_hsv(img);
        const Image after = rgb_to_hsv(darken_night(img, {0.3 + 0.07 * trial, 1.0}));
        for (int y = 0; y < 6; ++y)
            for (int x = 0; x < 6; ++x) CHECK(hue_distance(before(y, x, 0), after(y, x, 0)) < 1e-6);
    }
}

TEST_CASE("gamma keeps hue of gray and primary pixels") {
    Image px(1, 5, 3);
    for (int c = 0; c < 3; ++c) px(0, 0, c) = 0.6;
    px(0, 1, 0) = 0.9;
    px(0, 2, 1) = 0.7;
    px(0, 3, 2) = 0.5;
    px(0, 4, 0) = 0.8;
    px(0, 4, 1) = 0.8;
    const Image before = rgb_to_hsv(px);
    const Image after = rgb_to_hsv(darken_night(px, {0.5, 2.5}));
    for (int x = 0; x < 5; ++x) CHECK(hue_distance(before(0, x, 0), after(0, x, 0)) < 1e-6);
}

TEST_CASE("darkening never raises value") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        const Image img = testing::random_image(rng, 5, 5, 3);
        const NightParams p{0.2 + 0.08 * trial, 1.0 + 0.3 * trial};
        const Image before = rgb_to_hsv(img);
        const Image after = rgb_to_hsv(darken_night(img, p));
        for (int y = 0; y < 5; ++y)
            for (int x = 0; x < 5; ++x) CHECK(after(y, x, 2) <= before(y, x, 2) + 1e-12);
    }
}

}
