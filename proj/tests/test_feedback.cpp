#include "doctest.h"

#include "sat/feedback.hpp"
#include "sat/rng.hpp"

#include <cmath>
#include <stdexcept>

using namespace sat;
using namespace sat::feedback;
using sat::geometry::Box;

TEST_CASE("smooth_box fixed point and limits") {
    SmoothedBoxState sm{{50, 50, 20, 20}, 0.3};
    const Box same = smooth_box(sm, {50, 50, 20, 20});
    CHECK(same.cx == doctest::Approx(50.0));
    CHECK(same.w == doctest::Approx(20.0));
    CHECK(same.h == doctest::Approx(20.0));

    SmoothedBoxState full{{0, 0, 10, 10}, 1.0};
    const Box out = smooth_box(full, {5, -3, 40, 12});
    CHECK(out.cx == doctest::Approx(5.0));
    CHECK(out.cy == doctest::Approx(-3.0));
    CHECK(out.w == doctest::Approx(40.0));
    CHECK(out.h == doctest::Approx(12.0));
}

TEST_CASE("smooth_box blends center linearly and scale/ratio in log domain") {
    SmoothedBoxState sm{{0, 0, 10, 10}, 0.3};
    const Box out = smooth_box(sm, {10, 0, 40, 10});
    CHECK(out.cx == doctest::Approx(3.0));
    CHECK(out.cy == doctest::Approx(0.0));
    // s: 10 -> 20, log blend = 10^0.7 * 20^0.3 ; r: 1 -> 4, log blend = 4^0.3
    const double s = std::pow(10.0, 0.7) * std::pow(20.0, 0.3);
    const double r = std::pow(4.0, 0.3);
    CHECK(std::sqrt(out.w * out.h) == doctest::Approx(s).epsilon(1e-9));
    CHECK(out.w / out.h == doctest::Approx(r).epsilon(1e-9));
    CHECK(s == doctest::Approx(12.311444133449163).epsilon(1e-9));
    CHECK(r == doctest::Approx(1.5157165665103982).epsilon(1e-9));
    // state advanced
    CHECK(sm.box.cx == doctest::Approx(3.0));
}

TEST_CASE("smooth_box ignores degenerate updates") {
    SmoothedBoxState sm{{5, 6, 7, 8}, 0.5};
    const Box out = smooth_box(sm, {0, 0, -1, 3});
    CHECK(out.cx == 5.0);
    CHECK(out.w == 7.0);
    CHECK(sm.box.h == 8.0);
}

TEST_CASE("smooth_box keeps sizes positive") {
    Rng rng(3);
    SmoothedBoxState sm{{0, 0, 5, 5}, 0.3};
    for (int i = 0; i < 500; ++i) {
        const Box reg{rng.uniform(-100, 100), rng.uniform(-100, 100), rng.uniform(0.01, 200),
                      rng.uniform(0.01, 200)};
        const Box out = smooth_box(sm, reg);
        CHECK(out.w > 0.0);
        CHECK(out.h > 0.0);
    }
}

TEST_CASE("select_box switching rule truth table") {
    const Box reg{10, 10, 8, 8};
    const Box mask_box{20, 20, 6, 6};
    for (const bool normal : {false, true})
        for (const bool have_mask : {false, true}) {
            SmoothedBoxState sm{{10, 10, 8, 8}, 0.3};
            const auto state = maskops::make_state(normal ? 0.95 : 0.2, 1.0);
            REQUIRE(state.is_normal == normal);
            const auto [box, tag] =
                select_box(state, have_mask ? std::optional<Box>(mask_box) : std::nullopt, reg, sm);
            const bool expect_mask = normal && have_mask;
            CHECK((tag == BoxStrategy::kMask) == expect_mask);
            if (expect_mask) CHECK(box.cx == doctest::Approx(20.0));
            else CHECK(box.cx == doctest::Approx(10.0)); // smoothed fixed point
        }
}

TEST_CASE("select_box smooths the regression state in both branches") {
    // abnormal: returned box is the blend
    SmoothedBoxState sm{{0, 0, 10, 10}, 0.3};
    const auto state = maskops::make_state(0.2, 1.0);
    const auto [box, tag] = select_box(state, std::nullopt, {10, 0, 10, 10}, sm);
    CHECK(tag == BoxStrategy::kRegression);
    CHECK(box.cx == doctest::Approx(3.0));

    // normal with a mask box: the smoothed state still advances (warm fallback)
    SmoothedBoxState sm2{{0, 0, 10, 10}, 0.3};
    const auto s2 = maskops::make_state(0.99, 1.0);
    const auto [box2, tag2] = select_box(s2, Box{50, 50, 4, 4}, {10, 0, 10, 10}, sm2);
    CHECK(tag2 == BoxStrategy::kMask);
    CHECK(box2.cx == doctest::Approx(50.0));
    CHECK(sm2.box.cx == doctest::Approx(3.0));
}

namespace {

GlobalFeature make_global(int c, int h, int w, double fill, double mu = 0.5) {
    GlobalFeature g;
    g.channels = c;
    g.height = h;
    g.width = w;
    g.values.assign(static_cast<size_t>(c) * h * w, fill);
    g.step = mu;
    g.initialized = true;
    return g;
}

} // namespace

TEST_CASE("update_global follows the EMA recurrence") {
    SUBCASE("zero state score leaves the feature unchanged") {
        auto g = make_global(2, 3, 3, 0.7);
        const auto before = g.values;
        CHECK(update_global(g, std::vector<double>(18, 123.0), 0.0));
        CHECK(g.values == before);
    }
    SUBCASE("full-trust step from zero reaches half the input") {
        auto g = make_global(1, 2, 2, 0.0);
        CHECK(update_global(g, std::vector<double>(4, 2.0), 1.0));
        for (double v : g.values) CHECK(v == doctest::Approx(1.0));
    }
    SUBCASE("k constant steps give the closed form 1 - 2^-k") {
        auto g = make_global(1, 2, 2, 0.0);
        const std::vector<double> f(4, 3.0);
        for (int k = 1; k <= 10; ++k) {
            update_global(g, f, 1.0);
            const double expected = (1.0 - std::pow(2.0, -k)) * 3.0;
            for (double v : g.values) CHECK(v == doctest::Approx(expected).epsilon(1e-12));
        }
    }
    SUBCASE("shape mismatch rejected, non-finite skipped") {
        auto g = make_global(1, 2, 2, 0.0);
        CHECK_THROWS_AS(update_global(g, std::vector<double>(5, 0.0), 1.0), std::invalid_argument);
        std::vector<double> bad(4, 1.0);
        bad[2] = std::nan("");
        CHECK_FALSE(update_global(g, bad, 1.0));
        CHECK(g.skipped_updates == 1);
        for (double v : g.values) CHECK(v == 0.0);
    }
}

TEST_CASE("update_global is a convex combination") {
    Rng rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        const double a = rng.uniform(-2, 0), b = rng.uniform(0.5, 3);
        auto g = make_global(1, 4, 4, 0.0, rng.uniform(0.1, 1.0));
        for (auto& v : g.values) v = rng.uniform(a, b);
        std::vector<double> f(16);
        for (auto& v : f) v = rng.uniform(a, b);
        update_global(g, f, rng.uniform());
        for (double v : g.values) {
            CHECK(v >= a - 1e-12);
            CHECK(v <= b + 1e-12);
        }
    }
}

TEST_CASE("constant input contracts the gap by (1 - s*mu) per step") {
    auto g = make_global(1, 3, 3, 0.2, 0.5);
    const std::vector<double> f(9, 1.0);
    const double s = 0.8;
    double gap = std::abs(0.2 - 1.0);
    for (int k = 0; k < 30; ++k) {
        update_global(g, f, s);
        gap *= 1.0 - s * 0.5;
        for (double v : g.values) CHECK(std::abs(v - 1.0) == doctest::Approx(gap).epsilon(1e-10));
    }
}

TEST_CASE("init_global filters the background and resizes") {
    Image crop(3, 8, 8);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x) crop.at(c, y, x) = 0.1 * (c + 1) + 0.05 * x;
    maskops::BinaryMask mask(8, 8);
    for (int y = 2; y < 6; ++y)
        for (int x = 2; x < 6; ++x) mask.at(y, x) = 1;

    Image seen;
    auto extractor = [&](const Image& img) {
        seen = img;
        GlobalFeature g;
        g.channels = img.channels;
        g.height = img.height;
        g.width = img.width;
        g.values = img.data;
        return g;
    };
    const auto g = init_global(crop, mask, extractor, 8);
    CHECK(g.initialized);
    // identical inside the mask, zero outside
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x) {
                if (mask.at(y, x)) CHECK(seen.at(c, y, x) == doctest::Approx(crop.at(c, y, x)));
                else CHECK(seen.at(c, y, x) == 0.0);
            }

    CHECK_THROWS_AS(init_global(crop, maskops::BinaryMask(8, 8), extractor, 8), std::invalid_argument);

    // full-ones mask passes the crop through unfiltered
    maskops::BinaryMask ones(8, 8, 1);
    init_global(crop, ones, extractor, 8);
    for (size_t i = 0; i < crop.data.size(); ++i) CHECK(seen.data[i] == doctest::Approx(crop.data[i]));
}
