#include "doctest.h"

#include "oracles.hpp"
#include "sat/eval.hpp"
#include "sat/rng.hpp"

#include <cmath>
#include <stdexcept>

using namespace sat;
using namespace sat::eval;
using sat::maskops::BinaryMask;

namespace {

BinaryMask rect_mask(int h, int w, int y0, int x0, int y1, int x1) {
    BinaryMask m(h, w);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) m.at(y, x) = 1;
    return m;
}

BinaryMask random_mask(int h, int w, double density, Rng& rng) {
    BinaryMask m(h, w);
    for (auto& v : m.values) v = rng.uniform() < density ? 1 : 0;
    return m;
}

} // namespace

TEST_CASE("region J basics") {
    const auto a = rect_mask(10, 10, 2, 2, 5, 5);
    CHECK(region_J(a, a) == 1.0);

    const auto b = rect_mask(10, 10, 7, 7, 9, 9);
    CHECK(region_J(a, b) == 0.0);

    // pred covers exactly half of gt, no false positives
    const auto gt = rect_mask(10, 10, 2, 2, 5, 5);   // 16 px
    const auto half = rect_mask(10, 10, 2, 2, 3, 5); // 8 px
    CHECK(region_J(half, gt) == doctest::Approx(0.5));

    CHECK(region_J(BinaryMask(4, 4), BinaryMask(4, 4)) == 1.0);
    CHECK_THROWS_AS(region_J(BinaryMask(4, 4), BinaryMask(5, 4)), std::invalid_argument);
}

TEST_CASE("boundary F basics") {
    const auto a = rect_mask(20, 20, 5, 5, 12, 12);
    CHECK(boundary_F(a, a, 2) == 1.0);

    // displaced by exactly the tolerance: still a perfect match (inclusive)
    const auto b = rect_mask(20, 20, 7, 5, 14, 12);
    CHECK(boundary_F(a, b, 2) == 1.0);
    CHECK(boundary_F(a, b, 1) < 1.0);

    CHECK(boundary_F(BinaryMask(8, 8), a, 2) == 0.0);
    CHECK(boundary_F(a, BinaryMask(20, 20), 2) == 0.0);
    CHECK(boundary_F(BinaryMask(8, 8), BinaryMask(8, 8), 2) == 1.0);

    // default tolerance: ceil(0.008 * diagonal)
    CHECK(default_boundary_tolerance(256, 256) == 3);
    CHECK(default_boundary_tolerance(480, 854) == 8);
}

TEST_CASE("J and F agree with brute-force oracles on random masks") {
    Rng rng(31);
    for (int trial = 0; trial < 500; ++trial) {
        const int h = 2 + static_cast<int>(rng.index(7));
        const int w = 2 + static_cast<int>(rng.index(7));
        const auto pred = random_mask(h, w, rng.uniform(0.15, 0.7), rng);
        const auto gt = random_mask(h, w, rng.uniform(0.15, 0.7), rng);
        const int tol = 1 + static_cast<int>(rng.index(3));
        REQUIRE(region_J(pred, gt) == oracles::region_j_oracle(pred, gt));
        REQUIRE(boundary_F(pred, gt, tol) == doctest::Approx(oracles::boundary_f_oracle(pred, gt, tol))
                                                 .epsilon(1e-12));
    }
}

TEST_CASE("boundary F agrees with the oracle on 32x32 structured masks") {
    Rng rng(37);
    for (int trial = 0; trial < 40; ++trial) {
        BinaryMask a(32, 32), b(32, 32);
        // union of random rectangles gives structured boundaries
        for (int r = 0; r < 3; ++r) {
            const int y0 = static_cast<int>(rng.index(24)), x0 = static_cast<int>(rng.index(24));
            const int y1 = y0 + 2 + static_cast<int>(rng.index(7));
            const int x1 = x0 + 2 + static_cast<int>(rng.index(7));
            for (int y = y0; y <= std::min(31, y1); ++y)
                for (int x = x0; x <= std::min(31, x1); ++x)
                    (r < 2 ? a : b).at(y, x) = 1;
        }
        for (int r = 0; r < 2; ++r) {
            const int y0 = static_cast<int>(rng.index(24)), x0 = static_cast<int>(rng.index(24));
            for (int y = y0; y <= std::min(31, y0 + 6); ++y)
                for (int x = x0; x <= std::min(31, x0 + 4); ++x) b.at(y, x) = 1;
        }
        const int tol = 1 + static_cast<int>(rng.index(4));
        REQUIRE(boundary_F(a, b, tol) ==
                doctest::Approx(oracles::boundary_f_oracle(a, b, tol)).epsilon(1e-12));
    }
}

TEST_CASE("metric symmetry and translation invariance") {
    Rng rng(41);
    for (int trial = 0; trial < 50; ++trial) {
        const auto a = random_mask(12, 12, 0.3, rng);
        const auto b = random_mask(12, 12, 0.3, rng);
        CHECK(region_J(a, b) == region_J(b, a));
        CHECK(boundary_F(a, b, 2) == doctest::Approx(boundary_F(b, a, 2)));

        // translate both masks together inside a larger canvas
        BinaryMask ta(20, 20), tb(20, 20);
        for (int y = 0; y < 12; ++y)
            for (int x = 0; x < 12; ++x) {
                ta.at(y + 4, x + 5) = a.at(y, x);
                tb.at(y + 4, x + 5) = b.at(y, x);
            }
        CHECK(region_J(ta, tb) == doctest::Approx(region_J(a, b)));
    }
}

TEST_CASE("decay of per-frame J") {
    SUBCASE("constant J has zero decay") {
        std::vector<double> j(40, 0.8);
        CHECK(decay_of(j) == doctest::Approx(0.0));
    }
    SUBCASE("linear ramp 1 -> 0 over 100 frames decays by 0.75") {
        std::vector<double> j(100);
        for (int i = 0; i < 100; ++i) j[i] = 1.0 - i / 100.0;
        CHECK(decay_of(j) == doctest::Approx(0.75).epsilon(1e-12));
    }
    SUBCASE("remainder frames go to the last bin") {
        // n = 10: bins of 2, last bin = frames 6..9
        std::vector<double> j{1, 1, 0, 0, 0, 0, 0.5, 0.5, 0.5, 0.5};
        CHECK(decay_of(j) == doctest::Approx(1.0 - 0.5));
    }
    SUBCASE("too few frames") {
        CHECK(decay_of({0.5, 0.9, 0.1}) == 0.0);
    }
}

TEST_CASE("sequence evaluation excludes the first frame") {
    std::vector<BinaryMask> gts, preds;
    for (int f = 0; f < 5; ++f) {
        gts.push_back(rect_mask(16, 16, 3, 3, 9, 9));
        // frame 0 prediction is deliberately wrong; it must not be scored
        preds.push_back(f == 0 ? BinaryMask(16, 16) : rect_mask(16, 16, 3, 3, 9, 9));
    }
    const auto r = evaluate_sequence(preds, gts);
    REQUIRE(r.per_frame_J.size() == 4);
    CHECK(r.J_mean == 1.0);
    CHECK(r.F_mean == 1.0);
    CHECK(r.JF_mean == 1.0);
    CHECK(r.J_decay == 0.0);

    CHECK_THROWS_AS(evaluate_sequence(preds, std::vector<BinaryMask>(4, BinaryMask(16, 16))),
                    std::invalid_argument);
}

TEST_CASE("dataset report averages sequences and checks the JF formula") {
    SequenceResult a;
    a.J_mean = 0.686;
    a.F_mean = 0.760;
    a.JF_mean = (a.J_mean + a.F_mean) / 2;
    CHECK(a.JF_mean == doctest::Approx(0.723));

    SequenceResult b;
    b.J_mean = 0.5;
    b.F_mean = 0.7;
    b.JF_mean = 0.6;
    const auto rep = evaluate_dataset({a, b});
    CHECK(rep.sequences == 2);
    CHECK(rep.J_mean == doctest::Approx((0.686 + 0.5) / 2));
    CHECK(rep.F_mean == doctest::Approx((0.760 + 0.7) / 2));
    CHECK(rep.JF_mean == doctest::Approx((rep.J_mean + rep.F_mean) / 2));
}
