#include "doctest.h"

#include "oracles.hpp"
#include "sat/maskops.hpp"
#include "sat/rng.hpp"

#include <stdexcept>

using namespace sat;
using namespace sat::maskops;

namespace {

BinaryMask mask_from(std::initializer_list<std::initializer_list<int>> rows) {
    BinaryMask m(static_cast<int>(rows.size()), static_cast<int>(rows.begin()->size()));
    int y = 0;
    for (const auto& row : rows) {
        int x = 0;
        for (int v : row) m.at(y, x++) = static_cast<uint8_t>(v);
        ++y;
    }
    return m;
}

ProbabilityMap map_from(std::initializer_list<std::initializer_list<double>> rows) {
    ProbabilityMap p(static_cast<int>(rows.size()), static_cast<int>(rows.begin()->size()));
    int y = 0;
    for (const auto& row : rows) {
        int x = 0;
        for (double v : row) p.at(y, x++) = v;
        ++y;
    }
    return p;
}

} // namespace

TEST_CASE("binarize") {
    ProbabilityMap p(2, 2, 0.9);
    auto m = binarize(p, 0.5);
    CHECK(m.area() == 4);

    ProbabilityMap half(3, 3, 0.5);
    CHECK(binarize(half, 0.5).area() == 9); // inclusive threshold

    const auto p2 = map_from({{0.4, 0.6}, {0.5, 0.1}});
    const auto m2 = binarize(p2, 0.5);
    CHECK(m2.at(0, 0) == 0);
    CHECK(m2.at(0, 1) == 1);
    CHECK(m2.at(1, 0) == 1);
    CHECK(m2.at(1, 1) == 0);

    CHECK_THROWS_AS(binarize(p, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(binarize(p, 1.0), std::invalid_argument);
}

TEST_CASE("connected components conventions") {
    SUBCASE("empty mask") {
        BinaryMask m(4, 4);
        CHECK(connected_components(m).empty());
    }
    SUBCASE("diagonal pixels join under 8-connectivity") {
        const auto m = mask_from({{1, 0}, {0, 1}});
        const auto regions = connected_components(m);
        REQUIRE(regions.size() == 1);
        CHECK(regions[0].area == 2);
    }
    SUBCASE("L-shape plus dot, ordered by area") {
        const auto m = mask_from({{1, 0, 0, 0, 0},
                                  {1, 1, 0, 0, 0},
                                  {0, 0, 0, 0, 1},
                                  {0, 0, 0, 0, 0},
                                  {0, 0, 0, 0, 0}});
        const auto regions = connected_components(m);
        REQUIRE(regions.size() == 2);
        CHECK(regions[0].area == 3);
        CHECK(regions[1].area == 1);
        CHECK(regions[0].seed == std::pair<int, int>{0, 0});
        CHECK(regions[1].seed == std::pair<int, int>{2, 4});
    }
    SUBCASE("equal areas tie-break by topmost-leftmost seed") {
        const auto m = mask_from({{0, 0, 1}, {0, 0, 0}, {1, 0, 0}});
        const auto regions = connected_components(m);
        REQUIRE(regions.size() == 2);
        CHECK(regions[0].seed == std::pair<int, int>{0, 2});
        CHECK(regions[1].seed == std::pair<int, int>{2, 0});
    }
}

TEST_CASE("confidence score") {
    ProbabilityMap p(3, 3, 0.9);
    BinaryMask m(3, 3, 1);
    CHECK(confidence_score(p, m) == doctest::Approx(0.9));

    BinaryMask empty(3, 3);
    CHECK(confidence_score(p, empty) == 0.0);

    auto p2 = map_from({{0.8, 0.6}, {0.1, 0.2}});
    auto m2 = mask_from({{1, 1}, {0, 0}});
    CHECK(confidence_score(p2, m2) == doctest::Approx(0.7));

    ProbabilityMap wrong(2, 3, 0.5);
    CHECK_THROWS_AS(confidence_score(wrong, m2), std::invalid_argument);
}

TEST_CASE("concentration score") {
    const auto single = mask_from({{0, 1, 1}, {0, 1, 0}, {0, 0, 0}});
    CHECK(concentration_score(single) == 1.0);

    const auto split = mask_from({{1, 0, 0, 0, 1}, {1, 0, 0, 0, 0}, {1, 0, 0, 0, 0}});
    CHECK(concentration_score(split) == doctest::Approx(0.75));

    CHECK(concentration_score(BinaryMask(4, 4)) == 0.0);
}

TEST_CASE("state estimation thresholds") {
    // 0.9 * 0.95 = 0.855 > 0.85 -> normal
    auto s = make_state(0.9, 0.95);
    CHECK(s.state_score == doctest::Approx(0.855));
    CHECK(s.is_normal);

    s = make_state(1.0, 1.0);
    CHECK(s.state_score == 1.0);
    CHECK(s.is_normal);

    // truncated object: split mask halves concentration
    s = make_state(0.9, 0.5);
    CHECK(s.state_score == doctest::Approx(0.45));
    CHECK_FALSE(s.is_normal);

    // strict inequality at the threshold
    s = make_state(1.0, 0.85);
    CHECK_FALSE(s.is_normal);

    ProbabilityMap p(2, 2);
    const auto est = estimate_state(p, binarize(p, 0.5));
    CHECK(est.confidence == 0.0);
    CHECK(est.concentration == 0.0);
    CHECK(est.state_score == 0.0);
    CHECK_FALSE(est.is_normal);
}

TEST_CASE("largest component box") {
    SUBCASE("full frame") {
        BinaryMask m(4, 6, 1);
        const auto b = largest_component_box(m);
        REQUIRE(b.has_value());
        CHECK(b->cx == doctest::Approx(2.5));
        CHECK(b->cy == doctest::Approx(1.5));
        CHECK(b->w == 6.0);
        CHECK(b->h == 4.0);
    }
    SUBCASE("largest of two regions, pixel extents") {
        // area-5 region rows 1-2, cols 1-3; area-2 region elsewhere
        const auto m = mask_from({{0, 0, 0, 0, 0, 0},
                                  {0, 1, 1, 1, 0, 0},
                                  {0, 1, 1, 0, 0, 0},
                                  {0, 0, 0, 0, 0, 1},
                                  {0, 0, 0, 0, 0, 1}});
        const auto b = largest_component_box(m);
        REQUIRE(b.has_value());
        CHECK(b->cx == doctest::Approx(2.0));
        CHECK(b->cy == doctest::Approx(1.5));
        CHECK(b->w == 3.0);
        CHECK(b->h == 2.0);
    }
    SUBCASE("empty mask has no box") {
        CHECK_FALSE(largest_component_box(BinaryMask(3, 3)).has_value());
    }
}

TEST_CASE("exhaustive 4x4 masks agree with the flood-fill oracle") {
    Rng rng(99);
    for (uint32_t bits = 0; bits < (1u << 16); ++bits) {
        BinaryMask m(4, 4);
        for (int i = 0; i < 16; ++i) m.values[i] = (bits >> i) & 1;

        const auto regions = connected_components(m);
        const auto oracle_regions = oracles::flood_fill_regions(m);
        REQUIRE(regions.size() == oracle_regions.size());

        size_t impl_total = 0, oracle_total = 0, impl_max = 0, oracle_max = 0;
        for (const auto& r : regions) {
            impl_total += r.area;
            impl_max = std::max(impl_max, r.area);
        }
        for (const auto& r : oracle_regions) {
            oracle_total += r.pixels.size();
            oracle_max = std::max(oracle_max, r.pixels.size());
        }
        REQUIRE(impl_total == oracle_total);
        REQUIRE(impl_max == oracle_max);
        REQUIRE(concentration_score(m) == oracles::concentration_oracle(m));

        ProbabilityMap p(4, 4);
        for (auto& v : p.values) v = rng.uniform();
        REQUIRE(confidence_score(p, m) == oracles::confidence_oracle(p, m));
    }
}

TEST_CASE("score bounds and monotonicity properties") {
    Rng rng(123);
    for (int trial = 0; trial < 300; ++trial) {
        const int h = 2 + static_cast<int>(rng.index(7));
        const int w = 2 + static_cast<int>(rng.index(7));
        ProbabilityMap p(h, w);
        for (auto& v : p.values) v = rng.uniform();
        const auto m = binarize(p, 0.5);
        const auto est = estimate_state(p, m);
        CHECK(est.confidence >= 0.0);
        CHECK(est.confidence <= 1.0);
        CHECK(est.concentration >= 0.0);
        CHECK(est.concentration <= 1.0);
        CHECK(est.state_score <= std::min(est.confidence, est.concentration) + 1e-15);

        // S_cf ignores background probability values
        ProbabilityMap p2 = p;
        for (size_t i = 0; i < p2.values.size(); ++i)
            if (!m.values[i]) p2.values[i] = rng.uniform() * 0.49;
        CHECK(confidence_score(p2, m) == confidence_score(p, m));

        // raising foreground probabilities never flips normal -> abnormal
        ProbabilityMap p3 = p;
        for (size_t i = 0; i < p3.values.size(); ++i)
            if (m.values[i]) p3.values[i] = std::min(1.0, p3.values[i] + rng.uniform() * (1.0 - p3.values[i]));
        const auto est3 = estimate_state(p3, m);
        if (est.is_normal) CHECK(est3.is_normal);
    }
}

TEST_CASE("directional checks mirror the state criterion table") {
    // splitting one blob into two equal halves lowers S_cc from 1.0 to 0.5
    BinaryMask whole(6, 7);
    for (int y = 1; y <= 4; ++y)
        for (int x = 1; x <= 5; ++x) whole.at(y, x) = 1;
    CHECK(concentration_score(whole) == 1.0);
    BinaryMask halves = whole;
    for (int y = 0; y < 6; ++y) halves.at(y, 3) = 0; // split column
    CHECK(concentration_score(halves) == doctest::Approx(0.5));

    // scaling foreground probabilities by alpha scales S_cf by alpha
    ProbabilityMap p(5, 5, 0.0);
    BinaryMask m(5, 5, 0);
    Rng rng(5);
    for (int i = 0; i < 10; ++i) {
        const int idx = static_cast<int>(rng.index(25));
        m.values[idx] = 1;
        p.values[idx] = rng.uniform(0.5, 1.0);
    }
    const double base = confidence_score(p, m);
    const double alpha = 0.37;
    ProbabilityMap scaled = p;
    for (auto& v : scaled.values) v *= alpha;
    CHECK(confidence_score(scaled, m) == doctest::Approx(alpha * base).epsilon(1e-12));
}
