#include "doctest.h"

#include "gradcheck.hpp"
#include "sat/segnet.hpp"
#include "sat/rng.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

using namespace sat;
using namespace sat::segnet;

namespace {

Image random_image(int size, Rng& rng) {
    Image img(3, size, size);
    for (auto& v : img.data) v = rng.uniform();
    return img;
}

Image constant_image(int size, double value) { return Image(3, size, size, value); }

void zero_params(SegNet& net) {
    for (auto& p : net.params()) std::fill(p->value.data.begin(), p->value.data.end(), 0.0);
}

// Makes the similarity encoder an exact intensity subsampler: the first conv
// averages RGB through a centered delta kernel, later stages pass channel 0
// through. Embedding pixel p then equals relu(mean_rgb(input[16p]) - 0.5).
void set_identity_similarity(SegNet& net) {
    auto w0 = net.param("similarity.s0.conv0.w");
    for (int c = 0; c < 3; ++c)
        w0->value.data[((0 * 3 + c) * 3 + 1) * 3 + 1] = 1.0 / 3.0;
    for (int s = 1; s < 4; ++s) {
        auto w = net.param("similarity.s" + std::to_string(s) + ".conv0.w");
        const int cin = w->value.shape[1];
        w->value.data[((0 * cin + 0) * 3 + 1) * 3 + 1] = 1.0;
    }
}

} // namespace

TEST_CASE("config validation") {
    CHECK_THROWS_AS(NetworkConfig::named_preset("nope"), std::invalid_argument);
    NetworkConfig bad;
    bad.saliency_input = 256; // even
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    NetworkConfig bad2;
    bad2.decoder_widths = {8, 8};
    CHECK_THROWS_AS(bad2.validate(), std::invalid_argument);
    CHECK_NOTHROW(NetworkConfig::named_preset("desk").validate());
    CHECK_NOTHROW(NetworkConfig::named_preset("toy").validate());
}

TEST_CASE("encoder output sizes follow the conv arithmetic") {
    SUBCASE("desk resolution") {
        NetworkConfig cfg = NetworkConfig::named_preset("desk");
        cfg.seed = 3;
        SegNet net(cfg);
        const auto f = net.saliency_encode(SegNet::image_input(constant_image(257, 0.0)));
        CHECK(f.s4->value.shape == std::vector<int>{cfg.saliency_widths[1], 65, 65});
        CHECK(f.s8->value.shape == std::vector<int>{cfg.saliency_widths[2], 33, 33});
        CHECK(f.s16->value.shape == std::vector<int>{cfg.saliency_widths[3], 17, 17});
        CHECK(NetworkConfig::feature_size(257, 4) == 65);
        CHECK(NetworkConfig::feature_size(303, 16) == 19);
        CHECK(NetworkConfig::feature_size(127, 16) == 8);
    }
    SUBCASE("wrong input resolution rejected") {
        SegNet net(NetworkConfig::named_preset("toy"));
        CHECK_THROWS_AS(net.saliency_encode(SegNet::image_input(constant_image(31, 0.0))),
                        std::invalid_argument);
    }
}

TEST_CASE("zero input produces finite features") {
    SegNet net(NetworkConfig::named_preset("toy"));
    const auto f = net.saliency_encode(SegNet::image_input(constant_image(33, 0.0)));
    CHECK(nn::all_finite(f.s4->value));
    CHECK(nn::all_finite(f.s8->value));
    CHECK(nn::all_finite(f.s16->value));
}

TEST_CASE("receptive field bounds hold at stride 4") {
    NetworkConfig cfg = NetworkConfig::named_preset("toy");
    cfg.seed = 11;
    SegNet net(cfg);
    Rng rng(4);
    Image base = random_image(33, rng);
    const auto f0 = net.saliency_encode(SegNet::image_input(base));

    // stride-4 location p: center 4p, radius 3 (two k3 convs at jumps 1,2)
    const int p = 4;
    const int center = 4 * p, radius = 3;
    Image probe = base;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 33; ++y)
            for (int x = 0; x < 33; ++x)
                if (std::max(std::abs(y - center), std::abs(x - center)) > radius + 1)
                    probe.at(c, y, x) = rng.uniform();
    const auto f1 = net.saliency_encode(SegNet::image_input(probe));
    const int w4 = f1.s4->value.shape[2];
    for (int c = 0; c < f1.s4->value.shape[0]; ++c)
        CHECK(f1.s4->value.data[(static_cast<size_t>(c) * w4 + p) * w4 + p] ==
              f0.s4->value.data[(static_cast<size_t>(c) * w4 + p) * w4 + p]);
}

TEST_CASE("correlation peaks where the template matches the search window") {
    NetworkConfig cfg = NetworkConfig::named_preset("desk");
    cfg.seed = 5;
    SegNet net(cfg);
    zero_params(net);
    set_identity_similarity(net);

    // bright dots on the 16-pixel sampling grid inside a 127x127 window at
    // embedding offset (3, 6)
    Rng rng(9);
    Image search = constant_image(303, 0.0);
    const int oy = 3, ox = 6;
    for (int a = 0; a < 8; ++a)
        for (int b = 0; b < 8; ++b)
            if (rng.uniform() < 0.45) {
                const double v = rng.uniform(0.8, 1.0);
                for (int c = 0; c < 3; ++c) search.at(c, 16 * (oy + a), 16 * (ox + b)) = v;
            }
    Image templ(3, 127, 127);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 127; ++y)
            for (int x = 0; x < 127; ++x) templ.at(c, y, x) = search.at(c, 16 * oy + y, 16 * ox + x);

    const auto temb = net.embed_template(SegNet::image_input(templ));
    const auto semb = net.embed_search(SegNet::image_input(search));
    const auto corr = nn::xcorr_depthwise(semb, temb);
    REQUIRE(corr->value.shape == std::vector<int>{cfg.similarity_widths[3], 12, 12});
    int best = 0;
    for (int i = 1; i < 144; ++i)
        if (corr->value.data[i] > corr->value.data[best]) best = i;
    CHECK(best / 12 == oy);
    CHECK(best % 12 == ox);
}

TEST_CASE("constant search input gives a spatially uniform correlation map") {
    NetworkConfig cfg = NetworkConfig::named_preset("desk");
    cfg.seed = 6;
    SegNet net(cfg);
    zero_params(net);
    set_identity_similarity(net);
    const auto temb = net.embed_template(SegNet::image_input(constant_image(127, 0.9)));
    const auto semb = net.embed_search(SegNet::image_input(constant_image(303, 0.9)));
    const auto corr = nn::xcorr_depthwise(semb, temb);
    const double first = corr->value.data[0];
    for (double v : corr->value.data) CHECK(v == doctest::Approx(first).epsilon(1e-12));
}

TEST_CASE("fuse is an elementwise sum") {
    Rng rng(7);
    nn::Tensor ta({4, 3, 3}), tb({4, 3, 3}), tg({4, 3, 3});
    for (auto& v : ta.data) v = rng.normal();
    for (auto& v : tg.data) v = rng.normal();
    auto a = nn::constant(ta), b = nn::constant(tb), g = nn::constant(tg);

    SUBCASE("two zero inputs pass the third through") {
        const auto out = fuse(a, b, nn::constant(nn::Tensor({4, 3, 3})));
        for (size_t i = 0; i < ta.data.size(); ++i) CHECK(out->value.data[i] == ta.data[i]);
    }
    SUBCASE("commutativity") {
        const auto o1 = fuse(a, b, g);
        const auto o2 = fuse(b, a, g);
        for (size_t i = 0; i < ta.data.size(); ++i) CHECK(o1->value.data[i] == o2->value.data[i]);
    }
    SUBCASE("shape mismatch rejected") {
        CHECK_THROWS_AS(fuse(a, b, nn::constant(nn::Tensor({4, 2, 3}))), std::invalid_argument);
    }
    SUBCASE("analytic gradient through fuse matches finite differences") {
        auto pa = nn::parameter(ta, "pa");
        auto pg = nn::parameter(tg, "pg");
        nn::Tensor target({4, 3, 3});
        for (auto& v : target.data) v = rng.uniform() > 0.5 ? 1.0 : 0.0;
        auto build = [&] { return nn::bce_with_logits_mean(fuse(pa, b, pg), target); };
        auto loss = build();
        pa->zero_grad();
        pg->zero_grad();
        nn::backward(loss);
        for (auto& p : {pa, pg})
            for (size_t i = 0; i < p->value.size(); ++i) {
                const double fd = gradcheck::central_diff(p, i, [&] { return build()->value.data[0]; });
                CHECK(gradcheck::rel_err(p->grad.data[i], fd) < 1e-4);
            }
    }
}

TEST_CASE("full forward: shapes, ranges, determinism, ablation hooks") {
    NetworkConfig cfg = NetworkConfig::named_preset("toy");
    cfg.seed = 8;
    SegNet net(cfg);
    Rng rng(10);
    const Image sal = random_image(33, rng);
    const Image search = random_image(33, rng);
    const Image templ_img = random_image(17, rng);
    const Image glob = random_image(17, rng);
    const auto temb = nn::detach(net.embed_template(SegNet::image_input(templ_img)));
    const auto graw = nn::detach(net.global_encode(SegNet::image_input(glob)));

    const auto g1 = net.forward(sal, search, temb, graw);
    const auto g2 = net.forward(sal, search, temb, graw);

    // strict sigmoid range
    for (double v : g1.output.prob_stride4.values) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
    // stride-4 grid is 4x finer than the stride-16 grid (align-corners sizes)
    CHECK(g1.output.prob_stride4.height - 1 == 4 * (g1.output.aux_stride16.height - 1));
    CHECK(g1.output.aux_stride8.height - 1 == 2 * (g1.output.aux_stride16.height - 1));

    // determinism
    CHECK(g1.output.prob_stride4.values == g2.output.prob_stride4.values);
    CHECK(g1.output.reg_box_crop.cx == g2.output.reg_box_crop.cx);

    // regression box inside the similarity crop after clipping
    Rng rng2(11);
    for (int t = 0; t < 20; ++t) {
        const auto g = net.forward(random_image(33, rng2), random_image(33, rng2), temb, graw);
        const auto c = g.output.reg_box_crop.corners();
        CHECK(c[0] >= 0.0);
        CHECK(c[1] >= 0.0);
        CHECK(c[2] <= 32.0);
        CHECK(c[3] <= 32.0);
        CHECK(g.output.reg_box_crop.w > 0.0);
    }

    // global feature influences the output unless ablated away
    const auto with_g = net.forward(sal, search, temb, graw);
    const auto no_g = net.forward(sal, search, temb, nullptr);
    double diff = 0.0;
    for (size_t i = 0; i < with_g.output.prob_stride4.values.size(); ++i)
        diff += std::abs(with_g.output.prob_stride4.values[i] - no_g.output.prob_stride4.values[i]);
    CHECK(diff > 0.0);

    NetworkConfig ab = cfg;
    ab.use_global = false;
    SegNet net_ab(ab);
    // copy weights so only the wiring differs
    for (size_t i = 0; i < net.params().size(); ++i)
        net_ab.params()[i]->value = net.params()[i]->value;
    const auto ab_with = net_ab.forward(sal, search, temb, graw);
    const auto ab_without = net_ab.forward(sal, search, temb, nullptr);
    CHECK(ab_with.output.prob_stride4.values == ab_without.output.prob_stride4.values);

    NetworkConfig ac = cfg;
    ac.use_correlation = false;
    SegNet net_ac(ac);
    for (size_t i = 0; i < net.params().size(); ++i)
        net_ac.params()[i]->value = net.params()[i]->value;
    const auto c1 = net_ac.forward(sal, search, temb, graw);
    const auto c2 = net_ac.forward(sal, random_image(33, rng2), temb, graw);
    CHECK(c1.output.prob_stride4.values == c2.output.prob_stride4.values);
}

TEST_CASE("no NaN or Inf across 1000 random weight draws") {
    Rng rng(12);
    for (int draw = 0; draw < 1000; ++draw) {
        NetworkConfig cfg = NetworkConfig::named_preset("toy");
        cfg.seed = 1000 + draw;
        SegNet net(cfg);
        const Image sal = random_image(33, rng);
        const Image search = random_image(33, rng);
        const auto temb = net.embed_template(SegNet::image_input(random_image(17, rng)));
        const auto graw = net.global_encode(SegNet::image_input(random_image(17, rng)));
        const auto g = net.forward(sal, search, temb, graw);
        REQUIRE(nn::all_finite(g.logits4->value));
        REQUIRE(nn::all_finite(g.logits8->value));
        REQUIRE(nn::all_finite(g.logits16->value));
        REQUIRE(nn::all_finite(g.quality_logits->value));
        REQUIRE(std::isfinite(g.output.reg_box_crop.cx));
    }
}

TEST_CASE("checkpoint round trip is bit exact") {
    NetworkConfig cfg = NetworkConfig::named_preset("toy");
    cfg.seed = 21;
    SegNet net(cfg);
    const auto path = (std::filesystem::temp_directory_path() / "sat_test_ckpt.bin").string();
    net.save_checkpoint(path);
    const auto loaded = SegNet::load_checkpoint(path);
    REQUIRE(loaded->params().size() == net.params().size());
    for (size_t i = 0; i < net.params().size(); ++i) {
        CHECK(loaded->params()[i]->name == net.params()[i]->name);
        REQUIRE(loaded->params()[i]->value.data == net.params()[i]->value.data); // bitwise
    }
    CHECK(loaded->config().to_text() == net.config().to_text());

    Rng rng(22);
    const Image sal = random_image(33, rng), search = random_image(33, rng);
    const auto temb1 = net.embed_template(SegNet::image_input(constant_image(17, 0.4)));
    const auto temb2 = loaded->embed_template(SegNet::image_input(constant_image(17, 0.4)));
    const auto o1 = net.forward(sal, search, temb1, nullptr);
    const auto o2 = loaded->forward(sal, search, temb2, nullptr);
    CHECK(o1.output.prob_stride4.values == o2.output.prob_stride4.values);
    std::filesystem::remove(path);
}

TEST_CASE("trainable flags follow freeze prefixes") {
    SegNet net(NetworkConfig::named_preset("toy"));
    net.set_trainable("similarity.", false);
    net.set_trainable("reg.", false);
    int frozen = 0, trainable = 0;
    for (const auto& p : net.params()) {
        if (p->name.rfind("similarity.", 0) == 0 || p->name.rfind("reg.", 0) == 0) {
            CHECK_FALSE(p->trainable);
            ++frozen;
        } else {
            CHECK(p->trainable);
            ++trainable;
        }
    }
    CHECK(frozen > 0);
    CHECK(trainable > 0);
}
