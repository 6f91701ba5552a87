#include "support.hpp"

#include "nde/errors.hpp"
#include "nde/networks.hpp"
#include "nde/training.hpp"

using namespace nde;

namespace {

DehazeNetConfig small_config() {
    DehazeNetConfig cfg;
    cfg.layers_per_block = {2, 2, 2};
    cfg.growth_rate = 16;
    cfg.stem_channels = 32;
    cfg.refine_channels = 8;
    return cfg;
}

}  // namespace

TEST_SUITE("dehaze") {

TEST_CASE("dense connectivity arithmetic") {
    DehazeNetConfig cfg;
    CHECK(cfg.layers_per_block == std::array<int, 3>{6, 12, 24});
    CHECK(cfg.growth_rate == 32);
    for (int b = 0; b < 3; ++b) {
        for (int k = 1; k <= cfg.layers_per_block[b]; ++k) {
            CHECK(cfg.dense_layer_input_channels(b, k) == cfg.dense_block_input_channels(b) + (k - 1) * 32);
        }
    }
    CHECK(cfg.dense_block_output_channels(0) == 256);
    CHECK(cfg.dense_block_output_channels(1) == 512);
    CHECK(cfg.dense_block_output_channels(2) == 1024);
    CHECK(cfg.transition_output_channels(0) == 128);
    CHECK(cfg.transition_output_channels(1) == 256);
    CHECK(cfg.transition_output_channels(2) == 512);
    CHECK(cfg.decoder_channels() == std::array<int, 5>{256, 128, 64, 32, 16});
}

TEST_CASE("instantiated dense layers match the arithmetic") {
    DehazeNetConfig cfg;
    DehazeNet net(cfg);
    REQUIRE(net->dense_blocks().size() == 3);
    for (int b = 0; b < 3; ++b) {
        const auto& layers = net->dense_blocks()[b]->layers();
        REQUIRE(static_cast<int>(layers.size()) == cfg.layers_per_block[b]);
        for (int k = 1; k <= cfg.layers_per_block[b]; ++k) {
            CHECK(layers[k - 1]->in_channels() == cfg.dense_layer_input_channels(b, k));
        }
        CHECK(net->dense_blocks()[b]->out_channels() == cfg.dense_block_output_channels(b));
    }
}

TEST_CASE("pyramid pooling arithmetic") {
    DehazeNetConfig cfg;
    CHECK(cfg.pooling_fractions.size() == 4);
    CHECK(cfg.pooling_fractions[0] == 1.0 / 32);
    CHECK(cfg.pooling_fractions[3] == 1.0 / 4);
    CHECK(cfg.pyramid_output_channels(20) == 24);
    DehazeNet net(cfg);
    CHECK(net->pyramid()->out_channels() == cfg.pyramid_output_channels(cfg.refine_channels));

    CHECK(PyramidPoolImpl::pooled_size(64, 64, 1.0 / 32) == std::pair<int64_t, int64_t>{2, 2});
    CHECK(PyramidPoolImpl::pooled_size(64, 64, 1.0 / 4) == std::pair<int64_t, int64_t>{16, 16});
    CHECK(PyramidPoolImpl::pooled_size(16, 40, 1.0 / 32) == std::pair<int64_t, int64_t>{1, 1});

    PyramidPool pool(5, std::vector<double>{1.0 / 32, 1.0 / 16, 1.0 / 8, 1.0 / 4}, 2);
    CHECK(pool->out_channels() == 13);
    const auto out = pool->forward(torch::full({1, 5, 32, 32}, 0.7));
    CHECK(out.size(1) == 13);
    for (int c = 0; c < 8; ++c) {
        const auto ch = out[0][c];
        CHECK((ch - ch.mean()).abs().max().item<double>() < 1e-6);
    }
    CHECK_THROWS_AS(pool->forward(torch::zeros({1, 4, 8, 8})), ShapeError);
}

TEST_CASE("decoder undoes the encoder downsampling") {
    CHECK((1 << 5) == DehazeNetConfig::kDownsample);
    torch::manual_seed(0);
    DehazeNet net(small_config());
    net->eval();
    torch::NoGradGuard g;
    for (auto [h, w] : {std::pair{64, 64}, std::pair{32, 96}, std::pair{50, 70}, std::pair{7, 9}}) {
        const auto y = net->forward(torch::rand({1, 3, h, w}));
        CHECK(y.size(1) == 3);
        CHECK(y.size(2) == h);
        CHECK(y.size(3) == w);
    }
}

TEST_CASE("full-size shape contract and range") {
    torch::manual_seed(1);
    DehazeNet net;
    std::mt19937_64 rng(2);
    const Image r = testing::random_image(rng, 256, 256, 3);
    const Image y = dehaze_reflectance(net, r);
    CHECK(y.height() == 256);
    CHECK(y.width() == 256);
    CHECK(y.channels() == 3);
    CHECK(y.in_unit_range());
}

TEST_CASE("inference is deterministic even with dropout configured") {
    auto cfg = small_config();
    cfg.dropout = 0.5;
    torch::manual_seed(3);
    DehazeNet net(cfg);
    std::mt19937_64 rng(4);
    const Image r = testing::random_image(rng, 32, 32, 3);
    CHECK(max_abs_difference(dehaze_reflectance(net, r), dehaze_reflectance(net, r)) == 0.0);
}

TEST_CASE("encoder is a named scope") {
    DehazeNet net(small_config());
    bool found = false;
    for (const auto& item : net->named_parameters()) {
        if (item.key().rfind("encoder.block1.layer1.", 0) == 0) found = true;
    }
    CHECK(found);
    CHECK(net->encoder().named_parameters().size() > 0);
}

}
