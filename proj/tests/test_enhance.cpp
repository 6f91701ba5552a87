#include "support.hpp"

#include "nde/errors.hpp"
#include "nde/networks.hpp"
#include "nde/training.hpp"

using namespace nde;

namespace {

torch::Tensor rot180(const torch::Tensor& x) { return x.flip({-2, -1}); }

}  // namespace

TEST_SUITE("enhancement") {

TEST_CASE("default depth is eleven convolutions") {
    EnhanceNetConfig cfg;
    CHECK(cfg.num_layers == 11);
    EnhanceNet net(cfg);
    CHECK(net->conv_layer_count() == 11);
    int convs = 0;
    for (const auto& m : net->modules(false)) convs += m->as<torch::nn::Conv2d>() != nullptr;
    CHECK(convs == 11);
    CHECK(net->residual_layers()->size() == 9);
}

TEST_CASE("output shape and range") {
    torch::manual_seed(1);
    EnhanceNet net(EnhanceNetConfig{11, 8, 3});
    std::mt19937_64 rng(2);
    const Image i = testing::random_image(rng, 9, 13, 1);
    const Image r = testing::random_image(rng, 9, 13, 3);
    const Image y = enhance_illumination(net, i, r);
    CHECK(y.channels() == 1);
    CHECK(y.same_extent(i));
    CHECK(y.in_unit_range());
    CHECK(max_abs_difference(y, enhance_illumination(net, i, r)) == 0.0);

    // Large weights still map into [0,1].
    {
        torch::NoGradGuard g;
        for (auto& p : net->parameters()) p.mul_(50.0);
    }
    CHECK(enhance_illumination(net, i, r).in_unit_range());
}

TEST_CASE("misaligned inputs are rejected") {
    EnhanceNet net(EnhanceNetConfig{5, 4, 3});
    CHECK_THROWS_AS(net->forward(torch::rand({1, 1, 8, 8}), torch::rand({1, 3, 8, 9})), ShapeError);
    CHECK_THROWS_AS(net->forward(torch::rand({1, 3, 8, 8}), torch::rand({1, 3, 8, 8})), ShapeError);
}

TEST_CASE("zeroed residual layers pass the input projection through") {
    torch::manual_seed(3);
    EnhanceNet net(EnhanceNetConfig{11, 8, 3});
    {
        torch::NoGradGuard g;
        for (const auto& layer : *net->residual_layers()) {
            auto* conv = layer->as<torch::nn::Conv2d>();
            conv->weight.zero_();
            conv->bias.zero_();
        }
    }
    const auto i = torch::rand({2, 1, 10, 10});
    const auto r = torch::rand({2, 3, 10, 10});
    CHECK(torch::equal(net->features(i, r), net->input_projection(i, r)));
}

TEST_CASE("equivariant to 180 degree rotation with symmetric kernels") {
    torch::manual_seed(4);
    EnhanceNet net(EnhanceNetConfig{11, 8, 3});
    {
        torch::NoGradGuard g;
        for (const auto& m : net->modules(false)) {
            if (auto* conv = m->as<torch::nn::Conv2d>()) conv->weight.copy_(0.5 * (conv->weight + rot180(conv->weight)));
        }
    }
    net->to(torch::kFloat64);
    const auto i = torch::rand({1, 1, 11, 14}, torch::kFloat64);
    const auto r = torch::rand({1, 3, 11, 14}, torch::kFloat64);
    const auto a = net->forward(rot180(i), rot180(r));
    const auto b = rot180(net->forward(i, r));
    CHECK((a - b).abs().max().item<double>() < 1e-12);
}

}
