#include "support.hpp"

#include "nde/archive.hpp"
#include "nde/checkpoint.hpp"
#include "nde/errors.hpp"
#include "nde/networks.hpp"

#include <fstream>

using namespace nde;

TEST_SUITE("checkpoint") {

TEST_CASE("archive round trip") {
    testing::TempDir dir("ar");
    Archive ar;
    ar.meta["note"] = "hello";
    const std::vector<float> v = {1.f, -2.5f, 3.25f, 0.f, 7.f, 8.f};
    ar.put_f32("a/x", {2, 3}, v);
    const std::vector<std::byte> raw = {std::byte{1}, std::byte{0}, std::byte{255}};
    ar.put_bytes("b/raw", raw);
    ar.save(dir / "t.nde");

    const Archive back = Archive::load(dir / "t.nde");
    CHECK(back.meta["note"] == "hello");
    CHECK(back.size() == 2);
    CHECK(back.has_scope("a"));
    CHECK_FALSE(back.has_scope("c"));
    const auto& x = back.at("a/x");
    CHECK(x.dtype == DType::F32);
    CHECK(x.shape == std::vector<std::int64_t>{2, 3});
    CHECK(x.numel() == 6);
    CHECK(std::memcmp(x.bytes.data(), v.data(), 24) == 0);
    CHECK((back.at("b/raw").bytes == raw));
    CHECK(back.names("a/") == std::vector<std::string>{"a/x"});
    CHECK_THROWS_AS(back.at("nope"), CheckpointError);
}

TEST_CASE("corrupt archives are rejected") {
    testing::TempDir dir("bad");
    {
        std::ofstream f(dir / "bad.nde", std::ios::binary);
        f << "NOTANARCHIVE-----------";
    }
    CHECK_THROWS_AS(Archive::load(dir / "bad.nde"), CheckpointError);
    CHECK_THROWS(Archive::load(dir / "missing.nde"));

    Archive ar;
    ar.put_f32("x", {4}, std::vector<float>{1, 2, 3, 4});
    ar.save(dir / "t.nde");
    std::filesystem::resize_file(dir / "t.nde", std::filesystem::file_size(dir / "t.nde") - 4);
    CHECK_THROWS_AS(Archive::load(dir / "t.nde"), CheckpointError);
}

TEST_CASE("module round trip and digest") {
    testing::TempDir dir("mod");
    torch::manual_seed(1);
    DecompNet a(DecompNetConfig{8, 2});
    torch::manual_seed(2);
    DecompNet b(DecompNetConfig{8, 2});
    CHECK(module_digest(*a) != module_digest(*b));

    Archive ar;
    store_module(ar, kScopeDecomposition, *a);
    ar.save(dir / "m.nde");
    load_module(Archive::load(dir / "m.nde"), kScopeDecomposition, *b);
    CHECK(module_digest(*a) == module_digest(*b));

    const auto x = torch::rand({1, 3, 8, 8});
    CHECK(torch::equal(a->forward(x).second, b->forward(x).second));

    EnhanceNet e;
    CHECK_THROWS_AS(load_module(ar, kScopeEnhancement, *e), CheckpointError);
    DecompNet wider(DecompNetConfig{16, 2});
    CHECK_THROWS_AS(load_module(ar, kScopeDecomposition, *wider), CheckpointError);
}

TEST_CASE("optimizer and rng round trip") {
    torch::manual_seed(3);
    auto w = torch::randn({4}, torch::requires_grad());
    torch::optim::Adam opt({w}, torch::optim::AdamOptions(0.1));
    for (int k = 0; k < 3; ++k) {
        opt.zero_grad();
        w.pow(2).sum().backward();
        opt.step();
    }
    Archive ar;
    store_optimizer(ar, opt);
    std::mt19937_64 rng(77);
    rng.discard(5);
    store_rng(ar, rng);

    auto w2 = w.detach().clone().requires_grad_(true);
    torch::optim::Adam opt2({w2}, torch::optim::AdamOptions(0.1));
    load_optimizer(ar, opt2);
    std::mt19937_64 rng2(1);
    load_rng(ar, rng2);
    CHECK(rng2() == rng());

    const auto r1 = torch::rand({3});
    load_rng(ar, rng2);
    CHECK(torch::equal(torch::rand({3}), r1));

    for (auto* pair : {&opt, &opt2}) {
        pair->zero_grad();
        (pair == &opt ? w : w2).pow(2).sum().backward();
        pair->step();
    }
    CHECK(torch::allclose(w, w2, 0.0, 0.0));
}

TEST_CASE("checkpoint info") {
    Archive ar;
    CheckpointInfo info;
    info.stage = kStageFull;
    info.step = 12;
    info.epoch = 3;
    info.config = TrainConfig::desk();
    info.config.seed = 4;
    write_info(ar, info);
    const CheckpointInfo back = read_info(ar);
    CHECK(back.stage == kStageFull);
    CHECK(back.step == 12);
    CHECK(back.epoch == 3);
    CHECK(back.config.hash() == info.config.hash());
    CHECK_THROWS_AS(read_info(Archive{}), CheckpointError);
}

}
