#include "support.hpp"

#include "nde/checkpoint.hpp"
#include "nde/errors.hpp"
#include "nde/synthesis.hpp"
#include "nde/training.hpp"

#include <fstream>

using namespace nde;
namespace fs = std::filesystem;

namespace {

TrainConfig tiny_config() {
    TrainConfig c;
    c.crop = 32;
    c.max_steps = 3;
    c.seed = 7;
    c.decomp_net = {4, 2};
    c.enhance_net = {3, 4, 3};
    c.dehaze_net.layers_per_block = {2, 2, 2};
    c.dehaze_net.growth_rate = 16;
    c.dehaze_net.stem_channels = 32;
    c.dehaze_net.refine_channels = 4;
    c.feature_net.stage_channels = {4, 4, 4, 4};
    c.feature_net.convs_per_stage = {1, 1, 1, 1};
    return c;
}

// One synthesized dataset shared by every case in this file.
const Manifest& fixture_manifest() {
    static testing::TempDir dir("train_data");
    static const Manifest m = split_scenes(synthesize_dataset(fs::path(NDE_FIXTURE_DIR), dir.path()), 0);
    return m;
}

const fs::path& stage1_checkpoint() {
    static testing::TempDir dir("train_s1");
    static const fs::path path = [] {
        train_stage1(fixture_manifest(), tiny_config(), dir.path());
        return dir / "decom.ckpt";
    }();
    return path;
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("step counts") {
    TrainConfig c = tiny_config();
    c.max_steps = 0;
    c.epochs_stage1 = 2;
    Stage1Trainer t(fixture_manifest(), c);
    CHECK(t.steps_per_epoch() == 6);  // 6 scenes x 2 variants / batch 2
    CHECK(t.total_steps() == 12);
}

TEST_CASE("zero learning rate leaves the weights unchanged") {
    TrainConfig c = tiny_config();
    c.learning_rate = 0.0;
    Stage1Trainer t(fixture_manifest(), c);
    std::vector<torch::Tensor> before;
    for (const auto& p : t.net()->parameters()) before.push_back(p.detach().clone());
    t.step();
    t.step();
    const auto after = t.net()->parameters();
    REQUIRE(after.size() == before.size());
    for (std::size_t k = 0; k < before.size(); ++k) CHECK(torch::equal(after[k], before[k]));
}

TEST_CASE("same seed gives identical loss curves") {
    Stage1Trainer a(fixture_manifest(), tiny_config());
    Stage1Trainer b(fixture_manifest(), tiny_config());
    a.run();
    b.run();
    CHECK(a.log().series("total") == b.log().series("total"));
    CHECK(a.log().series("total").size() == 3);
    CHECK(module_digest(*a.net()) == module_digest(*b.net()));

    TrainConfig other = tiny_config();
    other.seed = 8;
    Stage1Trainer c(fixture_manifest(), other);
    c.run();
    CHECK(c.log().series("total") != a.log().series("total"));
}

TEST_CASE("resuming matches an uninterrupted run") {
    testing::TempDir dir("resume");
    TrainConfig c = tiny_config();
    c.max_steps = 4;
    Stage1Trainer full(fixture_manifest(), c);
    full.run();

    Stage1Trainer first(fixture_manifest(), c);
    first.step();
    first.step();
    first.save(dir / "half.ckpt");

    Stage1Trainer second(fixture_manifest(), c);
    second.resume(dir / "half.ckpt");
    CHECK(second.step_index() == 2);
    second.run();
    CHECK(module_digest(*second.net()) == module_digest(*full.net()));
    const auto tail = full.log().series("total");
    const auto resumed = second.log().series("total");
    REQUIRE(resumed.size() == 2);
    CHECK(resumed[0] == tail[2]);
    CHECK(resumed[1] == tail[3]);

    // A stage-1 checkpoint cannot resume stage 2.
    Stage2Trainer s2(fixture_manifest(), tiny_config(), stage1_checkpoint());
    CHECK_THROWS_AS(s2.resume(dir / "half.ckpt"), CheckpointError);
}

TEST_CASE("stage 1 writes checkpoint and loss log") {
    testing::TempDir dir("s1");
    const StageReport r = train_stage1(fixture_manifest(), tiny_config(), dir.path());
    CHECK(r.steps == 3);
    CHECK(fs::exists(dir / "decom.ckpt"));
    std::ifstream in(dir / "loss_log.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "stage,epoch,step,loss_name,value");
    const Archive ar = Archive::load(dir / "decom.ckpt");
    CHECK(read_info(ar).stage == kStageDecomposition);
    CHECK(ar.has_scope(kScopeDecomposition));
    CHECK(std::isfinite(r.heldout_after));
    CHECK(std::isfinite(r.reconstruction_error));
}

TEST_CASE("stage 2 keeps the decomposition frozen") {
    Stage2Trainer t(fixture_manifest(), tiny_config(), stage1_checkpoint());
    const std::string dec = module_digest(*t.decomposition());
    const std::string feat = module_digest(*t.features());
    const std::string enh = module_digest(*t.enhancement());
    for (const auto& p : t.decomposition()->parameters()) CHECK_FALSE(p.requires_grad());
    t.step();
    t.step();
    CHECK(module_digest(*t.decomposition()) == dec);
    CHECK(module_digest(*t.features()) == feat);
    CHECK(module_digest(*t.enhancement()) != enh);
    for (const auto& p : t.decomposition()->parameters()) CHECK_FALSE(p.grad().defined());
    for (const auto& group : t.optimizer().param_groups()) {
        for (const auto& p : group.params()) {
            for (const auto& d : t.decomposition()->parameters()) CHECK_FALSE(p.is_same(d));
        }
    }
    CHECK(t.log().series("val_ssim").size() >= 1);
}

TEST_CASE("full checkpoint and inference") {
    testing::TempDir dir("s2");
    const StageReport r = train_stage2(fixture_manifest(), tiny_config(), stage1_checkpoint(), dir.path());
    CHECK(r.frozen_digest_before == r.frozen_digest_after);
    CHECK(r.steps == 3);
    NdeModel m = load_model(dir / "full.ckpt");
    const Image night = load_image(fixture_manifest().resolve(fixture_manifest().scenes[0].variants[0].path));
    const InferenceResult res = m.infer(night);
    CHECK(res.output.same_shape(night));
    CHECK(res.illumination.channels() == 1);
    CHECK(max_abs_difference(res.output, recompose(res.enhanced, res.dehazed)) < 1e-12);
    CHECK(max_abs_difference(m.infer(night).output, res.output) == 0.0);

    // Missing scope.
    CHECK_THROWS_AS(load_model(stage1_checkpoint()), CheckpointError);
}

TEST_CASE("non-finite losses abort with a dump") {
    testing::TempDir dir("nan");
    TrainConfig c = tiny_config();
    c.decomp_weights.dd = 1e300;
    Stage1Trainer t(fixture_manifest(), c);
    t.set_dump_dir(dir.path());
    CHECK_THROWS_AS(t.step(), TrainingError);
    bool dumped = false;
    for (const auto& e : fs::directory_iterator(dir.path())) {
        if (e.is_directory() && e.path().filename().string().rfind("nonfinite_step", 0) == 0) {
            dumped = !fs::is_empty(e.path());
        }
    }
    CHECK(dumped);
}

}
