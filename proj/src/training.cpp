#include "nde/training.hpp"

#include "nde/errors.hpp"
#include "nde/metrics.hpp"
#include "nde/retinex.hpp"
#include "nde/tensor.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace nde {

namespace fs = std::filesystem;

namespace {

torch::optim::AdamOptions adam_options(const TrainConfig& cfg) {
    return torch::optim::AdamOptions(cfg.learning_rate)
        .betas({cfg.adam_beta1, cfg.adam_beta2})
        .eps(cfg.adam_eps);
}

AugmentConfig augment_of(const TrainConfig& cfg) {
    AugmentConfig a;
    a.enabled = cfg.augment;
    a.crop = cfg.crop;
    a.scale_min = cfg.scale_min;
    a.scale_max = cfg.scale_max;
    return a;
}

struct BatchTensors {
    torch::Tensor night;
    torch::Tensor clear;
};

BatchTensors stack(const std::vector<TrainingPair>& batch) {
    std::vector<Image> night, clear;
    for (const auto& p : batch) {
        night.push_back(p.night_hazy);
        clear.push_back(p.clear);
    }
    return {to_batch(night), to_batch(clear)};
}

void freeze(torch::nn::Module& m) {
    for (auto& p : m.parameters()) p.set_requires_grad(false);
    m.eval();
}

void require_scope(const Archive& ar, const char* scope, const fs::path& path) {
    if (!ar.has_scope(scope)) {
        throw CheckpointError(path.string() + ": no '" + scope + "' scope");
    }
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace

// Image-level operations -----------------------------------------------------------

RetinexPair decompose(DecompNet& net, const Image& rgb) {
    require_channels(rgb, 3, "decompose");
    torch::NoGradGuard guard;
    net->eval();
    auto [i, r] = net->forward(to_tensor(rgb));
    return {to_image(i), to_image(r)};
}

Image enhance_illumination(EnhanceNet& net, const Image& illumination, const Image& reflectance) {
    require_channels(illumination, 1, "enhance_illumination");
    require_channels(reflectance, 3, "enhance_illumination");
    torch::NoGradGuard guard;
    net->eval();
    return to_image(net->forward(to_tensor(illumination), to_tensor(reflectance)));
}

Image dehaze_reflectance(DehazeNet& net, const Image& reflectance) {
    require_channels(reflectance, 3, "dehaze_reflectance");
    torch::NoGradGuard guard;
    net->eval();
    return to_image(net->forward(to_tensor(reflectance)));
}

// NdeModel ---------------------------------------------------------------------

NdeModel::NdeModel(const TrainConfig& cfg)
    : decomposition(cfg.decomp_net), enhancement(cfg.enhance_net), dehaze(cfg.dehaze_net) {}

void NdeModel::eval() {
    decomposition->eval();
    enhancement->eval();
    dehaze->eval();
}

InferenceResult NdeModel::infer(const Image& night_hazy) {
    require_channels(night_hazy, 3, "infer");
    torch::NoGradGuard guard;
    const auto x = to_tensor(night_hazy);
    auto [i_n, r_n] = decomposition->forward(x);
    const auto i_y = enhancement->forward(i_n, r_n);
    const auto r_y = dehaze->forward(r_n);
    InferenceResult out;
    out.illumination = to_image(i_n);
    out.reflectance = to_image(r_n);
    out.enhanced = to_image(i_y);
    out.dehazed = to_image(r_y);
    out.output = recompose(out.enhanced, out.dehazed);
    return out;
}

NdeModel load_model(const fs::path& checkpoint) {
    const Archive ar = Archive::load(checkpoint);
    require_scope(ar, kScopeDecomposition, checkpoint);
    require_scope(ar, kScopeEnhancement, checkpoint);
    require_scope(ar, kScopeDehaze, checkpoint);
    const CheckpointInfo info = read_info(ar);
    NdeModel model(info.config);
    load_module(ar, kScopeDecomposition, *model.decomposition);
    load_module(ar, kScopeEnhancement, *model.enhancement);
    load_module(ar, kScopeDehaze, *model.dehaze);
    model.eval();
    return model;
}

// LossLog ------------------------------------------------------------------------

void LossLog::add(const std::string& stage, int epoch, int step, const std::string& name, double value) {
    rows_.push_back({stage, epoch, step, name, value});
}

std::vector<double> LossLog::series(const std::string& name) const {
    std::vector<double> out;
    for (const auto& r : rows_) {
        if (r.name == name) out.push_back(r.value);
    }
    return out;
}

void LossLog::write_csv(const fs::path& path) const {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    os << "stage,epoch,step,loss_name,value\n";
    os << std::setprecision(10);
    for (const auto& r : rows_) {
        os << r.stage << ',' << r.epoch << ',' << r.step << ',' << r.name << ',' << r.value << '\n';
    }
}

// TrainerBase -------------------------------------------------------------------

TrainerBase::TrainerBase(Manifest manifest, TrainConfig cfg)
    : manifest_(std::move(manifest)), cfg_(std::move(cfg)), rng_(cfg_.seed) {
    cfg_.validate();
    const auto pairs = partition_pairs(manifest_, Partition::Train);
    if (pairs.empty()) throw TrainingError("the training partition is empty; run split first");
    steps_per_epoch_ = static_cast<int>((pairs.size() + cfg_.batch_size - 1) / cfg_.batch_size);
    total_steps_ = cfg_.max_steps > 0 ? cfg_.max_steps : 0;
}

std::vector<TrainingPair> TrainerBase::next_batch() {
    return sample_batch(manifest_, Partition::Train, cfg_.batch_size, augment_of(cfg_), rng_, cache_);
}

std::vector<TrainingPair> TrainerBase::heldout_pairs() {
    auto refs = partition_pairs(manifest_, Partition::Test);
    if (refs.empty()) refs = partition_pairs(manifest_, Partition::Train);
    std::vector<TrainingPair> out;
    for (const auto& r : refs) out.push_back(load_pair(manifest_, r, cache_));
    return out;
}

void TrainerBase::fail_non_finite(const std::string& stage, const std::vector<TrainingPair>& batch,
                                  const std::string& term, double value) {
    std::ostringstream msg;
    msg << stage << " step " << step_ << ": non-finite " << term << " (" << value << ")";
    if (!dump_dir_.empty()) {
        const fs::path dir = dump_dir_ / ("nonfinite_step" + std::to_string(step_));
        for (std::size_t b = 0; b < batch.size(); ++b) {
            const std::string stem = std::to_string(b) + "_" + batch[b].scene_id;
            save_image(batch[b].night_hazy, dir / (stem + "_night_hazy.png"));
            save_image(batch[b].clear, dir / (stem + "_clear.png"));
        }
        msg << "; batch written to " << dir.string();
    }
    throw TrainingError(msg.str());
}

void TrainerBase::check_finite(const std::string& stage, const std::vector<TrainingPair>& batch,
                               const std::string& term, const torch::Tensor& value) {
    const double v = value.item<double>();
    if (!std::isfinite(v)) fail_non_finite(stage, batch, term, v);
}

// Stage 1 ------------------------------------------------------------------------

Stage1Trainer::Stage1Trainer(Manifest manifest, TrainConfig cfg) : TrainerBase(std::move(manifest), std::move(cfg)) {
    if (total_steps_ == 0) total_steps_ = cfg_.epochs_stage1 * steps_per_epoch_;
    torch::manual_seed(cfg_.seed);
    net_ = DecompNet(cfg_.decomp_net);
    opt_ = std::make_unique<torch::optim::Adam>(net_->parameters(), adam_options(cfg_));
}

double Stage1Trainer::step() {
    if (done()) throw TrainingError("stage 1 already finished");
    const auto batch = next_batch();
    const auto [night, clear] = stack(batch);
    net_->train();
    // Night and day share one forward pass so batch statistics see both.
    auto [i_all, r_all] = net_->forward(torch::cat({night, clear}, 0));
    const int64_t b = night.size(0);
    const auto i_n = i_all.narrow(0, 0, b), i_d = i_all.narrow(0, b, b);
    const auto r_n = r_all.narrow(0, 0, b), r_d = r_all.narrow(0, b, b);
    const auto terms = decomposition_objective(r_n, i_n, r_d, i_d, night, clear, cfg_.decomp_weights);
    check_finite(kStageDecomposition, batch, "total", terms.total);

    opt_->zero_grad();
    terms.total.backward();
    opt_->step();

    const int ep = epoch();
    log_.add(kStageDecomposition, ep, step_, "decom", terms.decom.item<double>());
    log_.add(kStageDecomposition, ep, step_, "reflectance_similarity", terms.reflectance_similarity.item<double>());
    log_.add(kStageDecomposition, ep, step_, "illumination_smoothness", terms.illumination_smoothness.item<double>());
    const double total = terms.total.item<double>();
    log_.add(kStageDecomposition, ep, step_, "total", total);
    ++step_;
    return total;
}

void Stage1Trainer::run(const std::function<void(int, double)>& progress) {
    while (!done()) {
        const double loss = step();
        if (progress) progress(step_, loss);
    }
}

double Stage1Trainer::heldout_decom_loss() {
    torch::NoGradGuard guard;
    net_->eval();
    std::vector<double> values;
    for (const auto& p : heldout_pairs()) {
        const auto night = to_tensor(p.night_hazy);
        const auto clear = to_tensor(p.clear);
        auto [i_n, r_n] = net_->forward(night);
        auto [i_d, r_d] = net_->forward(clear);
        values.push_back(loss_decom(r_n, i_n, r_d, i_d, night, clear, cfg_.decomp_weights).item<double>());
    }
    return mean_of(values);
}

double Stage1Trainer::heldout_reconstruction_error() {
    torch::NoGradGuard guard;
    net_->eval();
    std::vector<double> values;
    for (const auto& p : heldout_pairs()) {
        for (const Image* img : {&p.clear, &p.night_hazy}) {
            const auto x = to_tensor(*img);
            auto [i, r] = net_->forward(x);
            values.push_back((recompose(i, r) - x).abs().mean().item<double>());
        }
    }
    return mean_of(values);
}

void Stage1Trainer::save(const fs::path& path) {
    Archive ar;
    store_module(ar, kScopeDecomposition, *net_);
    store_optimizer(ar, *opt_);
    store_rng(ar, rng_);
    write_info(ar, {kStageDecomposition, step_, epoch(), cfg_});
    ar.save(path);
}

void Stage1Trainer::resume(const fs::path& path) {
    const Archive ar = Archive::load(path);
    const CheckpointInfo info = read_info(ar);
    if (info.stage != kStageDecomposition) {
        throw CheckpointError(path.string() + ": expected a '" + kStageDecomposition + "' checkpoint, found '" +
                              info.stage + "'");
    }
    load_module(ar, kScopeDecomposition, *net_);
    load_optimizer(ar, *opt_);
    load_rng(ar, rng_);
    step_ = info.step;
}

// Stage 2 ------------------------------------------------------------------------

Stage2Trainer::Stage2Trainer(Manifest manifest, TrainConfig cfg, const fs::path& decomposition_checkpoint)
    : TrainerBase(std::move(manifest), std::move(cfg)) {
    if (total_steps_ == 0) total_steps_ = cfg_.epochs_stage2 * steps_per_epoch_;
    torch::manual_seed(cfg_.seed);
    model_ = NdeModel(cfg_);
    features_ = FeatureExtractor(cfg_.feature_net);

    const Archive ar = Archive::load(decomposition_checkpoint);
    load_module(ar, kScopeDecomposition, *model_.decomposition);
    freeze(*model_.decomposition);

    if (!cfg_.feature_weights.empty()) {
        load_module(Archive::load(cfg_.feature_weights), kScopeFeatures, *features_);
    }
    freeze(*features_);
    if (!cfg_.encoder_weights.empty()) {
        load_module(Archive::load(cfg_.encoder_weights), "encoder", model_.dehaze->encoder(), false);
    }

    std::vector<torch::Tensor> params = model_.enhancement->parameters();
    for (auto& p : model_.dehaze->parameters()) params.push_back(p);
    opt_ = std::make_unique<torch::optim::Adam>(params, adam_options(cfg_));
}

double Stage2Trainer::step() {
    if (done()) throw TrainingError("stage 2 already finished");
    if (step_ == 0 && log_.rows().empty()) validate_and_log();
    const auto batch = next_batch();
    const auto [night, clear] = stack(batch);

    torch::Tensor i_n, r_n, i_d, r_d;
    {
        torch::NoGradGuard guard;
        std::tie(i_n, r_n) = model_.decomposition->forward(night);
        std::tie(i_d, r_d) = model_.decomposition->forward(clear);
    }
    model_.enhancement->train();
    model_.dehaze->train();
    const auto i_y = model_.enhancement->forward(i_n, r_n);
    const auto r_y = model_.dehaze->forward(r_n);
    const auto s_y = recompose(i_y, r_y);
    const auto terms = loss_reconstruction_total(s_y, clear, i_y, i_d, r_y, r_d, features_, cfg_.recon_weights);
    check_finite(kStageFull, batch, "total", terms.total);

    opt_->zero_grad();
    terms.total.backward();
    opt_->step();

    const int ep = epoch();
    log_.add(kStageFull, ep, step_, "mse", terms.mse.item<double>());
    log_.add(kStageFull, ep, step_, "vgg", terms.vgg.item<double>());
    const double total = terms.total.item<double>();
    log_.add(kStageFull, ep, step_, "total", total);
    ++step_;

    const int every = cfg_.validate_every > 0 ? cfg_.validate_every : steps_per_epoch_;
    if (step_ % every == 0 || done()) validate_and_log();
    return total;
}

void Stage2Trainer::run(const std::function<void(int, double)>& progress) {
    while (!done()) {
        const double loss = step();
        if (progress) progress(step_, loss);
    }
}

double Stage2Trainer::validation_ssim() {
    model_.eval();
    std::vector<double> values;
    for (const auto& p : heldout_pairs()) values.push_back(ssim(model_.infer(p.night_hazy).output, p.clear));
    return mean_of(values);
}

double Stage2Trainer::baseline_ssim() {
    std::vector<double> values;
    for (const auto& p : heldout_pairs()) values.push_back(ssim(p.night_hazy, p.clear));
    return mean_of(values);
}

void Stage2Trainer::validate_and_log() {
    log_.add(kStageFull, epoch(), step_, "val_ssim", validation_ssim());
}

void Stage2Trainer::save(const fs::path& path) {
    Archive ar;
    store_module(ar, kScopeDecomposition, *model_.decomposition);
    store_module(ar, kScopeEnhancement, *model_.enhancement);
    store_module(ar, kScopeDehaze, *model_.dehaze);
    store_module(ar, kScopeFeatures, *features_);
    store_optimizer(ar, *opt_);
    store_rng(ar, rng_);
    write_info(ar, {kStageFull, step_, epoch(), cfg_});
    ar.save(path);
}

void Stage2Trainer::resume(const fs::path& path) {
    const Archive ar = Archive::load(path);
    const CheckpointInfo info = read_info(ar);
    if (info.stage != kStageFull) {
        throw CheckpointError(path.string() + ": expected a '" + kStageFull + "' checkpoint, found '" + info.stage +
                              "'");
    }
    load_module(ar, kScopeDecomposition, *model_.decomposition);
    load_module(ar, kScopeEnhancement, *model_.enhancement);
    load_module(ar, kScopeDehaze, *model_.dehaze);
    load_module(ar, kScopeFeatures, *features_);
    load_optimizer(ar, *opt_);
    load_rng(ar, rng_);
    step_ = info.step;
}

// Drivers -------------------------------------------------------------------------

StageReport train_stage1(const Manifest& manifest, const TrainConfig& cfg, const fs::path& out_dir,
                         const StageRunOptions& options) {
    fs::create_directories(out_dir);
    Stage1Trainer trainer(manifest, cfg);
    trainer.set_dump_dir(out_dir);
    StageReport report;
    report.heldout_before = trainer.heldout_decom_loss();
    if (!options.resume.empty()) trainer.resume(options.resume);
    trainer.run(options.progress);
    report.steps = trainer.step_index();
    const auto totals = trainer.log().series("total");
    if (!totals.empty()) {
        report.first_loss = totals.front();
        report.last_loss = totals.back();
    }
    report.heldout_after = trainer.heldout_decom_loss();
    report.reconstruction_error = trainer.heldout_reconstruction_error();
    report.checkpoint = out_dir / "decom.ckpt";
    trainer.save(report.checkpoint);
    trainer.log().write_csv(out_dir / "loss_log.csv");
    return report;
}

StageReport train_stage2(const Manifest& manifest, const TrainConfig& cfg, const fs::path& stage1_checkpoint,
                         const fs::path& out_dir, const StageRunOptions& options) {
    fs::create_directories(out_dir);
    Stage2Trainer trainer(manifest, cfg, stage1_checkpoint);
    trainer.set_dump_dir(out_dir);
    StageReport report;
    report.frozen_digest_before = module_digest(*trainer.decomposition());
    report.baseline_ssim = trainer.baseline_ssim();
    if (!options.resume.empty()) trainer.resume(options.resume);
    trainer.run(options.progress);
    report.steps = trainer.step_index();
    const auto totals = trainer.log().series("total");
    if (!totals.empty()) {
        report.first_loss = totals.front();
        report.last_loss = totals.back();
    }
    const auto val = trainer.log().series("val_ssim");
    if (!val.empty()) {
        report.heldout_before = val.front();
        report.heldout_after = val.back();
    }
    report.frozen_digest_after = module_digest(*trainer.decomposition());
    report.checkpoint = out_dir / "full.ckpt";
    trainer.save(report.checkpoint);
    trainer.log().write_csv(out_dir / "loss_log.csv");
    return report;
}

}  // namespace nde
