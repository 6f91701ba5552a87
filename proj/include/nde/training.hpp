#pragma once

#include "nde/checkpoint.hpp"
#include "nde/config.hpp"
#include "nde/dataset.hpp"
#include "nde/image.hpp"
#include "nde/losses.hpp"
#include "nde/networks.hpp"
#include "nde/retinex.hpp"

#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace nde {

/// Image-level wrappers around single networks (inference mode, no gradients).
RetinexPair decompose(DecompNet& net, const Image& rgb);
Image enhance_illumination(EnhanceNet& net, const Image& illumination, const Image& reflectance);
Image dehaze_reflectance(DehazeNet& net, const Image& reflectance);

/// Outputs of one pass through the full pipeline.
struct InferenceResult {
    Image output;        // S_Y = I_Y o R_Y
    Image illumination;  // I_N
    Image reflectance;   // R_N
    Image enhanced;      // I_Y
    Image dehazed;       // R_Y
};

/// Decomposition, enhancement and dehazing networks in inference mode.
struct NdeModel {
    DecompNet decomposition{nullptr};
    EnhanceNet enhancement{nullptr};
    DehazeNet dehaze{nullptr};

    NdeModel() = default;
    explicit NdeModel(const TrainConfig& cfg);

    void eval();
    InferenceResult infer(const Image& night_hazy);
};

/// Loads a full checkpoint. Throws CheckpointError if any of the three
/// network scopes is missing.
NdeModel load_model(const std::filesystem::path& checkpoint);

struct LossRow {
    std::string stage;
    int epoch = 0;
    int step = 0;
    std::string name;
    double value = 0.0;
};

class LossLog {
public:
    void add(const std::string& stage, int epoch, int step, const std::string& name, double value);
    const std::vector<LossRow>& rows() const { return rows_; }
    /// Values of one loss name in insertion order.
    std::vector<double> series(const std::string& name) const;
    /// Writes `stage,epoch,step,loss_name,value` with a header line.
    void write_csv(const std::filesystem::path& path) const;

private:
    std::vector<LossRow> rows_;
};

/// Shared bookkeeping of both stages.
class TrainerBase {
public:
    TrainerBase(Manifest manifest, TrainConfig cfg);
    virtual ~TrainerBase() = default;

    int total_steps() const { return total_steps_; }
    int steps_per_epoch() const { return steps_per_epoch_; }
    int step_index() const { return step_; }
    int epoch() const { return step_ / steps_per_epoch_; }
    bool done() const { return step_ >= total_steps_; }
    const TrainConfig& config() const { return cfg_; }
    const LossLog& log() const { return log_; }
    std::mt19937_64& rng() { return rng_; }

    /// Where to dump a batch that produced a non-finite loss.
    void set_dump_dir(std::filesystem::path dir) { dump_dir_ = std::move(dir); }

protected:
    std::vector<TrainingPair> next_batch();
    [[noreturn]] void fail_non_finite(const std::string& stage, const std::vector<TrainingPair>& batch,
                                      const std::string& term, double value);
    void check_finite(const std::string& stage, const std::vector<TrainingPair>& batch, const std::string& term,
                      const torch::Tensor& value);
    std::vector<TrainingPair> heldout_pairs();

    Manifest manifest_;
    TrainConfig cfg_;
    ImageCache cache_;
    std::mt19937_64 rng_;
    LossLog log_;
    int step_ = 0;
    int total_steps_ = 0;
    int steps_per_epoch_ = 1;
    std::filesystem::path dump_dir_;
};

/// Stage 1: trains the decomposition network alone on (S_N, S_D) pairs.
class Stage1Trainer : public TrainerBase {
public:
    Stage1Trainer(Manifest manifest, TrainConfig cfg);

    /// One optimizer step; returns the total loss of the batch.
    double step();
    void run(const std::function<void(int, double)>& progress = {});

    /// Mean L_decom over every held-out pair at full resolution.
    double heldout_decom_loss();
    /// Mean |recompose(decompose(S)) - S| over the held-out clear and hazy images.
    double heldout_reconstruction_error();

    void save(const std::filesystem::path& path);
    void resume(const std::filesystem::path& path);

    DecompNet& net() { return net_; }
    torch::optim::Adam& optimizer() { return *opt_; }

private:
    DecompNet net_{nullptr};
    std::unique_ptr<torch::optim::Adam> opt_;
};

/// Stage 2: freezes the decomposition and trains enhancement + dehazing.
class Stage2Trainer : public TrainerBase {
public:
    /// `decomposition_checkpoint` must hold a decomposition scope.
    Stage2Trainer(Manifest manifest, TrainConfig cfg, const std::filesystem::path& decomposition_checkpoint);

    double step();
    void run(const std::function<void(int, double)>& progress = {});

    /// Mean SSIM(S_Y, S_D) over the held-out pairs at full resolution.
    double validation_ssim();
    /// Mean SSIM(S_N, S_D) over the same pairs.
    double baseline_ssim();

    void save(const std::filesystem::path& path);
    void resume(const std::filesystem::path& path);

    DecompNet& decomposition() { return model_.decomposition; }
    EnhanceNet& enhancement() { return model_.enhancement; }
    DehazeNet& dehaze() { return model_.dehaze; }
    FeatureExtractor& features() { return features_; }
    NdeModel& model() { return model_; }
    torch::optim::Adam& optimizer() { return *opt_; }

private:
    void validate_and_log();

    NdeModel model_;
    FeatureExtractor features_{nullptr};
    std::unique_ptr<torch::optim::Adam> opt_;
};

/// Summary of a complete stage run.
struct StageReport {
    std::filesystem::path checkpoint;
    int steps = 0;
    double first_loss = 0.0;
    double last_loss = 0.0;
    double heldout_before = 0.0;  // stage 1: L_decom; stage 2: validation SSIM
    double heldout_after = 0.0;
    double reconstruction_error = 0.0;  // stage 1 only
    double baseline_ssim = 0.0;         // stage 2 only
    std::string frozen_digest_before;   // stage 2 only
    std::string frozen_digest_after;
};

struct StageRunOptions {
    std::filesystem::path resume;  // checkpoint of the same stage to continue from
    std::function<void(int, double)> progress;
};

/// Trains stage 1 to completion and writes `<out_dir>/decom.ckpt` and
/// `<out_dir>/loss_log.csv`.
StageReport train_stage1(const Manifest& manifest, const TrainConfig& cfg, const std::filesystem::path& out_dir,
                         const StageRunOptions& options = {});

/// Trains stage 2 from a stage-1 checkpoint and writes `<out_dir>/full.ckpt`
/// and `<out_dir>/loss_log.csv`.
StageReport train_stage2(const Manifest& manifest, const TrainConfig& cfg,
                         const std::filesystem::path& stage1_checkpoint, const std::filesystem::path& out_dir,
                         const StageRunOptions& options = {});

}  // namespace nde
