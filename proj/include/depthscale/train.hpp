#pragma once

#include <cstdint>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "depthscale/align.hpp"
#include "depthscale/attention.hpp"
#include "depthscale/encoders.hpp"
#include "depthscale/heads.hpp"
#include "depthscale/io.hpp"
#include "depthscale/losses.hpp"
#include "depthscale/optim.hpp"
#include "depthscale/soc.hpp"
#include "depthscale/synth.hpp"

namespace depthscale {

struct TrainConfig {
    std::uint64_t seed = 1;
    int epochs = 20;
    int batch_size = 8;
    double lr = 1e-5;
    double lr_decay = 0.9;
    long max_steps = 0;  // 0 = run all epochs

    LossWeights weights;
    double rho = 0.9;
    int num_classes = 20;
    double ema_momentum = 0.999;
    std::string align_mode = "literal";  // or "disparity"

    int patch = 8;
    int img_dim = 64;
    int txt_dim = 32;
    int heads = 4;
    int decoder_width = 64;
    int proj_mid = 64;
    int proj_out = 128;
    int pool_factor = 2;
    bool global_rescale = false;  // ablation: spatially-averaged A and B
    bool per_map_negatives = true;

    long checkpoint_interval = 0;  // steps; 0 = final only
};

// flat key=value text, one pair per line, '#' comments. seed, epochs,
// batch_size and lr are mandatory; everything else has defaults. Unknown
// keys are rejected.
TrainConfig parse_config_text(const std::string& text);
TrainConfig parse_config_file(const std::string& path);
std::string serialize_config(const TrainConfig& cfg);
std::uint64_t config_hash(const TrainConfig& cfg);

AlignMode align_mode_from_string(const std::string& s);

// a checkpoint embeds the full config it was trained with
TrainConfig read_checkpoint_config(const std::string& path);

struct TrainSample {
    ImageRaster image;
    DepthRaster rel;
    DepthRaster gt;
    std::vector<std::string> tokens;
    std::string domain;
};

TrainSample sample_from_scene(const SynthScene& scene);
std::vector<TrainSample> load_samples(const std::string& manifest_path);

// The trainable network: frozen toy encoders, text alignment, attention,
// two decoder heads, SOC projector, plus the EMA momentum mirror of the
// alignment/attention/projector parameters.
class Model {
  public:
    explicit Model(const TrainConfig& cfg);

    struct Forward {
        Tensor f_out;     // fused tokens, HW_p x D
        Tensor scale_map; // A, H x W
        Tensor shift_map; // B, H x W
        Tensor pred;      // metric depth, H x W
    };

    Forward forward(const TrainSample& sample, bool momentum_branch = false) const;
    // SOC embedding of a fused token map through either branch's projector
    Tensor project(const Tensor& f_out, int grid_h, int grid_w, bool momentum_branch,
                   std::vector<uint8_t>* row_valid = nullptr) const;

    ParamStore& params() { return params_; }
    ParamStore& momentum_params() { return momentum_; }
    const TrainConfig& config() const { return cfg_; }
    int grid_h(int image_h) const { return image_h / cfg_.patch; }
    int grid_w(int image_w) const { return image_w / cfg_.patch; }

    std::uint64_t frozen_encoder_hash() const { return image_encoder_.weight_hash(); }

    // round every stored double to its nearest f32; keeps checkpoints
    // (f32 payloads) lossless so a resumed run is bitwise identical
    void quantize_params_f32();

  private:
    TrainConfig cfg_;
    ToyImageEncoder image_encoder_;
    ToyTextEncoder text_encoder_;
    TextAlign align_;
    AttentionParams attn_;
    DecoderHead scale_head_;
    DecoderHead shift_head_;
    ProjectorParams projector_;
    TextAlign m_align_;
    AttentionParams m_attn_;
    ProjectorParams m_projector_;
    ParamStore params_;
    ParamStore momentum_;
};

double lr_schedule(int epoch, double base_lr, double decay);

struct TrainStepRecord {
    long step = 0;
    double lr = 0.0;
    double loss_si = 0.0;
    double loss_tp_si = 0.0;
    double loss_soc = 0.0;
    double loss_smooth = 0.0;
    double loss_total = 0.0;
    double gate_rate = 0.0;
    bool applied = false;  // false when the step was rejected (non-finite)
};

std::string train_record_line(const TrainStepRecord& r);

class Trainer {
  public:
    Trainer(const TrainConfig& cfg, std::vector<TrainSample> data);

    // one full optimizer step on the next deterministic batch: forward,
    // losses, backward, optimizer update, then EMA update, in that order
    TrainStepRecord step();

    // runs to max_steps (or epochs * steps_per_epoch), logging one record
    // per step; writes checkpoints into out_dir when configured
    void run(std::ostream* log, const std::string& out_dir = "");

    void save_checkpoint(const std::string& path) const;
    void load_checkpoint(const std::string& path);

    Model& model() { return *model_; }
    long current_step() const { return step_; }
    long steps_per_epoch() const;
    long total_steps() const;
    std::uint64_t param_hash() const;

  private:
    std::vector<int> batch_indices(long step) const;

    TrainConfig cfg_;
    std::vector<TrainSample> data_;
    std::unique_ptr<Model> model_;
    AdamW optimizer_;
    long step_ = 0;
};

// DepthRaster view of a model prediction; validity propagated from rel
DepthRaster raster_from_pred(const Tensor& pred, const DepthRaster& rel);

}  // namespace depthscale
