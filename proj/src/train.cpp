#include "depthscale/train.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "depthscale/errors.hpp"
#include "depthscale/metrics.hpp"
#include "depthscale/rng.hpp"

namespace depthscale {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& v) {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw ConfigError("config: boolean value must be true/false/1/0, got '" + v + "'");
}

Tensor clone_frozen(const Tensor& t) {
    return Tensor::from_data(t.shape(), t.value(), false);
}

}  // namespace

TrainConfig parse_config_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("config: expected key=value, got '" + line + "'");
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    for (const char* required : {"seed", "epochs", "batch_size", "lr"})
        if (!kv.count(required))
            throw ConfigError(std::string("config: missing required field '") + required + "'");

    TrainConfig c;
    auto take = [&](const char* key) -> std::string {
        auto it = kv.find(key);
        if (it == kv.end()) return "";
        std::string v = it->second;
        kv.erase(it);
        return v;
    };
    c.seed = std::stoull(take("seed"));
    c.epochs = std::stoi(take("epochs"));
    c.batch_size = std::stoi(take("batch_size"));
    c.lr = std::stod(take("lr"));
    if (auto v = take("lr_decay"); !v.empty()) c.lr_decay = std::stod(v);
    if (auto v = take("max_steps"); !v.empty()) c.max_steps = std::stol(v);
    if (auto v = take("lambda_si_var"); !v.empty()) c.weights.lambda_si_var = std::stod(v);
    if (auto v = take("w_si"); !v.empty()) c.weights.w_si = std::stod(v);
    if (auto v = take("w_tp_si"); !v.empty()) c.weights.w_tp_si = std::stod(v);
    if (auto v = take("w_soc"); !v.empty()) c.weights.w_soc = std::stod(v);
    if (auto v = take("w_smooth"); !v.empty()) c.weights.w_smooth = std::stod(v);
    if (auto v = take("rho"); !v.empty()) c.rho = std::stod(v);
    if (auto v = take("num_classes"); !v.empty()) c.num_classes = std::stoi(v);
    if (auto v = take("ema_momentum"); !v.empty()) c.ema_momentum = std::stod(v);
    if (auto v = take("align_mode"); !v.empty()) c.align_mode = v;
    if (auto v = take("patch"); !v.empty()) c.patch = std::stoi(v);
    if (auto v = take("img_dim"); !v.empty()) c.img_dim = std::stoi(v);
    if (auto v = take("txt_dim"); !v.empty()) c.txt_dim = std::stoi(v);
    if (auto v = take("heads"); !v.empty()) c.heads = std::stoi(v);
    if (auto v = take("decoder_width"); !v.empty()) c.decoder_width = std::stoi(v);
    if (auto v = take("proj_mid"); !v.empty()) c.proj_mid = std::stoi(v);
    if (auto v = take("proj_out"); !v.empty()) c.proj_out = std::stoi(v);
    if (auto v = take("pool_factor"); !v.empty()) c.pool_factor = std::stoi(v);
    if (auto v = take("global_rescale"); !v.empty()) c.global_rescale = parse_bool(v);
    if (auto v = take("per_map_negatives"); !v.empty()) c.per_map_negatives = parse_bool(v);
    if (auto v = take("checkpoint_interval"); !v.empty()) c.checkpoint_interval = std::stol(v);
    if (!kv.empty()) throw ConfigError("config: unknown key '" + kv.begin()->first + "'");

    if (c.epochs <= 0 || c.batch_size <= 0 || c.lr <= 0.0 || c.num_classes <= 0 ||
        c.patch <= 0 || c.pool_factor <= 0)
        throw ConfigError("config: numeric fields must be positive");
    align_mode_from_string(c.align_mode);
    return c;
}

TrainConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::string serialize_config(const TrainConfig& c) {
    std::ostringstream out;
    out << "seed=" << c.seed << "\n";
    out << "epochs=" << c.epochs << "\n";
    out << "batch_size=" << c.batch_size << "\n";
    char buf[64];
    auto put = [&](const char* k, double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << k << "=" << buf << "\n";
    };
    put("lr", c.lr);
    put("lr_decay", c.lr_decay);
    out << "max_steps=" << c.max_steps << "\n";
    put("lambda_si_var", c.weights.lambda_si_var);
    put("w_si", c.weights.w_si);
    put("w_tp_si", c.weights.w_tp_si);
    put("w_soc", c.weights.w_soc);
    put("w_smooth", c.weights.w_smooth);
    put("rho", c.rho);
    out << "num_classes=" << c.num_classes << "\n";
    put("ema_momentum", c.ema_momentum);
    out << "align_mode=" << c.align_mode << "\n";
    out << "patch=" << c.patch << "\n";
    out << "img_dim=" << c.img_dim << "\n";
    out << "txt_dim=" << c.txt_dim << "\n";
    out << "heads=" << c.heads << "\n";
    out << "decoder_width=" << c.decoder_width << "\n";
    out << "proj_mid=" << c.proj_mid << "\n";
    out << "proj_out=" << c.proj_out << "\n";
    out << "pool_factor=" << c.pool_factor << "\n";
    out << "global_rescale=" << (c.global_rescale ? "true" : "false") << "\n";
    out << "per_map_negatives=" << (c.per_map_negatives ? "true" : "false") << "\n";
    out << "checkpoint_interval=" << c.checkpoint_interval << "\n";
    return out.str();
}

std::uint64_t config_hash(const TrainConfig& cfg) { return hash_str(serialize_config(cfg)); }

AlignMode align_mode_from_string(const std::string& s) {
    if (s == "literal") return AlignMode::Literal;
    if (s == "disparity") return AlignMode::Disparity;
    throw ConfigError("config: align_mode must be 'literal' or 'disparity', got '" + s + "'");
}

TrainSample sample_from_scene(const SynthScene& scene) {
    return {scene.image, scene.rel, scene.gt, scene.tokens, scene.domain};
}

std::vector<TrainSample> load_samples(const std::string& manifest_path) {
    std::vector<TrainSample> samples;
    for (const auto& e : read_manifest(manifest_path)) {
        TrainSample s;
        s.image = read_ppm(e.image_path);
        s.rel = read_pfm(e.rel_path);
        s.gt = read_pfm(e.gt_path);
        s.tokens = read_tokens(e.tokens_path);
        s.domain = e.domain;
        if (s.rel.height != s.image.height || s.rel.width != s.image.width ||
            s.gt.height != s.image.height || s.gt.width != s.image.width)
            throw DimensionError("sample '" + e.id + "': raster sizes disagree");
        samples.push_back(std::move(s));
    }
    return samples;
}

Model::Model(const TrainConfig& cfg)
    : cfg_(cfg),
      image_encoder_(cfg.patch, cfg.img_dim, cfg.seed),
      text_encoder_(cfg.txt_dim, cfg.seed),
      align_(TextAlign::random_init(cfg.txt_dim, cfg.img_dim, cfg.seed)),
      attn_(AttentionParams::random_init(cfg.img_dim, cfg.heads, cfg.seed)),
      scale_head_(DecoderHead::random_init(cfg.img_dim, cfg.decoder_width,
                                           derive_seed(cfg.seed, "scale-head"))),
      shift_head_(DecoderHead::random_init(cfg.img_dim, cfg.decoder_width,
                                           derive_seed(cfg.seed, "shift-head"))),
      projector_(ProjectorParams::random_init(cfg.img_dim, cfg.proj_mid, cfg.proj_out,
                                              cfg.pool_factor, cfg.seed)) {
    params_.add("align.weight", align_.weight);
    params_.add("align.bias", align_.bias);
    params_.add("attn.wq", attn_.wq);
    params_.add("attn.wk_img", attn_.wk_img);
    params_.add("attn.wv_img", attn_.wv_img);
    params_.add("attn.wk_txt", attn_.wk_txt);
    params_.add("attn.wv_txt", attn_.wv_txt);
    params_.add("attn.wo", attn_.wo);
    params_.add("scale_head.proj_w", scale_head_.conv_proj_w);
    params_.add("scale_head.proj_b", scale_head_.conv_proj_b);
    params_.add("scale_head.up1_w", scale_head_.conv_up1_w);
    params_.add("scale_head.up1_b", scale_head_.conv_up1_b);
    params_.add("scale_head.up2_w", scale_head_.conv_up2_w);
    params_.add("scale_head.up2_b", scale_head_.conv_up2_b);
    params_.add("scale_head.out_w", scale_head_.conv_out_w);
    params_.add("scale_head.out_b", scale_head_.conv_out_b);
    params_.add("shift_head.proj_w", shift_head_.conv_proj_w);
    params_.add("shift_head.proj_b", shift_head_.conv_proj_b);
    params_.add("shift_head.up1_w", shift_head_.conv_up1_w);
    params_.add("shift_head.up1_b", shift_head_.conv_up1_b);
    params_.add("shift_head.up2_w", shift_head_.conv_up2_w);
    params_.add("shift_head.up2_b", shift_head_.conv_up2_b);
    params_.add("shift_head.out_w", shift_head_.conv_out_w);
    params_.add("shift_head.out_b", shift_head_.conv_out_b);
    params_.add("projector.conv1_w", projector_.conv1_w);
    params_.add("projector.conv1_b", projector_.conv1_b);
    params_.add("projector.conv2_w", projector_.conv2_w);
    params_.add("projector.conv2_b", projector_.conv2_b);

    // EMA mirror of the pre-projector trainables plus the projector; never
    // in the optimizer's parameter set
    m_align_.weight = clone_frozen(align_.weight);
    m_align_.bias = clone_frozen(align_.bias);
    m_attn_ = attn_;
    m_attn_.wq = clone_frozen(attn_.wq);
    m_attn_.wk_img = clone_frozen(attn_.wk_img);
    m_attn_.wv_img = clone_frozen(attn_.wv_img);
    m_attn_.wk_txt = clone_frozen(attn_.wk_txt);
    m_attn_.wv_txt = clone_frozen(attn_.wv_txt);
    m_attn_.wo = clone_frozen(attn_.wo);
    m_projector_ = projector_;
    m_projector_.conv1_w = clone_frozen(projector_.conv1_w);
    m_projector_.conv1_b = clone_frozen(projector_.conv1_b);
    m_projector_.conv2_w = clone_frozen(projector_.conv2_w);
    m_projector_.conv2_b = clone_frozen(projector_.conv2_b);
    momentum_.add("align.weight", m_align_.weight);
    momentum_.add("align.bias", m_align_.bias);
    momentum_.add("attn.wq", m_attn_.wq);
    momentum_.add("attn.wk_img", m_attn_.wk_img);
    momentum_.add("attn.wv_img", m_attn_.wv_img);
    momentum_.add("attn.wk_txt", m_attn_.wk_txt);
    momentum_.add("attn.wv_txt", m_attn_.wv_txt);
    momentum_.add("attn.wo", m_attn_.wo);
    momentum_.add("projector.conv1_w", m_projector_.conv1_w);
    momentum_.add("projector.conv1_b", m_projector_.conv1_b);
    momentum_.add("projector.conv2_w", m_projector_.conv2_w);
    momentum_.add("projector.conv2_b", m_projector_.conv2_b);
}

Model::Forward Model::forward(const TrainSample& sample, bool momentum_branch) const {
    const TextAlign& align = momentum_branch ? m_align_ : align_;
    const AttentionParams& attn = momentum_branch ? m_attn_ : attn_;

    Tensor f_img = image_encoder_.encode(sample.image);
    Tensor f_txt = align.apply(text_encoder_.encode(sample.tokens));
    Tensor f_out = cross_modality_attention(f_img, f_txt, attn);

    const int gh = grid_h(sample.image.height), gw = grid_w(sample.image.width);
    const int h = sample.image.height, w = sample.image.width;
    Tensor a = scale_head_.decode(f_out, gh, gw, h, w);
    Tensor b = shift_head_.decode(f_out, gh, gw, h, w);
    if (cfg_.global_rescale) {
        // ablation: one scale and one shift per image
        Tensor ones = Tensor::full({h, w}, 1.0);
        a = mul(ones, mean(a));
        b = mul(ones, mean(b));
    }
    std::vector<double> rel(sample.rel.values.begin(), sample.rel.values.end());
    Tensor rel_t = Tensor::from_data({h, w}, std::move(rel));
    return {f_out, a, b, rescale_depth(rel_t, a, b)};
}

Tensor Model::project(const Tensor& f_out, int grid_h, int grid_w, bool momentum_branch,
                      std::vector<uint8_t>* row_valid) const {
    const ProjectorParams& proj = momentum_branch ? m_projector_ : projector_;
    return proj.project(f_out, grid_h, grid_w, row_valid);
}

void Model::quantize_params_f32() {
    auto quantize = [](ParamStore& store) {
        for (auto& p : store.params)
            for (auto& v : p.raw_value()) v = static_cast<double>(static_cast<float>(v));
    };
    quantize(params_);
    quantize(momentum_);
}

double lr_schedule(int epoch, double base_lr, double decay) {
    if (epoch < 0) throw InputError("lr_schedule: negative epoch");
    return base_lr * std::pow(decay, static_cast<double>(epoch));
}

std::string train_record_line(const TrainStepRecord& r) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "step=%ld lr=%.8g l_si=%.6f l_tp_si=%.6f l_soc=%.6f l_es=%.6f total=%.6f "
                  "gate_rate=%.3f applied=%d",
                  r.step, r.lr, r.loss_si, r.loss_tp_si, r.loss_soc, r.loss_smooth,
                  r.loss_total, r.gate_rate, r.applied ? 1 : 0);
    return buf;
}

Trainer::Trainer(const TrainConfig& cfg, std::vector<TrainSample> data)
    : cfg_(cfg), data_(std::move(data)), model_(std::make_unique<Model>(cfg)) {
    if (data_.empty()) throw InputError("Trainer: no training samples");
    AdamWConfig oc;
    oc.lr = cfg.lr;
    optimizer_ = AdamW(oc);
    optimizer_.attach(model_->params());
    model_->quantize_params_f32();
}

long Trainer::steps_per_epoch() const {
    const long b = std::min<long>(cfg_.batch_size, static_cast<long>(data_.size()));
    return std::max<long>(1, static_cast<long>(data_.size()) / b);
}

long Trainer::total_steps() const {
    return cfg_.max_steps > 0 ? cfg_.max_steps
                              : static_cast<long>(cfg_.epochs) * steps_per_epoch();
}

std::vector<int> Trainer::batch_indices(long step) const {
    const int n = static_cast<int>(data_.size());
    const int b = std::min(cfg_.batch_size, n);
    const long spe = steps_per_epoch();
    const long epoch = step / spe;
    const long pos = step % spe;
    // per-epoch seeded shuffle; a step's batch depends only on (seed, step)
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(cfg_.seed, "epoch-shuffle", static_cast<std::uint64_t>(epoch)));
    for (int i = n - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i + 1)));
        std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
    }
    return {order.begin() + pos * b, order.begin() + pos * b + b};
}

TrainStepRecord Trainer::step() {
    const auto idxs = batch_indices(step_);
    const int b = static_cast<int>(idxs.size());
    const auto partners = select_key_partners(b, cfg_.seed, step_);
    const AlignMode mode = align_mode_from_string(cfg_.align_mode);

    TrainStepRecord rec;
    rec.step = step_;
    const long epoch = step_ / steps_per_epoch();
    rec.lr = lr_schedule(static_cast<int>(epoch), cfg_.lr, cfg_.lr_decay);

    for (auto& p : model_->params().params) p.zero_grad();

    try {
        // momentum-branch key embeddings, one per batch slot
        std::vector<SocKey> keys(static_cast<size_t>(b));
        for (int i = 0; i < b; ++i) {
            const TrainSample& s = data_[static_cast<size_t>(idxs[static_cast<size_t>(i)])];
            Tensor f_out_k = model_->forward(s, true).f_out;
            const int gh = model_->grid_h(s.image.height), gw = model_->grid_w(s.image.width);
            keys[static_cast<size_t>(i)].features = model_->project(f_out_k, gh, gw, true);
            const int kh = gh / model_->config().pool_factor;
            const int kw = gw / model_->config().pool_factor;
            try {
                auto [lo, hi] = depth_range(s.gt);
                if (hi > lo) {
                    keys[static_cast<size_t>(i)].classes =
                        depth_to_classes(s.gt, cfg_.num_classes, lo, hi, kh, kw);
                } else {
                    keys[static_cast<size_t>(i)].classes.height = kh;
                    keys[static_cast<size_t>(i)].classes.width = kw;
                    keys[static_cast<size_t>(i)].classes.num_classes = cfg_.num_classes;
                    keys[static_cast<size_t>(i)].classes.classes.assign(
                        static_cast<size_t>(kh) * kw, 0);
                    keys[static_cast<size_t>(i)].classes.valid.assign(
                        static_cast<size_t>(kh) * kw, 0);
                }
            } catch (const EmptyMaskError&) {
                keys[static_cast<size_t>(i)].classes.height = kh;
                keys[static_cast<size_t>(i)].classes.width = kw;
                keys[static_cast<size_t>(i)].classes.num_classes = cfg_.num_classes;
                keys[static_cast<size_t>(i)].classes.classes.assign(
                    static_cast<size_t>(kh) * kw, 0);
                keys[static_cast<size_t>(i)].classes.valid.assign(static_cast<size_t>(kh) * kw,
                                                                  0);
            }
        }

        Tensor batch_total;
        int gates_open = 0;
        for (int i = 0; i < b; ++i) {
            const TrainSample& s = data_[static_cast<size_t>(idxs[static_cast<size_t>(i)])];
            Model::Forward fwd = model_->forward(s, false);
            MetricOptions caps = options_for_domain(s.domain);
            std::vector<uint8_t> mask = make_valid_mask(s.gt, caps.cap_lo, caps.cap_hi);

            Tensor l_si = si_log(fwd.pred, s.gt, mask, cfg_.weights.lambda_si_var);

            Tensor l_tp = Tensor::scalar(0.0);
            try {
                AlignedPseudo ap = align_and_gate(s.rel, s.gt, mask, cfg_.rho, mode);
                if (ap.result.credible) {
                    ++gates_open;
                    l_tp = tp_si(fwd.pred, ap.pseudo, mask, ap.result.delta1, cfg_.rho,
                                 cfg_.weights.lambda_si_var);
                }
            } catch (const DegenerateAlignmentError&) {
                // unalignable sample: gate treated as closed
            }

            Tensor f_q = model_->project(fwd.f_out, model_->grid_h(s.image.height),
                                         model_->grid_w(s.image.width), false);
            const ClassMap& y_q = keys[static_cast<size_t>(i)].classes;
            std::vector<SocKey> sample_keys = {keys[static_cast<size_t>(i)],
                                               keys[static_cast<size_t>(
                                                   partners[static_cast<size_t>(i)])]};
            Tensor l_soc = soc_loss(f_q, y_q, sample_keys, cfg_.per_map_negatives);

            Tensor l_es = mul_scalar(
                add(edge_smooth(fwd.scale_map, s.image), edge_smooth(fwd.shift_map, s.image)),
                0.5);

            Tensor total = total_loss(l_si, l_tp, l_soc, l_es, cfg_.weights);
            rec.loss_si += l_si.item() / b;
            rec.loss_tp_si += l_tp.item() / b;
            rec.loss_soc += l_soc.item() / b;
            rec.loss_smooth += l_es.item() / b;
            batch_total = batch_total.defined() ? add(batch_total, total) : total;
        }
        batch_total = mul_scalar(batch_total, 1.0 / b);
        rec.loss_total = batch_total.item();
        rec.gate_rate = static_cast<double>(gates_open) / b;
        if (!std::isfinite(rec.loss_total))
            throw NumericError("train_step: non-finite batch loss");

        batch_total.backward();
        rec.applied = optimizer_.step(model_->params(), rec.lr);
        if (rec.applied) {
            // EMA strictly after the optimizer update
            ema_update(model_->momentum_params(), model_->params(), cfg_.ema_momentum);
            model_->quantize_params_f32();
            // optimizer moments live in f32 too, so checkpoints resume bitwise
            for (auto* side : {&optimizer_.moments1(), &optimizer_.moments2()})
                for (auto& m : *side)
                    for (auto& v : m) v = static_cast<double>(static_cast<float>(v));
        }
    } catch (const NumericError& e) {
        rec.applied = false;
        std::ostringstream ids;
        for (int idx : idxs) ids << " " << idx;
        std::cerr << "step " << step_ << " aborted (" << e.what() << "); sample indices:" << ids.str()
                  << "\n";
    }
    ++step_;
    return rec;
}

void Trainer::run(std::ostream* log, const std::string& out_dir) {
    const long total = total_steps();
    while (step_ < total) {
        TrainStepRecord rec = step();
        if (log) (*log) << train_record_line(rec) << "\n";
        if (!out_dir.empty() && cfg_.checkpoint_interval > 0 &&
            step_ % cfg_.checkpoint_interval == 0 && step_ < total) {
            save_checkpoint((std::filesystem::path(out_dir) /
                             ("checkpoint_" + std::to_string(step_) + ".bin"))
                                .string());
        }
    }
    if (!out_dir.empty())
        save_checkpoint((std::filesystem::path(out_dir) / "checkpoint_final.bin").string());
}

namespace {

constexpr char kCkptMagic[8] = {'D', 'S', 'C', 'K', 'P', 'T', '0', '1'};

void write_u32(std::ostream& out, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 4);
}
void write_u64(std::ostream& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 8);
}
std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}
std::uint64_t read_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

void write_f32_payload(std::ostream& out, const std::vector<double>& values) {
    for (double v : values) {
        const float f = static_cast<float>(v);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        write_u32(out, bits);
    }
}
void read_f32_payload(std::istream& in, std::vector<double>& values) {
    for (auto& v : values) {
        const std::uint32_t bits = read_u32(in);
        float f;
        std::memcpy(&f, &bits, 4);
        v = static_cast<double>(f);
    }
}

void write_named_blob(std::ostream& out, const std::string& name, const Tensor& t) {
    write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(out, static_cast<std::uint32_t>(t.shape().size()));
    for (int d : t.shape()) write_u32(out, static_cast<std::uint32_t>(d));
    write_f32_payload(out, t.value());
}

void read_named_blob(std::istream& in, const std::string& expect_name, Tensor& t) {
    const std::uint32_t len = read_u32(in);
    std::string name(len, '\0');
    in.read(name.data(), len);
    if (name != expect_name)
        throw ConfigError("checkpoint: expected parameter '" + expect_name + "', found '" +
                          name + "'");
    const std::uint32_t ndim = read_u32(in);
    std::vector<int> shape(ndim);
    for (auto& d : shape) d = static_cast<int>(read_u32(in));
    if (shape != t.shape()) throw ConfigError("checkpoint: shape mismatch for " + name);
    read_f32_payload(in, t.raw_value());
}

}  // namespace

TrainConfig read_checkpoint_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open checkpoint: " + path, 0);
    char magic[8];
    in.read(magic, 8);
    if (std::memcmp(magic, kCkptMagic, 8) != 0)
        throw ConfigError("checkpoint: bad magic in " + path);
    (void)read_u64(in);
    const std::uint32_t cfg_len = read_u32(in);
    std::string text(cfg_len, '\0');
    in.read(text.data(), cfg_len);
    if (!in) throw ParseError("truncated checkpoint: " + path, 0);
    return parse_config_text(text);
}

void Trainer::save_checkpoint(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open checkpoint for writing: " + path, 0);
    out.write(kCkptMagic, 8);
    write_u64(out, config_hash(cfg_));
    const std::string cfg_text = serialize_config(cfg_);
    write_u32(out, static_cast<std::uint32_t>(cfg_text.size()));
    out.write(cfg_text.data(), static_cast<std::streamsize>(cfg_text.size()));
    write_u64(out, static_cast<std::uint64_t>(step_));
    write_u64(out, static_cast<std::uint64_t>(optimizer_.step_count()));
    const auto& store = model_->params();
    write_u32(out, static_cast<std::uint32_t>(store.count()));
    for (size_t i = 0; i < store.count(); ++i)
        write_named_blob(out, store.names[i], store.params[i]);
    // optimizer moments, stored f32 like everything else; the training loop
    // quantizes state each step so this round-trips exactly
    auto& opt = const_cast<AdamW&>(optimizer_);
    for (size_t i = 0; i < store.count(); ++i) write_f32_payload(out, opt.moments1()[i]);
    for (size_t i = 0; i < store.count(); ++i) write_f32_payload(out, opt.moments2()[i]);
    const auto& mstore = model_->momentum_params();
    write_u32(out, static_cast<std::uint32_t>(mstore.count()));
    for (size_t i = 0; i < mstore.count(); ++i)
        write_named_blob(out, mstore.names[i], mstore.params[i]);
}

void Trainer::load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open checkpoint: " + path, 0);
    char magic[8];
    in.read(magic, 8);
    if (std::memcmp(magic, kCkptMagic, 8) != 0)
        throw ConfigError("checkpoint: bad magic in " + path);
    const std::uint64_t hash = read_u64(in);
    const std::uint32_t cfg_len = read_u32(in);
    in.ignore(cfg_len);
    if (hash != config_hash(cfg_))
        throw ConfigError("checkpoint: config hash mismatch (file was trained with a "
                          "different configuration)");
    step_ = static_cast<long>(read_u64(in));
    const long adam_t = static_cast<long>(read_u64(in));
    auto& store = model_->params();
    const std::uint32_t n = read_u32(in);
    if (n != store.count()) throw ConfigError("checkpoint: parameter count mismatch");
    for (size_t i = 0; i < store.count(); ++i)
        read_named_blob(in, store.names[i], store.params[i]);
    optimizer_.attach(store);
    optimizer_.set_step_count(adam_t);
    for (size_t i = 0; i < store.count(); ++i) read_f32_payload(in, optimizer_.moments1()[i]);
    for (size_t i = 0; i < store.count(); ++i) read_f32_payload(in, optimizer_.moments2()[i]);
    auto& mstore = model_->momentum_params();
    const std::uint32_t mn = read_u32(in);
    if (mn != mstore.count()) throw ConfigError("checkpoint: momentum parameter count mismatch");
    for (size_t i = 0; i < mstore.count(); ++i)
        read_named_blob(in, mstore.names[i], mstore.params[i]);
    if (!in) throw ParseError("truncated checkpoint: " + path, 0);
}

std::uint64_t Trainer::param_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto fold = [&](const ParamStore& store) {
        for (const auto& p : store.params)
            for (double v : p.value()) {
                const float f = static_cast<float>(v);
                std::uint32_t bits;
                std::memcpy(&bits, &f, 4);
                h = mix64(h ^ bits);
            }
    };
    fold(model_->params());
    fold(model_->momentum_params());
    return h;
}

DepthRaster raster_from_pred(const Tensor& pred, const DepthRaster& rel) {
    DepthRaster out;
    out.height = rel.height;
    out.width = rel.width;
    out.values.resize(rel.pixel_count());
    out.valid.resize(rel.pixel_count());
    const auto& v = pred.value();
    for (size_t i = 0; i < rel.pixel_count(); ++i) {
        out.values[i] = static_cast<float>(v[i]);
        out.valid[i] = (rel.valid[i] && std::isfinite(out.values[i]) && out.values[i] > 0.0f)
                           ? 1
                           : 0;
    }
    return out;
}

}  // namespace depthscale
