#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "depthscale/align.hpp"
#include "depthscale/errors.hpp"
#include "depthscale/metrics.hpp"
#include "depthscale/synth.hpp"
#include "depthscale/train.hpp"

namespace fs = std::filesystem;
using namespace depthscale;

namespace {

// exit-code contract: 0 success, 1 usage, 2 data, 3 numeric failure
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

bool g_timestamps = false;

void log_line(const std::string& msg) {
    if (g_timestamps) {
        const auto now = std::chrono::system_clock::now();
        const std::time_t t = std::chrono::system_clock::to_time_t(now);
        char buf[32];
        std::strftime(buf, sizeof(buf), "%FT%T", std::gmtime(&t));
        std::cout << buf << "Z " << msg << "\n";
    } else {
        std::cout << msg << "\n";
    }
}

int cmd_synth(std::uint64_t seed, int count, int size, const std::string& out) {
    try {
        fs::create_directories(out);
    } catch (const std::exception& e) {
        std::cerr << "cannot create output directory: " << e.what() << "\n";
        return kExitData;
    }
    auto scenes = synth_generate(seed, count, size, size);
    synth_write_dataset(scenes, out);
    log_line("wrote " + std::to_string(scenes.size()) + " scenes to " + out);
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_path,
              const std::string& out, const std::string& resume) {
    TrainConfig cfg;
    try {
        cfg = parse_config_file(config_path);
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    }
    std::vector<TrainSample> samples;
    try {
        samples = load_samples(data_path);
        if (samples.empty()) {
            std::cerr << "manifest has no samples: " << data_path << "\n";
            return kExitData;
        }
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return kExitData;
    }
    fs::create_directories(out);
    Trainer trainer(cfg, std::move(samples));
    if (!resume.empty()) {
        try {
            trainer.load_checkpoint(resume);
        } catch (const std::exception& e) {
            std::cerr << e.what() << "\n";
            return kExitData;
        }
    }
    std::ofstream log_file(fs::path(out) / "train.log",
                           resume.empty() ? std::ios::trunc : std::ios::app);
    const long total = trainer.total_steps();
    long rejected_in_a_row = 0;
    while (trainer.current_step() < total) {
        TrainStepRecord rec = trainer.step();
        const std::string line = train_record_line(rec);
        log_file << line << "\n";
        log_line(line);
        rejected_in_a_row = rec.applied ? 0 : rejected_in_a_row + 1;
        if (rejected_in_a_row >= 10) {
            std::cerr << "training diverged: 10 consecutive rejected steps\n";
            return kExitNumeric;
        }
        if (cfg.checkpoint_interval > 0 && trainer.current_step() % cfg.checkpoint_interval == 0)
            trainer.save_checkpoint(
                (fs::path(out) / ("checkpoint_" + std::to_string(trainer.current_step()) + ".bin"))
                    .string());
    }
    trainer.save_checkpoint((fs::path(out) / "checkpoint_final.bin").string());
    return 0;
}

int cmd_align(const std::string& rel_path, const std::string& gt_path, double rho,
              const std::string& mode_str) {
    AlignMode mode;
    try {
        mode = align_mode_from_string(mode_str);
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    }
    DepthRaster rel, gt;
    try {
        rel = read_pfm(rel_path);
        gt = read_pfm(gt_path);
        if (rel.height != gt.height || rel.width != gt.width) {
            std::cerr << "rasters disagree on size\n";
            return kExitData;
        }
    } catch (const ParseError& e) {
        std::cerr << e.what() << "\n";
        return kExitData;
    }
    std::vector<uint8_t> mask(rel.pixel_count(), 1);
    try {
        AlignedPseudo ap = align_and_gate(rel, gt, mask, rho, mode);
        char buf[160];
        std::snprintf(buf, sizeof(buf), "alpha=%.9g beta=%.9g delta1=%.6f credible=%s",
                      ap.result.alpha, ap.result.beta, ap.result.delta1,
                      ap.result.credible ? "true" : "false");
        log_line(buf);
        return 0;
    } catch (const DegenerateAlignmentError& e) {
        std::cerr << e.what() << "\n";
        return kExitNumeric;
    }
}

int cmd_infer(const std::string& checkpoint, const std::string& image_path,
              const std::string& rel_path, const std::string& tokens_path,
              const std::string& out) {
    TrainConfig cfg;
    TrainSample sample;
    try {
        cfg = read_checkpoint_config(checkpoint);
        sample.image = read_ppm(image_path);
        sample.rel = read_pfm(rel_path);
        sample.tokens = read_tokens(tokens_path);
        sample.domain = "indoor";
        if (sample.rel.height != sample.image.height || sample.rel.width != sample.image.width) {
            std::cerr << "image and relative depth disagree on size\n";
            return kExitData;
        }
        if (sample.image.height % cfg.patch != 0 || sample.image.width % cfg.patch != 0) {
            std::cerr << "image dims must be divisible by the model patch size "
                      << cfg.patch << "\n";
            return kExitData;
        }
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return kExitData;
    }
    fs::create_directories(out);
    // gt is unused at inference; a dummy raster keeps the sample complete
    sample.gt = DepthRaster::filled(sample.rel.height, sample.rel.width, 1.0f);
    Trainer trainer(cfg, {sample});
    try {
        trainer.load_checkpoint(checkpoint);
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return kExitData;
    }
    Model::Forward fwd = trainer.model().forward(sample, false);
    DepthRaster a = raster_from_pred(fwd.scale_map, sample.rel);
    DepthRaster b = raster_from_pred(fwd.shift_map, sample.rel);
    DepthRaster metric = raster_from_pred(fwd.pred, sample.rel);
    write_pfm(a, (fs::path(out) / "A.pfm").string());
    write_pfm(b, (fs::path(out) / "B.pfm").string());
    write_pfm(metric, (fs::path(out) / "metric.pfm").string());
    log_line("wrote A.pfm, B.pfm, metric.pfm to " + out);
    return 0;
}

int cmd_eval(const std::string& pred_dir, const std::string& gt_dir, const std::string& domain) {
    std::vector<fs::path> pred_files;
    try {
        for (const auto& entry : fs::directory_iterator(pred_dir))
            if (entry.path().extension() == ".pfm") pred_files.push_back(entry.path());
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return kExitData;
    }
    std::sort(pred_files.begin(), pred_files.end());
    if (pred_files.empty()) {
        std::cerr << "no .pfm files in " << pred_dir << "\n";
        return kExitData;
    }
    const MetricOptions opts = options_for_domain(domain);
    std::vector<std::pair<std::string, MetricReport>> rows;
    MetricReport agg;
    double n_rows = 0;
    for (const auto& pf : pred_files) {
        const fs::path gtf = fs::path(gt_dir) / pf.filename();
        if (!fs::exists(gtf)) {
            std::cerr << "missing ground-truth pair for " << pf.filename().string() << "\n";
            return kExitData;
        }
        try {
            DepthRaster pred = read_pfm(pf.string());
            DepthRaster gt = read_pfm(gtf.string());
            std::vector<uint8_t> mask(gt.pixel_count(), 1);
            MetricReport r = evaluate(pred, gt, mask, opts);
            log_line(metric_record_line(pf.stem().string(), r));
            rows.emplace_back(pf.stem().string(), r);
            agg.abs_rel += r.abs_rel;
            agg.sq_rel += r.sq_rel;
            agg.rmse += r.rmse;
            agg.rmse_log += r.rmse_log;
            agg.log10 += r.log10;
            agg.delta1 += r.delta1;
            agg.delta2 += r.delta2;
            agg.delta3 += r.delta3;
            agg.pixel_count += r.pixel_count;
            n_rows += 1;
        } catch (const std::exception& e) {
            std::cerr << e.what() << "\n";
            return kExitData;
        }
    }
    agg.abs_rel /= n_rows;
    agg.sq_rel /= n_rows;
    agg.rmse /= n_rows;
    agg.rmse_log /= n_rows;
    agg.log10 /= n_rows;
    agg.delta1 /= n_rows;
    agg.delta2 /= n_rows;
    agg.delta3 /= n_rows;
    rows.emplace_back("aggregate", agg);
    std::cout << metric_table(rows);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"relative-to-metric depth rescaling pipeline"};
    app.require_subcommand(1);
    app.add_flag("--timestamps", g_timestamps, "prefix log lines with ISO-8601 timestamps");

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    std::uint64_t seed = 1;
    int count = 8, size = 32;
    std::string out_dir = "out";
    synth->add_option("--seed", seed, "generator seed");
    synth->add_option("--count", count, "number of scenes");
    synth->add_option("--size", size, "square scene resolution");
    synth->add_option("--out", out_dir, "output directory")->required();

    auto* train = app.add_subcommand("train", "train on a manifest dataset");
    std::string config_path, data_path, train_out, resume;
    train->add_option("--config", config_path, "training config file")->required();
    train->add_option("--data", data_path, "manifest path")->required();
    train->add_option("--out", train_out, "output directory")->required();
    train->add_option("--resume", resume, "checkpoint to resume from");

    auto* align = app.add_subcommand("align", "closed-form least-squares alignment");
    std::string rel_path, gt_path, mode_str = "literal";
    double rho = 0.9;
    align->add_option("--rel", rel_path, "relative depth PFM")->required();
    align->add_option("--gt", gt_path, "ground-truth depth PFM")->required();
    align->add_option("--rho", rho, "credibility threshold");
    align->add_option("--mode", mode_str, "alignment space: literal or disparity");

    auto* infer = app.add_subcommand("infer", "run a checkpoint on one sample");
    std::string ckpt, image_path, infer_rel, tokens_path, infer_out;
    infer->add_option("--checkpoint", ckpt, "checkpoint file")->required();
    infer->add_option("--image", image_path, "input PPM image")->required();
    infer->add_option("--rel", infer_rel, "relative depth PFM")->required();
    infer->add_option("--tokens", tokens_path, "text token file")->required();
    infer->add_option("--out", infer_out, "output directory")->required();

    auto* eval = app.add_subcommand("eval", "depth metrics over paired PFM directories");
    std::string pred_dir, eval_gt_dir, domain = "indoor";
    eval->add_option("--pred-dir", pred_dir, "predictions directory")->required();
    eval->add_option("--gt-dir", eval_gt_dir, "ground-truth directory")->required();
    eval->add_option("--domain", domain, "domain tag for caps (indoor/outdoor/surgical)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (synth->parsed()) return cmd_synth(seed, count, size, out_dir);
        if (train->parsed()) return cmd_train(config_path, data_path, train_out, resume);
        if (align->parsed()) return cmd_align(rel_path, gt_path, rho, mode_str);
        if (infer->parsed()) return cmd_infer(ckpt, image_path, infer_rel, tokens_path, infer_out);
        if (eval->parsed()) return cmd_eval(pred_dir, eval_gt_dir, domain);
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    } catch (const NumericError& e) {
        std::cerr << e.what() << "\n";
        return kExitNumeric;
    } catch (const DegenerateAlignmentError& e) {
        std::cerr << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
