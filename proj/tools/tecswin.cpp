#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tecswin/config.hpp"
#include "tecswin/datapipe.hpp"
#include "tecswin/image.hpp"
#include "tecswin/metrics.hpp"
#include "tecswin/model.hpp"
#include "tecswin/schedule.hpp"
#include "tecswin/serialize.hpp"
#include "tecswin/toydata.hpp"
#include "tecswin/train.hpp"

namespace fs = std::filesystem;
using namespace tecswin;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::vector<TrainSample> toy_training_set(const RunConfig& cfg, int per_class) {
    Rng rng(cfg.seed ^ 0xDA7A);
    std::vector<TrainSample> data;
    for (auto& [img, cls] : make_toy_dataset(per_class, cfg.model.image_size, rng))
        data.push_back({img, toy_class_prompt(cls)});
    return data;
}

// candidate list syntax: "5..15" or "5,7,9"
std::vector<int> parse_candidates(const std::string& s) {
    std::vector<int> out;
    auto dots = s.find("..");
    if (dots != std::string::npos) {
        int lo = std::stoi(s.substr(0, dots)), hi = std::stoi(s.substr(dots + 2));
        for (int v = lo; v <= hi; ++v) out.push_back(v);
    } else {
        std::stringstream ss(s);
        std::string tok;
        while (std::getline(ss, tok, ',')) out.push_back(std::stoi(tok));
    }
    if (out.empty()) throw std::runtime_error("empty candidate list: " + s);
    return out;
}

// grid syntax: "start:stop:step" (inclusive stop) or comma list
std::vector<double> parse_grid(const std::string& s) {
    std::vector<double> out;
    if (std::count(s.begin(), s.end(), ':') == 2) {
        auto p1 = s.find(':'), p2 = s.find(':', p1 + 1);
        double lo = std::stod(s.substr(0, p1));
        double hi = std::stod(s.substr(p1 + 1, p2 - p1 - 1));
        double st = std::stod(s.substr(p2 + 1));
        if (st <= 0) throw std::runtime_error("grid step must be positive");
        for (double v = lo; v <= hi + st * 1e-9; v += st) out.push_back(v);
    } else {
        std::stringstream ss(s);
        std::string tok;
        while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
    }
    if (out.empty()) throw std::runtime_error("empty grid: " + s);
    return out;
}

Tensor sample_batch(TecSwinModel& model, const RunConfig& cfg, const std::string& prompt,
                    const StageSchedule& sched, double cond_scale, int batch, uint64_t seed) {
    model.set_prompts({prompt});
    NoiseSchedule noise = NoiseSchedule::cosine(cfg.train_T);
    GuidanceConfig g = cfg.guidance;
    g.cond_scale = cond_scale;
    Rng rng(seed);
    Shape shape = {batch, cfg.model.image_size, cfg.model.image_size, cfg.model.in_channels};
    return sample_loop(model, shape, sched.realized(), sched.boundaries[0], noise, g, rng);
}

// class-balanced proxy-FID of a few generated batches against a toy reference
double toy_proxy_fid(TecSwinModel& model, const RunConfig& cfg, const StageSchedule& sched,
                     double cond_scale, int per_class, uint64_t seed) {
    Rng ref_rng(seed ^ 0x5EF5);
    std::vector<Tensor> real;
    for (auto& [img, cls] : make_toy_dataset(per_class * 2, cfg.model.image_size, ref_rng))
        real.push_back(img);

    std::vector<Tensor> fake;
    for (int cls = 0; cls < kToyClasses; ++cls) {
        Tensor batch = sample_batch(model, cfg, toy_class_prompt(cls), sched, cond_scale,
                                    per_class, seed + cls);
        int64_t hw3 = batch.numel() / batch.dim(0);
        for (int64_t b = 0; b < batch.dim(0); ++b) {
            std::vector<float> px(batch.data().begin() + b * hw3,
                                  batch.data().begin() + (b + 1) * hw3);
            fake.push_back(Tensor::from_data({batch.dim(1), batch.dim(2), batch.dim(3)},
                                             std::move(px)));
        }
    }
    FeatureExtractor fx;
    return frechet_distance(fx.extract(real), fx.extract(fake));
}

std::vector<Tensor> load_tsw_dir(const std::string& dir) {
    std::vector<std::string> paths;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".tsw") paths.push_back(e.path().string());
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) throw std::runtime_error("no .tsw files in " + dir);
    std::vector<Tensor> out;
    for (const auto& p : paths) out.push_back(load_tensor(p));
    return out;
}

void split_and_write(const Tensor& batch, const std::string& out_png,
                     const std::string& out_tsw) {
    int64_t B = batch.dim(0), hw3 = batch.numel() / batch.dim(0);
    for (int64_t b = 0; b < B; ++b) {
        std::vector<float> px(batch.data().begin() + b * hw3,
                              batch.data().begin() + (b + 1) * hw3);
        Tensor img = Tensor::from_data({batch.dim(1), batch.dim(2), batch.dim(3)},
                                       std::move(px));
        std::string stem = B == 1 ? "" : "_" + std::to_string(b);
        if (!out_png.empty()) {
            fs::path p(out_png);
            write_png((p.parent_path() / (p.stem().string() + stem + p.extension().string()))
                          .string(),
                      img);
        }
        if (!out_tsw.empty()) {
            fs::path p(out_tsw);
            save_tensor((p.parent_path() / (p.stem().string() + stem + p.extension().string()))
                            .string(),
                        img);
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"text-conditioned Swin diffusion toolkit"};
    app.require_subcommand(1);

    // ---- train ----
    auto* train = app.add_subcommand("train", "train on the synthetic shape corpus");
    std::string cfg_path = "run.json";
    bool finetune = false;
    int per_class = 32;
    std::string loss_log;
    train->add_option("--config", cfg_path, "run config JSON")->required();
    train->add_flag("--finetune", finetune, "constant low learning rate preset");
    train->add_option("--per-class", per_class, "toy images per class");
    train->add_option("--loss-log", loss_log, "write per-step losses (JSONL)");
    train->callback([&] {
        RunConfig cfg = RunConfig::load(cfg_path);
        TecSwinModel model(cfg.model, cfg.init_seed);
        if (finetune && fs::exists(cfg.checkpoint_path)) model.load(cfg.checkpoint_path);

        TrainConfig tc;
        tc.steps = cfg.train_steps;
        tc.batch = cfg.batch;
        tc.mask_prob = cfg.guidance.mask_prob;
        tc.seed = cfg.seed;
        tc.checkpoint_path = cfg.checkpoint_path;
        tc.checkpoint_every = cfg.checkpoint_every;
        tc.lr = finetune ? LrSchedule::finetune(cfg.train_steps)
                         : LrSchedule::cosine(cfg.train_steps, cfg.lr_peak, cfg.lr_floor,
                                              cfg.warmup_frac);

        auto data = toy_training_set(cfg, per_class);
        NoiseSchedule noise = NoiseSchedule::cosine(cfg.train_T);
        TrainResult r = run_train(model, data, noise, tc, true);
        if (!loss_log.empty()) {
            std::ofstream f(loss_log, std::ios::trunc);
            for (size_t i = 0; i < r.losses.size(); ++i)
                f << "{\"step\":" << i << ",\"loss\":" << r.losses[i] << "}\n";
        }
        std::printf("trained %lld steps; initial loss %.5f, final loss %.5f\n",
                    static_cast<long long>(cfg.train_steps),
                    r.losses.empty() ? 0.0 : r.losses.front(), r.final_loss);
        std::printf("checkpoint: %s\n", cfg.checkpoint_path.c_str());
    });

    // ---- sample ----
    auto* sample = app.add_subcommand("sample", "generate images from a prompt");
    std::string prompt, schedule_file, out_png = "sample.png", out_tsw;
    std::string ckpt;
    double cond_scale = 1.14;
    int steps = 190;
    int batch = 1;
    uint64_t seed = 0;
    sample->add_option("--config", cfg_path, "run config JSON")->required();
    sample->add_option("--checkpoint", ckpt, "checkpoint (defaults to config path)");
    sample->add_option("--prompt", prompt, "text prompt")->required();
    sample->add_option("--cond-scale", cond_scale, "guidance scale");
    sample->add_option("--steps", steps, "uniform inference steps (ignored with --schedule)");
    sample->add_option("--schedule", schedule_file, "staged schedule JSON");
    sample->add_option("--seed", seed, "sampling seed");
    sample->add_option("--batch", batch, "images per prompt");
    sample->add_option("--out", out_png, "output PNG path");
    sample->add_option("--out-tsw", out_tsw, "also write raw tensors");
    sample->callback([&] {
        RunConfig cfg = RunConfig::load(cfg_path);
        TecSwinModel model(cfg.model, cfg.init_seed);
        model.load(ckpt.empty() ? cfg.checkpoint_path : ckpt);

        StageSchedule sched = schedule_file.empty()
                                  ? build_staged_schedule(steps, 1, {steps})
                                  : StageSchedule::from_json(read_file(schedule_file));
        Tensor out = sample_batch(model, cfg, prompt, sched, cond_scale, batch, seed);
        split_and_write(out, out_png, out_tsw);
        std::printf("wrote %d sample(s) for prompt \"%s\" (%d steps, cond-scale %.3f)\n",
                    batch, prompt.c_str(), sched.total_steps(), cond_scale);
    });

    // ---- search-schedule ----
    auto* search = app.add_subcommand("search-schedule",
                                      "greedy per-stage substep search against proxy-FID");
    int stages = 19, base_substeps = 10, fid_per_class = 8, passes = 1, search_T = 190;
    std::string candidates = "5..15", sched_out = "schedule.json",
                report_out = "search_report.jsonl";
    search->add_option("--config", cfg_path, "run config JSON")->required();
    search->add_option("--checkpoint", ckpt, "checkpoint (defaults to config path)");
    search->add_option("--stages", stages, "number of trajectory stages");
    search->add_option("--base-substeps", base_substeps, "uniform starting substeps");
    search->add_option("--candidates", candidates, "per-stage candidates, e.g. 5..15");
    search->add_option("--timestep-max", search_T, "inference-grid maximum");
    search->add_option("--samples", fid_per_class, "generated images per class per trial");
    search->add_option("--passes", passes, "coordinate-descent sweeps");
    search->add_option("--seed", seed, "evaluation seed");
    search->add_option("--out", sched_out, "best schedule JSON");
    search->add_option("--report", report_out, "trial log JSONL");
    search->callback([&] {
        RunConfig cfg = RunConfig::load(cfg_path);
        TecSwinModel model(cfg.model, cfg.init_seed);
        model.load(ckpt.empty() ? cfg.checkpoint_path : ckpt);

        StageSchedule base = build_staged_schedule(search_T, stages, {base_substeps});
        auto metric = [&](const StageSchedule& s) {
            return toy_proxy_fid(model, cfg, s, cfg.guidance.cond_scale, fid_per_class, seed);
        };
        SearchReport rep =
            greedy_substep_search(metric, base, parse_candidates(candidates), passes);
        std::ofstream(sched_out, std::ios::trunc) << rep.final_schedule.to_json() << "\n";
        std::ofstream(report_out, std::ios::trunc) << rep.to_jsonl();
        std::printf("proxy-FID %.6f -> %.6f over %zu trials; schedule: %s\n",
                    rep.initial_metric, rep.final_metric, rep.trials.size(), sched_out.c_str());
    });

    // ---- scan ----
    auto* scan = app.add_subcommand("scan", "grid scan of a scalar sampling knob");
    std::string param = "cond-scale", grid_spec = "1.10:1.26:0.02";
    int scan_steps = 20, scan_per_class = 8;
    scan->add_option("--config", cfg_path, "run config JSON")->required();
    scan->add_option("--checkpoint", ckpt, "checkpoint (defaults to config path)");
    scan->add_option("--param", param, "cond-scale or steps");
    scan->add_option("--grid", grid_spec, "start:stop:step or comma list");
    scan->add_option("--steps", scan_steps, "inference steps during the scan");
    scan->add_option("--samples", scan_per_class, "generated images per class per point");
    scan->add_option("--seed", seed, "evaluation seed");
    scan->callback([&] {
        RunConfig cfg = RunConfig::load(cfg_path);
        TecSwinModel model(cfg.model, cfg.init_seed);
        model.load(ckpt.empty() ? cfg.checkpoint_path : ckpt);

        std::function<double(double)> metric;
        if (param == "cond-scale") {
            StageSchedule sched = build_staged_schedule(scan_steps, 1, {scan_steps});
            metric = [&, sched](double x) {
                return toy_proxy_fid(model, cfg, sched, x, scan_per_class, seed);
            };
        } else if (param == "steps") {
            metric = [&](double x) {
                int n = std::max(1, static_cast<int>(std::lround(x)));
                StageSchedule sched = build_staged_schedule(n, 1, {n});
                return toy_proxy_fid(model, cfg, sched, cfg.guidance.cond_scale,
                                     scan_per_class, seed);
            };
        } else {
            throw CLI::ValidationError("--param must be cond-scale or steps");
        }
        auto [best, table] = scan_scalar(metric, parse_grid(grid_spec));
        for (auto& [x, m] : table) std::printf("%-10s %.4f  proxy-FID %.6f\n", param.c_str(), x, m);
        std::printf("best %s: %.4f\n", param.c_str(), best);
    });

    // ---- filter ----
    auto* filter = app.add_subcommand("filter", "run the pair-filtering pipeline");
    std::string manifest_in, manifest_out, quarantine, stats_out;
    filter->add_option("--manifest", manifest_in, "input JSONL manifest")->required();
    filter->add_option("--out", manifest_out, "kept records")->required();
    filter->add_option("--quarantine", quarantine, "unparseable/failed records")->required();
    filter->add_option("--stats", stats_out, "stats JSON (default: stdout)");
    filter->callback([&] {
        PipelineStats stats = run_pipeline(manifest_in, manifest_out, quarantine);
        if (stats_out.empty())
            std::printf("%s\n", stats.to_json().c_str());
        else
            std::ofstream(stats_out, std::ios::trunc) << stats.to_json() << "\n";
    });

    // ---- fid ----
    auto* fid = app.add_subcommand("fid", "proxy-FID between two raw-tensor image sets");
    std::string real_dir, fake_dir;
    fid->add_option("--real", real_dir, "directory of .tsw images")->required();
    fid->add_option("--fake", fake_dir, "directory of .tsw images")->required();
    fid->callback([&] {
        FeatureExtractor fx;
        double d = frechet_distance(fx.extract(load_tsw_dir(real_dir)),
                                    fx.extract(load_tsw_dir(fake_dir)));
        std::printf("proxy-FID %.6f\n", d);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
