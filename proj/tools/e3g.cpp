// e3g: data generation, training, inference, evaluation and latency benchmarking.

#include "e3g/force_closure.hpp"
#include "e3g/image_io.hpp"
#include "e3g/pipeline.hpp"
#include "e3g/weights_io.hpp"

#include "CLI11.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

namespace fs = std::filesystem;
using namespace e3g;

namespace {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kUnwritable = 2,
    kNanLoss = 3,
    kBadWeights = 4,
    kResolutionMismatch = 5,
};

struct UnwritableError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void ensure_parent_writable(const fs::path& file)
{
    std::error_code ec;
    const fs::path parent = file.has_parent_path() ? file.parent_path() : fs::path(".");
    fs::create_directories(parent, ec);
    const bool existed = fs::exists(file);
    {
        std::ofstream probe(file, std::ios::app);
        if (!probe) throw UnwritableError("cannot write " + file.string());
    }
    if (!existed) fs::remove(file, ec);
}

void write_json_or_fail(const fs::path& path, const nlohmann::json& j)
{
    try {
        write_json_file(path, j);
    } catch (const std::exception& e) {
        throw UnwritableError(e.what());
    }
}

PipelineConfig load_config(const std::string& path)
{
    if (path.empty()) return {};
    return config_from_json(read_json_file(path));
}

struct AblationOpts {
    bool no_rfp = false, no_glh = false, no_rrh = false;
    void apply(PipelineConfig& cfg) const
    {
        if (no_rfp) cfg.ablation.use_rfp = false;
        if (no_glh) cfg.ablation.use_fpn_heatmap = false;
        if (no_rrh) cfg.ablation.use_rotation_heatmap = false;
    }
};

void add_ablation_flags(CLI::App* cmd, AblationOpts& a)
{
    cmd->add_flag("--no-rfp", a.no_rfp, "re-encode a raw crop per region instead of sharing the scene features");
    cmd->add_flag("--no-glh", a.no_glh, "uniform graspability instead of the location heatmap");
    cmd->add_flag("--no-rrh", a.no_rrh, "decode only the best anchor per region");
}

Model load_model(const std::string& weights, const PipelineConfig& cfg)
{
    Model m{cfg, load_weights(weights)};
    check_params_match(cfg, m.params);
    return m;
}

// ---------------------------------------------------------------- gen-data

struct GenOpts {
    int scenes = 1, objects = 5;
    std::uint64_t seed = 0;
    std::string out;
    int width = 96, height = 96;
};

int cmd_gen_data(const GenOpts& o)
{
    const fs::path root(o.out);
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec || !fs::is_directory(root)) {
        std::cerr << "gen-data: cannot create " << root << (ec ? ": " + ec.message() : "") << '\n';
        return kUnwritable;
    }
    const CameraIntrinsics intr = default_intrinsics(o.width, o.height);
    std::size_t labels = 0;
    for (int i = 0; i < o.scenes; ++i) {
        int failures = 0;
        const SceneRecord rec = generate_record(o.seed, i, o.objects, intr, &failures);
        if (failures > 0)
            std::cerr << "warning: " << rec.id << ": placed " << rec.scene.primitives.size() << " of " << o.objects
                      << " objects\n";
        try {
            write_scene_dir(root / rec.id, rec);
        } catch (const std::exception& e) {
            std::cerr << "gen-data: " << e.what() << '\n';
            return kUnwritable;
        }
        labels += rec.labels.size();
    }
    std::cout << "wrote " << o.scenes << " scenes (" << labels << " labels) to " << root.string() << '\n';
    return kOk;
}

// ------------------------------------------------------------------- train

struct TrainCliOpts {
    std::string data, out, log, config;
    TrainOptions train;
    std::uint64_t seed = 7;
    bool seed_set = false;
};

int cmd_train(const TrainCliOpts& o)
{
    PipelineConfig cfg = load_config(o.config);
    if (o.seed_set) cfg.seed = o.seed;
    const fs::path out(o.out);
    const fs::path log_path = o.log.empty() ? fs::path(o.out + ".loss.csv") : fs::path(o.log);
    try {
        ensure_parent_writable(out);
        ensure_parent_writable(log_path);
    } catch (const UnwritableError& e) {
        std::cerr << "train: " << e.what() << '\n';
        return kUnwritable;
    }

    std::vector<TrainSample> samples;
    for (const auto& dir : list_scene_dirs(o.data)) {
        const SceneRecord rec = read_scene_dir(dir);
        if (rec.frame.height() != cfg.encoder.input_h || rec.frame.width() != cfg.encoder.input_w) {
            std::cerr << "train: " << rec.id << " is " << rec.frame.width() << "x" << rec.frame.height()
                      << ", config expects " << cfg.encoder.input_w << "x" << cfg.encoder.input_h << '\n';
            return kResolutionMismatch;
        }
        samples.push_back(make_train_sample(rec));
    }
    if (samples.empty() && o.train.epochs > 0) {
        std::cerr << "train: no scenes under " << o.data << '\n';
        return kFailure;
    }

    Model model = init_model(cfg);
    std::ofstream log(log_path, std::ios::trunc);
    log << "epoch,heatmap_loss,rotation_loss,refine_loss\n";
    log.flush();
    try {
        train_model(model, samples, o.train, [&](const EpochLog& e) {
            char line[160];
            std::snprintf(line, sizeof line, "%d,%.9g,%.9g,%.9g\n", e.epoch, e.heatmap, e.rotation, e.refine);
            log << line;
            log.flush();
            std::printf("epoch %d: heatmap %.4f rotation %.4f refine %.4f total %.4f\n", e.epoch, e.heatmap,
                        e.rotation, e.refine, e.total());
            std::fflush(stdout);
        });
    } catch (const NonFiniteLossError& e) {
        std::cerr << "train: " << e.what() << "; aborting, loss log kept at " << log_path.string() << '\n';
        return kNanLoss;
    }
    try {
        save_weights(out, model.params);
        write_json_file(fs::path(o.out + ".config.json"), config_to_json(cfg));
    } catch (const std::exception& e) {
        std::cerr << "train: " << e.what() << '\n';
        return kUnwritable;
    }
    std::cout << "saved " << out.string() << '\n';
    return kOk;
}

// ------------------------------------------------------------------- infer

struct InferOpts {
    std::string weights, frame, out, dump_heatmap, dump_regions, config;
    std::vector<float> tta;
    AblationOpts ablation;
};

PipelineConfig config_for_weights(const std::string& explicit_config, const std::string& weights)
{
    if (!explicit_config.empty()) return load_config(explicit_config);
    const fs::path sibling(weights + ".config.json");
    if (fs::exists(sibling)) return config_from_json(read_json_file(sibling));
    return {};
}

int cmd_infer(const InferOpts& o)
{
    PipelineConfig cfg = config_for_weights(o.config, o.weights);
    o.ablation.apply(cfg);
    if (!o.tta.empty()) cfg.tta_scales = o.tta;
    cfg.validate();

    Model model;
    try {
        model = load_model(o.weights, cfg);
    } catch (const WeightFormatError& e) {
        std::cerr << "infer: corrupt weight file " << o.weights << ": " << e.what() << '\n';
        return kBadWeights;
    }
    const SceneRecord rec = read_scene_dir(o.frame);
    if (rec.frame.height() != cfg.encoder.input_h || rec.frame.width() != cfg.encoder.input_w) {
        std::cerr << "infer: frame is " << rec.frame.width() << "x" << rec.frame.height() << ", config expects "
                  << cfg.encoder.input_w << "x" << cfg.encoder.input_h << '\n';
        return kResolutionMismatch;
    }
    const InferenceResult res = run_inference(model, rec.frame);
    write_json_or_fail(o.out, inference_to_json(res, cfg, rec.id));
    if (!o.dump_heatmap.empty()) {
        try {
            write_gray_ppm(o.dump_heatmap, res.heatmap.values);
        } catch (const std::exception& e) {
            throw UnwritableError(e.what());
        }
    }
    if (!o.dump_regions.empty())
        write_region_overlay(o.dump_regions, rec.frame, res.centers, res.sizes, cfg.region.reference_depth);
    std::cout << res.grasps.size() << " grasps, " << res.timings.total_ms << " ms\n";
    return kOk;
}

// -------------------------------------------------------------------- eval

struct EvalOpts {
    std::string grasps_dir, scenes_dir, out;
};

int cmd_eval(const EvalOpts& o)
{
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(o.grasps_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    nlohmann::json per_scene = nlohmann::json::array();
    nlohmann::json skipped = nlohmann::json::array();
    std::vector<SceneAp> results;
    for (const auto& file : files) {
        const std::string id = file.stem().string();
        const fs::path scene_file = fs::path(o.scenes_dir) / id / "scene.json";
        if (!fs::exists(scene_file)) {
            skipped.push_back(id);
            continue;
        }
        const SceneModel scene = scene_from_json(read_json_file(scene_file));
        std::vector<GraspPose> grasps = grasps_from_json(read_json_file(file));
        sort_by_score(grasps);
        grasps = grasp_nms(grasps);
        if (grasps.size() > kApTopK) grasps.resize(kApTopK);
        const SceneAp r = evaluate_scene(grasps, scene);
        results.push_back(r);
        nlohmann::json ap_mu;
        for (std::size_t m = 0; m < kFrictionLevels.size(); ++m) {
            char key[16];
            std::snprintf(key, sizeof key, "mu_%.1f", kFrictionLevels[m]);
            std::string k(key);
            std::replace(k.begin(), k.end(), '.', '_');
            ap_mu[k] = r.ap_mu[m];
        }
        per_scene.push_back({{"scene_id", id}, {"ap", r.ap}, {"ap_mu", ap_mu}, {"outcomes", r.outcomes},
                             {"evaluated_grasps", grasps.size()}});
    }
    const double map = map_over_scenes(results);
    write_json_or_fail(o.out, {{"per_scene", per_scene}, {"map", map}, {"skipped", skipped}});
    std::cout << "mAP " << map << " over " << results.size() << " scenes";
    if (!skipped.empty()) std::cout << " (" << skipped.size() << " skipped)";
    std::cout << '\n';
    return kOk;
}

// ------------------------------------------------------------------- bench

struct BenchOpts {
    std::string weights, config, out;
    int frames = 20;
    int threads = 1;
    std::uint64_t seed = 424242;
    AblationOpts ablation;
};

int cmd_bench(const BenchOpts& o)
{
    PipelineConfig cfg = config_for_weights(o.config, o.weights);
    o.ablation.apply(cfg);
    Model model;
    try {
        model = load_model(o.weights, cfg);
    } catch (const WeightFormatError& e) {
        std::cerr << "bench: corrupt weight file " << o.weights << ": " << e.what() << '\n';
        return kBadWeights;
    }
    constexpr std::size_t kWarmup = 5;
    const CameraIntrinsics intr = default_intrinsics(cfg.encoder.input_w, cfg.encoder.input_h);
    std::vector<ImageFrame> frames;
    for (int i = 0; i < o.frames + static_cast<int>(kWarmup); ++i)
        frames.push_back(make_frame(gen_scene(o.seed + static_cast<std::uint64_t>(i), 5), intr));
    const BenchReport rep = run_benchmark(model, frames, kWarmup);
    nlohmann::json j = bench_to_json(rep, cfg);
    j["threads"] = o.threads;
    const std::string text = j.dump(1);
    if (!o.out.empty())
        write_json_or_fail(o.out, j);
    else
        std::cout << text << '\n';
    std::fprintf(stderr, "end-to-end mean %.2f ms, median %.2f ms, p95 %.2f ms over %zu frames\n",
                 rep.end_to_end.mean_ms, rep.end_to_end.median_ms, rep.end_to_end.p95_ms, rep.frames);
    return kOk;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"e3g: 6-DoF grasp detection on synthetic tabletop scenes"};
    app.require_subcommand(1);

    GenOpts gen;
    auto* g = app.add_subcommand("gen-data", "render scenes, frames and ground-truth grasps");
    g->add_option("--scenes", gen.scenes, "number of scenes")->check(CLI::Range(1, 1000000));
    g->add_option("--objects", gen.objects, "objects per scene")->check(CLI::Range(1, 10));
    g->add_option("--seed", gen.seed, "base seed; scene i uses seed + i");
    g->add_option("--out", gen.out, "output directory")->required();
    g->add_option("--width", gen.width, "image width")->check(CLI::Range(32, 4096));
    g->add_option("--height", gen.height, "image height")->check(CLI::Range(32, 4096));

    TrainCliOpts tr;
    auto* t = app.add_subcommand("train", "train on a generated data directory");
    t->add_option("--data", tr.data, "directory from gen-data")->required();
    t->add_option("--epochs", tr.train.epochs, "epochs")->check(CLI::NonNegativeNumber);
    t->add_option("--lr", tr.train.lr, "peak learning rate")->check(CLI::PositiveNumber);
    t->add_option("--momentum", tr.train.momentum, "SGD momentum")->check(CLI::Range(0.0, 0.999));
    t->add_option("--clip", tr.train.clip_norm, "global gradient-norm clip (0 = off)")->check(CLI::NonNegativeNumber);
    t->add_option("--max-steps", tr.train.max_steps, "stop after this many steps");
    t->add_option("--out", tr.out, "weight file")->required();
    t->add_option("--log", tr.log, "loss CSV (default <out>.loss.csv)");
    t->add_option("--config", tr.config, "pipeline config JSON");
    t->add_option("--seed", tr.seed, "seed for initialization and data order")->each([&](const std::string&) {
        tr.seed_set = true;
    });

    InferOpts inf;
    auto* i = app.add_subcommand("infer", "detect grasps in one frame directory");
    i->add_option("--weights", inf.weights, "weight file")->required();
    i->add_option("--frame", inf.frame, "scene directory with depth.pgm, rgb.ppm, scene.json")->required();
    i->add_option("--out", inf.out, "grasp JSON")->required();
    i->add_option("--dump-heatmap", inf.dump_heatmap, "write the location heatmap as PPM");
    i->add_option("--dump-regions", inf.dump_regions, "write region footprints over the RGB as PPM");
    i->add_option("--tta-scales", inf.tta, "extra region-size multipliers")->check(CLI::PositiveNumber);
    i->add_option("--config", inf.config, "pipeline config JSON (default <weights>.config.json if present)");
    add_ablation_flags(i, inf.ablation);

    EvalOpts ev;
    auto* e = app.add_subcommand("eval", "force-closure AP over grasp files");
    e->add_option("--grasps-dir", ev.grasps_dir, "directory of <scene_id>.json grasp files")->required();
    e->add_option("--scenes-dir", ev.scenes_dir, "directory of scene directories")->required();
    e->add_option("--out", ev.out, "report JSON")->required();

    BenchOpts be;
    auto* b = app.add_subcommand("bench", "per-stage inference latency");
    b->add_option("--weights", be.weights, "weight file")->required();
    b->add_option("--frames", be.frames, "timed frames (after 5 warm-up frames)")->check(CLI::Range(10, 100000));
    b->add_option("--threads", be.threads, "worker threads; inference runs on one")->check(CLI::Range(1, 1));
    b->add_option("--config", be.config, "pipeline config JSON");
    b->add_option("--seed", be.seed, "seed for the synthetic benchmark frames");
    b->add_option("--out", be.out, "report JSON (default stdout)");
    add_ablation_flags(b, be.ablation);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& ex) {
        return app.exit(ex) == 0 ? kOk : kFailure;  // --help is not an error
    }

    try {
        if (*g) return cmd_gen_data(gen);
        if (*t) return cmd_train(tr);
        if (*i) return cmd_infer(inf);
        if (*e) return cmd_eval(ev);
        if (*b) return cmd_bench(be);
    } catch (const UnwritableError& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return kUnwritable;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return kFailure;
    }
    return kFailure;
}
