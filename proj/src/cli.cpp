#include "mf/cli.hpp"

#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mf/checkpoint.hpp"
#include "mf/imageio.hpp"
#include "mf/metrics.hpp"
#include "mf/nbv.hpp"
#include "mf/parallel.hpp"
#include "mf/train.hpp"

namespace mf {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

double now_ms() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch()).count();
}

// Full-precision, locale-independent float formatting for CSV cells.
std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create directory: " + dir);
}

std::ofstream open_csv(const std::string& path) {
    std::ofstream out(path, std::ios::binary);  // binary: LF line endings everywhere
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

// Fixed experiment geometry shared by all subcommands.
struct OrbitSetup {
    std::vector<Camera> cams;
    std::vector<GroundTruth> gt;
};

OrbitSetup make_orbit(const AnalyticScene& scene, int n_views, int resolution) {
    OrbitSetup s;
    s.cams = camera_orbit(n_views, 3.2, {0, 0, 0}, resolution, resolution,
                          1.0 * resolution);
    s.gt.reserve(s.cams.size());
    for (const Camera& cam : s.cams) s.gt.push_back(raytrace_ground_truth(scene, cam));
    return s;
}

struct ModelOptions {
    std::string renderer = "splat";
    std::string checkpoint;  // empty: deterministic fresh init
    int gaussians = 150;
    int grid = 32;
    int bins = 64;
};

std::unique_ptr<TrainableModel> make_model(const ModelOptions& opt, const AnalyticScene& scene,
                                           uint64_t seed) {
    if (opt.renderer == "splat") {
        SplatScene s = opt.checkpoint.empty()
                           ? init_splat_scene(opt.gaussians, 3, scene.background_color, seed)
                           : load_splat_scene(opt.checkpoint);
        return std::make_unique<SplatModel>(std::move(s));
    }
    VoxelField f = opt.checkpoint.empty() ? init_voxel_field(opt.grid, 3, scene.background_color)
                                          : load_voxel_field(opt.checkpoint);
    return std::make_unique<NerfModel>(std::move(f), opt.bins);
}

void save_model(const TrainableModel& model, const ModelOptions& opt, const std::string& dir) {
    if (opt.renderer == "splat")
        save_splat_scene(dir + "/model.mfsp", static_cast<const SplatModel&>(model).scene());
    else
        save_voxel_field(dir + "/model.mfvf", static_cast<const NerfModel&>(model).field());
}

// Scalar channel-summed color variance image (color channels only).
FeatureImage color_variance_scalar(const MomentImage& r, int color_channels) {
    FeatureImage out(r.width, r.height, 1);
    for (int y = 0; y < r.height; ++y)
        for (int x = 0; x < r.width; ++x) {
            double s = 0.0;
            for (int c = 0; c < color_channels; ++c) s += r.variance.at(x, y, c);
            out.at(x, y, 0) = s;
        }
    return out;
}

FeatureImage slice_channels(const FeatureImage& img, int first, int count) {
    FeatureImage out(img.width, img.height, count);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < count; ++c) out.at(x, y, c) = img.at(x, y, first + c);
    return out;
}

SamplerKind parse_sampler(const std::string& s) {
    if (s == "uniform") return SamplerKind::kUniform;
    if (s == "variance") return SamplerKind::kVariance;
    if (s == "error") return SamplerKind::kErrorOracle;
    throw CLI::ValidationError("--sampler", "must be uniform, variance or error");
}

NbvPolicy parse_policy(const std::string& s) {
    if (s == "variance-color") return NbvPolicy::kVarianceColor;
    if (s == "variance-depth") return NbvPolicy::kVarianceDepth;
    if (s == "random") return NbvPolicy::kRandom;
    throw CLI::ValidationError("--policy", "must be variance-color, variance-depth or random");
}

int cmd_genscene(uint64_t seed, int spheres, const std::string& out) {
    AnalyticScene scene = generate_scene(seed, spheres);
    save_scene_json(out, scene);
    std::cout << "wrote " << out << " (" << scene.spheres.size() << " spheres)\n";
    return 0;
}

int cmd_render(const AnalyticScene& scene, const ModelOptions& mopt, const std::string& out_dir,
               uint64_t seed, int resolution, int j_max, int view, int n_views) {
    ensure_dir(out_dir);
    auto orbit = make_orbit(scene, n_views, resolution);
    if (view < 0 || view >= n_views) throw std::runtime_error("--view out of range");
    auto model = make_model(mopt, scene, seed);
    const Camera& cam = orbit.cams[static_cast<size_t>(view)];

    double t0 = now_ms();
    MomentImage mean_pass = model->render(cam, j_max, /*mean_only=*/true);
    double t1 = now_ms();
    MomentImage full = model->render(cam, j_max);
    double t2 = now_ms();
    (void)mean_pass;

    int c = model->feature_channels();  // trailing channel is depth
    FeatureImage color_mean = slice_channels(full.m1, 0, 3);
    FeatureImage color_var = color_variance_scalar(full, 3);
    write_ppm(out_dir + "/mean.ppm", color_mean);
    write_pfm(out_dir + "/mean.pfm", color_mean);
    write_pfm(out_dir + "/var.pfm", color_var);
    write_ppm(out_dir + "/var.ppm", tonemap_variance(color_var));
    write_pfm(out_dir + "/depth_mean.pfm", slice_channels(full.m1, c, 1));
    write_pfm(out_dir + "/depth_var.pfm", slice_channels(full.variance, c, 1));

    std::ofstream csv = open_csv(out_dir + "/timing.csv");
    csv << "phase,wall_ms\n";
    csv << "render_mean_only," << fmt(t1 - t0) << "\n";
    csv << "render_mean_variance," << fmt(t2 - t1) << "\n";
    std::cout << "phase render_mean_only " << (t1 - t0) << " ms\n";
    std::cout << "phase render_mean_variance " << (t2 - t1) << " ms\n";
    return 0;
}

int cmd_train(const AnalyticScene& scene, const ModelOptions& mopt, const std::string& out_dir,
              int resolution, int n_views, int train_views, TrainConfig cfg) {
    ensure_dir(out_dir);
    if (train_views < 1 || train_views >= n_views)
        throw std::runtime_error("--train-views must be in [1, views)");
    auto orbit = make_orbit(scene, n_views, resolution);
    auto model = make_model(mopt, scene, cfg.seed);

    TrainViews views;
    for (int i = 0; i < train_views; ++i) {
        views.cameras.push_back(orbit.cams[static_cast<size_t>(i)]);
        views.gt_color.push_back(orbit.gt[static_cast<size_t>(i)].color);
    }
    const Camera& eval_cam = orbit.cams.back();
    const FeatureImage& eval_gt = orbit.gt.back().color;

    double t0 = now_ms();
    auto log = train(*model, views, eval_cam, eval_gt, cfg);
    double t1 = now_ms();

    save_model(*model, mopt, out_dir);
    std::ofstream csv = open_csv(out_dir + "/train_log.csv");
    csv << "iteration,loss,psnr,ssim\n";
    for (const TrainLogEntry& e : log)
        csv << e.iteration << "," << fmt(e.loss) << "," << fmt(e.psnr) << ","
            << fmt(e.ssim_value) << "\n";
    std::cout << "phase train " << (t1 - t0) << " ms\n";
    if (!log.empty())
        std::cout << "final psnr " << log.back().psnr << " dB, ssim " << log.back().ssim_value
                  << "\n";
    return 0;
}

int cmd_correlate(const AnalyticScene& scene, const ModelOptions& mopt, const std::string& out_dir,
                  int resolution, int n_views, TrainConfig cfg) {
    ensure_dir(out_dir);
    auto orbit = make_orbit(scene, n_views, resolution);

    // Train on even orbit indices, correlate on the held-out odd ones.
    TrainViews views;
    std::vector<int> held;
    for (int i = 0; i < n_views; ++i) {
        if (i % 2 == 0) {
            views.cameras.push_back(orbit.cams[static_cast<size_t>(i)]);
            views.gt_color.push_back(orbit.gt[static_cast<size_t>(i)].color);
        } else {
            held.push_back(i);
        }
    }
    if (held.empty()) throw std::runtime_error("need at least 2 views");
    auto model = make_model(mopt, scene, cfg.seed);

    double t0 = now_ms();
    train(*model, views, orbit.cams[static_cast<size_t>(held[0])],
          orbit.gt[static_cast<size_t>(held[0])].color, cfg);
    double t1 = now_ms();
    std::cout << "phase train " << (t1 - t0) << " ms\n";

    std::ofstream csv = open_csv(out_dir + "/correlate.csv");
    csv << "view,pearson,spearman,kendall,samples,psnr,ssim\n";
    std::vector<double> pooled_var, pooled_err;
    double psnr_sum = 0.0, ssim_sum = 0.0;
    for (int v : held) {
        const Camera& cam = orbit.cams[static_cast<size_t>(v)];
        const GroundTruth& gt = orbit.gt[static_cast<size_t>(v)];
        MomentImage r = model->render(cam, 2);
        FeatureImage color_mean = slice_channels(r.m1, 0, 3);
        FeatureImage var_img = color_variance_scalar(r, 3);
        FeatureImage err_img = error_map(color_mean, gt.color);

        char tag[16];
        std::snprintf(tag, sizeof(tag), "%02d", v);
        write_pfm(out_dir + "/var_" + tag + ".pfm", var_img);
        write_pfm(out_dir + "/err_" + tag + ".pfm", err_img);
        write_ppm(out_dir + "/var_" + tag + ".ppm", tonemap_variance(var_img));
        write_ppm(out_dir + "/mean_" + tag + ".ppm", color_mean);

        CorrelationReport rep = correlate_variance_error(var_img, err_img);
        double p = psnr(color_mean, gt.color);
        double s = ssim(color_mean, gt.color);
        psnr_sum += p;
        ssim_sum += s;
        csv << v << "," << fmt(rep.pearson) << "," << fmt(rep.spearman) << ","
            << fmt(rep.kendall) << "," << rep.samples << "," << fmt(p) << "," << fmt(s) << "\n";
        pooled_var.insert(pooled_var.end(), var_img.data.begin(), var_img.data.end());
        pooled_err.insert(pooled_err.end(), err_img.data.begin(), err_img.data.end());
    }
    FeatureImage pv(static_cast<int>(pooled_var.size()), 1, 1);
    FeatureImage pe(static_cast<int>(pooled_err.size()), 1, 1);
    pv.data = pooled_var;
    pe.data = pooled_err;
    CorrelationReport all = correlate_variance_error(pv, pe);
    double n = static_cast<double>(held.size());
    csv << "all," << fmt(all.pearson) << "," << fmt(all.spearman) << "," << fmt(all.kendall)
        << "," << all.samples << "," << fmt(psnr_sum / n) << "," << fmt(ssim_sum / n) << "\n";
    double t2 = now_ms();
    std::cout << "phase correlate " << (t2 - t1) << " ms\n";
    std::cout << "pooled pearson " << all.pearson << ", spearman " << all.spearman
              << ", kendall " << all.kendall << "\n";
    return 0;
}

int cmd_nbv(const AnalyticScene& scene, const ModelOptions& mopt, const std::string& out_dir,
            int resolution, int n_views, int initial_views, NbvConfig cfg) {
    ensure_dir(out_dir);
    auto orbit = make_orbit(scene, n_views, resolution);
    if (initial_views < 1 || initial_views + cfg.rounds + 1 > n_views)
        throw std::runtime_error("--initial-views/--rounds too large for --views");

    TrainViews initial;
    for (int i = 0; i < initial_views; ++i) {
        initial.cameras.push_back(orbit.cams[static_cast<size_t>(i)]);
        initial.gt_color.push_back(orbit.gt[static_cast<size_t>(i)].color);
    }
    std::vector<Camera> cand_cams;
    std::vector<FeatureImage> cand_gt;
    for (int i = initial_views; i < n_views - 1; ++i) {
        cand_cams.push_back(orbit.cams[static_cast<size_t>(i)]);
        cand_gt.push_back(orbit.gt[static_cast<size_t>(i)].color);
    }
    const Camera& eval_cam = orbit.cams.back();
    const FeatureImage& eval_gt = orbit.gt.back().color;

    auto model = make_model(mopt, scene, cfg.train.seed);
    double t0 = now_ms();
    auto rounds = nbv_loop(*model, initial, cand_cams, cand_gt, eval_cam, eval_gt, cfg);
    double t1 = now_ms();

    save_model(*model, mopt, out_dir);
    std::ofstream csv = open_csv(out_dir + "/nbv.csv");
    csv << "round,selected,psnr,ssim\n";
    for (const NbvRoundMetrics& r : rounds)
        csv << r.round << "," << r.selected << "," << fmt(r.psnr) << "," << fmt(r.ssim_value)
            << "\n";
    std::cout << "phase nbv " << (t1 - t0) << " ms\n";
    if (!rounds.empty())
        std::cout << "final psnr " << rounds.back().psnr << " dB, ssim "
                  << rounds.back().ssim_value << "\n";
    return 0;
}

}  // namespace

void save_scene_json(const std::string& path, const AnalyticScene& scene) {
    json doc;
    doc["seed"] = scene.seed;
    doc["background"] = {{"color", scene.background_color},
                         {"depth", scene.background_depth}};
    doc["spheres"] = json::array();
    for (const Sphere& s : scene.spheres) {
        doc["spheres"].push_back({{"center", {s.center.x, s.center.y, s.center.z}},
                                  {"radius", s.radius},
                                  {"color", s.color},
                                  {"class", s.semantic_class}});
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << doc.dump(2) << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

AnalyticScene load_scene_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    json doc = json::parse(in);
    AnalyticScene scene;
    scene.seed = doc.value("seed", uint64_t{0});
    if (doc.contains("background")) {
        const json& bg = doc["background"];
        scene.background_color = bg.value("color", scene.background_color);
        scene.background_depth = bg.value("depth", 0.0);
    }
    for (const json& js : doc.at("spheres")) {
        Sphere s;
        auto c = js.at("center");
        s.center = {c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>()};
        s.radius = js.at("radius").get<double>();
        s.color = js.at("color").get<FeatureVec>();
        s.semantic_class = js.value("class", 0);
        if (s.radius <= 0.0) throw std::runtime_error("sphere radius must be positive: " + path);
        if (s.color.size() != 3) throw std::runtime_error("sphere color must be RGB: " + path);
        scene.spheres.push_back(std::move(s));
    }
    return scene;
}

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"moment_fields: pixel-wise moment rendering for radiance fields"};
    app.require_subcommand(1);

    int threads = 0;
    if (const char* env = std::getenv("MOMENT_FIELDS_THREADS")) threads = std::atoi(env);
    auto add_threads = [&threads](CLI::App* cmd) {
        cmd->add_option("--threads", threads,
                        "worker thread cap (0 = hardware); env MOMENT_FIELDS_THREADS");
    };

    // genscene
    auto* gen = app.add_subcommand("genscene", "generate a procedural sphere scene");
    add_threads(gen);
    uint64_t gen_seed = 1;
    int gen_spheres = 8;
    std::string gen_out = "scene.json";
    gen->add_option("--seed", gen_seed, "scene seed")->capture_default_str();
    gen->add_option("--spheres", gen_spheres, "number of spheres")->capture_default_str();
    gen->add_option("--out", gen_out, "output scene file")->capture_default_str();

    // options shared by the model-driven subcommands
    struct Common {
        std::string scene_path;
        std::string out_dir = "out";
        uint64_t seed = 1;
        int resolution = 64;
        int views = 12;
        ModelOptions model;
    };
    auto add_common = [&](CLI::App* cmd, Common& c) {
        add_threads(cmd);
        cmd->add_option("--scene", c.scene_path, "scene JSON file")->required();
        cmd->add_option("--out", c.out_dir, "output directory")->capture_default_str();
        cmd->add_option("--seed", c.seed, "experiment seed")->capture_default_str();
        cmd->add_option("--resolution", c.resolution, "image width and height")
            ->capture_default_str();
        cmd->add_option("--views", c.views, "orbit view count")->capture_default_str();
        cmd->add_option("--renderer", c.model.renderer, "nerf or splat")
            ->check(CLI::IsMember({"nerf", "splat"}))
            ->capture_default_str();
        cmd->add_option("--checkpoint", c.model.checkpoint, "model checkpoint to load");
        cmd->add_option("--gaussians", c.model.gaussians, "splat count for fresh models")
            ->capture_default_str();
        cmd->add_option("--grid", c.model.grid, "voxel grid resolution for fresh models")
            ->capture_default_str();
        cmd->add_option("--bins", c.model.bins, "quadrature bins per ray")->capture_default_str();
    };
    auto add_train_opts = [](CLI::App* cmd, TrainConfig& t, std::string& sampler) {
        cmd->add_option("--iters", t.iterations, "training iterations")->capture_default_str();
        cmd->add_option("--rays", t.rays_per_iter, "rays per iteration")->capture_default_str();
        cmd->add_option("--initial-rays", t.initial_rays_per_image,
                        "warmup rays per training image")
            ->capture_default_str();
        cmd->add_option("--lr", t.lr, "learning rate")->capture_default_str();
        cmd->add_option("--sampler", sampler, "uniform, variance or error")
            ->capture_default_str();
        cmd->add_option("--grid-dim", t.grid_dim, "score grid dimension")->capture_default_str();
        cmd->add_option("--eval-every", t.eval_every, "evaluation period (0 = end only)")
            ->capture_default_str();
    };

    // render
    auto* render = app.add_subcommand("render", "render moment images from one view");
    Common rc;
    rc.resolution = 128;
    int render_view = 0, render_jmax = 2;
    add_common(render, rc);
    render->add_option("--view", render_view, "orbit view index")->capture_default_str();
    render->add_option("--jmax", render_jmax, "highest raw moment order")->capture_default_str();

    // train
    auto* trn = app.add_subcommand("train", "fit a model to orbit views");
    Common tc;
    TrainConfig tcfg;
    std::string t_sampler = "uniform";
    int train_views = 6;
    add_common(trn, tc);
    add_train_opts(trn, tcfg, t_sampler);
    trn->add_option("--train-views", train_views, "training views (rest held out)")
        ->capture_default_str();

    // correlate
    auto* corr = app.add_subcommand("correlate",
                                    "train, then correlate variance with held-out error");
    Common cc;
    TrainConfig ccfg;
    ccfg.iterations = 1500;
    std::string c_sampler = "uniform";
    add_common(corr, cc);
    add_train_opts(corr, ccfg, c_sampler);

    // nbv
    auto* nbv = app.add_subcommand("nbv", "greedy next-best-view selection loop");
    Common nc;
    NbvConfig ncfg;
    ncfg.initial_iters = 100;
    std::string n_sampler = "uniform";
    std::string policy = "variance-color";
    int initial_views = 5;
    add_common(nbv, nc);
    add_train_opts(nbv, ncfg.train, n_sampler);
    nbv->add_option("--policy", policy, "variance-color, variance-depth or random")
        ->capture_default_str();
    nbv->add_option("--rounds", ncfg.rounds, "selection rounds")->capture_default_str();
    nbv->add_option("--initial-views", initial_views, "views before the first selection")
        ->capture_default_str();
    nbv->add_option("--initial-iters", ncfg.initial_iters, "iterations before the first round")
        ->capture_default_str();
    nbv->add_option("--iters-per-round", ncfg.iters_per_round, "iterations per round")
        ->capture_default_str();

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        set_thread_count(threads);
        if (gen->parsed()) return cmd_genscene(gen_seed, gen_spheres, gen_out);
        if (render->parsed())
            return cmd_render(load_scene_json(rc.scene_path), rc.model, rc.out_dir, rc.seed,
                              rc.resolution, render_jmax, render_view, rc.views);
        if (trn->parsed()) {
            tcfg.seed = tc.seed;
            tcfg.sampler = parse_sampler(t_sampler);
            tcfg.validate();
            return cmd_train(load_scene_json(tc.scene_path), tc.model, tc.out_dir, tc.resolution,
                             tc.views, train_views, tcfg);
        }
        if (corr->parsed()) {
            ccfg.seed = cc.seed;
            ccfg.sampler = parse_sampler(c_sampler);
            ccfg.validate();
            return cmd_correlate(load_scene_json(cc.scene_path), cc.model, cc.out_dir,
                                 cc.resolution, cc.views, ccfg);
        }
        if (nbv->parsed()) {
            ncfg.train.seed = nc.seed;
            ncfg.train.sampler = parse_sampler(n_sampler);
            ncfg.policy = parse_policy(policy);
            ncfg.train.validate();
            return cmd_nbv(load_scene_json(nc.scene_path), nc.model, nc.out_dir, nc.resolution,
                           nc.views, initial_views, ncfg);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace mf
