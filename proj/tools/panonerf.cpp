// panonerf command-line front end.
//
// Four batch subcommands cover the whole pipeline:
//   gen      render a synthetic ERP dataset from an analytic preset scene
//   train    fit coarse+fine radiance fields; artifacts land in a run directory
//   eval     re-render test views from a checkpoint and report PSNR/SSIM tables
//   heatmap  reconstruct a sampling-probability image from persisted snapshots
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.
// All randomness flows from --seed; two invocations with identical flags
// produce byte-identical artifacts.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "panonerf/config.hpp"
#include "panonerf/csv.hpp"
#include "panonerf/dataset.hpp"
#include "panonerf/metrics.hpp"
#include "panonerf/png_io.hpp"
#include "panonerf/sampling.hpp"
#include "panonerf/scene.hpp"
#include "panonerf/trainer.hpp"

namespace pn = panonerf;
namespace fs = std::filesystem;

namespace {

// "64x128" -> (64, 128). Returns false on anything else.
bool parse_size(const std::string& s, int& w, int& h) {
    size_t x = s.find('x');
    if (x == std::string::npos || x == 0 || x + 1 >= s.size()) return false;
    try {
        size_t used = 0;
        w = std::stoi(s.substr(0, x), &used);
        if (used != x) return false;
        h = std::stoi(s.substr(x + 1), &used);
        if (used != s.size() - x - 1) return false;
    } catch (const std::exception&) {
        return false;
    }
    return w >= 1 && h >= 1;
}

const std::string kSizeError = "expected WIDTHxHEIGHT with positive integers, e.g. 64x32";

struct GenArgs {
    std::string scene = "toy";
    int n_train = 5;
    int n_test = 4;
    std::string size = "64x128";
    uint64_t seed = 0;
    std::string out = "dataset";
};

int run_gen(const GenArgs& a) {
    int w = 0, h = 0;
    parse_size(a.size, w, h);  // already validated at parse time
    pn::AnalyticScene scene = a.scene == "flat" ? pn::flat_scene() : pn::toy_scene();
    pn::Dataset ds = pn::gen_dataset(scene, a.n_train, a.n_test, w, h, a.seed, a.out);
    std::printf("wrote %s: %d train + %d test views, %dx%d\n", a.out.c_str(), a.n_train, a.n_test,
                w, h);
    (void)ds;
    return 0;
}

struct TrainArgs {
    std::string data = "dataset";
    std::string out = "runs/run";
    std::string config;  // optional RunConfig JSON; flags override its keys
    pn::RunConfig flags; // CLI values bind here; only explicitly-set ones apply
    std::string distortion = "on";
    std::string content = "on";
    std::string stratified = "on";
};

// Precedence: built-in defaults < --config file < explicit flags. The overlay
// is done in JSON space so the final object goes through the same
// unknown-key/validation gate as any other config source.
pn::RunConfig effective_config(const CLI::App& cmd, const TrainArgs& a) {
    nlohmann::json j = nlohmann::json::object();
    if (!a.config.empty()) {
        std::ifstream in(a.config, std::ios::binary);
        pn::require_data(in.good(), "config: cannot open " + a.config);
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw pn::DataError("config: malformed JSON in " + a.config + ": " + e.what());
        }
        pn::require_data(j.is_object(), "config: expected a JSON object in " + a.config);
    }
    auto set = [&](const char* flag, const char* key, const auto& value) {
        if (cmd.count(flag)) j[key] = value;
    };
    set("--iters", "iters", a.flags.iters);
    set("--rays", "rays", a.flags.rays);
    set("--lr-start", "lr_start", a.flags.lr_start);
    set("--lr-end", "lr_end", a.flags.lr_end);
    set("--adam-beta1", "adam_beta1", a.flags.adam_beta1);
    set("--adam-beta2", "adam_beta2", a.flags.adam_beta2);
    set("--adam-eps", "adam_eps", a.flags.adam_eps);
    set("--distortion", "distortion_on", a.distortion == "on");
    set("--content", "content_on", a.content == "on");
    set("--content-floor", "content_floor", a.flags.content_floor);
    set("--seed", "seed", a.flags.seed);
    set("--eval-every", "eval_every", a.flags.eval_every);
    set("--n-coarse", "n_coarse", a.flags.n_coarse);
    set("--n-fine", "n_fine", a.flags.n_fine);
    set("--stratified", "stratified", a.stratified == "on");
    set("--trunk-depth", "trunk_depth", a.flags.trunk_depth);
    set("--trunk-width", "trunk_width", a.flags.trunk_width);
    set("--color-hidden", "color_hidden", a.flags.color_hidden);
    set("--pos-octaves", "pos_octaves", a.flags.pos_octaves);
    set("--dir-octaves", "dir_octaves", a.flags.dir_octaves);
    set("--density-scale", "density_scale", a.flags.density_scale);
    set("--pos-scale", "pos_scale", a.flags.pos_scale);
    set("--crop-size", "crop_size", a.flags.crop_size);
    set("--crop-stride", "crop_stride", a.flags.crop_stride);
    return pn::run_config_from_json(j);
}

int run_train(const CLI::App& cmd, const TrainArgs& a) {
    pn::RunConfig rc = effective_config(cmd, a);
    pn::Dataset ds = pn::load_dataset(a.data);
    pn::Trainer trainer(rc, ds);
    pn::TrainHooks hooks;
    hooks.on_eval = [](const pn::EvalRecord& r) {
        std::printf("iter %6lld  psnr %7.3f  ssim %6.4f  loss %.6g  lr %.3g\n", r.iter, r.psnr,
                    r.ssim, r.loss, r.lr);
        std::fflush(stdout);
    };
    trainer.train(a.out, hooks);
    std::printf("wrote %s/checkpoint.bin\n", a.out.c_str());
    return 0;
}

struct EvalArgs {
    std::string run = "runs/run";
    std::string data = "dataset";
    bool bands = false;
    bool crops = false;
};

int run_eval(const EvalArgs& a) {
    pn::RunConfig rc = pn::load_run_config((fs::path(a.run) / "config.json").string());
    pn::Dataset ds = pn::load_dataset(a.data);
    pn::RadianceField<float> field_c(rc.field(), 0), field_f(rc.field(), 0);
    pn::load_checkpoint((fs::path(a.run) / "checkpoint.bin").string(), field_c, field_f);

    std::vector<std::string> header{"view", "file", "psnr", "ssim"};
    if (a.bands)
        for (int b = 1; b <= 5; ++b) header.push_back("psnr_band" + std::to_string(b));
    if (a.crops) {
        header.push_back("psnr_crop_low");
        header.push_back("psnr_crop_high");
    }
    std::string csv_path = (fs::path(a.run) / "eval.csv").string();
    pn::CsvWriter csv(csv_path);
    csv.write_row(header);
    for (const auto& col : header) std::printf("%s%s", &col == &header[0] ? "" : "  ", col.c_str());
    std::printf("\n");

    // Per-view tags match the trainer's evaluation pass, so the numbers here
    // reproduce the final curve.csv row exactly.
    std::vector<double> mean(header.size() - 2, 0.0);
    int n_test = 0;
    for (size_t i = 0; i < ds.poses.size(); ++i) {
        const pn::PoseEntry& e = ds.poses[i];
        if (e.role != "test") continue;
        size_t k = static_cast<size_t>(n_test++);
        pn::ErpImage pred = pn::render_view(field_c, field_f, pn::CameraPose{e.position, e.rotation},
                                            e.width, e.height, e.t_far, rc.render(), rc.seed,
                                            pn::mix_seed(0x6576616cULL, k));
        const pn::ErpImage& ref = ds.images[i];
        std::vector<double> cols;
        cols.push_back(pn::psnr(pred, ref));
        cols.push_back(e.width >= 11 && e.height >= 11
                           ? pn::ssim(pred, ref)
                           : std::numeric_limits<double>::quiet_NaN());
        if (a.bands)
            for (double b : pn::band_psnr(pred, ref)) cols.push_back(b);
        if (a.crops) {
            pn::FrequencyCrops fc = pn::frequency_crops(ref, rc.crop_size, rc.crop_stride);
            cols.push_back(pn::crop_psnr(pred, ref, fc.low));
            cols.push_back(pn::crop_psnr(pred, ref, fc.high));
        }
        std::vector<std::string> row{pn::format_int(k), e.file};
        std::printf("%4zu  %s", k, e.file.c_str());
        for (size_t c = 0; c < cols.size(); ++c) {
            mean[c] += cols[c];
            row.push_back(pn::format_double(cols[c]));
            std::printf("  %.4f", cols[c]);
        }
        std::printf("\n");
        csv.write_row(row);
    }
    pn::require_data(n_test > 0, "eval: dataset has no test views");
    std::vector<std::string> row{"mean", ""};
    std::printf("mean  ");
    for (double& m : mean) {
        m /= n_test;
        row.push_back(pn::format_double(m));
        std::printf("  %.4f", m);
    }
    std::printf("\n");
    csv.write_row(row);
    csv.flush();
    std::printf("wrote %s\n", csv_path.c_str());
    return 0;
}

struct HeatmapArgs {
    std::string run = "runs/run";
    long long iter = 0;
    int image = 0;
    std::string out = "heatmap.png";
};

int run_heatmap(const HeatmapArgs& a) {
    char name[64];
    std::snprintf(name, sizeof(name), "snapshots/sampler_%06lld.bin", a.iter);
    pn::SamplerSnapshot snap = pn::load_snapshot((fs::path(a.run) / name).string());
    pn::require_data(a.image >= 0 && static_cast<size_t>(a.image) < snap.dims.size(),
                     "heatmap: image index out of range; snapshot has " +
                         std::to_string(snap.dims.size()) + " image(s)");
    pn::ErpImage img =
        pn::sampling_heatmap(pn::PixelLayout(snap.dims), snap.weights, a.image);
    pn::write_png_rgb8(a.out, img);
    std::printf("wrote %s: iter %lld, image %d, %dx%d\n", a.out.c_str(), snap.iter, a.image,
                img.width, img.height);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Panoramic NeRF with non-uniform ray sampling"};
    app.require_subcommand(1);

    GenArgs g;
    CLI::App* gen = app.add_subcommand("gen", "Render a synthetic ERP dataset");
    gen->add_option("--scene", g.scene, "Preset scene")
        ->default_val(g.scene)
        ->check(CLI::IsMember({"toy", "flat"}));
    gen->add_option("--train", g.n_train, "Number of training views")->default_val(g.n_train);
    gen->add_option("--test", g.n_test, "Number of test views")->default_val(g.n_test);
    gen->add_option("--size", g.size, "View size as WIDTHxHEIGHT")
        ->default_val(g.size)
        ->check([](const std::string& s) {
            int w, h;
            return parse_size(s, w, h) ? std::string() : kSizeError;
        });
    gen->add_option("--seed", g.seed, "Pose-jitter seed")->default_val(g.seed);
    gen->add_option("--out", g.out, "Output dataset directory")->default_val(g.out);

    TrainArgs t;
    CLI::App* train = app.add_subcommand("train", "Train coarse+fine radiance fields");
    train->add_option("--data", t.data, "Dataset directory")->default_val(t.data);
    train->add_option("--out", t.out, "Run directory for artifacts")->default_val(t.out);
    train->add_option("--config", t.config, "RunConfig JSON; explicit flags override its keys");
    train->add_option("--iters", t.flags.iters, "Training iterations")->default_val(t.flags.iters);
    train->add_option("--rays", t.flags.rays, "Rays per iteration")->default_val(t.flags.rays);
    train->add_option("--lr-start", t.flags.lr_start, "Initial learning rate")
        ->default_val(t.flags.lr_start);
    train->add_option("--lr-end", t.flags.lr_end, "Final learning rate")
        ->default_val(t.flags.lr_end);
    train->add_option("--adam-beta1", t.flags.adam_beta1, "Adam beta1")
        ->default_val(t.flags.adam_beta1);
    train->add_option("--adam-beta2", t.flags.adam_beta2, "Adam beta2")
        ->default_val(t.flags.adam_beta2);
    train->add_option("--adam-eps", t.flags.adam_eps, "Adam epsilon")->default_val(t.flags.adam_eps);
    train->add_option("--distortion", t.distortion, "Distortion-aware ray sampling")
        ->default_val(t.distortion)
        ->check(CLI::IsMember({"on", "off"}));
    train->add_option("--content", t.content, "Content-aware ray sampling")
        ->default_val(t.content)
        ->check(CLI::IsMember({"on", "off"}));
    train->add_option("--content-floor", t.flags.content_floor, "Loss floor for content scores")
        ->default_val(t.flags.content_floor);
    train->add_option("--seed", t.flags.seed, "Master seed for all run randomness")
        ->default_val(t.flags.seed);
    train->add_option("--eval-every", t.flags.eval_every, "Evaluation cadence in iterations")
        ->default_val(t.flags.eval_every);
    train->add_option("--n-coarse", t.flags.n_coarse, "Coarse samples per ray")
        ->default_val(t.flags.n_coarse);
    train->add_option("--n-fine", t.flags.n_fine, "Fine samples per ray")
        ->default_val(t.flags.n_fine);
    train->add_option("--stratified", t.stratified, "Stratified coarse sampling")
        ->default_val(t.stratified)
        ->check(CLI::IsMember({"on", "off"}));
    train->add_option("--trunk-depth", t.flags.trunk_depth, "Trunk MLP depth")
        ->default_val(t.flags.trunk_depth);
    train->add_option("--trunk-width", t.flags.trunk_width, "Trunk MLP width")
        ->default_val(t.flags.trunk_width);
    train->add_option("--color-hidden", t.flags.color_hidden, "Color head hidden width")
        ->default_val(t.flags.color_hidden);
    train->add_option("--pos-octaves", t.flags.pos_octaves, "Positional encoding octaves")
        ->default_val(t.flags.pos_octaves);
    train->add_option("--dir-octaves", t.flags.dir_octaves, "Direction encoding octaves")
        ->default_val(t.flags.dir_octaves);
    train->add_option("--density-scale", t.flags.density_scale, "Density output scale")
        ->default_val(t.flags.density_scale);
    train->add_option("--pos-scale", t.flags.pos_scale, "Position input scale")
        ->default_val(t.flags.pos_scale);
    train->add_option("--crop-size", t.flags.crop_size, "Frequency-crop size")
        ->default_val(t.flags.crop_size);
    train->add_option("--crop-stride", t.flags.crop_stride, "Frequency-crop search stride")
        ->default_val(t.flags.crop_stride);

    EvalArgs e;
    CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test views");
    eval->add_option("--run", e.run, "Run directory with config.json + checkpoint.bin")
        ->default_val(e.run);
    eval->add_option("--data", e.data, "Dataset directory")->default_val(e.data);
    eval->add_flag("--bands", e.bands, "Include per-latitude-band PSNR columns");
    eval->add_flag("--crops", e.crops, "Include low/high-frequency crop PSNR columns");

    HeatmapArgs h;
    CLI::App* heatmap =
        app.add_subcommand("heatmap", "Write a sampling-probability heatmap PNG");
    heatmap->add_option("--run", h.run, "Run directory with persisted snapshots")
        ->default_val(h.run);
    heatmap->add_option("--iter", h.iter, "Snapshot iteration (an eval boundary)")
        ->default_val(h.iter);
    heatmap->add_option("--image", h.image, "Training image index")->default_val(h.image);
    heatmap->add_option("--out", h.out, "Output PNG path")->default_val(h.out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        // --help lands here too; it must stay exit 0.
        return app.exit(err) == 0 ? 0 : 2;
    }

    try {
        if (*gen) return run_gen(g);
        if (*train) return run_train(*train, t);
        if (*eval) return run_eval(e);
        return run_heatmap(h);
    } catch (const pn::InputDomainError& err) {
        std::fprintf(stderr, "usage error: %s\n", err.what());
        return 2;
    } catch (const pn::DataError& err) {
        std::fprintf(stderr, "data error: %s\n", err.what());
        return 3;
    } catch (const pn::NumericError& err) {
        std::fprintf(stderr, "numeric error: %s\n", err.what());
        return 4;
    } catch (const std::exception& err) {
        std::fprintf(stderr, "error: %s\n", err.what());
        return 1;
    }
}
