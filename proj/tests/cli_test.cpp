// End-to-end tests of the panonerf binary: the four subcommands, their exit
// codes, and the determinism of everything they write.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "panonerf/common.hpp"
#include "panonerf/config.hpp"
#include "panonerf/csv.hpp"
#include "panonerf/field.hpp"
#include "panonerf/png_io.hpp"
#include "panonerf/trainer.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace panonerf;
using testsupport::read_file_bytes;
using testsupport::scratch_dir;

namespace {

int run_cli(const std::string& args, bool quiet = true) {
    std::string cmd = std::string(PANONERF_CLI_PATH) + " " + args;
    if (quiet) cmd += " > /dev/null 2>&1";
    int st = std::system(cmd.c_str());
    if (st == -1) return -1;
    return WIFEXITED(st) ? WEXITSTATUS(st) : -2;
}

// Relative paths of all regular files under root, sorted.
std::vector<fs::path> file_list(const fs::path& root) {
    std::vector<fs::path> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root));
    std::sort(out.begin(), out.end());
    return out;
}

bool dirs_identical(const fs::path& a, const fs::path& b) {
    auto la = file_list(a), lb = file_list(b);
    if (la != lb) return false;
    for (const auto& rel : la)
        if (read_file_bytes(a / rel) != read_file_bytes(b / rel)) return false;
    return true;
}

}  // namespace

TEST(Cli, HelpExitsZero) {
    EXPECT_EQ(run_cli("--help"), 0);
    EXPECT_EQ(run_cli("train --help"), 0);
}

TEST(Cli, UsageErrorsExitTwo) {
    auto dir = scratch_dir("cli_usage");
    EXPECT_EQ(run_cli(""), 2);  // subcommand required
    EXPECT_EQ(run_cli("gen --bogus-flag 1"), 2);
    EXPECT_EQ(run_cli("gen --size 64 --out " + (dir / "d").string()), 2);
    EXPECT_EQ(run_cli("gen --size 0x4 --out " + (dir / "d").string()), 2);
    EXPECT_EQ(run_cli("gen --scene cube --out " + (dir / "d").string()), 2);
    EXPECT_EQ(run_cli("train --distortion maybe"), 2);
}

TEST(Cli, DataErrorsExitThree) {
    auto dir = scratch_dir("cli_data");
    EXPECT_EQ(run_cli("train --data " + (dir / "nope").string() + " --out " + (dir / "r").string()),
              3);
    // Syntactically fine flags but an invalid training configuration.
    EXPECT_EQ(run_cli("train --data " + (dir / "nope").string() + " --iters -3"), 3);
    fs::create_directories(dir / "junk");
    std::ofstream((dir / "junk" / "poses.json").string()) << "not json";
    EXPECT_EQ(run_cli("train --data " + (dir / "junk").string() + " --out " +
                      (dir / "r").string()),
              3);
    EXPECT_EQ(run_cli("eval --run " + (dir / "nope").string() + " --data " +
                      (dir / "nope").string()),
              3);
    EXPECT_EQ(run_cli("heatmap --run " + (dir / "nope").string() + " --out " +
                      (dir / "h.png").string()),
              3);
}

TEST(Cli, DegenerateSnapshotExitsFour) {
    auto dir = scratch_dir("cli_numeric");
    fs::create_directories(dir / "run" / "snapshots");
    SamplerSnapshot snap;
    snap.iter = 0;
    snap.dims = {{4, 2}};
    snap.weights.assign(8, 0.0);  // no pixel can ever be drawn from this
    save_snapshot((dir / "run" / "snapshots" / "sampler_000000.bin").string(), snap);
    EXPECT_EQ(run_cli("heatmap --run " + (dir / "run").string() + " --iter 0 --image 0 --out " +
                      (dir / "h.png").string()),
              4);
}

TEST(Cli, GenIsDeterministicPerSeed) {
    auto dir = scratch_dir("cli_gen");
    std::string common = "gen --scene flat --train 2 --test 1 --size 16x8 --seed 5 --out ";
    ASSERT_EQ(run_cli(common + (dir / "a").string()), 0);
    ASSERT_EQ(run_cli(common + (dir / "b").string()), 0);
    EXPECT_TRUE(dirs_identical(dir / "a", dir / "b"));

    ASSERT_EQ(run_cli("gen --scene flat --train 2 --test 1 --size 16x8 --seed 6 --out " +
                      (dir / "c").string()),
              0);
    EXPECT_FALSE(dirs_identical(dir / "a", dir / "c"));
}

TEST(Cli, ZeroIterTrainWritesInitCheckpointAndTwoRows) {
    auto dir = scratch_dir("cli_zero_iter");
    ASSERT_EQ(run_cli("gen --scene flat --train 2 --test 1 --size 16x8 --seed 3 --out " +
                      (dir / "ds").string()),
              0);
    std::string knobs =
        " --iters 0 --rays 64 --n-coarse 8 --n-fine 8 --trunk-depth 2 --trunk-width 16"
        " --color-hidden 8 --pos-octaves 3 --dir-octaves 1 --seed 9";
    ASSERT_EQ(run_cli("train --data " + (dir / "ds").string() + " --out " +
                      (dir / "run").string() + knobs),
              0);

    // The checkpoint must hold the untouched initial fields.
    RunConfig rc;
    rc.iters = 0;
    rc.rays = 64;
    rc.n_coarse = rc.n_fine = 8;
    rc.trunk_depth = 2;
    rc.trunk_width = 16;
    rc.color_hidden = 8;
    rc.pos_octaves = 3;
    rc.dir_octaves = 1;
    rc.seed = 9;
    EXPECT_EQ(load_run_config((dir / "run" / "config.json").string()), rc);
    RadianceField<float> init_c(rc.field(), mix_seed(rc.seed, 0x636f61727365ULL));
    RadianceField<float> init_f(rc.field(), mix_seed(rc.seed, 0x66696e65ULL));
    std::ostringstream expect(std::ios::binary);
    save_field(expect, init_c);
    save_field(expect, init_f);
    auto got = read_file_bytes(dir / "run" / "checkpoint.bin");
    ASSERT_EQ(got.size(), expect.str().size());
    EXPECT_TRUE(std::equal(got.begin(), got.end(),
                           reinterpret_cast<const unsigned char*>(expect.str().data())));

    auto rows = read_csv((dir / "run" / "curve.csv").string());
    ASSERT_EQ(rows.size(), 3u);  // header + init row + final row
    EXPECT_EQ(rows[1][0], "0");
    EXPECT_EQ(rows[2][0], "0");
}

TEST(Cli, PipelineSmokeAndEvalMatchesCurve) {
    auto dir = scratch_dir("cli_pipeline");
    ASSERT_EQ(run_cli("gen --scene toy --train 2 --test 2 --size 32x16 --seed 1 --out " +
                      (dir / "ds").string()),
              0);
    std::string knobs =
        " --iters 8 --eval-every 4 --rays 64 --n-coarse 8 --n-fine 8 --trunk-depth 2"
        " --trunk-width 16 --color-hidden 8 --pos-octaves 3 --dir-octaves 1"
        " --crop-size 8 --crop-stride 4 --seed 1";
    ASSERT_EQ(run_cli("train --data " + (dir / "ds").string() + " --out " +
                      (dir / "run").string() + knobs),
              0);

    for (const char* f : {"config.json", "curve.csv", "checkpoint.bin",
                          "snapshots/sampler_000000.bin", "snapshots/sampler_000004.bin",
                          "snapshots/sampler_000008.bin", "heatmaps/iter_000000_img_00.png",
                          "heatmaps/iter_000008_img_01.png"})
        EXPECT_TRUE(fs::exists(dir / "run" / f)) << f;

    auto curve = read_csv((dir / "run" / "curve.csv").string());
    ASSERT_EQ(curve.size(), 4u);  // header + iters 0, 4, 8
    EXPECT_EQ(curve[3][0], "8");

    ASSERT_EQ(run_cli("eval --run " + (dir / "run").string() + " --data " +
                      (dir / "ds").string() + " --bands --crops"),
              0);
    auto eval = read_csv((dir / "run" / "eval.csv").string());
    ASSERT_EQ(eval.size(), 4u);  // header + 2 views + mean
    std::vector<std::string> header{"view", "file", "psnr", "ssim", "psnr_band1", "psnr_band2",
                                    "psnr_band3", "psnr_band4", "psnr_band5", "psnr_crop_low",
                                    "psnr_crop_high"};
    EXPECT_EQ(eval[0], header);
    EXPECT_EQ(eval[3][0], "mean");
    // The eval command repeats the trainer's own evaluation pass bit for bit.
    EXPECT_EQ(eval[3][2], curve[3][1]);  // mean psnr == final curve psnr
    EXPECT_EQ(eval[3][3], curve[3][2]);  // mean ssim == final curve ssim

    ASSERT_EQ(run_cli("heatmap --run " + (dir / "run").string() + " --iter 4 --image 1 --out " +
                      (dir / "hm.png").string()),
              0);
    ErpImage hm = read_png_rgb((dir / "hm.png").string());
    EXPECT_EQ(hm.width, 32);
    EXPECT_EQ(hm.height, 16);
}

TEST(Cli, TrainIsDeterministicPerSeed) {
    auto dir = scratch_dir("cli_train_det");
    ASSERT_EQ(run_cli("gen --scene flat --train 2 --test 1 --size 16x8 --seed 2 --out " +
                      (dir / "ds").string()),
              0);
    std::string knobs =
        " --iters 6 --eval-every 3 --rays 32 --n-coarse 8 --n-fine 8 --trunk-depth 2"
        " --trunk-width 16 --color-hidden 8 --pos-octaves 3 --dir-octaves 1 --seed 4 ";
    for (const char* out : {"r1", "r2"})
        ASSERT_EQ(run_cli("train --data " + (dir / "ds").string() + knobs + "--out " +
                          (dir / out).string()),
                  0);
    EXPECT_EQ(read_file_bytes(dir / "r1" / "checkpoint.bin"),
              read_file_bytes(dir / "r2" / "checkpoint.bin"));
    // CSVs agree except for the wall-clock column.
    auto a = read_csv((dir / "r1" / "curve.csv").string());
    auto b = read_csv((dir / "r2" / "curve.csv").string());
    ASSERT_EQ(a.size(), b.size());
    for (size_t r = 0; r < a.size(); ++r) {
        ASSERT_EQ(a[r].size(), b[r].size());
        for (size_t c = 0; c + 1 < a[r].size(); ++c) EXPECT_EQ(a[r][c], b[r][c]);
    }
}

TEST(Cli, ConfigFileOverlay) {
    auto dir = scratch_dir("cli_config");
    ASSERT_EQ(run_cli("gen --scene flat --train 2 --test 1 --size 16x8 --seed 3 --out " +
                      (dir / "ds").string()),
              0);
    std::ofstream((dir / "base.json").string())
        << R"({"iters": 3, "rays": 32, "trunk_width": 8, "trunk_depth": 2, "color_hidden": 8,
              "pos_octaves": 2, "dir_octaves": 1, "n_coarse": 4, "n_fine": 4})";
    // Explicit flag beats the file; file beats the default.
    ASSERT_EQ(run_cli("train --data " + (dir / "ds").string() + " --config " +
                      (dir / "base.json").string() + " --iters 2 --out " + (dir / "run").string()),
              0);
    RunConfig rc = load_run_config((dir / "run" / "config.json").string());
    EXPECT_EQ(rc.iters, 2);
    EXPECT_EQ(rc.rays, 32);
    EXPECT_EQ(rc.trunk_width, 8);
    EXPECT_EQ(rc.eval_every, 500);  // untouched default

    std::ofstream((dir / "bad.json").string()) << R"({"itres": 3})";
    EXPECT_EQ(run_cli("train --data " + (dir / "ds").string() + " --config " +
                      (dir / "bad.json").string() + " --out " + (dir / "r2").string()),
              3);
}
