#ifndef PANONERF_TRAINER_HPP
#define PANONERF_TRAINER_HPP

// Training loop: draw a pixel batch from the sampling table, render the rays
// coarse+fine, backprop the summed squared-error loss through both fields,
// Adam-step, and (when enabled) feed per-ray losses back into the
// content-aware sampling weights. Also owns evaluation, the learning-curve
// CSV, sampler snapshots, and checkpointing.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "panonerf/common.hpp"
#include "panonerf/config.hpp"
#include "panonerf/csv.hpp"
#include "panonerf/dataset.hpp"
#include "panonerf/erp.hpp"
#include "panonerf/field.hpp"
#include "panonerf/image.hpp"
#include "panonerf/metrics.hpp"
#include "panonerf/png_io.hpp"
#include "panonerf/renderer.hpp"
#include "panonerf/sampling.hpp"

namespace panonerf {

struct TrainConfig {
    int m = 2048;  // rays per iteration
    int total_iters = 5000;
    double lr_start = 5e-4, lr_end = 5e-5;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-7;
    bool distortion_on = true, content_on = true;
    double content_floor = 1e-4;
    uint64_t seed = 0;
    int eval_every = 500;

    void validate() const {
        require_domain(m >= 1, "TrainConfig: m must be >= 1");
        require_domain(total_iters >= 0, "TrainConfig: total_iters must be >= 0");
        require_domain(lr_start >= lr_end && lr_end > 0.0, "TrainConfig: need lr_start >= lr_end > 0");
        require_domain(eval_every >= 1, "TrainConfig: eval_every must be >= 1");
    }
};

inline TrainConfig train_config(const RunConfig& rc) {
    TrainConfig t;
    t.m = rc.rays;
    t.total_iters = rc.iters;
    t.lr_start = rc.lr_start;
    t.lr_end = rc.lr_end;
    t.beta1 = rc.adam_beta1;
    t.beta2 = rc.adam_beta2;
    t.eps = rc.adam_eps;
    t.distortion_on = rc.distortion_on;
    t.content_on = rc.content_on;
    t.content_floor = rc.content_floor;
    t.seed = rc.seed;
    t.eval_every = rc.eval_every;
    return t;
}

// Linear decay from lr_start at iteration 0 to lr_end at total_iters,
// clamped to lr_end beyond.
inline double lr_at(long long iter, const TrainConfig& cfg) {
    require_domain(iter >= 0, "lr_at: negative iteration");
    if (cfg.total_iters <= 0 || iter >= cfg.total_iters) return cfg.lr_end;
    double f = static_cast<double>(iter) / static_cast<double>(cfg.total_iters);
    return cfg.lr_start + (cfg.lr_end - cfg.lr_start) * f;
}

struct AdamState {
    VecX<double> m, v;
    long long step = 0;

    explicit AdamState(Eigen::Index n)
        : m(VecX<double>::Zero(n)), v(VecX<double>::Zero(n)) {}
};

// Standard bias-corrected Adam; epsilon sits outside the square root.
inline void adam_step(VecX<double>& params, const VecX<double>& grads, AdamState& st, double lr,
                      const TrainConfig& cfg) {
    require_domain(params.size() == grads.size() && params.size() == st.m.size(),
                   "adam_step: shape mismatch");
    require_finite(grads.allFinite(), "adam_step: non-finite gradient");
    st.step += 1;
    st.m = cfg.beta1 * st.m + (1.0 - cfg.beta1) * grads;
    st.v = cfg.beta2 * st.v + (1.0 - cfg.beta2) * grads.cwiseProduct(grads);
    double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
    double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
    params.array() -=
        lr * (st.m.array() / c1) / ((st.v.array() / c2).sqrt() + cfg.eps);
    require_finite(params.allFinite(), "adam_step: parameters became non-finite");
}

// ---------------------------------------------------------------------------
// Deterministic full-view rendering (evaluation and the eval CLI): rays at
// pixel centers, per-pixel RNG derived from (seed, view_tag, flat pixel), so
// the result is independent of chunking and iteration order.

inline constexpr int kRenderChunk = 128;

template <typename Field>
ErpImage render_view(const Field& field_c, const Field& field_f, const CameraPose& pose, int width,
                     int height, double t_far, const RenderConfig& rcfg, uint64_t seed,
                     uint64_t view_tag) {
    ErpImage img(width, height);
    std::vector<Ray> rays;
    std::vector<Rng> rngs;
    std::vector<size_t> flat;
    ChunkRender<Field> aux;
    auto flush = [&] {
        if (rays.empty()) return;
        render_chunk(field_c, field_f, rays, rcfg, rngs, aux);
        for (size_t i = 0; i < rays.size(); ++i) {
            size_t px = flat[i];
            for (int c = 0; c < 3; ++c)
                img.data[px * 3 + c] = static_cast<float>(aux.comp_f[i].color[c]);
        }
        rays.clear();
        rngs.clear();
        flat.clear();
    };
    for (int v = 0; v < height; ++v)
        for (int u = 0; u < width; ++u) {
            rays.push_back(generate_ray(pose, u, v, 0.5, 0.5, width, height, 0.0, t_far));
            rngs.emplace_back(mix_seed(seed, view_tag, static_cast<uint64_t>(v) * width + u));
            flat.push_back(static_cast<size_t>(v) * width + u);
            if (rays.size() == kRenderChunk) flush();
        }
    flush();
    return img;
}

// ---------------------------------------------------------------------------
// Sampler snapshots: the combined per-pixel weights at one iteration, enough
// to reconstruct any image's probability heatmap offline.

inline constexpr uint32_t kSnapshotMagic = 0x53534e50u;  // "PNSS" little-endian
inline constexpr uint32_t kSnapshotVersion = 1;

struct SamplerSnapshot {
    long long iter = 0;
    std::vector<std::pair<int, int>> dims;  // (width, height) per training image
    std::vector<double> weights;            // flat-index order
};

inline void save_snapshot(const std::string& path, const SamplerSnapshot& snap) {
    std::ofstream out(path, std::ios::binary);
    require_data(out.good(), "snapshot: cannot open " + path + " for writing");
    detail::write_pod(out, kSnapshotMagic);
    detail::write_pod(out, kSnapshotVersion);
    detail::write_pod(out, static_cast<int64_t>(snap.iter));
    detail::write_pod(out, static_cast<uint32_t>(snap.dims.size()));
    for (auto [w, h] : snap.dims) {
        detail::write_pod(out, static_cast<uint32_t>(w));
        detail::write_pod(out, static_cast<uint32_t>(h));
    }
    detail::write_pod(out, static_cast<uint64_t>(snap.weights.size()));
    out.write(reinterpret_cast<const char*>(snap.weights.data()),
              static_cast<std::streamsize>(snap.weights.size() * sizeof(double)));
    require_data(out.good(), "snapshot: write failed for " + path);
}

inline SamplerSnapshot load_snapshot(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require_data(in.good(), "snapshot: cannot open " + path);
    require_data(detail::read_pod<uint32_t>(in) == kSnapshotMagic, "snapshot: bad magic in " + path);
    require_data(detail::read_pod<uint32_t>(in) == kSnapshotVersion,
                 "snapshot: unsupported version in " + path);
    SamplerSnapshot snap;
    snap.iter = detail::read_pod<int64_t>(in);
    uint32_t n_images = detail::read_pod<uint32_t>(in);
    size_t expect = 0;
    for (uint32_t i = 0; i < n_images; ++i) {
        int w = static_cast<int>(detail::read_pod<uint32_t>(in));
        int h = static_cast<int>(detail::read_pod<uint32_t>(in));
        snap.dims.emplace_back(w, h);
        expect += static_cast<size_t>(w) * h;
    }
    uint64_t n = detail::read_pod<uint64_t>(in);
    require_data(n == expect, "snapshot: weight count disagrees with dims in " + path);
    snap.weights.resize(n);
    in.read(reinterpret_cast<char*>(snap.weights.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    require_data(in.good(), "snapshot: truncated file " + path);
    return snap;
}

// ---------------------------------------------------------------------------

struct StepRecord {
    long long iter = 0;  // 1-based: the iteration just completed
    double loss = 0.0;
    std::vector<PixelId> batch;
};

struct EvalRecord {
    long long iter = 0;
    double psnr = 0.0, ssim = 0.0;
    std::array<double, 5> bands{};
    double loss = 0.0, lr = 0.0, wall_ms = 0.0;
};

struct TrainHooks {
    std::function<void(const EvalRecord&)> on_eval;
};

inline const char* kCurveHeader[] = {"iter", "psnr",       "ssim",       "psnr_band1",
                                     "psnr_band2", "psnr_band3", "psnr_band4", "psnr_band5",
                                     "loss", "lr",         "wall_ms"};

class Trainer {
  public:
    Trainer(const RunConfig& rc, const Dataset& data)
        : rc_(rc),
          cfg_(train_config(rc)),
          rcfg_(rc.render()),
          data_(&data),
          layout_(train_dims(data)),
          pd_(cfg_.distortion_on ? build_distortion_table(layout_) : build_uniform_table(layout_)),
          content_(layout_.total_pixels(), cfg_.content_floor),
          table_(layout_, pd_, content_),
          field_c_(rc.field(), mix_seed(cfg_.seed, 0x636f61727365ULL)),
          field_f_(rc.field(), mix_seed(cfg_.seed, 0x66696e65ULL)),
          adam_(field_c_.param_count() + field_f_.param_count()),
          rng_(mix_seed(cfg_.seed, 0x747261696eULL)) {
        rc_.validate();
        cfg_.validate();
        for (size_t i = 0; i < data.poses.size(); ++i)
            (data.poses[i].role == "train" ? train_idx_ : test_idx_).push_back(static_cast<int>(i));
        require_data(!train_idx_.empty() && !test_idx_.empty(),
                     "trainer: dataset needs both train and test views");
    }

    // One optimization step: batch draw, render, backprop, Adam, content update.
    StepRecord step() {
        StepRecord rec;
        rec.batch = table_.draw_batch(static_cast<size_t>(cfg_.m), rng_);
        size_t n = rec.batch.size();

        std::vector<Ray> rays(n);
        std::vector<Rng> ray_rngs;
        ray_rngs.reserve(n);
        MatX<double> gt(3, static_cast<Eigen::Index>(n));
        for (size_t i = 0; i < n; ++i) {
            const PixelId& id = rec.batch[i];
            const PoseEntry& e = data_->poses[train_idx_[id.image_index]];
            double ju = rng_.uniform(), jv = rng_.uniform();
            rays[i] = generate_ray(CameraPose{e.position, e.rotation}, id.col, id.row, ju, jv,
                                   e.width, e.height, 0.0, e.t_far);
            const ErpImage& img = data_->images[train_idx_[id.image_index]];
            for (int c = 0; c < 3; ++c) gt(c, static_cast<Eigen::Index>(i)) = img.at(id.col, id.row, c);
        }
        for (size_t i = 0; i < n; ++i) ray_rngs.emplace_back(rng_.next_u64());

        VecX<float> grad_c = VecX<float>::Zero(field_c_.param_count());
        VecX<float> grad_f = VecX<float>::Zero(field_f_.param_count());
        std::vector<double> ray_loss(n);
        double total_loss = 0.0;
        ChunkRender<RadianceField<float>> aux;
        for (size_t base = 0; base < n; base += kRenderChunk) {
            size_t count = std::min(static_cast<size_t>(kRenderChunk), n - base);
            std::vector<Ray> chunk(rays.begin() + base, rays.begin() + base + count);
            std::vector<Rng> chunk_rngs(ray_rngs.begin() + base, ray_rngs.begin() + base + count);
            render_chunk(field_c_, field_f_, chunk, rcfg_, chunk_rngs, aux);
            MatX<double> dCc(3, static_cast<Eigen::Index>(count)), dCf(3, static_cast<Eigen::Index>(count));
            for (size_t i = 0; i < count; ++i) {
                Vec3 rc = aux.comp_c[i].color - gt.col(static_cast<Eigen::Index>(base + i));
                Vec3 rf = aux.comp_f[i].color - gt.col(static_cast<Eigen::Index>(base + i));
                ray_loss[base + i] = rc.squaredNorm() + rf.squaredNorm();
                total_loss += ray_loss[base + i];
                dCc.col(static_cast<Eigen::Index>(i)) = 2.0 * rc;
                dCf.col(static_cast<Eigen::Index>(i)) = 2.0 * rf;
            }
            render_chunk_backward(field_c_, field_f_, aux, dCc, dCf, grad_c, grad_f);
        }
        require_finite(std::isfinite(total_loss), "trainer: loss became non-finite");

        // One Adam instance over the concatenated parameter set.
        Eigen::Index nc = field_c_.param_count(), nf = field_f_.param_count();
        VecX<double> p(nc + nf), g(nc + nf);
        p.head(nc) = field_c_.params().cast<double>();
        p.tail(nf) = field_f_.params().cast<double>();
        g.head(nc) = grad_c.cast<double>();
        g.tail(nf) = grad_f.cast<double>();
        adam_step(p, g, adam_, lr_at(iter_, cfg_), cfg_);
        field_c_.params() = p.head(nc).cast<float>();
        field_f_.params() = p.tail(nf).cast<float>();

        // The recorded per-pixel loss is the same ray's coarse+fine summand.
        if (cfg_.content_on) {
            std::vector<std::pair<size_t, double>> touched(n);
            std::vector<size_t> flats(n);
            for (size_t i = 0; i < n; ++i) {
                flats[i] = layout_.flat_index(rec.batch[i]);
                touched[i] = {flats[i], ray_loss[i]};
            }
            content_update(content_, touched);
            table_.rebuild_combined(pd_, content_, flats);
        }

        ++iter_;
        rec.iter = iter_;
        rec.loss = total_loss;
        return rec;
    }

    // Held-out metrics (means over test views) plus a forward-only probe loss
    // on a dedicated RNG substream; pure relative to training state.
    EvalRecord evaluate() const {
        EvalRecord rec;
        rec.iter = iter_;
        rec.lr = lr_at(iter_, cfg_);
        double se_psnr = 0.0, se_ssim = 0.0;
        std::array<double, 5> bands{};
        for (size_t k = 0; k < test_idx_.size(); ++k) {
            const PoseEntry& e = data_->poses[test_idx_[k]];
            ErpImage pred = render_view(field_c_, field_f_, CameraPose{e.position, e.rotation},
                                        e.width, e.height, e.t_far, rcfg_, cfg_.seed,
                                        mix_seed(0x6576616cULL, k));
            const ErpImage& ref = data_->images[test_idx_[k]];
            se_psnr += psnr(pred, ref);
            // Views smaller than the SSIM window get the NaN sentinel instead
            // of aborting the run.
            se_ssim += (e.width >= 11 && e.height >= 11)
                           ? ssim(pred, ref)
                           : std::numeric_limits<double>::quiet_NaN();
            std::array<double, 5> b = band_psnr(pred, ref);
            for (int i = 0; i < 5; ++i) bands[i] += b[i];
        }
        double nv = static_cast<double>(test_idx_.size());
        rec.psnr = se_psnr / nv;
        rec.ssim = se_ssim / nv;
        for (int i = 0; i < 5; ++i) rec.bands[i] = bands[i] / nv;
        rec.loss = probe_loss();
        return rec;
    }

    // Full run: artifacts land in run_dir (config echo, curve.csv, sampler
    // snapshots + heatmaps at eval boundaries, checkpoint.bin at the end).
    void train(const std::string& run_dir, const TrainHooks& hooks = {}) {
        namespace fs = std::filesystem;
        fs::create_directories(fs::path(run_dir) / "heatmaps");
        fs::create_directories(fs::path(run_dir) / "snapshots");
        save_run_config((fs::path(run_dir) / "config.json").string(), rc_);

        CsvWriter csv((fs::path(run_dir) / "curve.csv").string());
        std::vector<std::string> header(std::begin(kCurveHeader), std::end(kCurveHeader));
        csv.write_row(header);

        auto t0 = std::chrono::steady_clock::now();
        auto emit = [&](const EvalRecord& r) {
            EvalRecord rec = r;
            rec.wall_ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - t0)
                              .count();
            std::vector<std::string> row{format_int(rec.iter), format_double(rec.psnr),
                                         format_double(rec.ssim)};
            for (double b : rec.bands) row.push_back(format_double(b));
            row.push_back(format_double(rec.loss));
            row.push_back(format_double(rec.lr));
            row.push_back(format_double(rec.wall_ms));
            csv.write_row(row);
            csv.flush();
            save_artifacts(run_dir, rec.iter);
            if (hooks.on_eval) hooks.on_eval(rec);
        };

        emit(evaluate());
        for (long long it = 1; it <= cfg_.total_iters; ++it) {
            step();
            bool boundary = cfg_.eval_every > 0 && it % cfg_.eval_every == 0;
            if (it == cfg_.total_iters || boundary) emit(evaluate());
        }
        if (cfg_.total_iters == 0) emit(evaluate());  // init + final rows even for empty runs

        std::ofstream ck((fs::path(run_dir) / "checkpoint.bin").string(), std::ios::binary);
        require_data(ck.good(), "trainer: cannot write checkpoint");
        save_field(ck, field_c_);
        save_field(ck, field_f_);
        require_data(ck.good(), "trainer: checkpoint write failed");
    }

    SamplerSnapshot snapshot() const {
        SamplerSnapshot snap;
        snap.iter = iter_;
        for (size_t i = 0; i < layout_.image_count(); ++i)
            snap.dims.push_back(layout_.dims(static_cast<int>(i)));
        snap.weights.resize(table_.size());
        for (size_t i = 0; i < snap.weights.size(); ++i) snap.weights[i] = table_.weight(i);
        return snap;
    }

    const SamplingTable& table() const { return table_; }
    const PixelLayout& layout() const { return layout_; }
    const RadianceField<float>& field_coarse() const { return field_c_; }
    const RadianceField<float>& field_fine() const { return field_f_; }
    RadianceField<float>& field_coarse() { return field_c_; }
    RadianceField<float>& field_fine() { return field_f_; }
    long long iter() const { return iter_; }
    const TrainConfig& config() const { return cfg_; }

  private:
    static std::vector<std::pair<int, int>> train_dims(const Dataset& data) {
        std::vector<std::pair<int, int>> dims;
        for (const auto& e : data.poses)
            if (e.role == "train") dims.emplace_back(e.width, e.height);
        require_data(!dims.empty(), "trainer: dataset has no training views");
        return dims;
    }

    // Training loss (coarse + fine squared error) on a forward-only batch
    // drawn from the current table with a dedicated RNG substream; does not
    // advance training state.
    double probe_loss() const {
        Rng probe(mix_seed(cfg_.seed, 0x70726f6265ULL, static_cast<uint64_t>(iter_)));
        std::vector<PixelId> ids = table_.draw_batch(static_cast<size_t>(cfg_.m), probe);
        double total = 0.0;
        std::vector<Ray> rays;
        std::vector<Rng> rngs;
        std::vector<Vec3> gts;
        ChunkRender<RadianceField<float>> aux;
        auto flush = [&] {
            if (rays.empty()) return;
            render_chunk(field_c_, field_f_, rays, rcfg_, rngs, aux);
            for (size_t i = 0; i < rays.size(); ++i) {
                total += (aux.comp_c[i].color - gts[i]).squaredNorm() +
                         (aux.comp_f[i].color - gts[i]).squaredNorm();
            }
            rays.clear();
            rngs.clear();
            gts.clear();
        };
        for (const PixelId& id : ids) {
            const PoseEntry& e = data_->poses[train_idx_[id.image_index]];
            rays.push_back(generate_ray(CameraPose{e.position, e.rotation}, id.col, id.row, 0.5, 0.5,
                                        e.width, e.height, 0.0, e.t_far));
            rngs.emplace_back(probe.next_u64());
            const ErpImage& img = data_->images[train_idx_[id.image_index]];
            gts.emplace_back(img.at(id.col, id.row, 0), img.at(id.col, id.row, 1),
                             img.at(id.col, id.row, 2));
            if (rays.size() == kRenderChunk) flush();
        }
        flush();
        require_finite(std::isfinite(total), "trainer: probe loss became non-finite");
        return total;
    }

    void save_artifacts(const std::string& run_dir, long long it) const {
        namespace fs = std::filesystem;
        char name[64];
        std::snprintf(name, sizeof(name), "snapshots/sampler_%06lld.bin", it);
        save_snapshot((fs::path(run_dir) / name).string(), snapshot());
        for (size_t j = 0; j < layout_.image_count(); ++j) {
            std::snprintf(name, sizeof(name), "heatmaps/iter_%06lld_img_%02zu.png", it, j);
            write_png_rgb8((fs::path(run_dir) / name).string(),
                           sampling_heatmap(table_, static_cast<int>(j)));
        }
    }

    RunConfig rc_;
    TrainConfig cfg_;
    RenderConfig rcfg_;
    const Dataset* data_;
    std::vector<int> train_idx_, test_idx_;
    PixelLayout layout_;
    DistortionTable pd_;
    ContentState content_;
    SamplingTable table_;
    RadianceField<float> field_c_, field_f_;
    AdamState adam_;
    Rng rng_;
    long long iter_ = 0;
};

// Checkpoints hold the coarse field followed by the fine field.
inline void load_checkpoint(const std::string& path, RadianceField<float>& field_c,
                            RadianceField<float>& field_f) {
    std::ifstream in(path, std::ios::binary);
    require_data(in.good(), "checkpoint: cannot open " + path);
    field_c = load_field<float>(in);
    field_f = load_field<float>(in);
}

}  // namespace panonerf

#endif  // PANONERF_TRAINER_HPP
