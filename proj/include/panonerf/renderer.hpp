#pragma once

#include <algorithm>
#include <vector>

#include "panonerf/common.hpp"
#include "panonerf/erp.hpp"
#include "panonerf/field.hpp"

namespace panonerf {

// Depth samples along one ray. t is strictly ascending within [t_near, t_far];
// delta[i] = t[i+1]-t[i], with the final delta capped below by the mean bin
// width so the last sample neither vanishes nor gets an infinite tail.
struct RaySamples {
    double t_near = 0.0;
    double t_far = 0.0;
    std::vector<double> t;
    std::vector<double> delta;
};

// Field outputs at those samples.
struct ShadedSamples {
    std::vector<double> sigma;
    std::vector<Vec3> color;
};

struct CompositeResult {
    Vec3 color = Vec3::Zero();
    std::vector<double> weights;  // w_i = T_i - T_{i+1}
    std::vector<double> trans;    // T_0..T_n; trans.back() is the leftover transmittance
};

namespace detail {

// Strict ascent can be lost to rounding when a draw lands on a bin edge;
// nudge forward rather than dropping samples so lengths stay fixed.
inline void enforce_ascending(std::vector<double>& t, double span) {
    double eps = 1e-12 * span;
    for (size_t i = 1; i < t.size(); ++i) {
        if (t[i] <= t[i - 1]) t[i] = t[i - 1] + eps;
    }
}

inline void fill_deltas(RaySamples& s) {
    size_t n = s.t.size();
    s.delta.resize(n);
    double mean_bin = (s.t_far - s.t_near) / static_cast<double>(n);
    for (size_t i = 0; i + 1 < n; ++i) s.delta[i] = s.t[i + 1] - s.t[i];
    s.delta[n - 1] = std::max(s.t_far - s.t[n - 1], mean_bin);
}

}  // namespace detail

// One uniform draw per bin over [t_near, t_far] split into n equal bins.
inline RaySamples stratified_samples(double t_near, double t_far, int n, Rng& rng) {
    require_domain(n >= 1, "stratified_samples: n must be >= 1");
    require_domain(t_near < t_far && std::isfinite(t_near) && std::isfinite(t_far),
                   "stratified_samples: invalid interval");
    RaySamples s;
    s.t_near = t_near;
    s.t_far = t_far;
    s.t.resize(n);
    double width = (t_far - t_near) / n;
    for (int i = 0; i < n; ++i) s.t[i] = t_near + (i + rng.uniform()) * width;
    detail::enforce_ascending(s.t, t_far - t_near);
    detail::fill_deltas(s);
    return s;
}

// Deterministic bin centers; used for evaluation renders and oracles.
inline RaySamples midpoint_samples(double t_near, double t_far, int n) {
    require_domain(n >= 1, "midpoint_samples: n must be >= 1");
    require_domain(t_near < t_far && std::isfinite(t_near) && std::isfinite(t_far),
                   "midpoint_samples: invalid interval");
    RaySamples s;
    s.t_near = t_near;
    s.t_far = t_far;
    s.t.resize(n);
    double width = (t_far - t_near) / n;
    for (int i = 0; i < n; ++i) s.t[i] = t_near + (i + 0.5) * width;
    detail::fill_deltas(s);
    return s;
}

// Front-to-back compositing: T_i = exp(-sum_{j<i} sigma_j delta_j),
// w_i = T_i (1 - exp(-sigma_i delta_i)), color = sum w_i c_i. Weights are
// computed as adjacent transmittance differences so sum(w) + T_end telescopes.
inline CompositeResult composite(const RaySamples& samples, const ShadedSamples& shaded) {
    size_t n = samples.t.size();
    require_domain(shaded.sigma.size() == n && shaded.color.size() == n && samples.delta.size() == n,
                   "composite: length mismatch");
    CompositeResult out;
    out.weights.resize(n);
    out.trans.resize(n + 1);
    double T = 1.0;
    for (size_t i = 0; i < n; ++i) {
        double sd = shaded.sigma[i] * samples.delta[i];
        const Vec3& c = shaded.color[i];
        require_finite(std::isfinite(sd) && c.allFinite(), "composite: non-finite input");
        require_domain(shaded.sigma[i] >= 0.0, "composite: negative density");
        require_domain(c.minCoeff() >= 0.0 && c.maxCoeff() <= 1.0,
                       "composite: color out of [0,1]");
        out.trans[i] = T;
        double T_next = T * std::exp(-sd);
        out.weights[i] = T - T_next;
        out.color += out.weights[i] * c;
        T = T_next;
    }
    out.trans[n] = T;
    return out;
}

// Pullback of composite for upstream gradient dC = dL/d(color). The sample
// positions and deltas are treated as constants (gradients flow to the field,
// not to where the samples sit).
inline void composite_backward(const RaySamples& samples, const ShadedSamples& shaded,
                               const CompositeResult& comp, const Vec3& dC,
                               std::vector<double>& dsigma, std::vector<Vec3>& dcolor) {
    size_t n = samples.t.size();
    dsigma.resize(n);
    dcolor.resize(n);
    double after = 0.0;  // sum_{j>i} w_j (dC . c_j)
    for (size_t i = n; i-- > 0;) {
        double gc = dC.dot(shaded.color[i]);
        dcolor[i] = comp.weights[i] * dC;
        dsigma[i] = samples.delta[i] * (gc * comp.trans[i + 1] - after);
        after += comp.weights[i] * gc;
    }
}

// Draws n_fine extra samples by inverse-CDF over the piecewise-constant PDF
// the coarse weights define on the uniform coarse bins (weights padded by
// 1e-5 so an all-zero vector degrades to uniform), then merges them with the
// coarse t-values. One variate per draw; the residual inside the chosen bin
// is the remapped fraction of the same variate.
inline RaySamples hierarchical_resample(const RaySamples& coarse,
                                        const std::vector<double>& weights, int n_fine,
                                        Rng& rng) {
    size_t n = coarse.t.size();
    require_domain(weights.size() == n, "hierarchical_resample: weight length mismatch");
    require_domain(n_fine >= 1, "hierarchical_resample: n_fine must be >= 1");
    std::vector<double> cdf(n);
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        require_finite(std::isfinite(weights[i]), "hierarchical_resample: non-finite weight");
        require_domain(weights[i] >= 0.0, "hierarchical_resample: negative weight");
        acc += weights[i] + 1e-5;
        cdf[i] = acc;
    }
    double width = (coarse.t_far - coarse.t_near) / static_cast<double>(n);

    RaySamples out;
    out.t_near = coarse.t_near;
    out.t_far = coarse.t_far;
    out.t = coarse.t;
    out.t.reserve(n + n_fine);
    for (int k = 0; k < n_fine; ++k) {
        double u = rng.uniform() * acc;
        size_t bin = std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
        if (bin >= n) bin = n - 1;
        double lo = bin == 0 ? 0.0 : cdf[bin - 1];
        double frac = (u - lo) / (cdf[bin] - lo);
        out.t.push_back(coarse.t_near + (static_cast<double>(bin) + frac) * width);
    }
    std::sort(out.t.begin(), out.t.end());
    detail::enforce_ascending(out.t, coarse.t_far - coarse.t_near);
    detail::fill_deltas(out);
    return out;
}

struct RenderConfig {
    int n_coarse = 64;
    int n_fine = 64;
    bool stratified = true;  // false: deterministic bin midpoints for the coarse pass
};

// Evaluates the field at every sample of every ray in one batched forward
// pass; rays must all carry the same sample count. Field is anything with a
// nested Forward type and forward(P, D, Forward&) — the MLP radiance field or
// the analytic scene stand-in.
template <typename Field>
void shade_rays(const Field& field, const std::vector<Ray>& rays,
                const std::vector<RaySamples>& samples, typename Field::Forward& fwd,
                std::vector<ShadedSamples>& shaded) {
    using S = typename Field::Scalar;
    size_t r_count = rays.size();
    size_t n = samples[0].t.size();
    for (const auto& s : samples) {
        require_domain(s.t.size() == n, "shade_rays: ragged sample counts");
    }
    MatX<S> P(3, r_count * n), D(3, r_count * n);
    for (size_t r = 0; r < r_count; ++r) {
        VecX<S> dir = rays[r].direction.cast<S>();
        VecX<S> org = rays[r].origin.cast<S>();
        for (size_t i = 0; i < n; ++i) {
            Eigen::Index col = static_cast<Eigen::Index>(r * n + i);
            P.col(col) = org + static_cast<S>(samples[r].t[i]) * dir;
            D.col(col) = dir;
        }
    }
    field.forward(P, D, fwd);
    shaded.resize(r_count);
    for (size_t r = 0; r < r_count; ++r) {
        shaded[r].sigma.resize(n);
        shaded[r].color.resize(n);
        for (size_t i = 0; i < n; ++i) {
            Eigen::Index col = static_cast<Eigen::Index>(r * n + i);
            shaded[r].sigma[i] = static_cast<double>(fwd.sigma[col]);
            shaded[r].color[i] = fwd.rgb.col(col).template cast<double>();
        }
    }
}

// Full coarse+fine render of a batch of rays, keeping every intermediate a
// later backward pass needs. rngs supplies one stream per ray so results do
// not depend on batch partitioning.
template <typename Field>
struct ChunkRender {
    std::vector<RaySamples> coarse, merged;
    std::vector<ShadedSamples> shaded_c, shaded_f;
    std::vector<CompositeResult> comp_c, comp_f;
    typename Field::Forward fwd_c, fwd_f;
};

template <typename Field>
void render_chunk(const Field& field_coarse, const Field& field_fine,
                  const std::vector<Ray>& rays, const RenderConfig& cfg, std::vector<Rng>& rngs,
                  ChunkRender<Field>& out) {
    size_t r_count = rays.size();
    require_domain(r_count >= 1 && rngs.size() == r_count, "render_chunk: ray/rng mismatch");
    out.coarse.resize(r_count);
    out.merged.resize(r_count);
    out.comp_c.resize(r_count);
    out.comp_f.resize(r_count);
    for (size_t r = 0; r < r_count; ++r) {
        out.coarse[r] = cfg.stratified
                            ? stratified_samples(rays[r].t_near, rays[r].t_far, cfg.n_coarse,
                                                 rngs[r])
                            : midpoint_samples(rays[r].t_near, rays[r].t_far, cfg.n_coarse);
    }
    shade_rays(field_coarse, rays, out.coarse, out.fwd_c, out.shaded_c);
    for (size_t r = 0; r < r_count; ++r) {
        out.comp_c[r] = composite(out.coarse[r], out.shaded_c[r]);
        out.merged[r] =
            hierarchical_resample(out.coarse[r], out.comp_c[r].weights, cfg.n_fine, rngs[r]);
    }
    shade_rays(field_fine, rays, out.merged, out.fwd_f, out.shaded_f);
    for (size_t r = 0; r < r_count; ++r) {
        out.comp_f[r] = composite(out.merged[r], out.shaded_f[r]);
    }
}

// Accumulates field-parameter gradients for upstream color gradients
// dCc, dCf (3 x R). Sample positions are fixed: no gradient flows through
// where the hierarchical resampling placed the fine samples.
template <typename S>
void render_chunk_backward(const RadianceField<S>& field_coarse,
                           const RadianceField<S>& field_fine,
                           const ChunkRender<RadianceField<S>>& r, const MatX<double>& dCc,
                           const MatX<double>& dCf, VecX<S>& grad_c, VecX<S>& grad_f) {
    size_t r_count = r.coarse.size();
    require_domain(dCc.cols() == static_cast<Eigen::Index>(r_count) && dCc.rows() == 3 &&
                       dCf.cols() == dCc.cols() && dCf.rows() == 3,
                   "render_chunk_backward: upstream shape mismatch");
    std::vector<double> dsigma;
    std::vector<Vec3> dcolor;

    auto pass = [&](const RadianceField<S>& field, const std::vector<RaySamples>& samples,
                    const std::vector<ShadedSamples>& shaded,
                    const std::vector<CompositeResult>& comp,
                    const typename RadianceField<S>::Forward& fwd, const MatX<double>& dC,
                    VecX<S>& grad) {
        size_t n = samples[0].t.size();
        VecX<S> dsig(static_cast<Eigen::Index>(r_count * n));
        MatX<S> drgb(3, static_cast<Eigen::Index>(r_count * n));
        for (size_t rr = 0; rr < r_count; ++rr) {
            composite_backward(samples[rr], shaded[rr], comp[rr], dC.col(rr), dsigma, dcolor);
            for (size_t i = 0; i < n; ++i) {
                Eigen::Index col = static_cast<Eigen::Index>(rr * n + i);
                dsig[col] = static_cast<S>(dsigma[i]);
                drgb.col(col) = dcolor[i].cast<S>();
            }
        }
        field.backward(fwd, dsig, drgb, grad);
    };
    pass(field_coarse, r.coarse, r.shaded_c, r.comp_c, r.fwd_c, dCc, grad_c);
    pass(field_fine, r.merged, r.shaded_f, r.comp_f, r.fwd_f, dCf, grad_f);
}

// Single-ray convenience wrapper; same code path as the batched version.
template <typename Field>
struct RayRender {
    Vec3 c_coarse, c_fine;
    ChunkRender<Field> chunk;
};

template <typename Field>
RayRender<Field> render_ray(const Field& field_coarse, const Field& field_fine, const Ray& ray,
                            const RenderConfig& cfg, Rng& rng) {
    RayRender<Field> out;
    std::vector<Ray> rays{ray};
    std::vector<Rng> rngs{rng};
    render_chunk(field_coarse, field_fine, rays, cfg, rngs, out.chunk);
    rng = rngs[0];  // hand the advanced stream back
    out.c_coarse = out.chunk.comp_c[0].color;
    out.c_fine = out.chunk.comp_f[0].color;
    return out;
}

}  // namespace panonerf
