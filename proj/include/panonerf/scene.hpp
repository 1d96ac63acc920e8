#ifndef PANONERF_SCENE_HPP
#define PANONERF_SCENE_HPP

// Procedural emissive-fog scenes with piecewise-constant density and color.
// Piecewise-constant media admit exact per-segment compositing, so the same
// scene doubles as training data generator and as a rendering oracle that a
// learned field can be measured against.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "panonerf/common.hpp"
#include "panonerf/dataset.hpp"
#include "panonerf/erp.hpp"
#include "panonerf/image.hpp"
#include "panonerf/renderer.hpp"

namespace panonerf {

// A homogeneous blob: constant density, constant color -- except that boxes
// may carry a 3D checker pattern (two colors alternating per cell) to give
// reconstruction a genuinely hard high-frequency region.
struct Primitive {
    enum class Kind { kSphere, kBox };

    Kind kind = Kind::kSphere;
    Vec3 center = Vec3::Zero();   // sphere
    double radius = 1.0;          // sphere
    Vec3 box_min = Vec3::Zero();  // box
    Vec3 box_max = Vec3::Ones();  // box

    double sigma = 1.0;
    Vec3 color = Vec3::Ones();
    double checker_cell = 0.0;  // boxes: > 0 alternates color/color2 per cell
    Vec3 color2 = Vec3::Zero();

    static Primitive sphere(const Vec3& c, double r, double sig, const Vec3& col) {
        Primitive p;
        p.kind = Kind::kSphere;
        p.center = c;
        p.radius = r;
        p.sigma = sig;
        p.color = col;
        return p;
    }

    static Primitive box(const Vec3& lo, const Vec3& hi, double sig, const Vec3& col) {
        Primitive p;
        p.kind = Kind::kBox;
        p.box_min = lo;
        p.box_max = hi;
        p.sigma = sig;
        p.color = col;
        return p;
    }

    static Primitive checker_box(const Vec3& lo, const Vec3& hi, double sig, const Vec3& col_a,
                                 const Vec3& col_b, double cell) {
        Primitive p = box(lo, hi, sig, col_a);
        p.checker_cell = cell;
        p.color2 = col_b;
        return p;
    }

    double volume() const {
        if (kind == Kind::kSphere) return 4.0 / 3.0 * kPi * radius * radius * radius;
        return (box_max - box_min).prod();
    }

    bool contains(const Vec3& p) const {
        if (kind == Kind::kSphere) return (p - center).squaredNorm() <= radius * radius;
        return (p.array() >= box_min.array()).all() && (p.array() <= box_max.array()).all();
    }

    // Checker parity counts cells from the box's min corner.
    Vec3 color_at(const Vec3& p) const {
        if (kind != Kind::kBox || checker_cell <= 0.0) return color;
        long long parity = 0;
        for (int a = 0; a < 3; ++a)
            parity += static_cast<long long>(std::floor((p[a] - box_min[a]) / checker_cell));
        return (parity & 1) ? color2 : color;
    }

    // Farthest distance from the world origin to any point of the primitive.
    double extent() const {
        if (kind == Kind::kSphere) return center.norm() + radius;
        double best = 0.0;
        for (int corner = 0; corner < 8; ++corner) {
            Vec3 c;
            for (int a = 0; a < 3; ++a) c[a] = (corner >> a & 1) ? box_max[a] : box_min[a];
            best = std::max(best, c.norm());
        }
        return best;
    }

    // Entry/exit parameters of the ray against the primitive's boundary, or
    // nullopt on a miss. May extend behind the origin; callers clip.
    std::optional<std::pair<double, double>> intersect(const Vec3& o, const Vec3& d) const {
        if (kind == Kind::kSphere) {
            Vec3 oc = o - center;
            double b = oc.dot(d);
            double disc = b * b - (oc.squaredNorm() - radius * radius);
            if (disc < 0.0) return std::nullopt;
            double sq = std::sqrt(disc);
            return std::make_pair(-b - sq, -b + sq);
        }
        double t0 = -std::numeric_limits<double>::infinity();
        double t1 = std::numeric_limits<double>::infinity();
        for (int a = 0; a < 3; ++a) {
            if (d[a] == 0.0) {
                if (o[a] < box_min[a] || o[a] > box_max[a]) return std::nullopt;
                continue;
            }
            double ta = (box_min[a] - o[a]) / d[a];
            double tb = (box_max[a] - o[a]) / d[a];
            if (ta > tb) std::swap(ta, tb);
            t0 = std::max(t0, ta);
            t1 = std::min(t1, tb);
        }
        if (t0 > t1) return std::nullopt;
        return std::make_pair(t0, t1);
    }
};

struct AnalyticScene {
    std::vector<Primitive> prims;
    double ambient_sigma = 0.0;
    Vec3 ambient_color = Vec3::Zero();
    double t_far = 8.0;
    double bounding_radius = 6.0;

    void validate() const {
        require_domain(t_far > 0.0 && bounding_radius > 0.0, "scene: t_far and bounding radius must be positive");
        require_domain(bounding_radius <= t_far, "scene: bounding radius exceeds t_far");
        require_domain(ambient_sigma >= 0.0, "scene: negative ambient density");
        auto color_ok = [](const Vec3& c) { return (c.array() >= 0.0).all() && (c.array() <= 1.0).all(); };
        require_domain(color_ok(ambient_color), "scene: ambient color outside [0,1]");
        for (const Primitive& p : prims) {
            require_domain(p.sigma >= 0.0, "scene: negative primitive density");
            require_domain(color_ok(p.color) && color_ok(p.color2), "scene: primitive color outside [0,1]");
            if (p.kind == Primitive::Kind::kSphere) {
                require_domain(p.radius > 0.0, "scene: sphere radius must be positive");
            } else {
                require_domain((p.box_max.array() > p.box_min.array()).all(), "scene: degenerate box");
                require_domain(p.checker_cell >= 0.0, "scene: negative checker cell");
            }
            require_domain(p.extent() <= bounding_radius, "scene: primitive outside bounding radius");
        }
    }
};

// Density/color at a point: the innermost containing primitive wins, where
// "innermost" means smallest volume and exact ties go to the later index;
// empty space falls back to the ambient medium.
inline void scene_sample(const AnalyticScene& scene, const Vec3& p, double& sigma, Vec3& rgb) {
    require_domain(p.allFinite(), "scene_sample: non-finite position");
    int best = -1;
    double best_vol = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < scene.prims.size(); ++i) {
        if (!scene.prims[i].contains(p)) continue;
        double vol = scene.prims[i].volume();
        if (vol <= best_vol) {
            best = static_cast<int>(i);
            best_vol = vol;
        }
    }
    if (best >= 0) {
        sigma = scene.prims[best].sigma;
        rgb = scene.prims[best].color_at(p);
    } else {
        sigma = scene.ambient_sigma;
        rgb = scene.ambient_color;
    }
}

// Adapter exposing the scene through the learned-field interface so it can be
// pushed through the ray renderer unchanged (directions are ignored; the
// medium is isotropic).
class SceneField {
  public:
    using Scalar = double;
    struct Forward {
        VecX<double> sigma;
        MatX<double> rgb;
    };

    explicit SceneField(const AnalyticScene& scene) : scene_(&scene) {}

    void forward(const MatX<double>& P, const MatX<double>& D, Forward& f) const {
        require_domain(P.rows() == 3 && D.rows() == 3 && P.cols() == D.cols(),
                       "SceneField: positions/directions must be 3xN");
        Eigen::Index n = P.cols();
        f.sigma.resize(n);
        f.rgb.resize(3, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            double s;
            Vec3 c;
            scene_sample(*scene_, P.col(i), s, c);
            f.sigma[i] = s;
            f.rgb.col(i) = c;
        }
    }

  private:
    const AnalyticScene* scene_;
};

namespace detail {

// All parameters where the medium along the ray can change: primitive
// entries/exits plus, inside checkered boxes, every cell-plane crossing.
inline std::vector<double> segment_breakpoints(const AnalyticScene& scene, const Vec3& o, const Vec3& d,
                                               double t_far) {
    std::vector<double> ts;
    ts.push_back(0.0);
    ts.push_back(t_far);
    for (const Primitive& p : scene.prims) {
        auto hit = p.intersect(o, d);
        if (!hit) continue;
        double t0 = std::max(hit->first, 0.0);
        double t1 = std::min(hit->second, t_far);
        if (t0 >= t1) continue;
        ts.push_back(t0);
        ts.push_back(t1);
        if (p.kind == Primitive::Kind::kBox && p.checker_cell > 0.0) {
            for (int a = 0; a < 3; ++a) {
                if (d[a] == 0.0) continue;
                double xa = o[a] + t0 * d[a];
                double xb = o[a] + t1 * d[a];
                if (xa > xb) std::swap(xa, xb);
                // Interior cell planes strictly between the entry and exit coordinates.
                long long k_lo = static_cast<long long>(std::ceil((xa - p.box_min[a]) / p.checker_cell));
                long long k_hi = static_cast<long long>(std::floor((xb - p.box_min[a]) / p.checker_cell));
                for (long long k = k_lo; k <= k_hi; ++k) {
                    double t = (p.box_min[a] + static_cast<double>(k) * p.checker_cell - o[a]) / d[a];
                    if (t > t0 && t < t1) ts.push_back(t);
                }
            }
        }
    }
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    return ts;
}

}  // namespace detail

// Exact volume rendering of one ray: the medium is constant on each segment
// between breakpoints, so per segment alpha = 1 - exp(-sigma * len) in closed
// form and no quadrature error enters at all.
inline Vec3 oracle_trace(const AnalyticScene& scene, const Vec3& o, const Vec3& d, double t_far) {
    std::vector<double> ts = detail::segment_breakpoints(scene, o, d, t_far);
    Vec3 c_out = Vec3::Zero();
    double trans = 1.0;
    for (size_t i = 0; i + 1 < ts.size(); ++i) {
        double len = ts[i + 1] - ts[i];
        if (len <= 0.0) continue;
        double sigma;
        Vec3 rgb;
        scene_sample(scene, o + 0.5 * (ts[i] + ts[i + 1]) * d, sigma, rgb);
        double alpha = 1.0 - std::exp(-sigma * len);
        c_out += trans * alpha * rgb;
        trans *= 1.0 - alpha;
    }
    return c_out;
}

inline ErpImage oracle_render(const AnalyticScene& scene, const CameraPose& pose, int width, int height) {
    scene.validate();
    ErpImage img(width, height);
    for (int v = 0; v < height; ++v) {
        for (int u = 0; u < width; ++u) {
            Ray ray = generate_ray(pose, u, v, 0.5, 0.5, width, height, 0.0, scene.t_far);
            Vec3 c = oracle_trace(scene, ray.origin, ray.direction, scene.t_far);
            for (int ch = 0; ch < 3; ++ch) img.at(u, v, ch) = static_cast<float>(c[ch]);
        }
    }
    return img;
}

// Midpoint-rule cross-check of the oracle: N fixed bins per ray, shaded at
// bin centers and composited like the renderer would. Converges to
// oracle_render as N grows; tests assert the gap.
inline ErpImage quadrature_render(const AnalyticScene& scene, const CameraPose& pose, int width, int height,
                                  int quadrature_n) {
    scene.validate();
    require_domain(quadrature_n >= 1, "quadrature_render: need at least one bin");
    SceneField field(scene);
    ErpImage img(width, height);
    SceneField::Forward fwd;
    std::vector<ShadedSamples> shaded;
    for (int v = 0; v < height; ++v) {
        for (int u = 0; u < width; ++u) {
            Ray ray = generate_ray(pose, u, v, 0.5, 0.5, width, height, 0.0, scene.t_far);
            std::vector<RaySamples> samples(1, midpoint_samples(ray.t_near, ray.t_far, quadrature_n));
            shade_rays(field, std::vector<Ray>(1, ray), samples, fwd, shaded);
            CompositeResult comp = composite(samples[0], shaded[0]);
            for (int ch = 0; ch < 3; ++ch) img.at(u, v, ch) = static_cast<float>(comp.color[ch]);
        }
    }
    return img;
}

// ---------------------------------------------------------------------------
// Presets and dataset generation

// Handful of colored spheres around the camera region plus one checkered box
// near the equator; the box is the deliberately hard, high-frequency part.
inline AnalyticScene toy_scene() {
    AnalyticScene s;
    s.t_far = 8.0;
    s.bounding_radius = 6.0;
    s.prims.push_back(Primitive::sphere(Vec3(-2.5, 0.8, 0.2), 1.0, 3.0, Vec3(0.9, 0.25, 0.2)));
    s.prims.push_back(Primitive::sphere(Vec3(0.4, 2.6, -0.3), 0.8, 4.0, Vec3(0.2, 0.7, 0.95)));
    s.prims.push_back(Primitive::sphere(Vec3(1.1, -2.4, 0.5), 0.9, 2.5, Vec3(0.3, 0.85, 0.3)));
    s.prims.push_back(Primitive::sphere(Vec3(-1.3, -2.2, -0.6), 0.7, 5.0, Vec3(0.95, 0.8, 0.2)));
    s.prims.push_back(Primitive::sphere(Vec3(0.2, 0.1, 2.8), 1.2, 2.0, Vec3(0.7, 0.4, 0.9)));
    s.prims.push_back(Primitive::sphere(Vec3(-0.4, 0.3, -2.6), 1.1, 3.5, Vec3(0.9, 0.55, 0.15)));
    s.prims.push_back(Primitive::sphere(Vec3(3.1, 1.4, 1.0), 0.6, 6.0, Vec3(0.25, 0.3, 0.9)));
    s.prims.push_back(Primitive::checker_box(Vec3(1.6, -0.8, -0.8), Vec3(3.2, 0.8, 0.8), 4.0,
                                             Vec3(0.95, 0.95, 0.95), Vec3(0.08, 0.08, 0.08), 0.2));
    return s;
}

// Empty (black) scene except one checkered box: the image is flat everywhere
// but one textured region, which is what the content-aware sampler should
// learn to concentrate on.
inline AnalyticScene flat_scene() {
    AnalyticScene s;
    s.t_far = 8.0;
    s.bounding_radius = 6.0;
    s.prims.push_back(Primitive::checker_box(Vec3(1.2, -1.0, -1.0), Vec3(3.2, 1.0, 1.0), 8.0,
                                             Vec3(0.95, 0.95, 0.95), Vec3(0.05, 0.05, 0.05), 0.25));
    return s;
}

// Cameras on a small circle near the origin (identity rotations, ERP covers
// the full sphere anyway), height jittered per seed so datasets differ across
// seeds but are bit-reproducible for a fixed one.
inline std::vector<CameraPose> make_poses(int count, double circle_radius, double phase, Rng& rng) {
    std::vector<CameraPose> poses(count);
    for (int i = 0; i < count; ++i) {
        double ang = 2.0 * kPi * i / std::max(count, 1) + phase;
        poses[i].position =
            Vec3(circle_radius * std::cos(ang), circle_radius * std::sin(ang), rng.uniform(-0.15, 0.15));
        poses[i].rotation = Mat3::Identity();
    }
    return poses;
}

inline Dataset gen_dataset(const AnalyticScene& scene, int n_train, int n_test, int width, int height,
                           uint64_t seed, const std::string& out_dir) {
    scene.validate();
    require_domain(n_train >= 1 && n_test >= 1, "gen_dataset: need at least one pose per role");
    Rng rng(mix_seed(seed, 0x706f736573ULL));
    std::vector<CameraPose> train = make_poses(n_train, 0.5, 0.0, rng);
    std::vector<CameraPose> test = make_poses(n_test, 0.35, kPi / std::max(n_test, 1), rng);

    Dataset ds;
    auto add = [&](const CameraPose& pose, const std::string& role) {
        PoseEntry e;
        e.role = role;
        e.position = pose.position;
        e.rotation = pose.rotation;
        e.width = width;
        e.height = height;
        e.t_far = scene.t_far;
        ds.poses.push_back(e);
        ds.images.push_back(oracle_render(scene, pose, width, height));
    };
    for (const CameraPose& p : train) add(p, "train");
    for (const CameraPose& p : test) add(p, "test");
    save_dataset(out_dir, ds.images, ds.poses);
    return ds;
}

}  // namespace panonerf

#endif  // PANONERF_SCENE_HPP
