#pragma once

#include <vector>

#include "panonerf/common.hpp"

namespace panonerf {

// Latitude/longitude on the unit sphere. theta in [-pi/2, pi/2] with +pi/2 at
// the top image row, phi in [-pi, pi) with -pi at column 0.
struct SphericalCoord {
    double theta = 0.0;
    double phi = 0.0;
};

struct CameraPose {
    Vec3 position = Vec3::Zero();
    Mat3 rotation = Mat3::Identity();  // world-from-camera

    bool valid(double tol = 1e-9) const {
        Mat3 err = rotation.transpose() * rotation - Mat3::Identity();
        return err.cwiseAbs().maxCoeff() <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
    }
};

struct Ray {
    Vec3 origin = Vec3::Zero();
    Vec3 direction = Vec3::UnitX();
    double t_near = 0.0;
    double t_far = 1.0;
};

// (u, v) are pixel coordinates including any fractional offset; pixel centers
// sit at integer + 0.5. Row v = 0 touches theta = +pi/2.
inline SphericalCoord pixel_to_spherical(double u, double v, int width, int height) {
    require_domain(width >= 1 && height >= 1, "pixel_to_spherical: empty image");
    require_domain(u >= 0.0 && u < width, "pixel_to_spherical: u out of [0, W)");
    require_domain(v >= 0.0 && v < height, "pixel_to_spherical: v out of [0, H)");
    SphericalCoord s;
    s.theta = kPi / 2.0 - kPi * v / height;
    s.phi = kTwoPi * u / width - kPi;
    return s;
}

inline void spherical_to_pixel(const SphericalCoord& s, int width, int height, double& u, double& v) {
    require_domain(s.theta >= -kPi / 2.0 && s.theta <= kPi / 2.0, "spherical_to_pixel: theta out of range");
    require_domain(s.phi >= -kPi && s.phi < kPi, "spherical_to_pixel: phi out of range");
    u = (s.phi + kPi) * width / kTwoPi;
    v = (kPi / 2.0 - s.theta) * height / kPi;
}

// z-up right-handed frame: theta = +pi/2 maps to +z, (theta, phi) = (0, 0) to +x.
inline Vec3 spherical_to_direction(const SphericalCoord& s) {
    double ct = std::cos(s.theta);
    return Vec3(ct * std::cos(s.phi), ct * std::sin(s.phi), std::sin(s.theta));
}

inline SphericalCoord direction_to_spherical(const Vec3& d) {
    SphericalCoord s;
    s.theta = std::asin(std::clamp(d.z() / d.norm(), -1.0, 1.0));
    s.phi = std::atan2(d.y(), d.x());
    if (s.phi >= kPi) s.phi -= kTwoPi;
    return s;
}

// Area of one pixel of row v on the unit sphere: (phi2-phi1)(sin theta2 - sin theta1)
// with pixel-edge latitude bounds. Column-independent. Southern rows reuse the
// mirrored northern row so symmetric pairs are bitwise equal.
inline double pixel_solid_angle(int v, int width, int height) {
    require_domain(width >= 1 && height >= 1, "pixel_solid_angle: empty image");
    require_domain(v >= 0 && v < height, "pixel_solid_angle: row out of range");
    int vm = std::min(v, height - 1 - v);
    double theta_hi = kPi / 2.0 - kPi * vm / height;
    double theta_lo = kPi / 2.0 - kPi * (vm + 1) / height;
    return (kTwoPi / width) * (std::sin(theta_hi) - std::sin(theta_lo));
}

// Per-row solid angles for a W x H image, computed once.
inline std::vector<double> solid_angle_rows(int width, int height) {
    std::vector<double> rows(static_cast<size_t>(height));
    for (int v = 0; v < height; ++v) rows[static_cast<size_t>(v)] = pixel_solid_angle(v, width, height);
    return rows;
}

// Ray through pixel (u, v) displaced by jitter in [0,1)^2; jitter (0.5, 0.5)
// is the pixel center.
inline Ray generate_ray(const CameraPose& pose, int u, int v, double jitter_u, double jitter_v,
                        int width, int height, double t_near, double t_far) {
    require_domain(jitter_u >= 0.0 && jitter_u < 1.0 && jitter_v >= 0.0 && jitter_v < 1.0,
                   "generate_ray: jitter out of [0,1)");
    require_domain(t_near >= 0.0 && t_far > t_near, "generate_ray: invalid [t_near, t_far]");
    if (!pose.valid()) throw InputDomainError("generate_ray: rotation is not special orthogonal");
    SphericalCoord s = pixel_to_spherical(u + jitter_u, v + jitter_v, width, height);
    Ray ray;
    ray.origin = pose.position;
    ray.direction = pose.rotation * spherical_to_direction(s);
    ray.t_near = t_near;
    ray.t_far = t_far;
    return ray;
}

}  // namespace panonerf
