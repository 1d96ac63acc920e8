#ifndef PANONERF_CONFIG_HPP
#define PANONERF_CONFIG_HPP

// Flat run configuration: one key per knob, every key defaulted, unknown keys
// rejected so typos never pass silently. The effective config is echoed into
// each run directory for reproducibility.

#include <cstdint>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "panonerf/common.hpp"
#include "panonerf/field.hpp"
#include "panonerf/renderer.hpp"

namespace panonerf {

struct RunConfig {
    // training loop
    int iters = 5000;
    int rays = 2048;  // per iteration
    double lr_start = 5e-4;
    double lr_end = 5e-5;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-7;
    bool distortion_on = true;
    bool content_on = true;
    double content_floor = 1e-4;
    uint64_t seed = 0;
    int eval_every = 500;

    // ray rendering
    int n_coarse = 64;
    int n_fine = 64;
    bool stratified = true;

    // radiance field architecture
    int trunk_depth = 4;
    int trunk_width = 64;
    int color_hidden = 32;
    int pos_octaves = 6;
    int dir_octaves = 2;
    double density_scale = 1.0;
    double pos_scale = 1.0;

    // metrics
    int crop_size = 60;
    int crop_stride = 10;

    bool operator==(const RunConfig&) const = default;

    void validate() const {
        require_data(iters >= 0, "config: iters must be >= 0");
        require_data(rays >= 1, "config: rays must be >= 1");
        require_data(lr_start >= lr_end && lr_end > 0.0, "config: need lr_start >= lr_end > 0");
        require_data(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0,
                     "config: adam betas must lie in [0,1)");
        require_data(adam_eps > 0.0, "config: adam_eps must be positive");
        require_data(content_floor > 0.0, "config: content_floor must be positive");
        require_data(eval_every >= 1, "config: eval_every must be >= 1");
        require_data(n_coarse >= 1 && n_fine >= 1, "config: sample counts must be >= 1");
        require_data(trunk_depth >= 1 && trunk_width >= 1 && color_hidden >= 1,
                     "config: field dims must be >= 1");
        require_data(pos_octaves >= 0 && dir_octaves >= 0, "config: octaves must be >= 0");
        require_data(density_scale > 0.0 && pos_scale > 0.0, "config: scales must be positive");
        require_data(crop_size >= 1 && crop_stride >= 1, "config: crop knobs must be >= 1");
    }

    RenderConfig render() const { return RenderConfig{n_coarse, n_fine, stratified}; }

    FieldConfig field() const {
        FieldConfig f;
        f.trunk_depth = trunk_depth;
        f.trunk_width = trunk_width;
        f.color_hidden = color_hidden;
        f.pos_enc = EncodingConfig{pos_octaves, true};
        f.dir_enc = EncodingConfig{dir_octaves, true};
        f.density_scale = density_scale;
        f.pos_scale = pos_scale;
        return f;
    }
};

namespace detail {

template <typename T>
void take_key(const nlohmann::json& j, const char* key, T& into) {
    if (auto it = j.find(key); it != j.end()) into = it->get<T>();
}

}  // namespace detail

inline nlohmann::json run_config_to_json(const RunConfig& c) {
    return nlohmann::json{{"iters", c.iters},
                          {"rays", c.rays},
                          {"lr_start", c.lr_start},
                          {"lr_end", c.lr_end},
                          {"adam_beta1", c.adam_beta1},
                          {"adam_beta2", c.adam_beta2},
                          {"adam_eps", c.adam_eps},
                          {"distortion_on", c.distortion_on},
                          {"content_on", c.content_on},
                          {"content_floor", c.content_floor},
                          {"seed", c.seed},
                          {"eval_every", c.eval_every},
                          {"n_coarse", c.n_coarse},
                          {"n_fine", c.n_fine},
                          {"stratified", c.stratified},
                          {"trunk_depth", c.trunk_depth},
                          {"trunk_width", c.trunk_width},
                          {"color_hidden", c.color_hidden},
                          {"pos_octaves", c.pos_octaves},
                          {"dir_octaves", c.dir_octaves},
                          {"density_scale", c.density_scale},
                          {"pos_scale", c.pos_scale},
                          {"crop_size", c.crop_size},
                          {"crop_stride", c.crop_stride}};
}

// Missing keys keep their defaults; unknown keys are an error.
inline RunConfig run_config_from_json(const nlohmann::json& j) {
    require_data(j.is_object(), "config: expected a JSON object");
    RunConfig defaults;
    nlohmann::json known = run_config_to_json(defaults);
    for (auto it = j.begin(); it != j.end(); ++it)
        require_data(known.contains(it.key()), "config: unknown key '" + it.key() + "'");
    RunConfig c;
    try {
        detail::take_key(j, "iters", c.iters);
        detail::take_key(j, "rays", c.rays);
        detail::take_key(j, "lr_start", c.lr_start);
        detail::take_key(j, "lr_end", c.lr_end);
        detail::take_key(j, "adam_beta1", c.adam_beta1);
        detail::take_key(j, "adam_beta2", c.adam_beta2);
        detail::take_key(j, "adam_eps", c.adam_eps);
        detail::take_key(j, "distortion_on", c.distortion_on);
        detail::take_key(j, "content_on", c.content_on);
        detail::take_key(j, "content_floor", c.content_floor);
        detail::take_key(j, "seed", c.seed);
        detail::take_key(j, "eval_every", c.eval_every);
        detail::take_key(j, "n_coarse", c.n_coarse);
        detail::take_key(j, "n_fine", c.n_fine);
        detail::take_key(j, "stratified", c.stratified);
        detail::take_key(j, "trunk_depth", c.trunk_depth);
        detail::take_key(j, "trunk_width", c.trunk_width);
        detail::take_key(j, "color_hidden", c.color_hidden);
        detail::take_key(j, "pos_octaves", c.pos_octaves);
        detail::take_key(j, "dir_octaves", c.dir_octaves);
        detail::take_key(j, "density_scale", c.density_scale);
        detail::take_key(j, "pos_scale", c.pos_scale);
        detail::take_key(j, "crop_size", c.crop_size);
        detail::take_key(j, "crop_stride", c.crop_stride);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

inline void save_run_config(const std::string& path, const RunConfig& c) {
    std::ofstream out(path, std::ios::binary);
    require_data(out.good(), "config: cannot open " + path + " for writing");
    out << run_config_to_json(c).dump(2) << "\n";
    require_data(out.good(), "config: write failed for " + path);
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require_data(in.good(), "config: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("config: malformed JSON in ") + path + ": " + e.what());
    }
    return run_config_from_json(j);
}

}  // namespace panonerf

#endif  // PANONERF_CONFIG_HPP
