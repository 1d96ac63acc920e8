#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "panonerf/erp.hpp"
#include "panonerf/image.hpp"
#include "panonerf/png_io.hpp"

namespace panonerf {

// One camera of the dataset. `file` is relative to the dataset directory;
// rotation serializes row-major.
struct PoseEntry {
    std::string file;
    std::string role;  // "train" or "test"
    Vec3 position = Vec3::Zero();
    Mat3 rotation = Mat3::Identity();
    int width = 0;
    int height = 0;
    double t_far = 0.0;
};

struct Dataset {
    std::vector<ErpImage> images;  // parallel to poses
    std::vector<PoseEntry> poses;
};

namespace detail {

inline void check_keys(const nlohmann::json& obj, const std::vector<std::string>& allowed,
                       const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const auto& k : allowed) ok = ok || it.key() == k;
        require_data(ok, "manifest: unknown key '" + it.key() + "' in " + where);
    }
}

}  // namespace detail

inline void save_manifest(const std::string& path, const std::vector<PoseEntry>& entries) {
    nlohmann::json root;
    root["entries"] = nlohmann::json::array();
    for (const auto& e : entries) {
        nlohmann::json j;
        j["file"] = e.file;
        j["role"] = e.role;
        j["position"] = {e.position[0], e.position[1], e.position[2]};
        std::vector<double> rot(9);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) rot[3 * r + c] = e.rotation(r, c);
        j["rotation"] = rot;
        j["width"] = e.width;
        j["height"] = e.height;
        j["t_far"] = e.t_far;
        root["entries"].push_back(std::move(j));
    }
    std::ofstream out(path, std::ios::binary);
    require_data(out.is_open(), "save_manifest: cannot open " + path);
    out << root.dump(2) << '\n';
}

inline std::vector<PoseEntry> load_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require_data(in.is_open(), "load_manifest: cannot open " + path);
    nlohmann::json root;
    try {
        in >> root;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("load_manifest: malformed JSON in " + path + ": " + e.what());
    }
    require_data(root.is_object(), "load_manifest: top level must be an object");
    detail::check_keys(root, {"entries"}, "manifest root");
    require_data(root.contains("entries") && root["entries"].is_array(),
                 "load_manifest: missing 'entries' array");

    std::vector<PoseEntry> entries;
    bool has_train = false, has_test = false;
    for (const auto& j : root["entries"]) {
        require_data(j.is_object(), "manifest: entry is not an object");
        detail::check_keys(
            j, {"file", "role", "position", "rotation", "width", "height", "t_far"}, "entry");
        for (const char* key :
             {"file", "role", "position", "rotation", "width", "height", "t_far"}) {
            require_data(j.contains(key), std::string("manifest: entry missing '") + key + "'");
        }
        PoseEntry e;
        e.file = j["file"].get<std::string>();
        e.role = j["role"].get<std::string>();
        require_data(e.role == "train" || e.role == "test",
                     "manifest: bad role '" + e.role + "' for " + e.file);
        auto pos = j["position"];
        require_data(pos.is_array() && pos.size() == 3,
                     "manifest: position must have 3 entries for " + e.file);
        for (int i = 0; i < 3; ++i) e.position[i] = pos[i].get<double>();
        auto rot = j["rotation"];
        require_data(rot.is_array() && rot.size() == 9,
                     "manifest: rotation must have 9 entries for " + e.file);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) e.rotation(r, c) = rot[3 * r + c].get<double>();
        CameraPose pose{e.position, e.rotation};
        require_data(pose.valid(1e-6), "manifest: rotation not orthonormal for " + e.file);
        e.width = j["width"].get<int>();
        e.height = j["height"].get<int>();
        e.t_far = j["t_far"].get<double>();
        require_data(e.width >= 1 && e.height >= 1, "manifest: bad dims for " + e.file);
        require_data(e.t_far > 0.0, "manifest: t_far must be positive for " + e.file);
        has_train = has_train || e.role == "train";
        has_test = has_test || e.role == "test";
        entries.push_back(std::move(e));
    }
    require_data(has_train, "manifest: no train entries");
    require_data(has_test, "manifest: no test entries");
    return entries;
}

// Writes images/ + manifest under dir. Entry file paths are assigned here.
// Writes images/ PNGs and poses.json; assigns each entry's file name by role
// and order (images/train_000.png, ...), overwriting whatever was there.
inline void save_dataset(const std::string& dir, const std::vector<ErpImage>& images,
                         std::vector<PoseEntry>& poses) {
    require_data(images.size() == poses.size(), "save_dataset: image/pose count mismatch");
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "images");
    int train_i = 0, test_i = 0;
    for (size_t i = 0; i < images.size(); ++i) {
        char name[64];
        if (poses[i].role == "train") {
            std::snprintf(name, sizeof(name), "images/train_%03d.png", train_i++);
        } else {
            std::snprintf(name, sizeof(name), "images/test_%03d.png", test_i++);
        }
        poses[i].file = name;
        write_png_rgb8((fs::path(dir) / name).string(), images[i]);
    }
    save_manifest((fs::path(dir) / "poses.json").string(), poses);
}

inline Dataset load_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    Dataset ds;
    ds.poses = load_manifest((fs::path(dir) / "poses.json").string());
    for (const auto& e : ds.poses) {
        fs::path img_path = fs::path(dir) / e.file;
        require_data(fs::exists(img_path), "load_dataset: missing image " + e.file);
        ErpImage img = read_png_rgb(img_path.string());
        require_data(img.width == e.width && img.height == e.height,
                     "load_dataset: image dims disagree with manifest for " + e.file);
        ds.images.push_back(std::move(img));
    }
    return ds;
}

}  // namespace panonerf
