#pragma once
// Scene manifest: a JSON key/value tree naming every layer's class, name,
// pose, position, z, parent and the PNG files holding its rasters.
//
//   {
//     "format": "simip-scene/1", "width": W, "height": H,
//     "background": {"image": png, "box_region": png,
//                    "affordances": {"grasp": png, "place-on": png, "obstruct": png, "hole": png}},
//     "compartments": [{"name": s, "region": png}],
//     "dictionary":   [{"class": s, "pose": s, "mask": png, "appearance": png, "affordances": {...}}],
//     "objects":      [{"id": n, "name": s, "class": s, "pose": s, "anchor": [x, y],
//                       "rotation": deg, "z": n, "parent": n|null,
//                       "mask": png, "appearance": png, "affordances": {...}}],
//     "extra": {...}   // optional, e.g. the generator's feasibility certificate
//   }
//
// Object rasters are the unrotated canonical sprite; the rotated layer is
// recomputed on load. Paths are relative to the manifest's directory.

#include <filesystem>
#include <json.hpp>

#include "simip/scene.hpp"

namespace simip {

// Writes <dir>/<name> and a rasters/ subdirectory. Returns the manifest path.
std::filesystem::path save_scene(const Scene& scene, const std::filesystem::path& dir,
                                 const nlohmann::json& extra = nullptr,
                                 const std::string& name = "scene.manifest");
Scene load_scene(const std::filesystem::path& manifest, nlohmann::json* extra = nullptr);

}  // namespace simip
