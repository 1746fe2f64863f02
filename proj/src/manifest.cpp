#include "simip/manifest.hpp"

#include <fstream>

#include "simip/errors.hpp"
#include "simip/png_io.hpp"

namespace simip {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json write_affordances(const AffordanceMap& a, const fs::path& root, const std::string& stem) {
    json j = json::object();
    for (Affordance af : kAllAffordances) {
        std::string rel = "rasters/" + stem + "_" + std::string(to_string(af)) + ".png";
        write_png(root / rel, a[af]);
        j[std::string(to_string(af))] = rel;
    }
    return j;
}

AffordanceMap read_affordances(const json& j, const fs::path& root) {
    AffordanceMap a;
    for (Affordance af : kAllAffordances) a[af] = read_mask_png(root / j.at(std::string(to_string(af))).get<std::string>());
    return a;
}

json write_sprite(json j, const Sprite& s, const fs::path& root, const std::string& stem) {
    j["mask"] = "rasters/" + stem + "_mask.png";
    j["appearance"] = "rasters/" + stem + "_appearance.png";
    write_png(root / j["mask"].get<std::string>(), s.mask);
    write_png(root / j["appearance"].get<std::string>(), s.appearance);
    j["affordances"] = write_affordances(s.affordances, root, stem);
    return j;
}

SpritePtr read_sprite(const json& j, const fs::path& root) {
    auto s = std::make_shared<Sprite>();
    s->mask = read_mask_png(root / j.at("mask").get<std::string>());
    s->appearance = read_image_png(root / j.at("appearance").get<std::string>());
    s->affordances = read_affordances(j.at("affordances"), root);
    s->check(true);
    return s;
}

}  // namespace

fs::path save_scene(const Scene& scene, const fs::path& dir, const json& extra, const std::string& name) {
    std::error_code ec;
    fs::create_directories(dir / "rasters", ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create " + (dir / "rasters").string());
    const Backdrop& b = *scene.backdrop;
    json j;
    j["format"] = "simip-scene/1";
    j["width"] = b.width;
    j["height"] = b.height;
    write_png(dir / "rasters/background.png", b.image);
    write_png(dir / "rasters/box_region.png", b.box_region);
    j["background"] = {{"image", "rasters/background.png"},
                       {"box_region", "rasters/box_region.png"},
                       {"affordances", write_affordances(b.affordances, dir, "background")}};
    j["compartments"] = json::array();
    for (const auto& c : b.compartments) {
        std::string rel = "rasters/" + c.name + ".png";
        write_png(dir / rel, c.region);
        j["compartments"].push_back({{"name", c.name}, {"region", rel}});
    }
    j["dictionary"] = json::array();
    if (scene.dictionary)
        for (const auto& [key, sprite] : scene.dictionary->entries()) {
            std::string stem = "dict_" + std::string(to_string(key.first)) + "_" + std::string(to_string(key.second));
            json e = {{"class", to_string(key.first)}, {"pose", to_string(key.second)}};
            j["dictionary"].push_back(write_sprite(e, *sprite, dir, stem));
        }
    j["objects"] = json::array();
    for (const auto& o : scene.objects) {
        json e = {{"id", o.id},
                  {"name", o.name},
                  {"class", to_string(o.label)},
                  {"pose", to_string(o.pose)},
                  {"anchor", {o.anchor.x, o.anchor.y}},
                  {"rotation", o.rotation},
                  {"z", o.z},
                  {"parent", o.parent ? json(*o.parent) : json(nullptr)}};
        j["objects"].push_back(write_sprite(e, *o.canonical, dir, "obj" + std::to_string(o.id)));
    }
    if (!extra.is_null()) j["extra"] = extra;
    fs::path out = dir / name;
    std::ofstream f(out);
    if (!f) throw Error(ErrorKind::Io, "cannot write " + out.string());
    f << j.dump(2) << '\n';
    if (!f) throw Error(ErrorKind::Io, "failed writing " + out.string());
    return out;
}

Scene load_scene(const fs::path& manifest, json* extra) {
    std::ifstream f(manifest);
    if (!f) throw Error(ErrorKind::Io, "cannot open " + manifest.string());
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Io, "malformed manifest " + manifest.string() + ": " + e.what());
    }
    const fs::path root = manifest.parent_path();
    try {
        auto b = std::make_shared<Backdrop>();
        b->width = j.at("width").get<int>();
        b->height = j.at("height").get<int>();
        const json& bg = j.at("background");
        b->image = read_image_png(root / bg.at("image").get<std::string>());
        b->box_region = read_mask_png(root / bg.at("box_region").get<std::string>());
        b->affordances = read_affordances(bg.at("affordances"), root);
        for (const auto& c : j.at("compartments")) {
            Compartment comp;
            comp.name = c.at("name").get<std::string>();
            comp.region = read_mask_png(root / c.at("region").get<std::string>());
            comp.bbox = comp.region.bounds();
            b->compartments.push_back(std::move(comp));
        }
        auto dict = std::make_shared<PoseDictionary>();
        for (const auto& e : j.at("dictionary"))
            dict->insert(parse_class(e.at("class").get<std::string>()), parse_pose(e.at("pose").get<std::string>()),
                         read_sprite(e, root));
        Scene s;
        s.backdrop = std::move(b);
        s.dictionary = std::move(dict);
        for (const auto& e : j.at("objects")) {
            ObjectInstance o;
            o.id = e.at("id").get<int>();
            o.name = e.at("name").get<std::string>();
            o.label = parse_class(e.at("class").get<std::string>());
            o.pose = parse_pose(e.at("pose").get<std::string>());
            o.anchor = {e.at("anchor").at(0).get<int>(), e.at("anchor").at(1).get<int>()};
            o.rotation = e.at("rotation").get<int>();
            o.z = e.at("z").get<int>();
            if (!e.at("parent").is_null()) o.parent = e.at("parent").get<int>();
            o.canonical = read_sprite(e, root);
            refresh(o);
            s.objects.push_back(std::move(o));
        }
        check_scene(s);
        if (extra) *extra = j.contains("extra") ? j["extra"] : json(nullptr);
        return s;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Io, "malformed manifest " + manifest.string() + ": " + e.what());
    }
}

}  // namespace simip
