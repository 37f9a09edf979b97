#include "compot/manifest.hpp"

#include <fstream>

namespace compot {

using nlohmann::json;

Manifest Manifest::read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed manifest: ") + e.what());
    }
    Manifest m;
    if (!j.is_object() || !j.contains("layers") || !j["layers"].is_array())
        throw ConfigError("manifest must contain a \"layers\" array");
    for (const auto& l : j["layers"]) {
        ManifestLayer layer;
        if (!l.contains("weight") || !l["weight"].is_string())
            throw ConfigError("manifest layer missing \"weight\"");
        layer.weight = l["weight"].get<std::string>();
        if (l.contains("gram") && !l["gram"].is_null())
            layer.gram = l["gram"].get<std::string>();
        if (l.contains("group") && !l["group"].is_null())
            layer.group = l["group"].get<std::string>();
        if (l.contains("orientation") && !l["orientation"].is_null())
            layer.orientation = orientation_from_string(l["orientation"].get<std::string>());
        m.layers.push_back(std::move(layer));
    }
    if (j.contains("config")) m.config = j["config"];
    return m;
}

void Manifest::write(const std::string& path) const {
    json j;
    j["layers"] = json::array();
    for (const auto& l : layers) {
        json e;
        e["weight"] = l.weight;
        e["gram"] = l.gram ? json(*l.gram) : json(nullptr);
        e["group"] = l.group ? json(*l.group) : json(nullptr);
        if (l.orientation != Orientation::InputByOutput)
            e["orientation"] = to_string(l.orientation);
        j["layers"].push_back(std::move(e));
    }
    j["config"] = config;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write manifest: " + path);
    out << j.dump(2) << "\n";
}

std::string Manifest::gram_name_for(const ManifestLayer& layer) {
    return layer.gram ? *layer.gram : layer.weight + "/gram";
}

}  // namespace compot
