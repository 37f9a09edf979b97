#pragma once

#include "compot/types.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace compot {

// One compressible layer: its weight tensor, the calibration Gram tensor
// backing it (absent means identity whitening), and an optional allocation
// group tag.
struct ManifestLayer {
    std::string weight;
    std::optional<std::string> gram;
    std::optional<std::string> group;
    Orientation orientation = Orientation::InputByOutput;
};

struct Manifest {
    std::vector<ManifestLayer> layers;
    nlohmann::json config = nlohmann::json::object();

    static Manifest read(const std::string& path);
    void write(const std::string& path) const;

    // Default Gram tensor name for a layer ("<weight>/gram" unless overridden).
    static std::string gram_name_for(const ManifestLayer& layer);
};

}  // namespace compot
