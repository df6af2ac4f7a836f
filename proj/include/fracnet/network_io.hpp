#pragma once

#include "fracnet/dfn.hpp"

#include <filesystem>
#include <string>

namespace fracnet {

inline constexpr const char* kNetworkSchema = "fracnet-network/1";

/// JSON document for a network. Derived geometric features are not stored;
/// they are recomputed on load.
std::string network_to_json(const FractureNetwork& network);
FractureNetwork network_from_json(const std::string& text);

void write_network(const FractureNetwork& network, const std::filesystem::path& path);
FractureNetwork read_network(const std::filesystem::path& path);

} // namespace fracnet
