#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "semand/geometry.hpp"
#include "semand/tilemath.hpp"

namespace semand::testing {

inline nlohmann::json load_json(const std::string& name)
{
    std::ifstream in(std::filesystem::path(SEMAND_TEST_DATA) / name);
    return nlohmann::json::parse(in);
}

/// Axis-aligned rectangle polygon, counter-clockwise, closed.
inline Polygon rect(double lon0, double lat0, double lon1, double lat1, std::string id = "r")
{
    return Polygon{std::move(id), {{lon0, lat0}, {lon1, lat0}, {lon1, lat1}, {lon0, lat1}, {lon0, lat0}}};
}

/// Rectangle given in fractions of a tile's extent (0,0 = south-west corner).
inline Polygon tile_rect(const TileKey& t, double fx0, double fy0, double fx1, double fy1, std::string id = "r")
{
    const auto b = tile_bounds(t);
    const double w = b.lon_max - b.lon_min, h = b.lat_max - b.lat_min;
    return rect(b.lon_min + fx0 * w, b.lat_min + fy0 * h, b.lon_min + fx1 * w, b.lat_min + fy1 * h, std::move(id));
}

inline TileKey desk_tile() { return lonlat_to_tile(103.8525, 1.2905, 20); }

/// Fresh temporary directory removed on destruction.
struct TempDir {
    std::filesystem::path path;
    TempDir()
    {
        std::random_device rd;
        path = std::filesystem::temp_directory_path() / ("semand_test_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

} // namespace semand::testing
