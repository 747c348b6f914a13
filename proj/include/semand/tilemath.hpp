#pragma once

// Spherical-Mercator XYZ tile arithmetic. Origin is the top-left corner of the
// world: x grows east, y grows south.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "semand/errors.hpp"

namespace semand {

inline constexpr double kMaxLatitude = 85.05112878;
inline constexpr int kMaxZoom = 30;

struct TileKey {
    int zoom = 0;
    std::int64_t x = 0;
    std::int64_t y = 0;

    friend bool operator==(const TileKey&, const TileKey&) = default;
    friend auto operator<=>(const TileKey&, const TileKey&) = default;

    std::int64_t extent() const { return std::int64_t{1} << zoom; }

    bool valid() const { return zoom >= 0 && zoom <= kMaxZoom && x >= 0 && y >= 0 && x < extent() && y < extent(); }

    /// "z/x/y"
    std::string str() const
    {
        return std::to_string(zoom) + "/" + std::to_string(x) + "/" + std::to_string(y);
    }

    static TileKey parse(std::string_view text)
    {
        TileKey key;
        const auto a = text.find('/');
        const auto b = a == std::string_view::npos ? a : text.find('/', a + 1);
        if (b == std::string_view::npos) throw DataError("malformed tile key '" + std::string(text) + "'");
        try {
            key.zoom = std::stoi(std::string(text.substr(0, a)));
            key.x = std::stoll(std::string(text.substr(a + 1, b - a - 1)));
            key.y = std::stoll(std::string(text.substr(b + 1)));
        } catch (const std::exception&) {
            throw DataError("malformed tile key '" + std::string(text) + "'");
        }
        if (!key.valid()) throw DataError("tile key out of range '" + std::string(text) + "'");
        return key;
    }
};

struct LonLatBox {
    double lon_min = 0, lat_min = 0, lon_max = 0, lat_max = 0;
};

namespace detail {

inline void check_lonlat(double lon, double lat)
{
    if (!(lon >= -180.0 && lon <= 180.0)) throw DomainError("longitude outside [-180, 180]: " + std::to_string(lon));
    if (!(std::abs(lat) <= kMaxLatitude)) throw DomainError("latitude outside Mercator limit: " + std::to_string(lat));
}

// World-normalized Mercator coordinates in [0, 1]. Scaling by 2^zoom afterwards
// is exact, which keeps every zoom level bit-consistent with every other.
inline double world_u(double lon) { return (lon + 180.0) / 360.0; }

inline double world_v(double lat)
{
    const double phi = std::clamp(lat, -kMaxLatitude, kMaxLatitude) * std::numbers::pi / 180.0;
    return (1.0 - std::asinh(std::tan(phi)) / std::numbers::pi) / 2.0;
}

inline double lat_of_v(double v) { return std::atan(std::sinh(std::numbers::pi * (1.0 - 2.0 * v))) * 180.0 / std::numbers::pi; }

inline std::int64_t clamp_index(double f, std::int64_t n)
{
    const auto i = static_cast<std::int64_t>(std::floor(f));
    return std::clamp<std::int64_t>(i, 0, n - 1);
}

} // namespace detail

inline TileKey lonlat_to_tile(double lon, double lat, int zoom)
{
    if (zoom < 0 || zoom > kMaxZoom) throw DomainError("zoom outside [0, 30]");
    detail::check_lonlat(lon, lat);
    const double scale = std::ldexp(1.0, zoom);
    const std::int64_t n = std::int64_t{1} << zoom;
    return TileKey{zoom, detail::clamp_index(detail::world_u(lon) * scale, n),
                   detail::clamp_index(detail::world_v(lat) * scale, n)};
}

inline LonLatBox tile_bounds(const TileKey& t)
{
    if (!t.valid()) throw DomainError("invalid tile key " + t.str());
    const double n = std::ldexp(1.0, t.zoom);
    LonLatBox b;
    b.lon_min = static_cast<double>(t.x) / n * 360.0 - 180.0;
    b.lon_max = static_cast<double>(t.x + 1) / n * 360.0 - 180.0;
    b.lat_max = detail::lat_of_v(static_cast<double>(t.y) / n);
    b.lat_min = detail::lat_of_v(static_cast<double>(t.y + 1) / n);
    return b;
}

/// Raster lattice over one tile. With size = 2^k each pixel is exactly one
/// zoom-(tile.zoom + k) subtile; the default 18/256 grid has zoom-26 pixels.
struct PixelGrid {
    TileKey tile{18, 0, 0};
    int size = 256;

    friend bool operator==(const PixelGrid&, const PixelGrid&) = default;

    std::size_t pixel_count() const { return static_cast<std::size_t>(size) * static_cast<std::size_t>(size); }
};

struct Pixel {
    int row = 0;
    int col = 0;
    friend bool operator==(const Pixel&, const Pixel&) = default;
};

/// Pixel containing (lon, lat), or nullopt when the point lies outside the
/// grid's tile (or outside the projectable domain).
inline std::optional<Pixel> lonlat_to_pixel(const PixelGrid& grid, double lon, double lat)
{
    if (!(lon >= -180.0 && lon <= 180.0) || !(std::abs(lat) <= kMaxLatitude)) return std::nullopt;
    const auto& t = grid.tile;
    const double scale = std::ldexp(1.0, t.zoom);
    const std::int64_t n = t.extent();
    const double fx = detail::world_u(lon) * scale;
    const double fy = detail::world_v(lat) * scale;
    if (detail::clamp_index(fx, n) != t.x || detail::clamp_index(fy, n) != t.y) return std::nullopt;
    const auto sz = static_cast<std::int64_t>(grid.size);
    // fx - x is exact for fx in [x, x + 1); the clamp only matters on the
    // global east/south boundary.
    const auto col = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor((fx - static_cast<double>(t.x)) * grid.size)), 0, sz - 1);
    const auto row = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor((fy - static_cast<double>(t.y)) * grid.size)), 0, sz - 1);
    return Pixel{static_cast<int>(row), static_cast<int>(col)};
}

/// Longitude at fractional column position `col` (0 = west edge, size = east edge).
inline double grid_lon(const PixelGrid& grid, double col)
{
    const double n = std::ldexp(1.0, grid.tile.zoom);
    return (static_cast<double>(grid.tile.x) + col / grid.size) / n * 360.0 - 180.0;
}

/// Latitude at fractional row position `row` (0 = north edge, size = south edge).
inline double grid_lat(const PixelGrid& grid, double row)
{
    const double n = std::ldexp(1.0, grid.tile.zoom);
    return detail::lat_of_v((static_cast<double>(grid.tile.y) + row / grid.size) / n);
}

/// Fractional (row, col) of a point in grid coordinates; may fall outside [0, size).
inline std::pair<double, double> lonlat_to_grid_coords(const PixelGrid& grid, double lon, double lat)
{
    const double scale = std::ldexp(1.0, grid.tile.zoom);
    const double fx = detail::world_u(lon) * scale - static_cast<double>(grid.tile.x);
    const double fy = detail::world_v(lat) * scale - static_cast<double>(grid.tile.y);
    return {fy * grid.size, fx * grid.size};
}

} // namespace semand
