#pragma once

// Procedural synthetic world: per-tile roads, casement polygons, road network,
// walk/drive GPS trajectories and stylized RGB imagery, all derived from one
// geometric layout so every modality agrees by construction.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "semand/config.hpp"
#include "semand/errors.hpp"
#include "semand/geometry.hpp"
#include "semand/io.hpp"
#include "semand/parallel.hpp"
#include "semand/raster.hpp"
#include "semand/rng.hpp"
#include "semand/tilemath.hpp"

namespace semand {

struct WorldConfig {
    std::uint64_t seed = 0;
    // Region: a tile_cols x tile_rows block starting at the tile holding the origin.
    double origin_lon = 103.85;
    double origin_lat = 1.29;
    int zoom = 20;
    int tile_cols = 8;
    int tile_rows = 8;
    std::vector<TileKey> tiles; // explicit list; overrides the region when non-empty
    int grid_size = 64;

    int roads_min = 1;
    int roads_max = 3;
    double width_min_m = 5.0;
    double width_max_m = 12.0;
    double diagonal_prob = 0.2;
    double dead_end_prob = 0.2;
    double non_navigable_prob = 0.25;
    double network_offset_frac = 0.25; // centerline offset, fraction of width
    int pieces_min = 2;
    int pieces_max = 3;

    int drive_per_road = 4;
    int walk_per_road = 3;
    int crossings_per_road = 1;
    double gps_sigma_m = 1.0;
    double sidewalk_offset_m = 1.5;
    double record_spacing_m = 2.0;

    int buildings_max = 5;
    int trees_max = 4;
    double sidewalk_prob = 0.5;
    double image_noise = 0.03;

    void validate() const
    {
        if (tiles.empty() && (tile_cols < 1 || tile_rows < 1)) throw ConfigError("world region has zero area");
        if (zoom < 0 || zoom > kMaxZoom) throw ConfigError("zoom outside [0, 30]");
        if (grid_size < 4) throw ConfigError("grid_size must be >= 4");
        if (roads_min < 1 || roads_max < roads_min) throw ConfigError("need 1 <= roads_min <= roads_max");
        if (!(width_min_m > 0) || width_max_m < width_min_m) throw ConfigError("road widths must be positive with min <= max");
        if (!(gps_sigma_m >= 0)) throw ConfigError("gps_sigma_m must be >= 0");
        if (!(record_spacing_m > 0) || !(sidewalk_offset_m >= 0)) throw ConfigError("spacing must be positive and offsets non-negative");
        if (pieces_min < 1 || pieces_max < pieces_min) throw ConfigError("need 1 <= pieces_min <= pieces_max");
        if (drive_per_road < 0 || walk_per_road < 0 || crossings_per_road < 0 || buildings_max < 0 || trees_max < 0)
            throw ConfigError("counts must be non-negative");
        for (double p : {diagonal_prob, dead_end_prob, non_navigable_prob, sidewalk_prob})
            if (!(p >= 0 && p <= 1)) throw ConfigError("probabilities must lie in [0, 1]");
        if (!(network_offset_frac >= 0 && network_offset_frac <= 0.5)) throw ConfigError("network_offset_frac must lie in [0, 0.5]");
    }

    std::vector<TileKey> tile_keys() const
    {
        validate();
        if (!tiles.empty()) return tiles;
        const TileKey o = lonlat_to_tile(origin_lon, origin_lat, zoom);
        std::vector<TileKey> keys;
        for (int r = 0; r < tile_rows; ++r)
            for (int c = 0; c < tile_cols; ++c) {
                TileKey k{zoom, o.x + c, o.y + r};
                if (!k.valid()) throw ConfigError("world region runs off the tile grid");
                keys.push_back(k);
            }
        return keys;
    }
};

inline nlohmann::json to_json(const WorldConfig& c)
{
    nlohmann::json tiles = nlohmann::json::array();
    for (const auto& t : c.tiles) tiles.push_back(t.str());
    return {{"seed", c.seed},
            {"origin_lon", c.origin_lon},
            {"origin_lat", c.origin_lat},
            {"zoom", c.zoom},
            {"tile_cols", c.tile_cols},
            {"tile_rows", c.tile_rows},
            {"tiles", tiles},
            {"grid_size", c.grid_size},
            {"roads_min", c.roads_min},
            {"roads_max", c.roads_max},
            {"width_min_m", c.width_min_m},
            {"width_max_m", c.width_max_m},
            {"diagonal_prob", c.diagonal_prob},
            {"dead_end_prob", c.dead_end_prob},
            {"non_navigable_prob", c.non_navigable_prob},
            {"network_offset_frac", c.network_offset_frac},
            {"pieces_min", c.pieces_min},
            {"pieces_max", c.pieces_max},
            {"drive_per_road", c.drive_per_road},
            {"walk_per_road", c.walk_per_road},
            {"crossings_per_road", c.crossings_per_road},
            {"gps_sigma_m", c.gps_sigma_m},
            {"sidewalk_offset_m", c.sidewalk_offset_m},
            {"record_spacing_m", c.record_spacing_m},
            {"buildings_max", c.buildings_max},
            {"trees_max", c.trees_max},
            {"sidewalk_prob", c.sidewalk_prob},
            {"image_noise", c.image_noise}};
}

inline WorldConfig world_config_from_json(const nlohmann::json& j)
{
    reject_unknown_keys(j, {"seed", "origin_lon", "origin_lat", "zoom", "tile_cols", "tile_rows", "tiles", "grid_size", "roads_min", "roads_max",
                            "width_min_m", "width_max_m", "diagonal_prob", "dead_end_prob", "non_navigable_prob", "network_offset_frac", "pieces_min",
                            "pieces_max", "drive_per_road", "walk_per_road", "crossings_per_road", "gps_sigma_m", "sidewalk_offset_m",
                            "record_spacing_m", "buildings_max", "trees_max", "sidewalk_prob", "image_noise"},
                        "world config");
    WorldConfig c;
    try {
#define SEMAND_GET(key) c.key = j.value(#key, c.key)
        SEMAND_GET(seed);
        SEMAND_GET(origin_lon);
        SEMAND_GET(origin_lat);
        SEMAND_GET(zoom);
        SEMAND_GET(tile_cols);
        SEMAND_GET(tile_rows);
        SEMAND_GET(grid_size);
        SEMAND_GET(roads_min);
        SEMAND_GET(roads_max);
        SEMAND_GET(width_min_m);
        SEMAND_GET(width_max_m);
        SEMAND_GET(diagonal_prob);
        SEMAND_GET(dead_end_prob);
        SEMAND_GET(non_navigable_prob);
        SEMAND_GET(network_offset_frac);
        SEMAND_GET(pieces_min);
        SEMAND_GET(pieces_max);
        SEMAND_GET(drive_per_road);
        SEMAND_GET(walk_per_road);
        SEMAND_GET(crossings_per_road);
        SEMAND_GET(gps_sigma_m);
        SEMAND_GET(sidewalk_offset_m);
        SEMAND_GET(record_spacing_m);
        SEMAND_GET(buildings_max);
        SEMAND_GET(trees_max);
        SEMAND_GET(sidewalk_prob);
        SEMAND_GET(image_noise);
#undef SEMAND_GET
        if (j.contains("tiles"))
            for (const auto& t : j.at("tiles")) c.tiles.push_back(TileKey::parse(t.get<std::string>()));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad world config: ") + e.what());
    } catch (const DataError& e) {
        throw ConfigError(std::string("bad world config: ") + e.what());
    }
    c.validate();
    return c;
}

/// A road in the tile's local meter frame: the casement centerline runs from
/// t0 to t1 along direction (dx, dy) through the anchor point.
struct SynthRoad {
    double ax = 0, ay = 0;
    double dx = 1, dy = 0;
    double t0 = 0, t1 = 0;
    double width = 0;
    double network_offset = 0; // lateral offset of the network centerline
    bool navigable = true;
    bool sidewalk = false;

    double px(double t, double lateral) const { return ax + t * dx - lateral * dy; }
    double py(double t, double lateral) const { return ay + t * dy + lateral * dx; }
};

struct SynthTile {
    TileKey tile;
    PixelGrid grid;
    std::vector<SynthRoad> layout;
    TileGeometry geometry;
    std::vector<Channel> imagery; // SAT_R, SAT_G, SAT_B
};

namespace detail {

/// Linear local frame: meters east/north of the tile's south-west corner.
struct LocalFrame {
    LonLatBox box;
    double mx = 0, my = 0; // meters per degree
    double width_m = 0, height_m = 0;

    explicit LocalFrame(const TileKey& t) : box(tile_bounds(t))
    {
        const double lat_c = 0.5 * (box.lat_min + box.lat_max) * std::numbers::pi / 180.0;
        mx = 111320.0 * std::cos(lat_c);
        my = 110574.0;
        width_m = (box.lon_max - box.lon_min) * mx;
        height_m = (box.lat_max - box.lat_min) * my;
    }

    LonLat to_lonlat(double x, double y) const { return LonLat{box.lon_min + x / mx, box.lat_min + y / my}; }
    std::pair<double, double> to_local(double lon, double lat) const { return {(lon - box.lon_min) * mx, (lat - box.lat_min) * my}; }
};

inline int uniform_int(Rng& rng, int lo, int hi) { return lo + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(hi - lo + 1))); }

/// Parameter range of the line a + t*d inside [x0, x1] x [y0, y1].
inline std::optional<std::pair<double, double>> line_box_range(double ax, double ay, double dx, double dy, double x0, double y0, double x1, double y1)
{
    double lo = -1e18, hi = 1e18;
    auto slab = [&](double a, double d, double b0, double b1) {
        if (std::abs(d) < 1e-12) return a >= b0 && a <= b1;
        double ta = (b0 - a) / d, tb = (b1 - a) / d;
        if (ta > tb) std::swap(ta, tb);
        lo = std::max(lo, ta);
        hi = std::min(hi, tb);
        return lo <= hi;
    };
    if (!slab(ax, dx, x0, x1) || !slab(ay, dy, y0, y1)) return std::nullopt;
    return std::make_pair(lo, hi);
}

inline std::vector<SynthRoad> layout_roads(const WorldConfig& cfg, const LocalFrame& f, Rng& rng)
{
    std::vector<SynthRoad> roads;
    const int n = uniform_int(rng, cfg.roads_min, cfg.roads_max);
    const double margin = 0.15 * std::max(f.width_m, f.height_m);
    for (int i = 0; i < n; ++i) {
        SynthRoad r;
        double angle;
        const double jitter = uniform(rng, -8.0, 8.0) * std::numbers::pi / 180.0;
        if (bernoulli(rng, cfg.diagonal_prob))
            angle = symmetric_gap_uniform(rng, std::numbers::pi / 6, std::numbers::pi / 3);
        else
            angle = (bernoulli(rng, 0.5) ? 0.0 : std::numbers::pi / 2) + jitter;
        r.dx = std::cos(angle);
        r.dy = std::sin(angle);
        r.ax = uniform(rng, 0.2, 0.8) * f.width_m;
        r.ay = uniform(rng, 0.2, 0.8) * f.height_m;
        const auto range = line_box_range(r.ax, r.ay, r.dx, r.dy, -margin, -margin, f.width_m + margin, f.height_m + margin);
        r.t0 = range->first;
        r.t1 = range->second;
        if (bernoulli(rng, cfg.dead_end_prob)) {
            if (bernoulli(rng, 0.5))
                r.t0 = 0.0;
            else
                r.t1 = 0.0;
        }
        r.width = uniform(rng, cfg.width_min_m, cfg.width_max_m);
        r.network_offset = uniform(rng, -cfg.network_offset_frac, cfg.network_offset_frac) * r.width;
        r.navigable = !bernoulli(rng, cfg.non_navigable_prob);
        r.sidewalk = bernoulli(rng, cfg.sidewalk_prob);
        roads.push_back(r);
    }
    return roads;
}

inline Polygon rect_polygon(const LocalFrame& f, const SynthRoad& r, double ta, double tb, const std::string& id)
{
    const double h = r.width / 2;
    Polygon p;
    p.id = id;
    p.ring = {f.to_lonlat(r.px(ta, -h), r.py(ta, -h)), f.to_lonlat(r.px(tb, -h), r.py(tb, -h)), f.to_lonlat(r.px(tb, h), r.py(tb, h)),
              f.to_lonlat(r.px(ta, h), r.py(ta, h))};
    close_ring(p.ring);
    if (signed_area(p.ring) < 0) std::reverse(p.ring.begin(), p.ring.end());
    return p;
}

inline void add_trajectory_line(std::vector<GpsRecord>& recs, const LocalFrame& f, double x0, double y0, double x1, double y1, double spacing,
                                double sigma, Mode mode, double& clock, Rng& rng)
{
    const double len = std::hypot(x1 - x0, y1 - y0);
    const int steps = std::max(1, static_cast<int>(std::floor(len / spacing)));
    for (int i = 0; i <= steps; ++i) {
        const double a = static_cast<double>(i) / steps;
        double x = x0 + a * (x1 - x0), y = y0 + a * (y1 - y0);
        if (sigma > 0) {
            x += sigma * normal01(rng);
            y += sigma * normal01(rng);
        }
        const LonLat ll = f.to_lonlat(x, y);
        recs.push_back(GpsRecord{ll.lon, ll.lat, clock, mode});
        clock += 1.0;
    }
}

struct Rgb {
    double r, g, b;
};

inline Rgb mix(const Rgb& a, const Rgb& b, double w) { return {a.r * (1 - w) + b.r * w, a.g * (1 - w) + b.g * w, a.b * (1 - w) + b.b * w}; }

inline std::vector<Channel> render_imagery(const WorldConfig& cfg, const LocalFrame& f, const PixelGrid& grid, const std::vector<SynthRoad>& roads,
                                           Rng& rng)
{
    struct Building {
        double x0, y0, x1, y1;
        Rgb color;
    };
    struct Tree {
        double x, y, radius;
    };
    const Rgb ground{uniform(rng, 0.30, 0.40), uniform(rng, 0.40, 0.50), uniform(rng, 0.25, 0.32)};
    const Rgb asphalt{0.22, 0.22, 0.24};
    const Rgb pavement{0.62, 0.60, 0.58};
    const Rgb marking{0.92, 0.92, 0.88};
    const Rgb canopy{0.12, 0.30, 0.12};
    std::vector<Building> buildings;
    const int nb = uniform_int(rng, 0, cfg.buildings_max);
    for (int i = 0; i < nb; ++i) {
        const double w = uniform(rng, 4.0, 12.0), h = uniform(rng, 4.0, 12.0);
        const double x = uniform(rng, 0.0, f.width_m), y = uniform(rng, 0.0, f.height_m);
        const double tone = uniform(rng, 0.0, 1.0);
        buildings.push_back({x, y, x + w, y + h, Rgb{0.55 + 0.3 * tone, 0.45 + 0.1 * tone, 0.40 - 0.1 * tone}});
    }
    std::vector<Tree> trees;
    const int nt = uniform_int(rng, 0, cfg.trees_max);
    for (int i = 0; i < nt; ++i) trees.push_back({uniform(rng, 0.0, f.width_m), uniform(rng, 0.0, f.height_m), uniform(rng, 1.5, 4.0)});

    const int ss = 2;
    const int n = grid.size;
    std::vector<Channel> rgb{Channel(ChannelKind::SAT_R, grid), Channel(ChannelKind::SAT_G, grid), Channel(ChannelKind::SAT_B, grid)};
    for (int row = 0; row < n; ++row) {
        for (int col = 0; col < n; ++col) {
            Rgb acc{0, 0, 0};
            for (int si = 0; si < ss; ++si) {
                for (int sj = 0; sj < ss; ++sj) {
                    const double lon = grid_lon(grid, col + (sj + 0.5) / ss);
                    const double lat = grid_lat(grid, row + (si + 0.5) / ss);
                    const auto [x, y] = f.to_local(lon, lat);
                    Rgb c = ground;
                    for (const auto& b : buildings)
                        if (x >= b.x0 && x <= b.x1 && y >= b.y0 && y <= b.y1) c = b.color;
                    for (const auto& r : roads) {
                        const double t = (x - r.ax) * r.dx + (y - r.ay) * r.dy;
                        const double d = -(x - r.ax) * r.dy + (y - r.ay) * r.dx;
                        if (t < r.t0 || t > r.t1) continue;
                        const double h = r.width / 2;
                        if (std::abs(d) <= h) {
                            c = asphalt;
                            if (r.width >= 8.0 && std::abs(d) < 0.15 && std::fmod(t - r.t0, 6.0) < 3.0) c = marking;
                        } else if (r.sidewalk && std::abs(d) <= h + 1.5) {
                            c = pavement;
                        }
                    }
                    for (const auto& tr : trees)
                        if (std::hypot(x - tr.x, y - tr.y) <= tr.radius) c = mix(c, canopy, 0.85);
                    acc.r += c.r;
                    acc.g += c.g;
                    acc.b += c.b;
                }
            }
            const double k = 1.0 / (ss * ss);
            const float noise = static_cast<float>(cfg.image_noise * normal01(rng));
            rgb[0].at(row, col) = std::clamp(static_cast<float>(acc.r * k) + noise, 0.0f, 1.0f);
            rgb[1].at(row, col) = std::clamp(static_cast<float>(acc.g * k) + noise, 0.0f, 1.0f);
            rgb[2].at(row, col) = std::clamp(static_cast<float>(acc.b * k) + noise, 0.0f, 1.0f);
        }
    }
    return rgb;
}

} // namespace detail

/// Generates one tile. The result depends only on (cfg, tile).
inline SynthTile generate_tile(const WorldConfig& cfg, const TileKey& tile)
{
    cfg.validate();
    SynthTile out;
    out.tile = tile;
    out.grid = PixelGrid{tile, cfg.grid_size};
    const detail::LocalFrame f(tile);
    Rng rng = make_rng(derive_seed(derive_seed(cfg.seed, static_cast<std::uint64_t>(tile.zoom)), static_cast<std::uint64_t>(tile.x),
                                   static_cast<std::uint64_t>(tile.y)));
    out.layout = detail::layout_roads(cfg, f, rng);

    double clock = 0.0;
    int traj_id = 0;
    for (std::size_t ri = 0; ri < out.layout.size(); ++ri) {
        const auto& r = out.layout[ri];
        const std::string rid = tile.str() + "/r" + std::to_string(ri);

        // Casement pieces overlap slightly so the union has no seams.
        const int pieces = detail::uniform_int(rng, cfg.pieces_min, cfg.pieces_max);
        const double len = r.t1 - r.t0;
        std::vector<double> cuts{r.t0};
        for (int k = 1; k < pieces; ++k) cuts.push_back(r.t0 + len * k / pieces);
        cuts.push_back(r.t1);
        for (int k = 0; k < pieces; ++k) {
            const double ta = k == 0 ? cuts[k] : cuts[k] - 0.5;
            const double tb = k == pieces - 1 ? cuts[k + 1] : cuts[k + 1] + 0.5;
            out.geometry.rcps.push_back(detail::rect_polygon(f, r, ta, tb, rid + "p" + std::to_string(k)));
        }

        // Network centerline, one edge per piece.
        const std::size_t base = out.geometry.roads.vertices.size();
        for (double t : cuts) out.geometry.roads.vertices.push_back(f.to_lonlat(r.px(t, r.network_offset), r.py(t, r.network_offset)));
        for (int k = 0; k < pieces; ++k) out.geometry.roads.edges.push_back(RoadEdge{base + k, base + k + 1, r.navigable});

        const double h = r.width / 2;
        if (r.navigable) {
            for (int i = 0; i < cfg.drive_per_road; ++i) {
                Trajectory tr;
                tr.id = "d" + std::to_string(traj_id++);
                const double lane = uniform(rng, -r.width / 4, r.width / 4);
                const bool forward = bernoulli(rng, 0.5);
                const double ta = forward ? r.t0 : r.t1, tb = forward ? r.t1 : r.t0;
                detail::add_trajectory_line(tr.records, f, r.px(ta, lane), r.py(ta, lane), r.px(tb, lane), r.py(tb, lane), cfg.record_spacing_m,
                                            cfg.gps_sigma_m, Mode::drive, clock, rng);
                out.geometry.trajectories.push_back(std::move(tr));
            }
        }
        for (int i = 0; i < cfg.walk_per_road; ++i) {
            Trajectory tr;
            tr.id = "w" + std::to_string(traj_id++);
            const double side = bernoulli(rng, 0.5) ? 1.0 : -1.0;
            const double off = side * (h + cfg.sidewalk_offset_m + uniform(rng, 0.0, 1.0));
            detail::add_trajectory_line(tr.records, f, r.px(r.t0, off), r.py(r.t0, off), r.px(r.t1, off), r.py(r.t1, off), cfg.record_spacing_m / 2,
                                        cfg.gps_sigma_m, Mode::walk, clock, rng);
            out.geometry.trajectories.push_back(std::move(tr));
        }
        for (int i = 0; i < cfg.crossings_per_road; ++i) {
            Trajectory tr;
            tr.id = "c" + std::to_string(traj_id++);
            const double t = uniform(rng, r.t0, r.t1);
            const double reach = h + cfg.sidewalk_offset_m;
            detail::add_trajectory_line(tr.records, f, r.px(t, -reach), r.py(t, -reach), r.px(t, reach), r.py(t, reach), cfg.record_spacing_m / 3,
                                        cfg.gps_sigma_m, Mode::walk, clock, rng);
            out.geometry.trajectories.push_back(std::move(tr));
        }
    }
    out.imagery = detail::render_imagery(cfg, f, out.grid, out.layout, rng);
    return out;
}

inline std::vector<SynthTile> generate_world(const WorldConfig& cfg, unsigned threads = 1)
{
    const auto keys = cfg.tile_keys();
    std::vector<SynthTile> out(keys.size());
    parallel_for(keys.size(), threads, [&](std::size_t i) { out[i] = generate_tile(cfg, keys[i]); });
    return out;
}

// --------------------------------------------------------- channel assembly

/// Modality groups: "RNP", "RCPP", "M" (WCRM + DCRM), "SI" (SAT_R/G/B), or
/// any single channel name. RCPP is always included since it carries the
/// augmentation.
inline std::vector<ChannelKind> parse_modalities(const std::string& spec)
{
    std::vector<ChannelKind> out{ChannelKind::RCPP};
    auto add = [&](ChannelKind k) {
        if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
    };
    std::size_t pos = 0;
    while (pos <= spec.size()) {
        const auto comma = spec.find(',', pos);
        std::string tok = spec.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        tok.erase(0, tok.find_first_not_of(' '));
        tok.erase(tok.find_last_not_of(' ') + 1);
        if (tok == "M") {
            add(ChannelKind::WCRM);
            add(ChannelKind::DCRM);
        } else if (tok == "SI") {
            add(ChannelKind::SAT_R);
            add(ChannelKind::SAT_G);
            add(ChannelKind::SAT_B);
        } else if (!tok.empty()) {
            try {
                const ChannelKind k = parse_channel(tok);
                if (k == ChannelKind::SALIENCY) throw DataError("");
                add(k);
            } catch (const DataError&) {
                throw ConfigError("unknown modality '" + tok + "'");
            }
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    std::sort(out.begin(), out.end(), [](ChannelKind a, ChannelKind b) { return canonical_rank(a) < canonical_rank(b); });
    return out;
}

/// All seven normalized channels of a tile from its vector geometry and imagery.
inline FusedTile rasterize_tile(const TileGeometry& g, const std::vector<Channel>& imagery, const PixelGrid& grid)
{
    std::vector<Channel> chans;
    for (const auto& c : imagery) chans.push_back(normalize(c));
    chans.push_back(normalize(rasterize_crm(std::span<const Trajectory>(g.trajectories), Mode::walk, grid)));
    chans.push_back(normalize(rasterize_crm(std::span<const Trajectory>(g.trajectories), Mode::drive, grid)));
    chans.push_back(normalize(rasterize_presence(g.roads, grid)));
    chans.push_back(normalize(rasterize_presence(std::span<const Polygon>(g.rcps), grid)));
    return fuse(std::move(chans));
}

inline FusedTile rasterize_tile(const SynthTile& t) { return rasterize_tile(t.geometry, t.imagery, t.grid); }

/// Restricts a fused tile to `channels` (canonical order).
inline FusedTile select_channels(const FusedTile& t, const std::vector<ChannelKind>& channels)
{
    std::vector<Channel> out;
    for (auto k : channels) out.push_back(extract_channel(t, k));
    return fuse(std::move(out));
}

} // namespace semand
