#include <gtest/gtest.h>

#include <cmath>

#include "semand/io.hpp"
#include "semand/synthgen.hpp"
#include "test_common.hpp"

using namespace semand;

namespace {

WorldConfig small_world(std::uint64_t seed = 3, int cols = 4, int rows = 3)
{
    WorldConfig c;
    c.seed = seed;
    c.tile_cols = cols;
    c.tile_rows = rows;
    return c;
}

double segment_distance(double px, double py, double ax, double ay, double bx, double by)
{
    const double vx = bx - ax, vy = by - ay;
    const double len2 = vx * vx + vy * vy;
    const double t = len2 > 0 ? std::clamp(((px - ax) * vx + (py - ay) * vy) / len2, 0.0, 1.0) : 0.0;
    return std::hypot(px - (ax + t * vx), py - (ay + t * vy));
}

std::string tile_bytes(const SynthTile& t)
{
    std::string out = encode_smnd(rasterize_tile(t));
    for (const auto& row : geometry_to_jsonl(t.geometry)) out += row.dump();
    return out;
}

} // namespace

TEST(WorldConfig, ValidatesFields)
{
    EXPECT_NO_THROW(WorldConfig{}.validate());
    WorldConfig c;
    c.tile_cols = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    EXPECT_THROW(generate_world(c), ConfigError);
    c = WorldConfig{};
    c.width_min_m = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = WorldConfig{};
    c.gps_sigma_m = -1;
    EXPECT_THROW(c.validate(), ConfigError);
    c = WorldConfig{};
    c.roads_min = 0;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(WorldConfig, JsonRoundTripAndUnknownKeys)
{
    WorldConfig c = small_world(9);
    c.tiles = {TileKey{20, 5, 6}, TileKey{20, 5, 7}};
    c.gps_sigma_m = 0.5;
    const auto back = world_config_from_json(to_json(c));
    EXPECT_EQ(to_json(back).dump(), to_json(c).dump());
    auto j = to_json(c);
    j["road_density"] = 2;
    EXPECT_THROW(world_config_from_json(j), ConfigError);
}

TEST(WorldConfig, RegionExpandsToTileGrid)
{
    const auto keys = small_world(1, 4, 3).tile_keys();
    ASSERT_EQ(keys.size(), 12u);
    const TileKey o = lonlat_to_tile(103.85, 1.29, 20);
    EXPECT_EQ(keys.front(), o);
    EXPECT_EQ(keys.back(), (TileKey{20, o.x + 3, o.y + 2}));
}

TEST(GenerateWorld, EveryTileHasRoadsAndImagery)
{
    for (const auto& t : generate_world(small_world(4, 6, 5))) {
        EXPECT_FALSE(t.layout.empty());
        EXPECT_FALSE(t.geometry.rcps.empty());
        EXPECT_FALSE(t.geometry.roads.edges.empty());
        EXPECT_NO_THROW(validate(t.geometry.roads));
        for (const auto& p : t.geometry.rcps) EXPECT_NO_THROW(validate(p));
        for (const auto& tr : t.geometry.trajectories) EXPECT_NO_THROW(validate(tr));
        ASSERT_EQ(t.imagery.size(), 3u);
        EXPECT_EQ(t.imagery[0].name, ChannelKind::SAT_R);
        EXPECT_EQ(t.imagery[2].name, ChannelKind::SAT_B);
        for (const auto& ch : t.imagery)
            for (float v : ch.data) ASSERT_TRUE(v >= 0.0f && v <= 1.0f);
    }
}

TEST(GenerateWorld, NoiselessDriveRecordsStayWithinHalfWidth)
{
    WorldConfig c = small_world(5, 5, 4);
    c.gps_sigma_m = 0;
    std::size_t checked = 0;
    for (const auto& t : generate_world(c)) {
        const detail::LocalFrame f(t.tile);
        for (const auto& tr : t.geometry.trajectories)
            for (const auto& rec : tr.records) {
                if (rec.mode != Mode::drive) continue;
                const auto [x, y] = f.to_local(rec.lon, rec.lat);
                double best = 1e18, half = 0;
                for (const auto& r : t.layout) {
                    if (!r.navigable) continue;
                    const double d = segment_distance(x, y, r.px(r.t0, 0), r.py(r.t0, 0), r.px(r.t1, 0), r.py(r.t1, 0));
                    if (d < best) best = d, half = r.width / 2;
                }
                ASSERT_LE(best, half + 1e-6);
                ++checked;
            }
    }
    EXPECT_GT(checked, 1000u);
}

TEST(GenerateWorld, FixedSeedIsByteIdentical)
{
    const auto a = generate_world(small_world(6)), b = generate_world(small_world(6), 3);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(tile_bytes(a[i]), tile_bytes(b[i]));
    const auto c = generate_world(small_world(7));
    EXPECT_NE(tile_bytes(a[0]), tile_bytes(c[0]));
}

TEST(GenerateWorld, TilesAreIndependent)
{
    const WorldConfig region = small_world(8, 3, 3);
    const auto world = generate_world(region);
    WorldConfig single = region;
    single.tiles = {world[4].tile};
    const auto alone = generate_world(single);
    ASSERT_EQ(alone.size(), 1u);
    EXPECT_EQ(tile_bytes(alone[0]), tile_bytes(world[4]));
    EXPECT_EQ(tile_bytes(generate_tile(region, world[7].tile)), tile_bytes(world[7]));
}

TEST(GenerateWorld, CenterlineLiesInsideCasement)
{
    for (const auto& t : generate_world(small_world(9, 5, 4))) {
        const auto& g = t.geometry.roads;
        for (const auto& e : g.edges) {
            const auto& a = g.vertices[e.from];
            const auto& b = g.vertices[e.to];
            for (int k = 0; k < 20; ++k) {
                const double s = (k + 0.5) / 20.0;
                const LonLat p{a.lon + s * (b.lon - a.lon), a.lat + s * (b.lat - a.lat)};
                const bool inside = std::any_of(t.geometry.rcps.begin(), t.geometry.rcps.end(), [&](const Polygon& poly) { return contains(poly, p); });
                ASSERT_TRUE(inside) << t.tile.str() << " edge sample " << k;
            }
        }
    }
}

TEST(GenerateWorld, RcppCoversRnpPixels)
{
    for (const auto& t : generate_world(small_world(10, 5, 4))) {
        const Channel rnp = rasterize_presence(t.geometry.roads, t.grid);
        const Channel rcpp = rasterize_presence(std::span<const Polygon>(t.geometry.rcps), t.grid);
        for (std::size_t i = 0; i < rnp.data.size(); ++i)
            if (rnp.data[i] > 0) {
                ASSERT_GT(rcpp.data[i], 0.0f) << t.tile.str() << " pixel " << i;
            }
    }
}

TEST(GenerateWorld, NoiselessDriveMassLiesOnCasements)
{
    WorldConfig c = small_world(11, 6, 5);
    c.gps_sigma_m = 0;
    double total = 0, on = 0;
    for (const auto& t : generate_world(c)) {
        const Channel crm = rasterize_crm(std::span<const Trajectory>(t.geometry.trajectories), Mode::drive, t.grid);
        const Channel rcpp = rasterize_presence(std::span<const Polygon>(t.geometry.rcps), t.grid);
        for (std::size_t i = 0; i < crm.data.size(); ++i) {
            total += crm.data[i];
            if (rcpp.data[i] > 0) on += crm.data[i];
        }
    }
    ASSERT_GT(total, 0.0);
    EXPECT_GE(on / total, 0.99);
}

TEST(Modalities, ParseGroups)
{
    EXPECT_EQ(parse_modalities("RNP"), (std::vector<ChannelKind>{ChannelKind::RNP, ChannelKind::RCPP}));
    EXPECT_EQ(parse_modalities("RNP,M,SI"), std::vector<ChannelKind>(kCanonicalChannels.begin(), kCanonicalChannels.end()));
    EXPECT_EQ(parse_modalities("SI, RNP"), (std::vector<ChannelKind>{ChannelKind::SAT_R, ChannelKind::SAT_G, ChannelKind::SAT_B, ChannelKind::RNP,
                                                                    ChannelKind::RCPP}));
    EXPECT_EQ(parse_modalities("DCRM"), (std::vector<ChannelKind>{ChannelKind::DCRM, ChannelKind::RCPP}));
    EXPECT_THROW(parse_modalities("RNP,LIDAR"), ConfigError);
    EXPECT_THROW(parse_modalities("SALIENCY"), ConfigError);
}

TEST(Modalities, SelectChannelsKeepsValues)
{
    const auto t = generate_tile(small_world(12), small_world(12).tile_keys()[0]);
    const FusedTile full = rasterize_tile(t);
    ASSERT_EQ(full.channel_count(), 7u);
    const FusedTile rnp = select_channels(full, parse_modalities("RNP"));
    ASSERT_EQ(rnp.channel_count(), 2u);
    EXPECT_EQ(extract_channel(rnp, ChannelKind::RCPP).data, extract_channel(full, ChannelKind::RCPP).data);
    EXPECT_EQ(extract_channel(rnp, ChannelKind::RNP).data, extract_channel(full, ChannelKind::RNP).data);
}
