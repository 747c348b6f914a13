#pragma once

// Per-modality rasterization onto a tile's PixelGrid, normalization, and
// early fusion by channel concatenation.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "semand/errors.hpp"
#include "semand/geometry.hpp"
#include "semand/tilemath.hpp"

namespace semand {

enum class ChannelKind { SAT_R, SAT_G, SAT_B, WCRM, DCRM, RNP, RCPP, SALIENCY };

/// Canonical fusion order.
inline constexpr std::array<ChannelKind, 7> kCanonicalChannels{ChannelKind::SAT_R, ChannelKind::SAT_G, ChannelKind::SAT_B,
                                                               ChannelKind::WCRM,  ChannelKind::DCRM,  ChannelKind::RNP,
                                                               ChannelKind::RCPP};

inline const char* to_string(ChannelKind k)
{
    switch (k) {
    case ChannelKind::SAT_R: return "SAT_R";
    case ChannelKind::SAT_G: return "SAT_G";
    case ChannelKind::SAT_B: return "SAT_B";
    case ChannelKind::WCRM: return "WCRM";
    case ChannelKind::DCRM: return "DCRM";
    case ChannelKind::RNP: return "RNP";
    case ChannelKind::RCPP: return "RCPP";
    case ChannelKind::SALIENCY: return "SALIENCY";
    }
    return "?";
}

inline ChannelKind parse_channel(const std::string& s)
{
    for (auto k : kCanonicalChannels)
        if (s == to_string(k)) return k;
    if (s == "SALIENCY") return ChannelKind::SALIENCY;
    throw DataError("unknown channel name '" + s + "'");
}

struct Channel {
    ChannelKind name = ChannelKind::RCPP;
    PixelGrid grid;
    std::vector<float> data; // row-major size x size

    Channel() = default;
    Channel(ChannelKind k, const PixelGrid& g) : name(k), grid(g), data(g.pixel_count(), 0.0f) {}

    float& at(int row, int col) { return data[static_cast<std::size_t>(row) * grid.size + col]; }
    float at(int row, int col) const { return data[static_cast<std::size_t>(row) * grid.size + col]; }
};

/// Pixel-aligned channels concatenated in canonical order (channel-major).
struct FusedTile {
    PixelGrid grid;
    std::vector<ChannelKind> channels;
    std::vector<float> data;

    std::size_t channel_count() const { return channels.size(); }
    int height() const { return grid.size; }
    int width() const { return grid.size; }

    std::span<const float> channel(std::size_t c) const { return {data.data() + c * grid.pixel_count(), grid.pixel_count()}; }
    std::span<float> channel(std::size_t c) { return {data.data() + c * grid.pixel_count(), grid.pixel_count()}; }

    std::ptrdiff_t index_of(ChannelKind k) const
    {
        const auto it = std::find(channels.begin(), channels.end(), k);
        return it == channels.end() ? -1 : it - channels.begin();
    }
};

// ------------------------------------------------------------------ mobility

/// Count of GPS records of `mode` per pixel; records outside the tile are ignored.
inline Channel rasterize_crm(std::span<const Trajectory> trajs, Mode mode, const PixelGrid& grid)
{
    Channel ch(mode == Mode::walk ? ChannelKind::WCRM : ChannelKind::DCRM, grid);
    for (const auto& t : trajs) {
        for (const auto& r : t.records) {
            if (r.mode != mode) continue;
            if (const auto px = lonlat_to_pixel(grid, r.lon, r.lat)) ch.at(px->row, px->col) += 1.0f;
        }
    }
    return ch;
}

// ------------------------------------------------------------------ presence

/// Pixel is 1 iff any segment touches the pixel's closed box.
inline Channel rasterize_presence(std::span<const Segment> segments, const PixelGrid& grid, ChannelKind name = ChannelKind::RNP)
{
    Channel ch(name, grid);
    const int n = grid.size;
    std::vector<double> col_lon(n + 1), row_lat(n + 1);
    for (int i = 0; i <= n; ++i) {
        col_lon[i] = grid_lon(grid, i);
        row_lat[i] = grid_lat(grid, i);
    }
    for (const auto& s : segments) {
        const auto [ra, ca] = lonlat_to_grid_coords(grid, s.a.lon, s.a.lat);
        const auto [rb, cb] = lonlat_to_grid_coords(grid, s.b.lon, s.b.lat);
        const int r0 = std::max(0, static_cast<int>(std::floor(std::min(ra, rb))) - 1);
        const int r1 = std::min(n - 1, static_cast<int>(std::floor(std::max(ra, rb))) + 1);
        const int c0 = std::max(0, static_cast<int>(std::floor(std::min(ca, cb))) - 1);
        const int c1 = std::min(n - 1, static_cast<int>(std::floor(std::max(ca, cb))) + 1);
        for (int r = r0; r <= r1; ++r) {
            for (int c = c0; c <= c1; ++c) {
                if (ch.at(r, c) != 0.0f) continue;
                if (segment_intersects_box(s.a.lon, s.a.lat, s.b.lon, s.b.lat, col_lon[c], row_lat[r + 1], col_lon[c + 1], row_lat[r]))
                    ch.at(r, c) = 1.0f;
            }
        }
    }
    return ch;
}

/// Navigable road edges as segments.
inline std::vector<Segment> navigable_segments(const RoadGraph& g)
{
    std::vector<Segment> out;
    for (const auto& e : g.edges)
        if (e.navigable) out.push_back(Segment{g.vertices[e.from], g.vertices[e.to]});
    return out;
}

inline Channel rasterize_presence(const RoadGraph& g, const PixelGrid& grid)
{
    const auto segs = navigable_segments(g);
    return rasterize_presence(std::span<const Segment>(segs), grid, ChannelKind::RNP);
}

inline constexpr int kPresenceSupersample = 4;

/// Polygon coverage: a pixel is 1 if any of its 4x4 subsample centers lies
/// inside any polygon (even-odd rule, evaluated by scanline).
inline Channel rasterize_presence(std::span<const Polygon> polys, const PixelGrid& grid, ChannelKind name = ChannelKind::RCPP)
{
    Channel ch(name, grid);
    const int n = grid.size;
    const int ss = kPresenceSupersample;
    const int m = n * ss;
    std::vector<double> sub_lon(m), sub_lat(m);
    for (int i = 0; i < m; ++i) {
        sub_lon[i] = grid_lon(grid, (i + 0.5) / ss);
        sub_lat[i] = grid_lat(grid, (i + 0.5) / ss);
    }
    std::vector<double> xs;
    for (const auto& p : polys) {
        if (p.ring.size() < 4) continue;
        const Box bb = bounding_box(p.ring);
        if (bb.x1 < sub_lon.front() || bb.x0 > sub_lon.back() || bb.y1 < sub_lat.back() || bb.y0 > sub_lat.front()) continue;
        for (int sr = 0; sr < m; ++sr) {
            const double lat = sub_lat[sr];
            if (lat < bb.y0 || lat > bb.y1) continue;
            xs.clear();
            for (std::size_t i = 0; i + 1 < p.ring.size(); ++i) {
                const LonLat& a = p.ring[i];
                const LonLat& b = p.ring[i + 1];
                if ((a.lat > lat) != (b.lat > lat)) xs.push_back(a.lon + (lat - a.lat) * (b.lon - a.lon) / (b.lat - a.lat));
            }
            std::sort(xs.begin(), xs.end());
            const int row = sr / ss;
            for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
                // Subsample columns with x_{2k} <= lon < x_{2k+1}.
                auto lo = std::lower_bound(sub_lon.begin(), sub_lon.end(), xs[k]);
                auto hi = std::lower_bound(sub_lon.begin(), sub_lon.end(), xs[k + 1]);
                for (auto it = lo; it < hi; ++it) ch.at(row, static_cast<int>((it - sub_lon.begin()) / ss)) = 1.0f;
            }
        }
    }
    return ch;
}

// ------------------------------------------------------------- normalization

inline bool is_mobility(ChannelKind k) { return k == ChannelKind::WCRM || k == ChannelKind::DCRM; }

/// CRM: ln(1 + v) then divide by the per-tile max (all-zero stays zero).
/// Other channels: divide by max(channel max, 1). Output lies in [0, 1].
inline Channel normalize(const Channel& ch)
{
    Channel out = ch;
    float mx = 0.0f;
    for (float& v : out.data) {
        if (std::isnan(v) || v < 0.0f) throw DataError(std::string("channel ") + to_string(ch.name) + " contains NaN or negative values");
        if (is_mobility(ch.name)) v = static_cast<float>(std::log1p(static_cast<double>(v)));
        mx = std::max(mx, v);
    }
    const float div = is_mobility(ch.name) ? mx : std::max(mx, 1.0f);
    if (div > 0.0f)
        for (float& v : out.data) v = std::min(1.0f, v / div);
    return out;
}

// -------------------------------------------------------------------- fusion

inline std::size_t canonical_rank(ChannelKind k)
{
    for (std::size_t i = 0; i < kCanonicalChannels.size(); ++i)
        if (kCanonicalChannels[i] == k) return i;
    return kCanonicalChannels.size();
}

/// Concatenate channels in canonical order (restricted to those supplied).
inline FusedTile fuse(std::vector<Channel> channels)
{
    if (channels.empty()) throw ConfigError("fuse requires at least one channel");
    const PixelGrid grid = channels.front().grid;
    for (const auto& c : channels) {
        if (!(c.grid == grid)) throw AlignmentError("channels lie on different pixel grids");
        if (c.data.size() != grid.pixel_count()) throw AlignmentError("channel size does not match its grid");
    }
    std::stable_sort(channels.begin(), channels.end(), [](const Channel& a, const Channel& b) { return canonical_rank(a.name) < canonical_rank(b.name); });
    for (std::size_t i = 1; i < channels.size(); ++i)
        if (channels[i].name == channels[i - 1].name) throw ConfigError(std::string("duplicate channel ") + to_string(channels[i].name));
    FusedTile t;
    t.grid = grid;
    t.data.reserve(grid.pixel_count() * channels.size());
    for (auto& c : channels) {
        t.channels.push_back(c.name);
        t.data.insert(t.data.end(), c.data.begin(), c.data.end());
    }
    return t;
}

inline Channel extract_channel(const FusedTile& t, ChannelKind k)
{
    const auto idx = t.index_of(k);
    if (idx < 0) throw DataError(std::string("tile has no channel ") + to_string(k));
    Channel c(k, t.grid);
    const auto src = t.channel(static_cast<std::size_t>(idx));
    std::copy(src.begin(), src.end(), c.data.begin());
    return c;
}

/// Returns a copy of `t` with channel k's data replaced.
inline FusedTile replace_channel(FusedTile t, const Channel& c)
{
    if (!(c.grid == t.grid)) throw AlignmentError("replacement channel lies on a different grid");
    const auto idx = t.index_of(c.name);
    if (idx < 0) throw DataError(std::string("tile has no channel ") + to_string(c.name));
    std::copy(c.data.begin(), c.data.end(), t.channel(static_cast<std::size_t>(idx)).begin());
    return t;
}

} // namespace semand
