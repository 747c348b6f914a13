#pragma once

// On-disk formats: SMND tensor container, JSON Lines manifests and geometry files.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "semand/errors.hpp"
#include "semand/geometry.hpp"
#include "semand/raster.hpp"

namespace semand {

using json = nlohmann::json;

namespace detail {

inline void put_u16(std::string& buf, std::uint16_t v)
{
    buf.push_back(static_cast<char>(v & 0xff));
    buf.push_back(static_cast<char>(v >> 8));
}

inline void put_u32(std::string& buf, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& buf, std::uint64_t v)
{
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& buf, float f) { put_u32(buf, std::bit_cast<std::uint32_t>(f)); }

/// Bounds-checked little-endian reader over an in-memory buffer.
class ByteReader {
public:
    ByteReader(const std::string& buf, std::string what) : buf_(buf), what_(std::move(what)) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }

    std::uint16_t u16()
    {
        const char* p = take(2);
        return static_cast<std::uint16_t>(static_cast<std::uint8_t>(p[0]) | (static_cast<std::uint8_t>(p[1]) << 8));
    }

    std::uint32_t u32()
    {
        const char* p = take(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(p[i])) << (8 * i);
        return v;
    }

    std::uint64_t u64()
    {
        const char* p = take(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(p[i])) << (8 * i);
        return v;
    }

    float f32() { return std::bit_cast<float>(u32()); }

    std::string bytes(std::size_t n) { return std::string(take(n), n); }

    std::string cstring()
    {
        std::string s;
        for (char c = static_cast<char>(u8()); c != '\0'; c = static_cast<char>(u8())) s.push_back(c);
        return s;
    }

    bool at_end() const { return pos_ == buf_.size(); }

private:
    const char* take(std::size_t n)
    {
        if (buf_.size() - pos_ < n) throw DataError(what_ + ": unexpected end of file");
        const char* p = buf_.data() + pos_;
        pos_ += n;
        return p;
    }

    const std::string& buf_;
    std::string what_;
    std::size_t pos_ = 0;
};

inline std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + path.string());
}

} // namespace detail

// ------------------------------------------------------------ SMND container

inline constexpr std::uint16_t kSmndVersion = 1;

/// magic "SMND", u16 version, u16 height, u16 width, u16 channel_count,
/// channel_count NUL-terminated names, then row-major float32 channels.
inline std::string encode_smnd(const FusedTile& t)
{
    std::string buf = "SMND";
    detail::put_u16(buf, kSmndVersion);
    detail::put_u16(buf, static_cast<std::uint16_t>(t.height()));
    detail::put_u16(buf, static_cast<std::uint16_t>(t.width()));
    detail::put_u16(buf, static_cast<std::uint16_t>(t.channel_count()));
    for (auto k : t.channels) {
        buf += to_string(k);
        buf.push_back('\0');
    }
    buf.reserve(buf.size() + t.data.size() * 4);
    for (float v : t.data) detail::put_f32(buf, v);
    return buf;
}

/// The container carries no tile key; callers attach it from the manifest.
inline FusedTile decode_smnd(const std::string& bytes, const TileKey& tile = {})
{
    detail::ByteReader r(bytes, "SMND");
    if (r.bytes(4) != "SMND") throw DataError("not an SMND container (bad magic)");
    const auto version = r.u16();
    if (version != kSmndVersion) throw DataError("unsupported SMND version " + std::to_string(version));
    const int h = r.u16(), w = r.u16();
    const int c = r.u16();
    if (h != w || h == 0) throw DataError("SMND tiles must be square and non-empty");
    FusedTile t;
    t.grid = PixelGrid{tile, h};
    for (int i = 0; i < c; ++i) t.channels.push_back(parse_channel(r.cstring()));
    t.data.resize(static_cast<std::size_t>(c) * h * w);
    for (auto& v : t.data) v = r.f32();
    if (!r.at_end()) throw DataError("trailing bytes after SMND payload");
    return t;
}

inline void write_smnd(const std::filesystem::path& path, const FusedTile& t) { detail::write_file(path, encode_smnd(t)); }

inline FusedTile read_smnd(const std::filesystem::path& path, const TileKey& tile = {}) { return decode_smnd(detail::read_file(path), tile); }

// ------------------------------------------------------------------ manifest

struct ManifestRow {
    TileKey tile;
    std::string path;
    std::string label = "normal"; // "normal" | "augmented"
    std::optional<double> posedness;
    std::vector<std::string> channels;
};

inline json to_json(const ManifestRow& r)
{
    json j;
    j["tile"] = r.tile.str();
    j["path"] = r.path;
    j["label"] = r.label;
    j["posedness"] = r.posedness ? json(*r.posedness) : json(nullptr);
    j["channels"] = r.channels;
    return j;
}

inline ManifestRow manifest_row_from_json(const json& j)
{
    ManifestRow r;
    try {
        r.tile = TileKey::parse(j.at("tile").get<std::string>());
        r.path = j.at("path").get<std::string>();
        r.label = j.at("label").get<std::string>();
        if (r.label != "normal" && r.label != "augmented") throw DataError("manifest label must be normal|augmented");
        if (j.contains("posedness") && !j["posedness"].is_null()) r.posedness = j["posedness"].get<double>();
        r.channels = j.at("channels").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed manifest row: ") + e.what());
    }
    return r;
}

inline std::vector<json> read_jsonl(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<json> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            rows.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return rows;
}

inline void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows)
{
    std::string out;
    for (const auto& r : rows) out += r.dump() + "\n";
    detail::write_file(path, out);
}

inline std::vector<ManifestRow> read_manifest(const std::filesystem::path& path)
{
    std::vector<ManifestRow> rows;
    for (const auto& j : read_jsonl(path)) rows.push_back(manifest_row_from_json(j));
    return rows;
}

inline void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows)
{
    std::vector<json> js;
    for (const auto& r : rows) js.push_back(to_json(r));
    write_jsonl(path, js);
}

/// Manifest paths are resolved relative to the manifest's directory.
inline std::filesystem::path resolve_path(const std::filesystem::path& manifest, const std::string& p)
{
    const std::filesystem::path rel(p);
    return rel.is_absolute() ? rel : manifest.parent_path() / rel;
}

// ------------------------------------------------------------ geometry JSONL

struct TileGeometry {
    std::vector<Polygon> rcps;
    RoadGraph roads;
    std::vector<Trajectory> trajectories;
};

inline json coords_json(const std::vector<LonLat>& pts)
{
    json c = json::array();
    for (const auto& p : pts) c.push_back({p.lon, p.lat});
    return c;
}

/// One object per line: {"id", "kind": "rcp"|"road_edge"|"trajectory",
/// "coords": [[lon, lat], ...], optional "times", optional "mode",
/// optional "navigable" (road edges, default true).
inline std::vector<json> geometry_to_jsonl(const TileGeometry& g)
{
    std::vector<json> rows;
    for (const auto& p : g.rcps) rows.push_back({{"id", p.id}, {"kind", "rcp"}, {"coords", coords_json(p.ring)}});
    for (std::size_t i = 0; i < g.roads.edges.size(); ++i) {
        const auto& e = g.roads.edges[i];
        json row{{"id", "edge-" + std::to_string(i)}, {"kind", "road_edge"}, {"coords", coords_json({g.roads.vertices[e.from], g.roads.vertices[e.to]})}};
        if (!e.navigable) row["navigable"] = false;
        rows.push_back(std::move(row));
    }
    for (const auto& t : g.trajectories) {
        json coords = json::array(), times = json::array(), modes = json::array();
        bool single_mode = true;
        for (const auto& r : t.records) {
            coords.push_back({r.lon, r.lat});
            times.push_back(r.t);
            modes.push_back(to_string(r.mode));
            single_mode = single_mode && r.mode == t.records.front().mode;
        }
        json row{{"id", t.id}, {"kind", "trajectory"}, {"coords", coords}, {"times", times}};
        if (!t.records.empty()) row["mode"] = single_mode ? json(to_string(t.records.front().mode)) : modes;
        rows.push_back(std::move(row));
    }
    return rows;
}

inline TileGeometry geometry_from_jsonl(const std::vector<json>& rows)
{
    TileGeometry g;
    std::map<std::pair<double, double>, std::size_t> vertex_index;
    auto vertex = [&](const LonLat& p) {
        const auto key = std::make_pair(p.lon, p.lat);
        const auto it = vertex_index.find(key);
        if (it != vertex_index.end()) return it->second;
        g.roads.vertices.push_back(p);
        vertex_index.emplace(key, g.roads.vertices.size() - 1);
        return g.roads.vertices.size() - 1;
    };
    for (const auto& j : rows) {
        try {
            const auto kind = j.at("kind").get<std::string>();
            std::vector<LonLat> pts;
            for (const auto& c : j.at("coords")) pts.push_back(LonLat{c.at(0).get<double>(), c.at(1).get<double>()});
            const auto id = j.value("id", std::string{});
            if (kind == "rcp") {
                close_ring(pts);
                Polygon p{id, std::move(pts)};
                validate(p);
                g.rcps.push_back(std::move(p));
            } else if (kind == "road_edge") {
                if (pts.size() < 2) throw DataError("road edge '" + id + "' needs two coordinates");
                const bool nav = j.value("navigable", true);
                for (std::size_t i = 0; i + 1 < pts.size(); ++i) g.roads.edges.push_back(RoadEdge{vertex(pts[i]), vertex(pts[i + 1]), nav});
            } else if (kind == "trajectory") {
                Trajectory t{id, {}};
                const auto& times = j.at("times");
                if (times.size() != pts.size()) throw DataError("trajectory '" + id + "' times/coords length mismatch");
                for (std::size_t i = 0; i < pts.size(); ++i) {
                    Mode m = Mode::drive;
                    if (j.contains("mode")) m = parse_mode(j["mode"].is_array() ? j["mode"].at(i).get<std::string>() : j["mode"].get<std::string>());
                    t.records.push_back(GpsRecord{pts[i].lon, pts[i].lat, times.at(i).get<double>(), m});
                }
                validate(t);
                g.trajectories.push_back(std::move(t));
            } else {
                throw DataError("unknown geometry kind '" + kind + "'");
            }
        } catch (const json::exception& e) {
            throw DataError(std::string("malformed geometry row: ") + e.what());
        }
    }
    validate(g.roads);
    return g;
}

inline void write_geometry(const std::filesystem::path& path, const TileGeometry& g) { write_jsonl(path, geometry_to_jsonl(g)); }

inline TileGeometry read_geometry(const std::filesystem::path& path) { return geometry_from_jsonl(read_jsonl(path)); }

// --------------------------------------------------------------- RGB rasters

/// Binary PPM (P6, maxval 255) loader for externally supplied imagery; returns
/// SAT_R/G/B channels scaled to [0, 1].
inline std::vector<Channel> read_ppm_rgb(const std::filesystem::path& path, const PixelGrid& grid)
{
    const std::string bytes = detail::read_file(path);
    std::istringstream in(bytes);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    if (magic != "P6" || maxval != 255) throw DataError("imagery must be binary PPM (P6, maxval 255)");
    if (w != grid.size || h != grid.size) throw AlignmentError("imagery size does not match the pixel grid");
    in.get();
    const auto offset = static_cast<std::size_t>(in.tellg());
    if (bytes.size() < offset + static_cast<std::size_t>(w) * h * 3) throw DataError("truncated PPM payload");
    std::vector<Channel> rgb{Channel(ChannelKind::SAT_R, grid), Channel(ChannelKind::SAT_G, grid), Channel(ChannelKind::SAT_B, grid)};
    for (std::size_t i = 0; i < grid.pixel_count(); ++i)
        for (int c = 0; c < 3; ++c) rgb[c].data[i] = static_cast<float>(static_cast<unsigned char>(bytes[offset + 3 * i + c])) / 255.0f;
    return rgb;
}

} // namespace semand
