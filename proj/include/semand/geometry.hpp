#pragma once

// Vector-domain primitives. Coordinates are decimal degrees and, inside a tile,
// are treated as a planar frame (1 deg lon == 1 deg lat for transforms).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "semand/errors.hpp"
#include "semand/tilemath.hpp"

namespace semand {

struct LonLat {
    double lon = 0;
    double lat = 0;
    friend bool operator==(const LonLat&, const LonLat&) = default;
};

/// Single-ring polygon; the ring is closed (first point repeated last).
struct Polygon {
    std::string id;
    std::vector<LonLat> ring;
};

struct RoadEdge {
    std::size_t from = 0;
    std::size_t to = 0;
    bool navigable = true;
};

struct RoadGraph {
    std::vector<LonLat> vertices;
    std::vector<RoadEdge> edges;
};

enum class Mode { walk, drive };

inline const char* to_string(Mode m) { return m == Mode::walk ? "walk" : "drive"; }

inline Mode parse_mode(const std::string& s)
{
    if (s == "walk") return Mode::walk;
    if (s == "drive") return Mode::drive;
    throw DataError("unknown motion mode '" + s + "'");
}

struct GpsRecord {
    double lon = 0;
    double lat = 0;
    double t = 0;
    Mode mode = Mode::drive;
};

struct Trajectory {
    std::string id;
    std::vector<GpsRecord> records;
};

struct Segment {
    LonLat a, b;
};

// ---------------------------------------------------------------- validation

inline bool is_closed(const std::vector<LonLat>& ring) { return ring.size() >= 2 && ring.front() == ring.back(); }

inline void close_ring(std::vector<LonLat>& ring)
{
    if (!ring.empty() && !(ring.front() == ring.back())) ring.push_back(ring.front());
}

/// Shoelace area of a closed ring, computed relative to the first vertex.
inline double signed_area(const std::vector<LonLat>& ring)
{
    if (ring.size() < 4) return 0.0;
    const LonLat o = ring.front();
    double twice = 0.0;
    for (std::size_t i = 1; i + 2 < ring.size(); ++i) {
        const double x1 = ring[i].lon - o.lon, y1 = ring[i].lat - o.lat;
        const double x2 = ring[i + 1].lon - o.lon, y2 = ring[i + 1].lat - o.lat;
        twice += x1 * y2 - x2 * y1;
    }
    return twice / 2.0;
}

inline double area(const Polygon& p) { return std::abs(signed_area(p.ring)); }

inline void validate(const Trajectory& t)
{
    for (std::size_t i = 1; i < t.records.size(); ++i) {
        if (!(t.records[i].t > t.records[i - 1].t)) throw DataError("trajectory '" + t.id + "' timestamps not strictly increasing");
    }
}

inline void validate(const RoadGraph& g)
{
    for (const auto& e : g.edges) {
        if (e.from >= g.vertices.size() || e.to >= g.vertices.size()) throw DataError("road edge references missing vertex");
        if (g.vertices[e.from] == g.vertices[e.to]) throw DataError("zero-length road edge");
    }
}

namespace detail {

inline double cross(double ax, double ay, double bx, double by) { return ax * by - ay * bx; }

inline int orientation(const LonLat& a, const LonLat& b, const LonLat& c)
{
    const double v = cross(b.lon - a.lon, b.lat - a.lat, c.lon - a.lon, c.lat - a.lat);
    return (v > 0) - (v < 0);
}

inline bool on_segment(const LonLat& a, const LonLat& b, const LonLat& p)
{
    return std::min(a.lon, b.lon) <= p.lon && p.lon <= std::max(a.lon, b.lon) && std::min(a.lat, b.lat) <= p.lat &&
           p.lat <= std::max(a.lat, b.lat);
}

inline bool segments_intersect(const LonLat& p1, const LonLat& p2, const LonLat& q1, const LonLat& q2)
{
    const int o1 = orientation(p1, p2, q1), o2 = orientation(p1, p2, q2);
    const int o3 = orientation(q1, q2, p1), o4 = orientation(q1, q2, p2);
    if (o1 != o2 && o3 != o4) return true;
    if (o1 == 0 && on_segment(p1, p2, q1)) return true;
    if (o2 == 0 && on_segment(p1, p2, q2)) return true;
    if (o3 == 0 && on_segment(q1, q2, p1)) return true;
    if (o4 == 0 && on_segment(q1, q2, p2)) return true;
    return false;
}

} // namespace detail

/// O(n^2) check that no two non-adjacent ring edges touch.
inline bool is_simple(const std::vector<LonLat>& ring)
{
    const std::size_t n = ring.size() - 1;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if (adjacent) continue;
            if (detail::segments_intersect(ring[i], ring[i + 1], ring[j], ring[j + 1])) return false;
        }
    }
    return true;
}

inline void validate(const Polygon& p)
{
    if (p.ring.size() < 4 || !is_closed(p.ring)) throw DegenerateGeometryError("polygon '" + p.id + "' ring must be closed with >= 4 points");
    if (signed_area(p.ring) == 0.0) throw DegenerateGeometryError("polygon '" + p.id + "' has zero area");
    if (!is_simple(p.ring)) throw DegenerateGeometryError("polygon '" + p.id + "' self-intersects");
}

// ----------------------------------------------------------------- centroid

inline LonLat centroid(const Polygon& p)
{
    const auto& r = p.ring;
    if (r.size() < 4) throw DegenerateGeometryError("polygon '" + p.id + "' has fewer than 4 ring points");
    const LonLat o = r.front();
    double a2 = 0.0, cx = 0.0, cy = 0.0;
    for (std::size_t i = 0; i + 1 < r.size(); ++i) {
        const double x1 = r[i].lon - o.lon, y1 = r[i].lat - o.lat;
        const double x2 = r[i + 1].lon - o.lon, y2 = r[i + 1].lat - o.lat;
        const double c = x1 * y2 - x2 * y1;
        a2 += c;
        cx += (x1 + x2) * c;
        cy += (y1 + y2) * c;
    }
    if (a2 == 0.0) throw DegenerateGeometryError("polygon '" + p.id + "' has zero area");
    return LonLat{o.lon + cx / (3.0 * a2), o.lat + cy / (3.0 * a2)};
}

// ------------------------------------------------------------------- affine

struct Rotate {
    double theta = 0;
};
struct Translate {
    double dx = 0, dy = 0;
};
struct Scale {
    double bx = 1, by = 1;
};
using AffineAction = std::variant<Rotate, Translate, Scale>;

inline Polygon apply_affine(const Polygon& p, const AffineAction& action)
{
    Polygon out = p;
    if (const auto* t = std::get_if<Translate>(&action)) {
        if (!std::isfinite(t->dx) || !std::isfinite(t->dy)) throw DegenerateGeometryError("non-finite translation");
        for (auto& v : out.ring) {
            v.lon += t->dx;
            v.lat += t->dy;
        }
        return out;
    }
    const LonLat c = centroid(p);
    if (const auto* r = std::get_if<Rotate>(&action)) {
        if (!std::isfinite(r->theta)) throw DegenerateGeometryError("non-finite rotation");
        const double cs = std::cos(r->theta), sn = std::sin(r->theta);
        for (auto& v : out.ring) {
            const double x = v.lon - c.lon, y = v.lat - c.lat;
            v.lon = c.lon + cs * x - sn * y;
            v.lat = c.lat + sn * x + cs * y;
        }
    } else {
        const auto& s = std::get<Scale>(action);
        if (!std::isfinite(s.bx) || !std::isfinite(s.by)) throw DegenerateGeometryError("non-finite scale");
        if (s.bx == 0.0 || s.by == 0.0) throw DegenerateGeometryError("zero scale factor");
        for (auto& v : out.ring) {
            v.lon = c.lon + s.bx * (v.lon - c.lon);
            v.lat = c.lat + s.by * (v.lat - c.lat);
        }
    }
    // Keep the ring closed bit-exactly.
    out.ring.back() = out.ring.front();
    return out;
}

// ------------------------------------------------------------ point queries

/// Even-odd rule; points exactly on an edge may go either way.
inline bool contains(const std::vector<LonLat>& ring, double lon, double lat)
{
    bool inside = false;
    for (std::size_t i = 0, j = ring.size() - 2; i + 1 < ring.size(); j = i++) {
        const LonLat& a = ring[i];
        const LonLat& b = ring[j];
        if ((a.lat > lat) != (b.lat > lat)) {
            const double x = a.lon + (lat - a.lat) * (b.lon - a.lon) / (b.lat - a.lat);
            if (lon < x) inside = !inside;
        }
    }
    return inside;
}

inline bool contains(const Polygon& p, LonLat q) { return p.ring.size() >= 4 && contains(p.ring, q.lon, q.lat); }

inline double point_segment_distance(double px, double py, double ax, double ay, double bx, double by)
{
    const double dx = bx - ax, dy = by - ay;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0 ? ((px - ax) * dx + (py - ay) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double qx = ax + t * dx - px, qy = ay + t * dy - py;
    return std::sqrt(qx * qx + qy * qy);
}

/// Closed-box test: does segment [a, b] touch the axis-aligned box?
/// Liang-Barsky parametric clipping.
inline bool segment_intersects_box(double ax, double ay, double bx, double by, double x0, double y0, double x1, double y1)
{
    double t0 = 0.0, t1 = 1.0;
    const double dx = bx - ax, dy = by - ay;
    const double p[4] = {-dx, dx, -dy, dy};
    const double q[4] = {ax - x0, x1 - ax, ay - y0, y1 - ay};
    for (int k = 0; k < 4; ++k) {
        if (p[k] == 0.0) {
            if (q[k] < 0.0) return false;
        } else {
            const double r = q[k] / p[k];
            if (p[k] < 0.0) {
                if (r > t1) return false;
                t0 = std::max(t0, r);
            } else {
                if (r < t0) return false;
                t1 = std::min(t1, r);
            }
        }
    }
    return t0 <= t1;
}

// ----------------------------------------------------------------- clipping

struct Box {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

inline Box box_of(const LonLatBox& b) { return Box{b.lon_min, b.lat_min, b.lon_max, b.lat_max}; }

namespace detail {

enum class Side { left, right, bottom, top };

inline bool inside_side(const LonLat& p, const Box& b, Side s)
{
    switch (s) {
    case Side::left: return p.lon >= b.x0;
    case Side::right: return p.lon <= b.x1;
    case Side::bottom: return p.lat >= b.y0;
    case Side::top: return p.lat <= b.y1;
    }
    return false;
}

// Intersection of segment [p, q] with a side line; the fixed coordinate is set
// exactly so later on-boundary tests can use equality.
inline LonLat side_intersection(const LonLat& p, const LonLat& q, const Box& b, Side s)
{
    if (s == Side::left || s == Side::right) {
        const double x = s == Side::left ? b.x0 : b.x1;
        const double t = (x - p.lon) / (q.lon - p.lon);
        return LonLat{x, p.lat + t * (q.lat - p.lat)};
    }
    const double y = s == Side::bottom ? b.y0 : b.y1;
    const double t = (y - p.lat) / (q.lat - p.lat);
    return LonLat{p.lon + t * (q.lon - p.lon), y};
}

// Open (unclosed) ring through one Sutherland-Hodgman pass.
inline std::vector<LonLat> sh_pass(const std::vector<LonLat>& in, const Box& b, Side s)
{
    std::vector<LonLat> out;
    if (in.empty()) return out;
    out.reserve(in.size() + 4);
    LonLat prev = in.back();
    bool prev_in = inside_side(prev, b, s);
    for (const LonLat& cur : in) {
        const bool cur_in = inside_side(cur, b, s);
        if (cur_in) {
            if (!prev_in) out.push_back(side_intersection(prev, cur, b, s));
            out.push_back(cur);
        } else if (prev_in) {
            out.push_back(side_intersection(prev, cur, b, s));
        }
        prev = cur;
        prev_in = cur_in;
    }
    return out;
}

inline bool on_same_side_line(const LonLat& p, const LonLat& q, const Box& b)
{
    return (p.lon == b.x0 && q.lon == b.x0) || (p.lon == b.x1 && q.lon == b.x1) || (p.lat == b.y0 && q.lat == b.y0) ||
           (p.lat == b.y1 && q.lat == b.y1);
}

// Counter-clockwise perimeter parameter in [0, 4) for a point on the box boundary.
inline double perimeter_param(const LonLat& p, const Box& b)
{
    const double w = b.x1 - b.x0, h = b.y1 - b.y0;
    if (p.lat == b.y0 && p.lon < b.x1) return (p.lon - b.x0) / w;
    if (p.lon == b.x1 && p.lat < b.y1) return 1.0 + (p.lat - b.y0) / h;
    if (p.lat == b.y1 && p.lon > b.x0) return 2.0 + (b.x1 - p.lon) / w;
    return 3.0 + (b.y1 - p.lat) / h;
}

inline LonLat box_corner(const Box& b, int k)
{
    switch (k & 3) {
    case 0: return {b.x0, b.y0};
    case 1: return {b.x1, b.y0};
    case 2: return {b.x1, b.y1};
    default: return {b.x0, b.y1};
    }
}

inline void push_unique(std::vector<LonLat>& ring, const LonLat& p)
{
    if (ring.empty() || !(ring.back() == p)) ring.push_back(p);
}

} // namespace detail

/// Intersection of a polygon with an axis-aligned box as simple polygons.
/// Sutherland-Hodgman clipping, then any degenerate bridges it leaves along the
/// box boundary are split by cutting the ring at its boundary runs and
/// re-joining the interior chains counter-clockwise around the box.
inline std::vector<Polygon> clip_to_box(const Polygon& p, const Box& box)
{
    std::vector<Polygon> result;
    if (p.ring.size() < 4) return result;

    std::vector<LonLat> ring(p.ring.begin(), p.ring.end() - 1);
    if (signed_area(p.ring) < 0) std::reverse(ring.begin(), ring.end());

    bool all_inside = true;
    for (const auto& v : ring) {
        if (v.lon < box.x0 || v.lon > box.x1 || v.lat < box.y0 || v.lat > box.y1) {
            all_inside = false;
            break;
        }
    }
    if (all_inside) {
        result.push_back(p);
        return result;
    }

    for (auto s : {detail::Side::left, detail::Side::right, detail::Side::bottom, detail::Side::top}) {
        ring = detail::sh_pass(ring, box, s);
        if (ring.empty()) return result;
    }
    {
        std::vector<LonLat> dedup;
        for (const auto& v : ring) detail::push_unique(dedup, v);
        while (dedup.size() > 1 && dedup.front() == dedup.back()) dedup.pop_back();
        ring = std::move(dedup);
    }
    if (ring.size() < 3) return result;

    const std::size_t n = ring.size();
    // Cut the ring into interior chains: maximal runs of edges not lying on a box side.
    std::size_t start = n;
    for (std::size_t i = 0; i < n; ++i) {
        if (detail::on_same_side_line(ring[(i + n - 1) % n], ring[i], box) && !detail::on_same_side_line(ring[i], ring[(i + 1) % n], box)) {
            start = i;
            break;
        }
    }
    auto emit = [&](std::vector<LonLat> r, int index) {
        r.push_back(r.front());
        if (signed_area(r) == 0.0) return;
        result.push_back(Polygon{index == 0 ? p.id : p.id + "#" + std::to_string(index), std::move(r)});
    };
    if (start == n) {
        // No boundary runs (or boundary only): the ring is already simple.
        emit(ring, 0);
        return result;
    }

    std::vector<std::vector<LonLat>> chains;
    for (std::size_t k = 0; k < n;) {
        const std::size_t i = (start + k) % n;
        if (detail::on_same_side_line(ring[i], ring[(i + 1) % n], box)) {
            ++k;
            continue;
        }
        std::vector<LonLat> chain{ring[i]};
        while (k < n && !detail::on_same_side_line(ring[(start + k) % n], ring[(start + k + 1) % n], box)) {
            chain.push_back(ring[(start + k + 1) % n]);
            ++k;
        }
        chains.push_back(std::move(chain));
    }

    std::vector<bool> used(chains.size(), false);
    int index = 0;
    for (std::size_t c0 = 0; c0 < chains.size(); ++c0) {
        if (used[c0]) continue;
        std::vector<LonLat> out;
        std::size_t c = c0;
        while (!used[c]) {
            used[c] = true;
            for (const auto& v : chains[c]) detail::push_unique(out, v);
            const double t_exit = detail::perimeter_param(chains[c].back(), box);
            // Nearest chain entry counter-clockwise from the exit.
            std::size_t best = c0;
            double best_d = 5.0;
            for (std::size_t j = 0; j < chains.size(); ++j) {
                if (used[j] && j != c0) continue;
                double d = detail::perimeter_param(chains[j].front(), box) - t_exit;
                if (d < 0) d += 4.0;
                if (d < best_d) {
                    best_d = d;
                    best = j;
                }
            }
            // Walk the box corners passed on the way.
            const double t_entry = t_exit + best_d;
            for (int k = static_cast<int>(std::floor(t_exit)) + 1; k <= static_cast<int>(std::floor(t_entry)); ++k) {
                if (static_cast<double>(k) < t_entry) detail::push_unique(out, detail::box_corner(box, k));
            }
            c = best;
        }
        while (out.size() > 1 && out.front() == out.back()) out.pop_back();
        if (out.size() >= 3) emit(std::move(out), index++);
    }
    return result;
}

inline std::vector<Polygon> clip_to_tile(const Polygon& p, const TileKey& t) { return clip_to_box(p, box_of(tile_bounds(t))); }

inline Box bounding_box(const std::vector<LonLat>& pts)
{
    Box b{pts.front().lon, pts.front().lat, pts.front().lon, pts.front().lat};
    for (const auto& v : pts) {
        b.x0 = std::min(b.x0, v.lon);
        b.x1 = std::max(b.x1, v.lon);
        b.y0 = std::min(b.y0, v.lat);
        b.y1 = std::max(b.y1, v.lat);
    }
    return b;
}

inline bool boxes_overlap(const Box& a, const Box& b) { return a.x0 <= b.x1 && b.x0 <= a.x1 && a.y0 <= b.y1 && b.y0 <= a.y1; }

/// Does the polygon share any area with the tile?
inline bool intersects_tile(const Polygon& p, const TileKey& t)
{
    const Box tb = box_of(tile_bounds(t));
    if (!boxes_overlap(bounding_box(p.ring), tb)) return false;
    return !clip_to_box(p, tb).empty();
}

} // namespace semand
