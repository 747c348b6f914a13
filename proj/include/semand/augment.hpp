#pragma once

// RandPolyAugment over a tile's casement polygons, posedness, the
// acceptance-rejection wrapper, and raster baseline augmenters.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "semand/errors.hpp"
#include "semand/geometry.hpp"
#include "semand/raster.hpp"
#include "semand/rng.hpp"

namespace semand {

enum class ActionKind { rotate, translate, scale, remove };

inline const char* to_string(ActionKind a)
{
    switch (a) {
    case ActionKind::rotate: return "rotate";
    case ActionKind::translate: return "translate";
    case ActionKind::scale: return "scale";
    case ActionKind::remove: return "delete";
    }
    return "?";
}

inline ActionKind parse_action(const std::string& s)
{
    if (s == "rotate") return ActionKind::rotate;
    if (s == "translate") return ActionKind::translate;
    if (s == "scale") return ActionKind::scale;
    if (s == "delete") return ActionKind::remove;
    throw ConfigError("unknown augmentation action '" + s + "'");
}

inline const std::vector<ActionKind>& all_actions()
{
    static const std::vector<ActionKind> a{ActionKind::rotate, ActionKind::translate, ActionKind::scale, ActionKind::remove};
    return a;
}

struct AugmentParams {
    double theta0 = std::numbers::pi / 6;
    double theta1 = std::numbers::pi / 2;
    double delta0 = 0.00006; // decimal degrees
    double delta1 = 0.00012;
    double beta_min = 0.2;
    double beta0_minus = 0.7;
    double beta0_plus = 1.4;
    double beta_max = 3.0;
    double select_prob = 0.5;
    double rho = 0.10;
    int max_attempts = 1000;
    /// Allowed action set A; subsets support cardinality sweeps.
    std::vector<ActionKind> actions = all_actions();

    void validate() const
    {
        if (!(0 < theta0 && theta0 < theta1)) throw ConfigError("require 0 < theta0 < theta1");
        if (!(0 < delta0 && delta0 < delta1)) throw ConfigError("require 0 < delta0 < delta1");
        if (!(0 < beta_min && beta_min < beta0_minus && beta0_minus < 1 && 1 < beta0_plus && beta0_plus < beta_max))
            throw ConfigError("require 0 < beta- < beta0- < 1 < beta0+ < beta+");
        if (!(0 < select_prob && select_prob < 1)) throw ConfigError("require 0 < p_s < 1");
        if (!(rho >= 0)) throw ConfigError("require rho >= 0");
        if (max_attempts < 1) throw ConfigError("require max_attempts >= 1");
        if (actions.empty()) throw ConfigError("action set must not be empty");
    }
};

/// One applied action. rotate: a = theta; translate: (a, b) = (dx, dy);
/// scale: (a, b) = (beta_x, beta_y); delete: no parameters.
struct LoggedAction {
    ActionKind kind = ActionKind::rotate;
    double a = 0;
    double b = 0;
};

struct PolygonLog {
    std::size_t index = 0; // position in the input polygon list
    std::string id;
    std::vector<LoggedAction> actions;
};

using ActionLog = std::vector<PolygonLog>;

struct AugmentResult {
    std::vector<Polygon> polygons;
    ActionLog log;
};

namespace detail {

inline LoggedAction sample_action(ActionKind kind, const AugmentParams& p, Rng& rng)
{
    LoggedAction a{kind, 0, 0};
    switch (kind) {
    case ActionKind::rotate: a.a = symmetric_gap_uniform(rng, p.theta0, p.theta1); break;
    case ActionKind::translate:
        a.a = symmetric_gap_uniform(rng, p.delta0, p.delta1);
        a.b = symmetric_gap_uniform(rng, p.delta0, p.delta1);
        break;
    case ActionKind::scale:
        a.a = two_interval_uniform(rng, p.beta_min, p.beta0_minus, p.beta0_plus, p.beta_max);
        a.b = two_interval_uniform(rng, p.beta_min, p.beta0_minus, p.beta0_plus, p.beta_max);
        break;
    case ActionKind::remove: break;
    }
    return a;
}

/// Applies a logged sequence; returns false when the polygon was deleted.
inline bool apply_logged(Polygon& poly, const std::vector<LoggedAction>& actions)
{
    for (const auto& a : actions) {
        switch (a.kind) {
        case ActionKind::rotate: poly = apply_affine(poly, Rotate{a.a}); break;
        case ActionKind::translate: poly = apply_affine(poly, Translate{a.a, a.b}); break;
        case ActionKind::scale: poly = apply_affine(poly, Scale{a.a, a.b}); break;
        case ActionKind::remove: return false;
        }
    }
    return true;
}

inline AugmentResult assemble(std::span<const Polygon> polys, const TileKey& tile, const ActionLog& log)
{
    AugmentResult out;
    out.log = log;
    std::vector<const PolygonLog*> by_index(polys.size(), nullptr);
    for (const auto& pl : log) {
        if (pl.index >= polys.size()) throw DataError("action log references polygon index out of range");
        by_index[pl.index] = &pl;
    }
    for (std::size_t j = 0; j < polys.size(); ++j) {
        if (!by_index[j]) {
            out.polygons.push_back(polys[j]);
            continue;
        }
        Polygon p = polys[j];
        if (!apply_logged(p, by_index[j]->actions)) continue;
        for (auto& piece : clip_to_tile(p, tile)) out.polygons.push_back(std::move(piece));
    }
    return out;
}

} // namespace detail

/// One RandPolyAugment draw over the tile's polygons. Selection and each
/// selected polygon's action sequence use independent streams derived from
/// `seed`, so a draw is a pure function of its inputs.
inline AugmentResult rand_poly_augment(std::span<const Polygon> polys, const TileKey& tile, const AugmentParams& params, std::uint64_t seed)
{
    params.validate();
    if (polys.empty()) throw EmptyTileError("tile " + tile.str() + " has no polygons to augment");

    Rng select_rng = make_rng(derive_seed(seed, 0));
    std::vector<std::size_t> selected;
    for (std::size_t j = 0; j < polys.size(); ++j)
        if (bernoulli(select_rng, params.select_prob)) selected.push_back(j);
    if (selected.empty()) selected.push_back(uniform_index(select_rng, polys.size()));

    ActionLog log;
    for (std::size_t j : selected) {
        Rng rng = make_rng(derive_seed(seed, 1, j));
        std::vector<ActionKind> chosen;
        for (auto a : params.actions)
            if (bernoulli(rng, 0.5)) chosen.push_back(a);
        if (chosen.empty()) chosen.push_back(params.actions[uniform_index(rng, params.actions.size())]);
        shuffle(std::span<ActionKind>(chosen), rng);

        PolygonLog pl{j, polys[j].id, {}};
        for (auto kind : chosen) {
            pl.actions.push_back(detail::sample_action(kind, params, rng));
            if (kind == ActionKind::remove) break;
        }
        log.push_back(std::move(pl));
    }
    return detail::assemble(polys, tile, log);
}

/// Re-applies a recorded action log to the original polygons.
inline AugmentResult replay_actions(std::span<const Polygon> polys, const TileKey& tile, const ActionLog& log)
{
    return detail::assemble(polys, tile, log);
}

/// ||augmented - normal||_F / ||normal||_F.
inline double posedness(const Channel& normal, const Channel& augmented)
{
    if (!(normal.grid == augmented.grid) || normal.data.size() != augmented.data.size()) throw AlignmentError("posedness channels on different grids");
    double diff = 0.0, base = 0.0;
    for (std::size_t i = 0; i < normal.data.size(); ++i) {
        const double d = static_cast<double>(augmented.data[i]) - static_cast<double>(normal.data[i]);
        diff += d * d;
        base += static_cast<double>(normal.data[i]) * static_cast<double>(normal.data[i]);
    }
    if (base == 0.0) throw UndefinedPosednessError("normal channel is all zero");
    return std::sqrt(diff / base);
}

struct AugmentationRecord {
    TileKey tile;
    Channel normal_rcpp;
    Channel augmented_rcpp;
    double posedness = 0;
    ActionLog action_log;
    std::uint64_t seed = 0;
    std::uint64_t attempt_seed = 0;
    int attempts = 0;
};

/// Acceptance-rejection: redraw with fresh sub-seeds until posedness > rho.
inline AugmentationRecord augment_with_posedness(std::span<const Polygon> polys, const PixelGrid& grid, const AugmentParams& params, std::uint64_t seed)
{
    params.validate();
    if (polys.empty()) throw EmptyTileError("tile " + grid.tile.str() + " has no polygons to augment");
    AugmentationRecord rec;
    rec.tile = grid.tile;
    rec.seed = seed;
    rec.normal_rcpp = rasterize_presence(polys, grid);
    for (int attempt = 0; attempt < params.max_attempts; ++attempt) {
        const std::uint64_t sub = derive_seed(seed, 2, static_cast<std::uint64_t>(attempt));
        auto res = rand_poly_augment(polys, grid.tile, params, sub);
        Channel aug = rasterize_presence(std::span<const Polygon>(res.polygons), grid);
        const double rho = posedness(rec.normal_rcpp, aug);
        if (rho > params.rho) {
            rec.augmented_rcpp = std::move(aug);
            rec.posedness = rho;
            rec.action_log = std::move(res.log);
            rec.attempt_seed = sub;
            rec.attempts = attempt + 1;
            return rec;
        }
    }
    throw RejectionExhaustedError("no augmentation of tile " + grid.tile.str() + " exceeded rho=" + std::to_string(params.rho) + " in " +
                                  std::to_string(params.max_attempts) + " attempts");
}

inline nlohmann::json to_json(const ActionLog& log)
{
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& pl : log) {
        nlohmann::json acts = nlohmann::json::array();
        for (const auto& a : pl.actions) {
            nlohmann::json ja{{"action", to_string(a.kind)}};
            if (a.kind == ActionKind::rotate) ja["theta"] = a.a;
            if (a.kind == ActionKind::translate) {
                ja["dx"] = a.a;
                ja["dy"] = a.b;
            }
            if (a.kind == ActionKind::scale) {
                ja["bx"] = a.a;
                ja["by"] = a.b;
            }
            acts.push_back(std::move(ja));
        }
        arr.push_back({{"index", pl.index}, {"id", pl.id}, {"actions", std::move(acts)}});
    }
    return arr;
}

inline ActionLog action_log_from_json(const nlohmann::json& arr)
{
    ActionLog log;
    try {
        for (const auto& jp : arr) {
            PolygonLog pl{jp.at("index").get<std::size_t>(), jp.value("id", std::string{}), {}};
            for (const auto& ja : jp.at("actions")) {
                LoggedAction a{parse_action(ja.at("action").get<std::string>()), 0, 0};
                if (a.kind == ActionKind::rotate) a.a = ja.at("theta").get<double>();
                if (a.kind == ActionKind::translate) {
                    a.a = ja.at("dx").get<double>();
                    a.b = ja.at("dy").get<double>();
                }
                if (a.kind == ActionKind::scale) {
                    a.a = ja.at("bx").get<double>();
                    a.b = ja.at("by").get<double>();
                }
                pl.actions.push_back(a);
            }
            log.push_back(std::move(pl));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed action log: ") + e.what());
    }
    return log;
}

// ------------------------------------------------------- raster baselines

enum class BaselineStrategy { rotation90, cutout, random_erase, cutpaste };

inline const char* to_string(BaselineStrategy s)
{
    switch (s) {
    case BaselineStrategy::rotation90: return "rotation";
    case BaselineStrategy::cutout: return "cutout";
    case BaselineStrategy::random_erase: return "random_erase";
    case BaselineStrategy::cutpaste: return "cutpaste";
    }
    return "?";
}

struct Rect {
    int row = 0, col = 0, height = 0, width = 0;
};

namespace detail {

inline Rect random_rect(int size, Rng& rng)
{
    const int lo = std::max(1, size / 16), hi = std::max(lo, size / 4);
    Rect r;
    r.height = lo + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(hi - lo + 1)));
    r.width = lo + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(hi - lo + 1)));
    r.row = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(size - r.height + 1)));
    r.col = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(size - r.width + 1)));
    return r;
}

} // namespace detail

/// Rotates a square channel counter-clockwise by quarter_turns * 90 degrees.
inline Channel rotate90(const Channel& ch, int quarter_turns)
{
    const int n = ch.grid.size;
    Channel out = ch;
    quarter_turns = ((quarter_turns % 4) + 4) % 4;
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            int sr = r, sc = c;
            switch (quarter_turns) {
            case 1: sr = c, sc = n - 1 - r; break;
            case 2: sr = n - 1 - r, sc = n - 1 - c; break;
            case 3: sr = n - 1 - c, sc = r; break;
            default: break;
            }
            out.at(r, c) = ch.at(sr, sc);
        }
    }
    return out;
}

/// Copies the rect at (from) onto the same-sized rect at (to).
inline Channel paste_rect(const Channel& ch, const Rect& from, int to_row, int to_col)
{
    Channel out = ch;
    for (int r = 0; r < from.height; ++r)
        for (int c = 0; c < from.width; ++c) out.at(to_row + r, to_col + c) = ch.at(from.row + r, from.col + c);
    return out;
}

inline Channel baseline_augment(const Channel& ch, BaselineStrategy strategy, std::uint64_t seed)
{
    Rng rng = make_rng(seed);
    const int n = ch.grid.size;
    switch (strategy) {
    case BaselineStrategy::rotation90: return rotate90(ch, static_cast<int>(uniform_index(rng, 4)));
    case BaselineStrategy::cutout: {
        Channel out = ch;
        const Rect r = detail::random_rect(n, rng);
        for (int i = 0; i < r.height; ++i)
            for (int j = 0; j < r.width; ++j) out.at(r.row + i, r.col + j) = 0.0f;
        return out;
    }
    case BaselineStrategy::random_erase: {
        Channel out = ch;
        const Rect r = detail::random_rect(n, rng);
        for (int i = 0; i < r.height; ++i)
            for (int j = 0; j < r.width; ++j) out.at(r.row + i, r.col + j) = static_cast<float>(uniform01(rng));
        return out;
    }
    case BaselineStrategy::cutpaste: {
        const Rect r = detail::random_rect(n, rng);
        const int to_row = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n - r.height + 1)));
        const int to_col = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n - r.width + 1)));
        return paste_rect(ch, r, to_row, to_col);
    }
    }
    return ch;
}

struct BaselineRecord {
    Channel augmented;
    double posedness = 0;
    int attempts = 0;
};

/// The same acceptance-rejection wrapper, applied to a raster baseline.
inline BaselineRecord baseline_with_posedness(const Channel& normal, BaselineStrategy strategy, double rho, std::uint64_t seed, int max_attempts = 1000)
{
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        Channel aug = baseline_augment(normal, strategy, derive_seed(seed, 3, static_cast<std::uint64_t>(attempt)));
        const double p = posedness(normal, aug);
        if (p > rho) return BaselineRecord{std::move(aug), p, attempt + 1};
    }
    throw RejectionExhaustedError(std::string(to_string(strategy)) + " augmentation never exceeded rho=" + std::to_string(rho));
}

// -------------------------------------------------- strategy selection

/// Anomaly generation strategy: RandPolyAugment or a raster baseline.
enum class Strategy { rpa, rotation90, cutout, random_erase, cutpaste };

inline const char* to_string(Strategy s)
{
    switch (s) {
    case Strategy::rpa: return "rpa";
    case Strategy::rotation90: return "rotation";
    case Strategy::cutout: return "cutout";
    case Strategy::random_erase: return "random_erase";
    case Strategy::cutpaste: return "cutpaste";
    }
    return "?";
}

inline Strategy parse_strategy(const std::string& s)
{
    for (auto k : {Strategy::rpa, Strategy::rotation90, Strategy::cutout, Strategy::random_erase, Strategy::cutpaste})
        if (s == to_string(k)) return k;
    throw ConfigError("unknown augmentation strategy '" + s + "'");
}

inline BaselineStrategy as_baseline(Strategy s)
{
    switch (s) {
    case Strategy::rotation90: return BaselineStrategy::rotation90;
    case Strategy::cutout: return BaselineStrategy::cutout;
    case Strategy::random_erase: return BaselineStrategy::random_erase;
    case Strategy::cutpaste: return BaselineStrategy::cutpaste;
    default: throw ConfigError("rpa is not a raster baseline");
    }
}

} // namespace semand
