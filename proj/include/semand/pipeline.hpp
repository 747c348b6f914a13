#pragma once

// End-to-end wiring: training samples, anomaly generation, the SSL training
// loop, held-out evaluation splits, localization cases and the experiment
// matrix.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "semand/augment.hpp"
#include "semand/config.hpp"
#include "semand/errors.hpp"
#include "semand/log.hpp"
#include "semand/model.hpp"
#include "semand/parallel.hpp"
#include "semand/raster.hpp"
#include "semand/scoring.hpp"
#include "semand/synthgen.hpp"

namespace semand {

inline std::vector<ChannelKind> all_channels() { return {kCanonicalChannels.begin(), kCanonicalChannels.end()}; }

// ------------------------------------------------------------- parameters

inline nlohmann::json to_json(const AugmentParams& p)
{
    nlohmann::json actions = nlohmann::json::array();
    for (auto a : p.actions) actions.push_back(to_string(a));
    return {{"theta0", p.theta0},       {"theta1", p.theta1},         {"delta0", p.delta0},         {"delta1", p.delta1},
            {"beta_min", p.beta_min},   {"beta0_minus", p.beta0_minus}, {"beta0_plus", p.beta0_plus}, {"beta_max", p.beta_max},
            {"select_prob", p.select_prob}, {"rho", p.rho},           {"max_attempts", p.max_attempts}, {"actions", actions}};
}

inline AugmentParams augment_params_from_json(const nlohmann::json& j)
{
    reject_unknown_keys(j, {"theta0", "theta1", "delta0", "delta1", "beta_min", "beta0_minus", "beta0_plus", "beta_max", "select_prob", "rho", "max_attempts",
                            "actions"},
                        "augment config");
    AugmentParams p;
    try {
        p.theta0 = j.value("theta0", p.theta0);
        p.theta1 = j.value("theta1", p.theta1);
        p.delta0 = j.value("delta0", p.delta0);
        p.delta1 = j.value("delta1", p.delta1);
        p.beta_min = j.value("beta_min", p.beta_min);
        p.beta0_minus = j.value("beta0_minus", p.beta0_minus);
        p.beta0_plus = j.value("beta0_plus", p.beta0_plus);
        p.beta_max = j.value("beta_max", p.beta_max);
        p.select_prob = j.value("select_prob", p.select_prob);
        p.rho = j.value("rho", p.rho);
        p.max_attempts = j.value("max_attempts", p.max_attempts);
        if (j.contains("actions")) {
            p.actions.clear();
            for (const auto& a : j.at("actions")) p.actions.push_back(parse_action(a.get<std::string>()));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad augment config: ") + e.what());
    }
    p.validate();
    return p;
}

// ---------------------------------------------------------------- samples

/// A normal tile: all seven normalized channels plus its casement polygons.
struct TileSample {
    TileKey tile;
    FusedTile fused;
    std::vector<Polygon> rcps;
};

inline std::vector<TileSample> prepare_samples(std::span<const SynthTile> world, unsigned threads = 1)
{
    std::vector<TileSample> out(world.size());
    parallel_for(world.size(), threads, [&](std::size_t i) {
        out[i].tile = world[i].tile;
        out[i].fused = rasterize_tile(world[i]);
        out[i].rcps = world[i].geometry.rcps;
    });
    return out;
}

struct Anomaly {
    FusedTile tile; // all channels of the normal tile with RCPP replaced
    Channel normal_rcpp;
    Channel augmented_rcpp;
    double posedness = 0;
    int attempts = 0;
    ActionLog log; // empty for raster baselines
};

inline Anomaly make_anomaly(const TileSample& s, Strategy strategy, const AugmentParams& params, std::uint64_t seed)
{
    Anomaly a;
    if (strategy == Strategy::rpa) {
        auto rec = augment_with_posedness(std::span<const Polygon>(s.rcps), s.fused.grid, params, seed);
        a.normal_rcpp = std::move(rec.normal_rcpp);
        a.augmented_rcpp = std::move(rec.augmented_rcpp);
        a.posedness = rec.posedness;
        a.attempts = rec.attempts;
        a.log = std::move(rec.action_log);
    } else {
        a.normal_rcpp = extract_channel(s.fused, ChannelKind::RCPP);
        auto rec = baseline_with_posedness(a.normal_rcpp, as_baseline(strategy), params.rho, seed, params.max_attempts);
        a.augmented_rcpp = std::move(rec.augmented);
        a.posedness = rec.posedness;
        a.attempts = rec.attempts;
    }
    a.tile = replace_channel(s.fused, a.augmented_rcpp);
    return a;
}

/// nullopt when the tile cannot yield an accepted augmentation.
inline std::optional<Anomaly> try_make_anomaly(const TileSample& s, Strategy strategy, const AugmentParams& params, std::uint64_t seed)
{
    try {
        return make_anomaly(s, strategy, params, seed);
    } catch (const RejectionExhaustedError&) {
    } catch (const EmptyTileError&) {
    } catch (const UndefinedPosednessError&) {
    }
    return std::nullopt;
}

inline bool is_all_channels(const std::vector<ChannelKind>& channels)
{
    return channels.size() == kCanonicalChannels.size() && std::equal(channels.begin(), channels.end(), kCanonicalChannels.begin());
}

inline FusedTile view_channels(const FusedTile& t, const std::vector<ChannelKind>& channels)
{
    return is_all_channels(channels) && t.channels == channels ? t : select_channels(t, channels);
}

// --------------------------------------------------------------- training

struct TrainLogRow {
    std::int64_t step = 0;
    int epoch = 0;
    double lr = 0, l_bc = 0, l_cl = 0, l_if = 0, l_total = 0;
};

struct TrainOptions {
    ModelConfig model;
    TrainConfig train;
    AugmentParams augment;
    Strategy strategy = Strategy::rpa;
    std::vector<ChannelKind> channels = all_channels();
    unsigned threads = 1;
    /// Draw new augmentations every epoch; otherwise one fixed draw per tile.
    bool fresh_augmentations = true;
    std::function<void(const TrainLogRow&)> on_step;
};

struct TrainResult {
    ModelState<float> state;
    std::vector<TrainLogRow> log;
    std::size_t skipped_augmentations = 0;
    double seconds = 0;
};

/// SSL training over normal tiles. The model's input_channels and input_size
/// are taken from the channel selection and the data grid.
inline TrainResult train_model(std::span<const TileSample> data, TrainOptions opts)
{
    if (data.empty()) throw InsufficientDataError("no training tiles");
    const auto t_start = std::chrono::steady_clock::now();
    opts.model.input_channels = static_cast<int>(opts.channels.size());
    opts.model.input_size = data.front().fused.grid.size;
    opts.augment.rho = opts.train.rho;
    opts.augment.validate();
    const auto n_pairs = static_cast<std::int64_t>(opts.train.batch_pairs);
    opts.train.steps_per_epoch = static_cast<std::int64_t>(data.size()) / n_pairs;
    if (opts.train.steps_per_epoch < 1) throw InsufficientDataError("fewer training tiles than one batch");
    opts.train.validate();

    std::vector<FusedTile> selected;
    const bool subset = !is_all_channels(opts.channels);
    if (subset)
        for (const auto& s : data) selected.push_back(select_channels(s.fused, opts.channels));
    auto normal_of = [&](std::size_t i) -> const FusedTile& { return subset ? selected[i] : data[i].fused; };

    TrainResult res;
    res.state = init_model<float>(opts.model);
    for (int epoch = 0; epoch < opts.train.epochs; ++epoch) {
        std::vector<std::size_t> order(data.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng = make_rng(derive_seed(opts.train.seed, 0x0e0c, static_cast<std::uint64_t>(epoch)));
        shuffle(std::span<std::size_t>(order), rng);
        const std::uint64_t draw = opts.fresh_augmentations ? static_cast<std::uint64_t>(epoch) : 0;
        for (std::int64_t b = 0; b < opts.train.steps_per_epoch; ++b) {
            const auto first = static_cast<std::size_t>(b * n_pairs);
            std::vector<std::optional<FusedTile>> augs(static_cast<std::size_t>(n_pairs));
            parallel_for(augs.size(), opts.threads, [&](std::size_t k) {
                const std::size_t i = order[first + k];
                auto a = try_make_anomaly(data[i], opts.strategy, opts.augment, derive_seed(opts.train.seed, 0xa000 + draw, i));
                if (a) augs[k] = subset ? select_channels(a->tile, opts.channels) : std::move(a->tile);
            });
            std::vector<FusedTile> normals, augmented;
            for (std::size_t k = 0; k < augs.size(); ++k) {
                if (!augs[k]) {
                    ++res.skipped_augmentations;
                    continue;
                }
                normals.push_back(normal_of(order[first + k]));
                augmented.push_back(std::move(*augs[k]));
            }
            if (normals.size() < 2) continue;
            TrainLogRow row;
            row.epoch = epoch;
            row.lr = lr_at(res.state.step + 1, opts.train);
            const LossReport rep = train_step(res.state, std::span<const FusedTile>(normals), std::span<const FusedTile>(augmented), opts.train,
                                              std::nullopt, opts.threads);
            row.step = res.state.step;
            row.l_bc = rep.l_bc;
            row.l_cl = rep.l_cl;
            row.l_if = rep.l_if;
            row.l_total = rep.l_total;
            res.log.push_back(row);
            if (opts.on_step) opts.on_step(row);
        }
        if (!res.log.empty())
            log_info("epoch " + std::to_string(epoch) + " step " + std::to_string(res.state.step) + " loss " + std::to_string(res.log.back().l_total));
    }
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return res;
}

// ------------------------------------------------------------- evaluation

struct EvalSplit {
    std::vector<TileKey> keys;
    std::vector<FusedTile> normals;
    std::vector<std::pair<Strategy, std::vector<Anomaly>>> anomalies;

    const std::vector<Anomaly>& of(Strategy s) const
    {
        for (const auto& [k, v] : anomalies)
            if (k == s) return v;
        throw ConfigError(std::string("eval split has no ") + to_string(s) + " anomalies");
    }
};

/// Held-out normals plus one anomaly per tile for each strategy, all at the
/// same posedness threshold. Tiles that cannot be augmented are left without
/// an anomaly for that strategy.
inline EvalSplit make_eval_split(std::span<const TileSample> held_out, double rho, const std::vector<Strategy>& strategies, std::uint64_t seed,
                                 AugmentParams params = {}, unsigned threads = 1)
{
    if (held_out.size() < 2) throw ConfigError("eval split needs at least 2 held-out tiles");
    if (strategies.empty()) throw ConfigError("eval split needs at least one strategy");
    params.rho = rho;
    params.validate();
    EvalSplit split;
    for (const auto& s : held_out) {
        split.keys.push_back(s.tile);
        split.normals.push_back(s.fused);
    }
    for (std::size_t si = 0; si < strategies.size(); ++si) {
        std::vector<std::optional<Anomaly>> made(held_out.size());
        parallel_for(held_out.size(), threads, [&](std::size_t i) {
            made[i] = try_make_anomaly(held_out[i], strategies[si], params, derive_seed(seed, 0xe000 + static_cast<std::uint64_t>(strategies[si]), i));
        });
        std::vector<Anomaly> kept;
        for (auto& m : made)
            if (m) kept.push_back(std::move(*m));
        split.anomalies.emplace_back(strategies[si], std::move(kept));
    }
    return split;
}

template <typename T>
std::vector<double> score_tiles(const ModelState<T>& m, std::span<const FusedTile> tiles, ScoreMethod method, const Prototype* proto, unsigned threads = 1)
{
    const ForwardResult r = forward(m, tiles, threads);
    std::vector<double> out(tiles.size());
    for (std::size_t i = 0; i < tiles.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        if (method == ScoreMethod::classifier) {
            out[i] = r.s(row, 1);
        } else {
            if (!proto) throw ConfigError("OOD scoring needs a fitted prototype");
            out[i] = ood_score(r.z.row(row).transpose(), *proto, method);
        }
    }
    return out;
}

template <typename T>
Prototype fit_prototype(const ModelState<T>& m, std::span<const FusedTile> normals, unsigned threads = 1)
{
    return fit_prototype(forward(m, normals, threads).z);
}

/// AUC of `method` on the split's normals versus its `strategy` anomalies,
/// restricted to `channels`.
template <typename T>
double evaluate_auc(const ModelState<T>& m, const std::vector<ChannelKind>& channels, const EvalSplit& split, Strategy strategy, ScoreMethod method,
                    const Prototype* proto = nullptr, unsigned threads = 1)
{
    std::vector<FusedTile> normals, anomalous;
    for (const auto& t : split.normals) normals.push_back(view_channels(t, channels));
    for (const auto& a : split.of(strategy)) anomalous.push_back(view_channels(a.tile, channels));
    const auto sn = score_tiles(m, std::span<const FusedTile>(normals), method, proto, threads);
    const auto sa = score_tiles(m, std::span<const FusedTile>(anomalous), method, proto, threads);
    return auc(sn, sa);
}

// ----------------------------------------------------------- localization

struct LocalizationCase {
    TileKey tile;
    FusedTile augmented;
    Channel changed; // |augmented RCPP - normal RCPP|
    double posedness = 0;
};

/// One translated polygon per tile: a single-defect anomaly whose changed
/// pixels are known exactly.
inline std::optional<LocalizationCase> make_single_defect(const TileSample& s, const AugmentParams& params, std::uint64_t seed)
{
    if (s.rcps.empty()) return std::nullopt;
    const Channel normal = rasterize_presence(std::span<const Polygon>(s.rcps), s.fused.grid);
    for (int attempt = 0; attempt < params.max_attempts; ++attempt) {
        Rng rng = make_rng(derive_seed(seed, 0x51d, static_cast<std::uint64_t>(attempt)));
        const std::size_t j = uniform_index(rng, s.rcps.size());
        const LoggedAction shift{ActionKind::translate, symmetric_gap_uniform(rng, params.delta0, params.delta1),
                                 symmetric_gap_uniform(rng, params.delta0, params.delta1)};
        const ActionLog log{PolygonLog{j, s.rcps[j].id, {shift}}};
        const auto res = replay_actions(std::span<const Polygon>(s.rcps), s.tile, log);
        const Channel aug = rasterize_presence(std::span<const Polygon>(res.polygons), s.fused.grid);
        double rho = 0;
        try {
            rho = posedness(normal, aug);
        } catch (const UndefinedPosednessError&) {
            return std::nullopt;
        }
        if (rho <= params.rho) continue;
        LocalizationCase c;
        c.tile = s.tile;
        c.augmented = replace_channel(s.fused, aug);
        c.changed = Channel(ChannelKind::SALIENCY, s.fused.grid);
        for (std::size_t i = 0; i < aug.data.size(); ++i) c.changed.data[i] = std::abs(aug.data[i] - normal.data[i]);
        c.posedness = rho;
        return c;
    }
    return std::nullopt;
}

// ------------------------------------------------------- experiment matrix

struct MatrixSpec {
    WorldConfig world;
    int train_tiles = 256;
    int eval_tiles = 64;
    ModelConfig model;
    TrainConfig train;
    AugmentParams augment;
    std::string modalities = "RNP,M,SI";
    Strategy strategy = Strategy::rpa;
    std::vector<Strategy> eval_strategies{Strategy::rpa};
    ScoreMethod method = ScoreMethod::classifier;

    // Axes, each varied on its own against the base settings above.
    std::vector<std::array<double, 3>> loss_weights; // (lambda_BC, lambda_IF, lambda_CL)
    std::vector<std::string> modality_sets;
    std::vector<int> action_cardinality;
    std::vector<double> rho_values;
    std::vector<Strategy> strategies;

    bool empty() const
    {
        return loss_weights.empty() && modality_sets.empty() && action_cardinality.empty() && rho_values.empty() && strategies.empty();
    }
};

inline MatrixSpec matrix_spec_from_json(const nlohmann::json& j)
{
    reject_unknown_keys(j, {"world", "train_tiles", "eval_tiles", "model", "train", "augment", "modalities", "strategy", "eval_strategies", "method", "axes"},
                        "matrix spec");
    MatrixSpec m;
    try {
        if (j.contains("world")) m.world = world_config_from_json(j.at("world"));
        m.train_tiles = j.value("train_tiles", m.train_tiles);
        m.eval_tiles = j.value("eval_tiles", m.eval_tiles);
        if (j.contains("model")) m.model = model_config_from_json(j.at("model"));
        if (j.contains("train")) m.train = train_config_from_json(j.at("train"));
        if (j.contains("augment")) m.augment = augment_params_from_json(j.at("augment"));
        m.modalities = j.value("modalities", m.modalities);
        if (j.contains("strategy")) m.strategy = parse_strategy(j.at("strategy").get<std::string>());
        if (j.contains("eval_strategies")) {
            m.eval_strategies.clear();
            for (const auto& s : j.at("eval_strategies")) m.eval_strategies.push_back(parse_strategy(s.get<std::string>()));
        }
        if (j.contains("method")) m.method = parse_score_method(j.at("method").get<std::string>());
        if (j.contains("axes")) {
            const auto& a = j.at("axes");
            reject_unknown_keys(a, {"loss_weights", "modalities", "action_cardinality", "rho", "strategies"}, "matrix axes");
            if (a.contains("loss_weights"))
                for (const auto& w : a.at("loss_weights")) m.loss_weights.push_back({w.at(0).get<double>(), w.at(1).get<double>(), w.at(2).get<double>()});
            if (a.contains("modalities"))
                for (const auto& s : a.at("modalities")) m.modality_sets.push_back(s.get<std::string>());
            if (a.contains("action_cardinality"))
                for (const auto& k : a.at("action_cardinality")) m.action_cardinality.push_back(k.get<int>());
            if (a.contains("rho"))
                for (const auto& r : a.at("rho")) m.rho_values.push_back(r.get<double>());
            if (a.contains("strategies"))
                for (const auto& s : a.at("strategies")) m.strategies.push_back(parse_strategy(s.get<std::string>()));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad matrix spec: ") + e.what());
    }
    for (int k : m.action_cardinality)
        if (k < 1 || k > 4) throw ConfigError("action cardinality must lie in [1, 4]");
    if (m.train_tiles < 2 || m.eval_tiles < 2) throw ConfigError("matrix needs at least 2 train and 2 eval tiles");
    return m;
}

struct MatrixCell {
    std::string axis;
    std::string value;
    std::string train_strategy;
    std::string eval_strategy;
    std::string method;
    double auc = std::numeric_limits<double>::quiet_NaN();
    std::string status = "ok";
};

inline std::string matrix_csv(const std::vector<MatrixCell>& cells)
{
    std::string out = "axis,value,train_strategy,eval_strategy,method,auc,status\n";
    for (const auto& c : cells) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", c.auc);
        out += c.axis + ",\"" + c.value + "\"," + c.train_strategy + "," + c.eval_strategy + "," + c.method + "," + (std::isnan(c.auc) ? "" : buf) + "," +
               c.status + "\n";
    }
    return out;
}

/// Runs every cell of the matrix end to end. A failing cell is recorded with
/// its error kind and the matrix continues.
inline std::vector<MatrixCell> run_matrix(const MatrixSpec& spec, unsigned threads = 1)
{
    std::vector<MatrixCell> cells;
    if (spec.empty()) return cells;

    WorldConfig wc = spec.world;
    const auto world = generate_world(wc, threads);
    if (world.size() < static_cast<std::size_t>(spec.train_tiles + spec.eval_tiles)) throw ConfigError("world has fewer tiles than train_tiles + eval_tiles");
    const auto samples = prepare_samples(std::span<const SynthTile>(world), threads);
    const std::span<const TileSample> train(samples.data(), static_cast<std::size_t>(spec.train_tiles));
    const std::span<const TileSample> held(samples.data() + spec.train_tiles, static_cast<std::size_t>(spec.eval_tiles));

    std::vector<Strategy> eval_strats = spec.eval_strategies;
    for (auto s : spec.strategies)
        if (std::find(eval_strats.begin(), eval_strats.end(), s) == eval_strats.end()) eval_strats.push_back(s);
    std::vector<std::pair<double, EvalSplit>> splits;
    auto split_for = [&](double rho) -> const EvalSplit& {
        for (const auto& [r, s] : splits)
            if (r == rho) return s;
        splits.emplace_back(rho, make_eval_split(held, rho, eval_strats, derive_seed(spec.train.seed, 0xe5), spec.augment, threads));
        return splits.back().second;
    };

    auto run_cell = [&](const std::string& axis, const std::string& value, TrainOptions opts, const std::vector<Strategy>& evals) {
        try {
            const auto result = train_model(train, opts);
            std::optional<Prototype> proto;
            if (spec.method != ScoreMethod::classifier) {
                std::vector<FusedTile> normals;
                for (std::size_t i = 0; i < std::min<std::size_t>(train.size(), 512); ++i) normals.push_back(view_channels(train[i].fused, opts.channels));
                proto = fit_prototype(result.state, std::span<const FusedTile>(normals), threads);
            }
            const EvalSplit& split = split_for(opts.train.rho);
            for (auto es : evals) {
                MatrixCell c{axis, value, to_string(opts.strategy), to_string(es), to_string(spec.method)};
                c.auc = evaluate_auc(result.state, opts.channels, split, es, spec.method, proto ? &*proto : nullptr, threads);
                cells.push_back(c);
            }
        } catch (const Error& e) {
            for (auto es : evals) {
                MatrixCell c{axis, value, to_string(opts.strategy), to_string(es), to_string(spec.method)};
                c.status = "failed:" + e.kind();
                cells.push_back(c);
            }
            log_warn("matrix cell " + axis + "=" + value + " failed: " + e.what());
        }
    };

    TrainOptions base;
    base.model = spec.model;
    base.train = spec.train;
    base.augment = spec.augment;
    base.strategy = spec.strategy;
    base.channels = parse_modalities(spec.modalities);
    base.threads = threads;

    auto fmt = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%g", v);
        return std::string(buf);
    };

    for (const auto& w : spec.loss_weights) {
        TrainOptions o = base;
        o.train.weights = LossWeights{w[0], w[2], w[1]};
        run_cell("loss_weights", fmt(w[0]) + "/" + fmt(w[1]) + "/" + fmt(w[2]), o, spec.eval_strategies);
    }
    for (const auto& mods : spec.modality_sets) {
        TrainOptions o = base;
        try {
            o.channels = parse_modalities(mods);
        } catch (const Error& e) {
            MatrixCell c{"modalities", mods, to_string(o.strategy), "-", to_string(spec.method)};
            c.status = "failed:" + e.kind();
            cells.push_back(c);
            continue;
        }
        run_cell("modalities", mods, o, spec.eval_strategies);
    }
    for (int k : spec.action_cardinality) {
        // Average over every action subset of size k.
        const auto& acts = all_actions();
        std::vector<MatrixCell> subs;
        const std::size_t before = cells.size();
        for (unsigned mask = 1; mask < 16; ++mask) {
            if (std::popcount(mask) != k) continue;
            TrainOptions o = base;
            o.augment.actions.clear();
            for (unsigned b = 0; b < 4; ++b)
                if (mask & (1u << b)) o.augment.actions.push_back(acts[b]);
            run_cell("action_subset", std::to_string(mask), o, spec.eval_strategies);
        }
        for (auto es : spec.eval_strategies) {
            double sum = 0;
            int n = 0;
            bool failed = false;
            for (std::size_t i = before; i < cells.size(); ++i) {
                if (cells[i].eval_strategy != to_string(es)) continue;
                if (cells[i].status != "ok") failed = true;
                sum += cells[i].auc;
                ++n;
            }
            MatrixCell c{"action_cardinality", std::to_string(k), to_string(base.strategy), to_string(es), to_string(spec.method)};
            if (failed || n == 0)
                c.status = "failed:subset";
            else
                c.auc = sum / n;
            subs.push_back(c);
        }
        cells.insert(cells.end(), subs.begin(), subs.end());
    }
    for (double rho : spec.rho_values) {
        TrainOptions o = base;
        o.train.rho = rho;
        run_cell("rho", fmt(rho), o, spec.eval_strategies);
    }
    for (auto s : spec.strategies) {
        TrainOptions o = base;
        o.strategy = s;
        run_cell("strategy", to_string(s), o, spec.strategies);
    }
    return cells;
}

} // namespace semand
