#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "semand/io.hpp"
#include "semand/log.hpp"
#include "semand/pipeline.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace semand;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Globals {
    std::uint64_t seed = 0;
    bool seed_given = false;
    unsigned threads = 1;
    std::string out;
};

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string file_stem(const TileKey& k) { return std::to_string(k.zoom) + "_" + std::to_string(k.x) + "_" + std::to_string(k.y); }

fs::path require_out(const Globals& g, const char* cmd)
{
    if (g.out.empty()) throw UsageError(std::string(cmd) + " needs --out");
    return g.out;
}

json load_json_file(const std::string& path)
{
    try {
        return json::parse(detail::read_file(path));
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

std::vector<std::string> channel_names(const std::vector<ChannelKind>& chans)
{
    std::vector<std::string> out;
    for (auto c : chans) out.push_back(to_string(c));
    return out;
}

std::vector<ChannelKind> channels_from_names(const std::vector<std::string>& names)
{
    std::vector<ChannelKind> out;
    for (const auto& n : names) out.push_back(parse_channel(n));
    return out;
}

// Snapshot written beside every output: a directory gets resolved_config.json,
// a file gets <file>.config.json.
void write_snapshot(const fs::path& out, bool is_dir, const std::string& command, const Globals& g, json body)
{
    body["command"] = command;
    body["seed"] = g.seed;
    body["threads"] = g.threads;
    body["version"] = kVersion;
    const fs::path p = is_dir ? out / "resolved_config.json" : fs::path(out.string() + ".config.json");
    detail::write_file(p, body.dump(2) + "\n");
}

fs::path geometry_dir_for(const std::string& flag, const fs::path& manifest)
{
    return flag.empty() ? manifest.parent_path() / "geometry" : fs::path(flag);
}

std::vector<TileSample> load_samples(const fs::path& manifest, const fs::path& geometry_dir, bool need_geometry, unsigned threads)
{
    std::vector<ManifestRow> rows;
    for (auto& r : read_manifest(manifest))
        if (r.label == "normal") rows.push_back(std::move(r));
    std::vector<TileSample> out(rows.size());
    std::vector<std::string> errors(rows.size());
    parallel_for(rows.size(), threads, [&](std::size_t i) {
        try {
            out[i].tile = rows[i].tile;
            out[i].fused = read_smnd(resolve_path(manifest, rows[i].path), rows[i].tile);
            const fs::path gp = geometry_dir / (file_stem(rows[i].tile) + ".jsonl");
            if (need_geometry || fs::exists(gp)) out[i].rcps = read_geometry(gp).rcps;
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    for (const auto& e : errors)
        if (!e.empty()) throw DataError(e);
    return out;
}

struct ScoreRow {
    std::string tile;
    std::string label;
    std::string method;
    double score = 0;
};

std::vector<ScoreRow> read_scores(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<ScoreRow> rows;
    std::string line;
    std::getline(in, line);
    if (line.rfind("tile,label,method,score", 0) != 0) throw DataError(path.string() + ": expected header tile,label,method,score");
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::stringstream ss(line);
        ScoreRow r;
        std::string score;
        std::getline(ss, r.tile, ',');
        std::getline(ss, r.label, ',');
        std::getline(ss, r.method, ',');
        std::getline(ss, score);
        try {
            std::size_t used = 0;
            r.score = std::stod(score, &used);
        } catch (const std::exception&) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad score '" + score + "'");
        }
        rows.push_back(r);
    }
    return rows;
}

std::optional<bool> truth_of(const std::string& label)
{
    if (label == "normal") return false;
    if (label == "augmented" || label == "anomalous") return true;
    return std::nullopt;
}

std::vector<ChannelKind> model_channels(const std::string& flag, const fs::path& checkpoint)
{
    if (!flag.empty()) return parse_modalities(flag);
    const fs::path cfg = checkpoint.parent_path() / "resolved_config.json";
    if (fs::exists(cfg)) {
        const json j = load_json_file(cfg.string());
        if (j.contains("channels")) return channels_from_names(j.at("channels").get<std::vector<std::string>>());
    }
    return all_channels();
}

// ------------------------------------------------------------ subcommands

int cmd_gen(const Globals& g, const std::string& config)
{
    const fs::path out = require_out(g, "gen");
    WorldConfig wc = config.empty() ? WorldConfig{} : world_config_from_json(load_json_file(config));
    if (g.seed_given) wc.seed = g.seed;
    const auto world = generate_world(wc, g.threads);
    std::vector<ManifestRow> rows(world.size());
    parallel_for(world.size(), g.threads, [&](std::size_t i) {
        const auto& t = world[i];
        const std::string stem = file_stem(t.tile);
        write_geometry(out / "geometry" / (stem + ".jsonl"), t.geometry);
        const FusedTile img = fuse(std::vector<Channel>(t.imagery));
        write_smnd(out / "imagery" / (stem + ".smnd"), img);
        rows[i] = ManifestRow{t.tile, "imagery/" + stem + ".smnd", "normal", std::nullopt, channel_names(img.channels)};
    });
    write_manifest(out / "manifest.jsonl", rows);
    write_snapshot(out, true, "gen", g, {{"world", to_json(wc)}, {"tiles", world.size()}});
    std::cout << "generated " << world.size() << " tiles in " << out.string() << "\n";
    return 0;
}

int cmd_rasterize(const Globals& g, const std::string& manifest_path, const std::string& geometry_flag)
{
    const fs::path out = require_out(g, "rasterize");
    const fs::path manifest(manifest_path);
    const fs::path geo = geometry_dir_for(geometry_flag, manifest);
    const auto rows = read_manifest(manifest);
    std::vector<ManifestRow> written(rows.size());
    std::vector<std::string> errors(rows.size());
    parallel_for(rows.size(), g.threads, [&](std::size_t i) {
        try {
            const auto& r = rows[i];
            const FusedTile img = read_smnd(resolve_path(manifest, r.path), r.tile);
            std::vector<Channel> imagery;
            for (auto k : {ChannelKind::SAT_R, ChannelKind::SAT_G, ChannelKind::SAT_B}) imagery.push_back(extract_channel(img, k));
            const std::string stem = file_stem(r.tile);
            const std::string geometry_text = detail::read_file(geo / (stem + ".jsonl"));
            detail::write_file(out / "geometry" / (stem + ".jsonl"), geometry_text);
            const FusedTile fused = rasterize_tile(read_geometry(out / "geometry" / (stem + ".jsonl")), imagery, img.grid);
            write_smnd(out / "tiles" / (stem + ".smnd"), fused);
            written[i] = ManifestRow{r.tile, "tiles/" + stem + ".smnd", "normal", std::nullopt, channel_names(fused.channels)};
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    for (const auto& e : errors)
        if (!e.empty()) throw DataError(e);
    write_manifest(out / "manifest.jsonl", written);
    write_snapshot(out, true, "rasterize", g,
                   {{"manifest", manifest_path}, {"geometry", geo.string()}, {"normalization", "per-tile max"}, {"tiles", written.size()}});
    std::cout << "rasterized " << written.size() << " tiles\n";
    return 0;
}

AugmentParams augment_params(const std::string& config, std::optional<double> rho, const std::string& actions)
{
    AugmentParams p = config.empty() ? AugmentParams{} : augment_params_from_json(load_json_file(config));
    if (rho) p.rho = *rho;
    if (!actions.empty()) {
        p.actions.clear();
        std::stringstream ss(actions);
        std::string a;
        while (std::getline(ss, a, ','))
            if (!a.empty()) p.actions.push_back(parse_action(a));
    }
    p.validate();
    return p;
}

int cmd_augment(const Globals& g, const std::string& manifest_path, const std::string& geometry_flag, const std::string& config, std::optional<double> rho,
                const std::string& strategy_name, const std::string& actions)
{
    const fs::path out = require_out(g, "augment");
    const fs::path manifest(manifest_path);
    const AugmentParams params = augment_params(config, rho, actions);
    const Strategy strategy = parse_strategy(strategy_name);
    const auto samples = load_samples(manifest, geometry_dir_for(geometry_flag, manifest), strategy == Strategy::rpa, g.threads);
    std::vector<std::optional<ManifestRow>> rows(samples.size());
    parallel_for(samples.size(), g.threads, [&](std::size_t i) {
        const auto& s = samples[i];
        const auto a = try_make_anomaly(s, strategy, params, derive_seed(g.seed, 0xa6, i));
        if (!a) return;
        const std::string stem = file_stem(s.tile);
        write_smnd(out / "tiles" / (stem + ".smnd"), a->tile);
        json sidecar{{"tile", s.tile.str()}, {"strategy", to_string(strategy)}, {"posedness", a->posedness}, {"attempts", a->attempts}};
        if (strategy == Strategy::rpa) sidecar["actions"] = to_json(a->log);
        detail::write_file(out / "actions" / (stem + ".json"), sidecar.dump() + "\n");
        rows[i] = ManifestRow{s.tile, "tiles/" + stem + ".smnd", "augmented", a->posedness, channel_names(a->tile.channels)};
    });
    std::vector<ManifestRow> kept;
    for (auto& r : rows)
        if (r) kept.push_back(std::move(*r));
    const std::size_t skipped = samples.size() - kept.size();
    if (skipped > 0) log_warn(std::to_string(skipped) + " tiles yielded no accepted augmentation");
    write_manifest(out / "manifest.jsonl", kept);
    write_snapshot(out, true, "augment", g,
                   {{"manifest", manifest_path}, {"strategy", to_string(strategy)}, {"augment", to_json(params)}, {"augmented", kept.size()},
                    {"skipped", skipped}});
    std::cout << "augmented=" << kept.size() << " skipped=" << skipped << "\n";
    return 0;
}

struct TrainFlags {
    std::string manifest, geometry, config, modalities = "RNP,M,SI", strategy = "rpa", weights, actions;
    std::optional<int> epochs, batch;
    std::optional<double> lr, rho;
};

int cmd_train(const Globals& g, const TrainFlags& f)
{
    const fs::path out = require_out(g, "train");
    if (fs::exists(out / "resolved_config.json")) throw ConfigError("run directory " + out.string() + " already holds a run");
    TrainOptions o;
    if (!f.config.empty()) {
        const json j = load_json_file(f.config);
        reject_unknown_keys(j, {"model", "train", "augment"}, "train config");
        if (j.contains("model")) o.model = model_config_from_json(j.at("model"));
        if (j.contains("train")) o.train = train_config_from_json(j.at("train"));
        if (j.contains("augment")) o.augment = augment_params_from_json(j.at("augment"));
    }
    if (f.epochs) o.train.epochs = *f.epochs;
    if (f.batch) o.train.batch_pairs = *f.batch;
    if (f.lr) o.train.peak_lr = *f.lr;
    if (f.rho) o.train.rho = *f.rho;
    if (!f.weights.empty()) {
        double bc = 0, inv = 0, cl = 0;
        char c1 = 0, c2 = 0;
        std::stringstream ss(f.weights);
        if (!(ss >> bc >> c1 >> inv >> c2 >> cl) || c1 != ',' || c2 != ',') throw UsageError("--weights expects bc,if,cl");
        o.train.weights = LossWeights{bc, cl, inv};
    }
    if (!f.actions.empty()) o.augment = augment_params("", std::nullopt, f.actions);
    if (g.seed_given) {
        o.train.seed = g.seed;
        o.model.seed = g.seed;
    }
    o.strategy = parse_strategy(f.strategy);
    o.channels = parse_modalities(f.modalities);
    o.threads = g.threads;

    const fs::path manifest(f.manifest);
    const auto samples = load_samples(manifest, geometry_dir_for(f.geometry, manifest), o.strategy == Strategy::rpa, g.threads);
    std::string log_csv = "step,epoch,lr,l_bc,l_cl,l_if,l_total\n";
    o.on_step = [&](const TrainLogRow& r) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "%lld,%d,%.6g,%.8g,%.8g,%.8g,%.8g\n", static_cast<long long>(r.step), r.epoch, r.lr, r.l_bc, r.l_cl, r.l_if, r.l_total);
        log_csv += buf;
    };
    const TrainResult res = train_model(std::span<const TileSample>(samples), o);

    fs::create_directories(out);
    save_checkpoint(res.state, out / "checkpoint.smck");
    detail::write_file(out / "train_log.csv", log_csv);
    TrainConfig resolved_train = o.train;
    resolved_train.steps_per_epoch = static_cast<std::int64_t>(samples.size()) / o.train.batch_pairs;
    AugmentParams resolved_aug = o.augment;
    resolved_aug.rho = o.train.rho;
    write_snapshot(out, true, "train", g,
                   {{"manifest", f.manifest},
                    {"modalities", f.modalities},
                    {"channels", channel_names(o.channels)},
                    {"strategy", to_string(o.strategy)},
                    {"model", to_json(res.state.config)},
                    {"train", to_json(resolved_train)},
                    {"augment", to_json(resolved_aug)},
                    {"tiles", samples.size()},
                    {"skipped_augmentations", res.skipped_augmentations},
                    {"seconds", res.seconds}});
    std::cout << "trained " << res.state.step << " steps in " << res.seconds << " s; final loss "
              << (res.log.empty() ? std::numeric_limits<double>::quiet_NaN() : res.log.back().l_total) << "\n";
    return 0;
}

struct ManifestTiles {
    std::vector<ManifestRow> rows;
    std::vector<FusedTile> tiles;
};

ManifestTiles load_manifest_tiles(const std::vector<std::string>& manifests, const std::vector<ChannelKind>& channels, unsigned threads)
{
    ManifestTiles m;
    std::vector<fs::path> sources;
    for (const auto& path : manifests)
        for (auto& r : read_manifest(path)) {
            m.rows.push_back(std::move(r));
            sources.push_back(path);
        }
    m.tiles.resize(m.rows.size());
    std::vector<std::string> errors(m.rows.size());
    parallel_for(m.rows.size(), threads, [&](std::size_t i) {
        try {
            m.tiles[i] = view_channels(read_smnd(resolve_path(sources[i], m.rows[i].path), m.rows[i].tile), channels);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    for (const auto& e : errors)
        if (!e.empty()) throw DataError(e);
    return m;
}

int cmd_score(const Globals& g, const std::string& checkpoint, const std::vector<std::string>& manifests, const std::string& method_name,
              const std::string& modalities, const std::vector<std::string>& fit_manifests)
{
    const fs::path out = require_out(g, "score");
    const ScoreMethod method = parse_score_method(method_name);
    const auto state = load_checkpoint<float>(checkpoint);
    const auto channels = model_channels(modalities, checkpoint);
    const auto data = load_manifest_tiles(manifests, channels, g.threads);
    std::optional<Prototype> proto;
    if (method != ScoreMethod::classifier) {
        std::vector<FusedTile> normals;
        if (fit_manifests.empty()) {
            for (std::size_t i = 0; i < data.rows.size(); ++i)
                if (data.rows[i].label == "normal") normals.push_back(data.tiles[i]);
        } else {
            normals = load_manifest_tiles(fit_manifests, channels, g.threads).tiles;
        }
        proto = fit_prototype(state, std::span<const FusedTile>(normals), g.threads);
    }
    const auto scores = score_tiles(state, std::span<const FusedTile>(data.tiles), method, proto ? &*proto : nullptr, g.threads);
    std::string csv = "tile,label,method,score\n";
    for (std::size_t i = 0; i < scores.size(); ++i) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", scores[i]);
        csv += data.rows[i].tile.str() + "," + data.rows[i].label + "," + to_string(method) + "," + buf + "\n";
    }
    detail::write_file(out, csv);
    write_snapshot(out, false, "score", g,
                   {{"checkpoint", checkpoint}, {"manifests", manifests}, {"method", to_string(method)}, {"channels", channel_names(channels)}});
    std::cout << "scored " << scores.size() << " tiles\n";
    return 0;
}

int cmd_eval(const Globals& g, const std::string& scores_path)
{
    std::vector<ScoredTile> scored;
    for (const auto& r : read_scores(scores_path)) {
        const auto truth = truth_of(r.label);
        if (!truth) throw DataError("score row for " + r.tile + " has label '" + r.label + "'");
        scored.push_back(ScoredTile{TileKey::parse(r.tile), r.score, parse_score_method(r.method), truth});
    }
    const double a = auc(std::span<const ScoredTile>(scored));
    char buf[32];
    std::snprintf(buf, sizeof buf, "auc=%.4f", a);
    std::cout << buf << "\n";
    if (!g.out.empty()) {
        detail::write_file(g.out, std::string(buf) + "\n");
        write_snapshot(g.out, false, "eval", g, {{"scores", scores_path}, {"auc", a}});
    }
    return 0;
}

int cmd_localize(const Globals& g, const std::string& checkpoint, const std::string& manifest, const std::string& tile, const std::string& label,
                 const std::string& modalities)
{
    const fs::path out = require_out(g, "localize");
    const TileKey key = TileKey::parse(tile);
    const auto state = load_checkpoint<float>(checkpoint);
    const auto channels = model_channels(modalities, checkpoint);
    std::optional<ManifestRow> row;
    for (auto& r : read_manifest(manifest))
        if (r.tile == key && (label.empty() || r.label == label)) {
            row = std::move(r);
            break;
        }
    if (!row) throw DataError("tile " + tile + " not found in " + manifest);
    const FusedTile t = view_channels(read_smnd(resolve_path(manifest, row->path), key), channels);
    const Saliency s = localize(state, t);
    write_smnd(out, fuse({s.map}));
    write_snapshot(out, false, "localize", g, {{"checkpoint", checkpoint}, {"manifest", manifest}, {"tile", tile}, {"all_zero", s.all_zero}});
    const auto c = mass_centroid(s.map);
    std::cout << "saliency all_zero=" << (s.all_zero ? 1 : 0);
    if (c) std::cout << " centroid=" << c->first << "," << c->second;
    std::cout << "\n";
    return 0;
}

int cmd_health_hist(const Globals& g, const std::string& scores_path, int bins, double threshold)
{
    std::vector<double> scores;
    for (const auto& r : read_scores(scores_path)) scores.push_back(r.score);
    const Histogram h = health_histogram(scores, bins, threshold);
    std::string csv = "bin_lo,bin_hi,count,fraction\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%.4f,%.4f,%zu,%.6f\n", h.edges[i], h.edges[i + 1], h.counts[i], h.fractions[i]);
        csv += buf;
    }
    if (g.out.empty()) {
        std::cout << csv;
    } else {
        detail::write_file(g.out, csv);
        write_snapshot(g.out, false, "health-hist", g, {{"scores", scores_path}, {"bins", bins}, {"threshold", threshold}});
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "fraction_below_%.2f=%.6f", h.threshold, h.fraction_below);
    std::cout << buf << "\n";
    return 0;
}

int cmd_matrix(const Globals& g, const std::string& spec_path)
{
    MatrixSpec spec = matrix_spec_from_json(load_json_file(spec_path));
    if (g.seed_given) spec.train.seed = g.seed;
    const auto cells = run_matrix(spec, g.threads);
    const std::string csv = matrix_csv(cells);
    if (g.out.empty()) {
        std::cout << csv;
    } else {
        detail::write_file(g.out, csv);
        write_snapshot(g.out, false, "matrix", g, {{"spec", load_json_file(spec_path)}, {"cells", cells.size()}});
        std::cout << "wrote " << cells.size() << " cells to " << g.out << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Multimodal map-tile anomaly detection toolkit"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    Globals g;
    auto* seed_opt = app.add_option("--seed", g.seed, "Random seed")->check(CLI::NonNegativeNumber);
    app.add_option("--threads", g.threads, "Worker threads")->check(CLI::Range(1u, 256u));
    app.add_option("--out", g.out, "Output directory or file");
    app.fallthrough();

    std::string config, manifest, geometry, strategy = "rpa", actions, method = "clf", modalities, checkpoint, tile, label, scores, spec;
    std::optional<double> rho;
    std::vector<std::string> manifests, fit_manifests;
    int bins = 10;
    double threshold = 0.6;
    TrainFlags tf;

    auto* gen = app.add_subcommand("gen", "Generate a synthetic world");
    gen->add_option("--config", config, "World config JSON")->check(CLI::ExistingFile);

    auto* ras = app.add_subcommand("rasterize", "Rasterize geometry and imagery into fused tiles");
    ras->add_option("--manifest", manifest, "Manifest written by gen")->required()->check(CLI::ExistingFile);
    ras->add_option("--geometry", geometry, "Geometry directory (default: <manifest dir>/geometry)");

    auto* aug = app.add_subcommand("augment", "Augment the RCPP channel of fused tiles");
    aug->add_option("--manifest", manifest, "Fused-tile manifest")->required()->check(CLI::ExistingFile);
    aug->add_option("--geometry", geometry, "Geometry directory (default: <manifest dir>/geometry)");
    aug->add_option("--config", config, "Augmentation parameters JSON")->check(CLI::ExistingFile);
    aug->add_option("--rho", rho, "Posedness threshold");
    aug->add_option("--strategy", strategy, "rpa|rotation|cutout|random_erase|cutpaste");
    aug->add_option("--actions", actions, "Comma-separated action subset");

    auto* train = app.add_subcommand("train", "Train a model on normal tiles");
    train->add_option("--manifest", tf.manifest, "Fused-tile manifest")->required()->check(CLI::ExistingFile);
    train->add_option("--geometry", tf.geometry, "Geometry directory (default: <manifest dir>/geometry)");
    train->add_option("--config", tf.config, "JSON with model/train/augment sections")->check(CLI::ExistingFile);
    train->add_option("--modalities", tf.modalities, "Modality set, e.g. RNP or RNP,M,SI");
    train->add_option("--strategy", tf.strategy, "Augmentation strategy");
    train->add_option("--epochs", tf.epochs, "Epochs")->check(CLI::PositiveNumber);
    train->add_option("--batch", tf.batch, "Pairs per minibatch")->check(CLI::Range(2, 1 << 20));
    train->add_option("--lr", tf.lr, "Peak learning rate")->check(CLI::PositiveNumber);
    train->add_option("--rho", tf.rho, "Posedness threshold");
    train->add_option("--weights", tf.weights, "Loss weights bc,if,cl");
    train->add_option("--actions", tf.actions, "Comma-separated action subset");

    auto* score = app.add_subcommand("score", "Score tiles with a trained model");
    score->add_option("--checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
    score->add_option("--manifest", manifests, "Manifest(s) to score")->required()->check(CLI::ExistingFile);
    score->add_option("--method", method, "clf|cosine|euclid|maha|gauss");
    score->add_option("--modalities", modalities, "Modality set (default: from the run directory)");
    score->add_option("--fit-manifest", fit_manifests, "Normal tiles for the prototype")->check(CLI::ExistingFile);

    auto* ev = app.add_subcommand("eval", "AUC of a labeled score file");
    ev->add_option("--scores", scores, "Score CSV")->required()->check(CLI::ExistingFile);

    auto* loc = app.add_subcommand("localize", "Saliency map for one tile");
    loc->add_option("--checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
    loc->add_option("--manifest", manifest, "Manifest holding the tile")->required()->check(CLI::ExistingFile);
    loc->add_option("--tile", tile, "Tile key z/x/y")->required();
    loc->add_option("--label", label, "normal|augmented (default: first match)");
    loc->add_option("--modalities", modalities, "Modality set (default: from the run directory)");

    auto* hist = app.add_subcommand("health-hist", "Histogram of scores");
    hist->add_option("--scores", scores, "Score CSV")->required()->check(CLI::ExistingFile);
    hist->add_option("--bins", bins, "Number of bins");
    hist->add_option("--threshold", threshold, "Reporting threshold");

    auto* mat = app.add_subcommand("matrix", "Run an experiment matrix");
    mat->add_option("--spec", spec, "Matrix spec JSON")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: kind=usage " << e.what() << "\n";
        return 2;
    }
    g.seed_given = seed_opt->count() > 0;

    try {
        if (*gen) return cmd_gen(g, config);
        if (*ras) return cmd_rasterize(g, manifest, geometry);
        if (*aug) return cmd_augment(g, manifest, geometry, config, rho, strategy, actions);
        if (*train) return cmd_train(g, tf);
        if (*score) return cmd_score(g, checkpoint, manifests, method, modalities, fit_manifests);
        if (*ev) return cmd_eval(g, scores);
        if (*loc) return cmd_localize(g, checkpoint, manifest, tile, label, modalities);
        if (*hist) return cmd_health_hist(g, scores, bins, threshold);
        if (*mat) return cmd_matrix(g, spec);
    } catch (const UsageError& e) {
        std::cerr << "error: kind=usage " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: kind=" << e.kind() << " " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: kind=" << e.kind() << " " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: kind=internal " << e.what() << "\n";
        return 1;
    }
    return 2;
}
