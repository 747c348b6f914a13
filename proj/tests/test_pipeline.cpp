#include <gtest/gtest.h>

#include <numeric>
#include <set>

#include "semand/pipeline.hpp"
#include "test_common.hpp"

using namespace semand;

namespace {

WorldConfig world(std::uint64_t seed, int cols, int rows, int grid = 64)
{
    WorldConfig c;
    c.seed = seed;
    c.tile_cols = cols;
    c.tile_rows = rows;
    c.grid_size = grid;
    return c;
}

std::vector<TileSample> samples_of(const WorldConfig& c)
{
    const auto w = generate_world(c);
    return prepare_samples(std::span<const SynthTile>(w));
}

ModelConfig tiny_model()
{
    ModelConfig m;
    m.conv_stages = {{8, 3, 2}, {16, 3, 2}, {32, 3, 2}};
    m.h_dim = 32;
    m.z_dim = 16;
    m.g_hidden = {32, 16};
    m.k_hidden = {16, 8};
    m.seed = 5;
    return m;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

} // namespace

TEST(Samples, SevenAlignedChannels)
{
    const auto s = samples_of(world(1, 3, 2));
    ASSERT_EQ(s.size(), 6u);
    for (const auto& t : s) {
        EXPECT_EQ(t.fused.channels, all_channels());
        EXPECT_EQ(t.fused.grid.size, 64);
        EXPECT_EQ(t.fused.grid.tile, t.tile);
        EXPECT_FALSE(t.rcps.empty());
    }
}

TEST(AugmentParamsJson, RoundTripAndRejection)
{
    AugmentParams p;
    p.rho = 0.2;
    p.actions = {ActionKind::rotate, ActionKind::remove};
    const auto back = augment_params_from_json(to_json(p));
    EXPECT_EQ(to_json(back).dump(), to_json(p).dump());
    auto j = to_json(p);
    j["shear"] = 1;
    EXPECT_THROW(augment_params_from_json(j), ConfigError);
    j = to_json(p);
    j["rho"] = "high";
    EXPECT_THROW(augment_params_from_json(j), ConfigError);
}

TEST(Anomaly, OnlyRcppChanges)
{
    const auto s = samples_of(world(2, 2, 2));
    AugmentParams p;
    for (auto strat : {Strategy::rpa, Strategy::cutpaste, Strategy::cutout, Strategy::random_erase, Strategy::rotation90}) {
        const auto a = try_make_anomaly(s[0], strat, p, 17);
        ASSERT_TRUE(a.has_value()) << to_string(strat);
        EXPECT_GT(a->posedness, p.rho);
        for (auto k : kCanonicalChannels) {
            const auto before = extract_channel(s[0].fused, k).data, after = extract_channel(a->tile, k).data;
            if (k == ChannelKind::RCPP)
                EXPECT_NE(before, after);
            else
                EXPECT_EQ(before, after) << to_string(k);
        }
        EXPECT_EQ(extract_channel(a->tile, ChannelKind::RCPP).data, a->augmented_rcpp.data);
        EXPECT_EQ(posedness(a->normal_rcpp, a->augmented_rcpp), a->posedness);
    }
}

TEST(EvalSplit, CountContractAndNoOverlap)
{
    const auto all = samples_of(world(3, 16, 16, 32));
    ASSERT_EQ(all.size(), 256u);
    const std::span<const TileSample> train(all.data(), 56), held(all.data() + 56, 200);
    const auto split = make_eval_split(held, 0.10, {Strategy::rpa, Strategy::cutpaste}, 9);
    EXPECT_EQ(split.normals.size(), 200u);
    EXPECT_EQ(split.keys.size(), 200u);
    EXPECT_EQ(split.of(Strategy::rpa).size(), 200u);
    EXPECT_EQ(split.of(Strategy::cutpaste).size(), 200u);
    for (const auto& a : split.of(Strategy::rpa)) EXPECT_GT(a.posedness, 0.10);
    EXPECT_THROW(split.of(Strategy::cutout), ConfigError);

    std::set<std::string> train_keys;
    for (const auto& t : train) train_keys.insert(t.tile.str());
    for (const auto& k : split.keys) EXPECT_EQ(train_keys.count(k.str()), 0u);
}

TEST(EvalSplit, DeterministicAndValidated)
{
    const auto all = samples_of(world(4, 4, 2));
    const std::span<const TileSample> held(all);
    const auto a = make_eval_split(held, 0.10, {Strategy::rpa}, 1), b = make_eval_split(held, 0.10, {Strategy::rpa}, 1, {}, 3);
    ASSERT_EQ(a.of(Strategy::rpa).size(), b.of(Strategy::rpa).size());
    for (std::size_t i = 0; i < a.of(Strategy::rpa).size(); ++i) EXPECT_EQ(a.of(Strategy::rpa)[i].tile.data, b.of(Strategy::rpa)[i].tile.data);
    EXPECT_THROW(make_eval_split(held.first(1), 0.10, {Strategy::rpa}, 1), ConfigError);
    EXPECT_THROW(make_eval_split(held, 0.10, {}, 1), ConfigError);
}

TEST(SingleDefect, ChangedMaskMatchesOneTranslatedPolygon)
{
    const auto all = samples_of(world(5, 4, 4));
    AugmentParams p;
    int made = 0;
    for (std::size_t i = 0; i < all.size(); ++i) {
        const auto c = make_single_defect(all[i], p, i);
        if (!c) continue;
        ++made;
        EXPECT_GT(c->posedness, p.rho);
        const auto rcpp = extract_channel(c->augmented, ChannelKind::RCPP);
        const auto normal = extract_channel(all[i].fused, ChannelKind::RCPP);
        for (std::size_t q = 0; q < rcpp.data.size(); ++q) ASSERT_EQ(c->changed.data[q], std::abs(rcpp.data[q] - normal.data[q]));
        EXPECT_EQ(extract_channel(c->augmented, ChannelKind::DCRM).data, extract_channel(all[i].fused, ChannelKind::DCRM).data);
    }
    EXPECT_GE(made, 12);
}

TEST(Training, DeterministicUnderSeed)
{
    const auto all = samples_of(world(6, 8, 4, 32));
    TrainOptions o;
    o.model = tiny_model();
    o.train.batch_pairs = 8;
    o.train.epochs = 1;
    o.channels = parse_modalities("RNP,M");
    const auto a = train_model(std::span<const TileSample>(all), o);
    o.threads = 2;
    const auto b = train_model(std::span<const TileSample>(all), o);
    EXPECT_EQ(a.state.params, b.state.params);
    ASSERT_EQ(a.log.size(), 4u);
    EXPECT_EQ(a.state.config.input_channels, 4);
    EXPECT_EQ(a.state.config.input_size, 32);
    EXPECT_EQ(a.log.back().step, 4);
}

TEST(Training, TooFewTilesIsInsufficientData)
{
    const auto all = samples_of(world(7, 2, 1, 32));
    TrainOptions o;
    o.model = tiny_model();
    o.train.batch_pairs = 4;
    EXPECT_THROW(train_model(std::span<const TileSample>(all), o), InsufficientDataError);
    EXPECT_THROW(train_model(std::span<const TileSample>(), o), InsufficientDataError);
}

TEST(Training, AnomaliesScoreHigherForEveryMethod)
{
    const auto all = samples_of(world(8, 20, 16, 32));
    const std::span<const TileSample> train(all.data(), 256), held(all.data() + 256, 64);
    TrainOptions o;
    o.model = tiny_model();
    o.train.batch_pairs = 16;
    o.train.epochs = 4;
    o.train.peak_lr = 3e-3;
    const auto res = train_model(train, o);
    const auto split = make_eval_split(held, 0.10, {Strategy::rpa}, 3);
    std::vector<FusedTile> normals(split.normals), anomalous;
    for (const auto& a : split.of(Strategy::rpa)) anomalous.push_back(a.tile);
    std::vector<FusedTile> fit;
    for (const auto& t : train) fit.push_back(t.fused);
    const Prototype proto = fit_prototype(res.state, std::span<const FusedTile>(fit));
    for (auto m : {ScoreMethod::classifier, ScoreMethod::cosine, ScoreMethod::euclid, ScoreMethod::mahalanobis, ScoreMethod::gauss_density}) {
        const auto sn = score_tiles(res.state, std::span<const FusedTile>(normals), m, &proto);
        const auto sa = score_tiles(res.state, std::span<const FusedTile>(anomalous), m, &proto);
        EXPECT_GT(mean(sa), mean(sn)) << to_string(m);
    }
    EXPECT_THROW(score_tiles(res.state, std::span<const FusedTile>(normals), ScoreMethod::cosine, nullptr), ConfigError);
}

TEST(MatrixSpec, ParsesAxes)
{
    const auto j = nlohmann::json::parse(R"({
        "train_tiles": 32, "eval_tiles": 8, "strategy": "rpa", "eval_strategies": ["rpa", "cutpaste"], "method": "cosine",
        "axes": {"loss_weights": [[1, 0, 0], [0, 0, 1]], "modalities": ["RNP", "RNP,M,SI"], "action_cardinality": [1, 4],
                 "rho": [0.05, 0.1], "strategies": ["rpa", "cutpaste"]}})");
    const auto m = matrix_spec_from_json(j);
    EXPECT_EQ(m.train_tiles, 32);
    EXPECT_EQ(m.method, ScoreMethod::cosine);
    EXPECT_EQ(m.eval_strategies, (std::vector<Strategy>{Strategy::rpa, Strategy::cutpaste}));
    ASSERT_EQ(m.loss_weights.size(), 2u);
    EXPECT_EQ(m.loss_weights[1][2], 1.0);
    EXPECT_EQ(m.modality_sets.size(), 2u);
    EXPECT_EQ(m.action_cardinality, (std::vector<int>{1, 4}));
    EXPECT_EQ(m.rho_values.size(), 2u);
    EXPECT_FALSE(m.empty());
}

TEST(MatrixSpec, RejectsBadInput)
{
    EXPECT_THROW(matrix_spec_from_json(nlohmann::json::parse(R"({"epochs": 3})")), ConfigError);
    EXPECT_THROW(matrix_spec_from_json(nlohmann::json::parse(R"({"axes": {"depth": [1]}})")), ConfigError);
    EXPECT_THROW(matrix_spec_from_json(nlohmann::json::parse(R"({"axes": {"action_cardinality": [5]}})")), ConfigError);
    EXPECT_THROW(matrix_spec_from_json(nlohmann::json::parse(R"({"axes": {"loss_weights": [[1, 0]]}})")), ConfigError);
    EXPECT_THROW(matrix_spec_from_json(nlohmann::json::parse(R"({"strategy": "mixup"})")), ConfigError);
}

TEST(SampleConfigs, ParseAndFitTheirWorlds)
{
    const std::filesystem::path dir = std::filesystem::path(SEMAND_TEST_DATA) / ".." / ".." / "configs";
    auto load = [&](const char* name) { return nlohmann::json::parse(detail::read_file(dir / name)); };
    EXPECT_GE(world_config_from_json(load("world.json")).tile_keys().size(), 2300u);
    const auto t = load("train.json");
    const ModelConfig mc = model_config_from_json(t.at("model"));
    EXPECT_EQ(mc.conv_stages.size(), 4u);
    EXPECT_EQ(train_config_from_json(t.at("train")).peak_lr, 1e-3);
    EXPECT_NO_THROW(augment_params_from_json(t.at("augment")));
    const MatrixSpec m = matrix_spec_from_json(load("matrix_small.json"));
    EXPECT_GE(m.world.tile_keys().size(), static_cast<std::size_t>(m.train_tiles + m.eval_tiles));
    EXPECT_FALSE(m.empty());
}

TEST(Matrix, EmptySpecRunsNothing)
{
    const auto m = matrix_spec_from_json(nlohmann::json::object());
    EXPECT_TRUE(m.empty());
    EXPECT_TRUE(run_matrix(m).empty());
    EXPECT_EQ(matrix_csv({}), "axis,value,train_strategy,eval_strategy,method,auc,status\n");
}

TEST(Matrix, CsvFormatsCells)
{
    MatrixCell ok{"rho", "0.1", "rpa", "cutpaste", "clf", 0.93456};
    MatrixCell bad{"modalities", "RNP,X", "rpa", "-", "clf"};
    bad.status = "failed:config";
    EXPECT_EQ(matrix_csv({ok, bad}), "axis,value,train_strategy,eval_strategy,method,auc,status\n"
                                     "rho,\"0.1\",rpa,cutpaste,clf,0.9346,ok\n"
                                     "modalities,\"RNP,X\",rpa,-,clf,,failed:config\n");
}

TEST(Matrix, SmallRunRecordsEveryCell)
{
    MatrixSpec m;
    m.world = world(9, 6, 4, 16);
    m.train_tiles = 16;
    m.eval_tiles = 8;
    m.model = tiny_model();
    m.model.conv_stages = {{4, 3, 2}, {8, 3, 2}};
    m.train.batch_pairs = 4;
    m.train.epochs = 1;
    m.modality_sets = {"RNP", "RNP,LIDAR"};
    m.rho_values = {0.05};
    const auto cells = run_matrix(m);
    ASSERT_EQ(cells.size(), 3u);
    EXPECT_EQ(cells[0].axis, "modalities");
    EXPECT_EQ(cells[0].status, "ok");
    EXPECT_GE(cells[0].auc, 0.0);
    EXPECT_LE(cells[0].auc, 1.0);
    EXPECT_EQ(cells[1].status, "failed:config");
    EXPECT_EQ(cells[2].axis, "rho");
    EXPECT_EQ(cells[2].status, "ok");
}
