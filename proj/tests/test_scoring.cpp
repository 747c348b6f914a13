#include <gtest/gtest.h>

#include <cmath>

#include "semand/rng.hpp"
#include "semand/scoring.hpp"
#include "test_common.hpp"

using namespace semand;

namespace {

ModelConfig micro_config(std::uint64_t seed = 1)
{
    ModelConfig c;
    c.input_channels = 3;
    c.input_size = 16;
    c.conv_stages = {{4, 3, 2}, {8, 3, 2}};
    c.h_dim = 8;
    c.z_dim = 6;
    c.g_hidden = {8, 8};
    c.k_hidden = {6, 4};
    c.seed = seed;
    return c;
}

FusedTile random_tile(Rng& rng, int size = 16)
{
    FusedTile t;
    t.grid = PixelGrid{semand::testing::desk_tile(), size};
    t.channels = {ChannelKind::DCRM, ChannelKind::RNP, ChannelKind::RCPP};
    t.data.resize(3u * static_cast<std::size_t>(size * size));
    for (auto& v : t.data) v = static_cast<float>(uniform01(rng));
    return t;
}

Prototype identity_prototype(const Eigen::VectorXd& mean)
{
    Prototype p;
    p.mean = mean;
    p.covariance = MatrixXd::Identity(mean.size(), mean.size());
    p.chol.compute(p.covariance);
    p.log_det = 0;
    p.count = 2;
    return p;
}

double brute_force_auc(const std::vector<double>& normal, const std::vector<double>& anomalous)
{
    std::uint64_t twice = 0;
    for (double a : anomalous)
        for (double n : normal) twice += a > n ? 2 : a == n ? 1 : 0;
    return static_cast<double>(twice) / (2.0 * static_cast<double>(normal.size()) * static_cast<double>(anomalous.size()));
}

} // namespace

TEST(ScoreMethod, ParsesNames)
{
    EXPECT_EQ(parse_score_method("clf"), ScoreMethod::classifier);
    EXPECT_EQ(parse_score_method("cosine"), ScoreMethod::cosine);
    EXPECT_EQ(parse_score_method("euclid"), ScoreMethod::euclid);
    EXPECT_EQ(parse_score_method("maha"), ScoreMethod::mahalanobis);
    EXPECT_EQ(parse_score_method("gauss"), ScoreMethod::gauss_density);
    EXPECT_THROW(parse_score_method("knn"), ConfigError);
}

TEST(ClassifierScore, ZeroLogitHeadGivesHalf)
{
    ModelConfig c = micro_config();
    c.zero_init_score_head = true;
    const auto m = init_model<float>(c);
    Rng rng = make_rng(1);
    EXPECT_DOUBLE_EQ(classifier_score(m, random_tile(rng)), 0.5);
}

TEST(ClassifierScore, ComplementOfNormalProbability)
{
    const auto m = init_model<float>(micro_config(4));
    Rng rng = make_rng(2);
    std::vector<FusedTile> tiles;
    for (int i = 0; i < 6; ++i) tiles.push_back(random_tile(rng));
    const auto r = forward(m, std::span<const FusedTile>(tiles));
    const auto batch = classifier_scores(m, std::span<const FusedTile>(tiles));
    for (std::size_t i = 0; i < tiles.size(); ++i) {
        EXPECT_NEAR(batch[i], 1.0 - r.s(static_cast<Eigen::Index>(i), 0), 1e-6);
        EXPECT_EQ(batch[i], classifier_score(m, tiles[i]));
        EXPECT_GE(batch[i], 0.0);
        EXPECT_LE(batch[i], 1.0);
    }
}

TEST(ClassifierScore, ChannelMismatchIsConfigError)
{
    const auto m = init_model<float>(micro_config());
    Rng rng = make_rng(3);
    FusedTile t = random_tile(rng);
    t.channels.pop_back();
    t.data.resize(2u * 16 * 16);
    EXPECT_THROW(classifier_score(m, t), ConfigError);
}

TEST(Prototype, OppositeRowsHaveZeroMean)
{
    MatrixXd z(2, 3);
    z << 1, -2, 3, -1, 2, -3;
    const auto p = fit_prototype(z);
    EXPECT_EQ(p.mean, Eigen::VectorXd::Zero(3));
    EXPECT_EQ(p.count, 2u);
}

TEST(Prototype, IdenticalRowsGiveEpsilonIdentity)
{
    MatrixXd z(4, 3);
    z.rowwise() = Eigen::RowVector3d(0.5, 1.0, 2.0);
    const auto p = fit_prototype(z);
    EXPECT_GT(p.epsilon, 0.0);
    EXPECT_TRUE(p.covariance.isApprox(p.epsilon * MatrixXd::Identity(3, 3), 0.0));
}

TEST(Prototype, RecoversDiagonalGaussian)
{
    const std::vector<double> mu{1.0, -2.0, 0.5, 3.0}, sigma{0.5, 1.0, 2.0, 0.1};
    Rng rng = make_rng(5);
    MatrixXd z(10000, 4);
    for (Eigen::Index i = 0; i < z.rows(); ++i)
        for (Eigen::Index j = 0; j < 4; ++j) z(i, j) = mu[static_cast<std::size_t>(j)] + sigma[static_cast<std::size_t>(j)] * normal01(rng);
    const auto p = fit_prototype(z);
    for (Eigen::Index j = 0; j < 4; ++j) {
        const double var = sigma[static_cast<std::size_t>(j)] * sigma[static_cast<std::size_t>(j)];
        EXPECT_NEAR(p.covariance(j, j), var, 0.05 * var) << j;
    }
    // Positive definite after regularization, symmetric.
    EXPECT_TRUE(p.covariance.isApprox(p.covariance.transpose()));
    EXPECT_EQ(p.chol.info(), Eigen::Success);
}

TEST(Prototype, TooFewRowsIsInsufficientData)
{
    EXPECT_THROW(fit_prototype(MatrixXd::Ones(1, 3)), InsufficientDataError);
    EXPECT_THROW(fit_prototype(MatrixXd(0, 3)), InsufficientDataError);
}

TEST(OodScore, ZeroAtTheMean)
{
    MatrixXd z(3, 2);
    z << 1, 2, 2, 3, 3, 7;
    const auto p = fit_prototype(z);
    EXPECT_NEAR(ood_score(p.mean, p, ScoreMethod::cosine), 0.0, 1e-15);
    EXPECT_EQ(ood_score(p.mean, p, ScoreMethod::euclid), 0.0);
    EXPECT_EQ(ood_score(p.mean, p, ScoreMethod::mahalanobis), 0.0);
}

TEST(OodScore, ThreeFourFive)
{
    const auto p = identity_prototype(Eigen::Vector2d(0, 0));
    EXPECT_DOUBLE_EQ(ood_score(Eigen::Vector2d(3, 4), p, ScoreMethod::euclid), 5.0);
    EXPECT_DOUBLE_EQ(ood_score(Eigen::Vector2d(3, 4), p, ScoreMethod::mahalanobis), 5.0);
}

TEST(OodScore, MahalanobisEqualsEuclidUnderIdentity)
{
    Rng rng = make_rng(6);
    Eigen::VectorXd mean(5);
    for (Eigen::Index j = 0; j < 5; ++j) mean(j) = normal01(rng);
    const auto p = identity_prototype(mean);
    for (int i = 0; i < 200; ++i) {
        Eigen::VectorXd z(5);
        for (Eigen::Index j = 0; j < 5; ++j) z(j) = 3 * normal01(rng);
        EXPECT_NEAR(ood_score(z, p, ScoreMethod::mahalanobis), ood_score(z, p, ScoreMethod::euclid), 1e-12);
    }
}

TEST(OodScore, CosineRangeAndScaleInvariance)
{
    const auto p = identity_prototype(Eigen::Vector2d(1, 0));
    EXPECT_DOUBLE_EQ(ood_score(Eigen::Vector2d(-2, 0), p, ScoreMethod::cosine), 1.0);
    EXPECT_DOUBLE_EQ(ood_score(Eigen::Vector2d(0, 5), p, ScoreMethod::cosine), 0.5);
    Rng rng = make_rng(7);
    for (int i = 0; i < 100; ++i) {
        const Eigen::Vector2d z(normal01(rng), normal01(rng));
        const double k = std::exp(uniform(rng, -5, 5));
        EXPECT_NEAR(ood_score(z, p, ScoreMethod::cosine), ood_score(Eigen::Vector2d(k * z), p, ScoreMethod::cosine), 1e-12);
    }
    EXPECT_THROW(ood_score(Eigen::Vector2d(0, 0), p, ScoreMethod::cosine), NormalizationError);
}

TEST(OodScore, GaussDensityIsNegativeLogPdf)
{
    const auto p = identity_prototype(Eigen::Vector2d(1, 1));
    const double expected = 0.5 * (25.0 + 2.0 * std::log(2.0 * std::numbers::pi));
    EXPECT_NEAR(ood_score(Eigen::Vector2d(4, 5), p, ScoreMethod::gauss_density), expected, 1e-12);
    EXPECT_THROW(ood_score(Eigen::Vector2d(4, 5), p, ScoreMethod::classifier), ConfigError);
    EXPECT_THROW(ood_score(Eigen::Vector3d(4, 5, 6), p, ScoreMethod::euclid), ConfigError);
}

TEST(Auc, Examples)
{
    EXPECT_EQ(auc(std::vector<double>{0.1, 0.2}, std::vector<double>{0.8, 0.9}), 1.0);
    EXPECT_EQ(auc(std::vector<double>{0.1, 0.9}, std::vector<double>{0.2, 0.8}), 0.5);
    EXPECT_EQ(auc(std::vector<double>{0.3, 0.3, 0.3}, std::vector<double>{0.3, 0.3}), 0.5);
    EXPECT_EQ(auc(std::vector<double>{0.9}, std::vector<double>{0.1}), 0.0);
}

TEST(Auc, SingleClassIsEvaluationError)
{
    EXPECT_THROW(auc(std::vector<double>{}, std::vector<double>{0.5}), EvaluationError);
    EXPECT_THROW(auc(std::vector<double>{0.5}, std::vector<double>{}), EvaluationError);
    std::vector<ScoredTile> only_normal{{TileKey{3, 1, 1}, 0.2, ScoreMethod::classifier, false}};
    EXPECT_THROW(auc(std::span<const ScoredTile>(only_normal)), EvaluationError);
    std::vector<ScoredTile> unlabeled{{TileKey{3, 1, 1}, 0.2, ScoreMethod::classifier, std::nullopt}};
    EXPECT_THROW(auc(std::span<const ScoredTile>(unlabeled)), EvaluationError);
}

TEST(Auc, ScoredTilesUseTruthLabels)
{
    std::vector<ScoredTile> s{{TileKey{3, 0, 0}, 0.1, ScoreMethod::cosine, false},
                              {TileKey{3, 0, 1}, 0.4, ScoreMethod::cosine, true},
                              {TileKey{3, 1, 0}, 0.3, ScoreMethod::cosine, false},
                              {TileKey{3, 1, 1}, 0.2, ScoreMethod::cosine, true}};
    EXPECT_EQ(auc(std::span<const ScoredTile>(s)), 0.75);
}

TEST(AucProperty, MatchesBruteForceWithTies)
{
    Rng rng = make_rng(8);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto n = 1 + uniform_index(rng, 40), a = 1 + uniform_index(rng, 40);
        const auto levels = 1 + uniform_index(rng, 12);
        std::vector<double> normal, anomalous;
        for (std::uint64_t i = 0; i < n; ++i) normal.push_back(static_cast<double>(uniform_index(rng, levels)) / 7.0);
        for (std::uint64_t i = 0; i < a; ++i) anomalous.push_back(static_cast<double>(uniform_index(rng, levels)) / 7.0);
        ASSERT_EQ(auc(normal, anomalous), brute_force_auc(normal, anomalous)) << trial;
    }
}

TEST(AucProperty, InvariantUnderIncreasingTransforms)
{
    Rng rng = make_rng(9);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> normal(20), anomalous(15);
        for (auto& v : normal) v = std::round(uniform(rng, -3, 3) * 4) / 4;
        for (auto& v : anomalous) v = std::round(uniform(rng, -2, 4) * 4) / 4;
        const double base = auc(normal, anomalous);
        auto map = [](std::vector<double> v, auto f) {
            for (auto& x : v) x = f(x);
            return v;
        };
        auto ex = [](double x) { return std::exp(x); };
        auto affine = [](double x) { return 2.5 * x - 7.0; };
        ASSERT_EQ(auc(map(normal, ex), map(anomalous, ex)), base);
        ASSERT_EQ(auc(map(normal, affine), map(anomalous, affine)), base);
    }
}

TEST(Auc, NanScoreIsEvaluationError)
{
    EXPECT_THROW(auc(std::vector<double>{std::nan("")}, std::vector<double>{0.5}), EvaluationError);
}

TEST(Localize, MapInUnitRangeWithMaxOne)
{
    Rng rng = make_rng(10);
    int nonzero = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto m = init_model<float>(micro_config(seed));
        const auto s = localize(m, random_tile(rng));
        ASSERT_EQ(s.map.data.size(), 16u * 16u);
        EXPECT_EQ(s.map.name, ChannelKind::SALIENCY);
        const auto [lo, hi] = std::minmax_element(s.map.data.begin(), s.map.data.end());
        EXPECT_GE(*lo, 0.0f);
        if (s.all_zero) {
            EXPECT_EQ(*hi, 0.0f);
        } else {
            EXPECT_EQ(*hi, 1.0f);
            ++nonzero;
        }
    }
    EXPECT_GT(nonzero, 0);
}

TEST(Localize, IdenticalTilesGiveIdenticalMaps)
{
    const auto m = init_model<float>(micro_config(3));
    Rng rng = make_rng(11);
    const auto t = random_tile(rng);
    EXPECT_EQ(localize(m, t).map.data, localize(m, t).map.data);
}

TEST(Localize, ZeroScoreHeadIsFlaggedAllZero)
{
    ModelConfig c = micro_config();
    c.zero_init_score_head = true;
    const auto m = init_model<float>(c);
    Rng rng = make_rng(12);
    const auto s = localize(m, random_tile(rng));
    EXPECT_TRUE(s.all_zero);
    for (float v : s.map.data) ASSERT_EQ(v, 0.0f);
}

TEST(Upsample, IdentityAndConstant)
{
    const std::vector<double> src{1, 2, 3, 4};
    const auto same = upsample_bilinear(src, 2, 2);
    EXPECT_EQ(same, (std::vector<float>{1, 2, 3, 4}));
    const auto flat = upsample_bilinear(std::vector<double>(9, 0.25), 3, 12);
    for (float v : flat) ASSERT_FLOAT_EQ(v, 0.25f);
}

TEST(MassCentroid, WeightedPixelCenters)
{
    Channel ch(ChannelKind::SALIENCY, PixelGrid{semand::testing::desk_tile(), 4});
    EXPECT_FALSE(mass_centroid(ch).has_value());
    ch.at(1, 2) = 1.0f;
    ch.at(3, 2) = 1.0f;
    const auto c = mass_centroid(ch);
    ASSERT_TRUE(c.has_value());
    EXPECT_DOUBLE_EQ(c->first, 2.5);
    EXPECT_DOUBLE_EQ(c->second, 2.5);
}

TEST(HealthHistogram, Examples)
{
    const auto zeros = health_histogram(std::vector<double>(5, 0.0), 10);
    EXPECT_EQ(zeros.counts[0], 5u);
    EXPECT_DOUBLE_EQ(zeros.fractions[0], 1.0);
    EXPECT_DOUBLE_EQ(zeros.fraction_below, 1.0);

    std::vector<double> uniform_scores;
    for (int i = 0; i < 10; ++i) uniform_scores.push_back(0.05 + 0.1 * i);
    const auto h = health_histogram(uniform_scores, 10);
    ASSERT_EQ(h.edges.size(), 11u);
    EXPECT_EQ(h.edges.front(), 0.0);
    EXPECT_EQ(h.edges.back(), 1.0);
    for (auto c : h.counts) EXPECT_EQ(c, 1u);
    EXPECT_DOUBLE_EQ(h.threshold, 0.6);
    EXPECT_DOUBLE_EQ(h.fraction_below, 0.6);
}

TEST(HealthHistogram, EndBinsAndErrors)
{
    const auto h = health_histogram(std::vector<double>{1.0, 1.5, -0.2}, 4);
    EXPECT_EQ(h.counts[3], 2u);
    EXPECT_EQ(h.counts[0], 1u);
    EXPECT_THROW(health_histogram(std::vector<double>{0.5}, 0), ConfigError);
    EXPECT_THROW(health_histogram(std::vector<double>{}, 4), InsufficientDataError);
}
