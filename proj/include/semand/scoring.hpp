#pragma once

// Anomaly scores: classifier s^1, prototype-based OOD scores, rank AUC,
// GradCAM localization and score histograms.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semand/errors.hpp"
#include "semand/model.hpp"
#include "semand/raster.hpp"
#include "semand/tilemath.hpp"

namespace semand {

enum class ScoreMethod { classifier, cosine, euclid, mahalanobis, gauss_density };

inline const char* to_string(ScoreMethod m)
{
    switch (m) {
    case ScoreMethod::classifier: return "clf";
    case ScoreMethod::cosine: return "cosine";
    case ScoreMethod::euclid: return "euclid";
    case ScoreMethod::mahalanobis: return "maha";
    case ScoreMethod::gauss_density: return "gauss";
    }
    return "?";
}

inline ScoreMethod parse_score_method(const std::string& s)
{
    for (auto m : {ScoreMethod::classifier, ScoreMethod::cosine, ScoreMethod::euclid, ScoreMethod::mahalanobis, ScoreMethod::gauss_density})
        if (s == to_string(m)) return m;
    throw ConfigError("unknown score method '" + s + "'");
}

struct ScoredTile {
    TileKey tile;
    double score = 0;
    ScoreMethod method = ScoreMethod::classifier;
    std::optional<bool> anomalous;
};

// ------------------------------------------------------------- classifier

template <typename T>
std::vector<double> classifier_scores(const ModelState<T>& m, std::span<const FusedTile> tiles, unsigned threads = 1)
{
    const ForwardResult r = forward(m, tiles, threads);
    std::vector<double> out(tiles.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = r.s(static_cast<Eigen::Index>(i), 1);
    return out;
}

template <typename T>
double classifier_score(const ModelState<T>& m, const FusedTile& tile)
{
    return classifier_scores(m, std::span<const FusedTile>(&tile, 1)).front();
}

// -------------------------------------------------------------- prototype

struct Prototype {
    Eigen::VectorXd mean;
    MatrixXd covariance; // includes epsilon * I
    double epsilon = 0;
    std::size_t count = 0;
    Eigen::LLT<Eigen::MatrixXd> chol;
    double log_det = 0;
};

/// Mean and sample covariance of normal-tile features, regularized by
/// epsilon = 1e-6 * trace / dim (1e-6 when the trace is zero).
inline Prototype fit_prototype(const MatrixXd& z)
{
    if (z.rows() < 2) throw InsufficientDataError("prototype needs at least 2 feature rows");
    if (!z.allFinite()) throw DataError("non-finite features");
    Prototype p;
    p.count = static_cast<std::size_t>(z.rows());
    p.mean = z.colwise().mean().transpose();
    const MatrixXd centered = z.rowwise() - p.mean.transpose();
    MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(z.rows() - 1);
    const double tr = cov.trace();
    p.epsilon = tr > 0 ? 1e-6 * tr / static_cast<double>(z.cols()) : 1e-6;
    cov.diagonal().array() += p.epsilon;
    p.covariance = cov;
    p.chol.compute(Eigen::MatrixXd(cov));
    if (p.chol.info() != Eigen::Success) throw DataError("prototype covariance is not positive definite");
    p.log_det = 2.0 * p.chol.matrixL().toDenseMatrix().diagonal().array().log().sum();
    return p;
}

/// Larger means more anomalous for every method. The classifier method is
/// not prototype-based and is rejected here.
inline double ood_score(const Eigen::VectorXd& z, const Prototype& proto, ScoreMethod method)
{
    if (z.size() != proto.mean.size()) throw ConfigError("feature dimension does not match the prototype");
    switch (method) {
    case ScoreMethod::cosine: {
        const double nz = z.norm(), nm = proto.mean.norm();
        if (!(nz > 0) || !(nm > 0)) throw NormalizationError("cosine score of a zero-norm vector");
        return (1.0 - z.dot(proto.mean) / (nz * nm)) / 2.0;
    }
    case ScoreMethod::euclid: return (z - proto.mean).norm();
    case ScoreMethod::mahalanobis: {
        const Eigen::VectorXd d = z - proto.mean;
        return std::sqrt(std::max(0.0, d.dot(proto.chol.solve(d))));
    }
    case ScoreMethod::gauss_density: {
        const Eigen::VectorXd d = z - proto.mean;
        const double m2 = d.dot(proto.chol.solve(d));
        return 0.5 * (m2 + static_cast<double>(z.size()) * std::log(2.0 * std::numbers::pi) + proto.log_det);
    }
    case ScoreMethod::classifier: break;
    }
    throw ConfigError("classifier scores do not use a prototype");
}

// -------------------------------------------------------------------- AUC

/// Doubled Mann-Whitney U (ties count half) computed from mid-ranks, exact
/// in integers.
inline std::uint64_t twice_mann_whitney_u(std::span<const double> normal, std::span<const double> anomalous)
{
    struct Item {
        double score;
        bool anomalous;
    };
    std::vector<Item> all;
    all.reserve(normal.size() + anomalous.size());
    for (double s : normal) all.push_back({s, false});
    for (double s : anomalous) all.push_back({s, true});
    for (const auto& it : all)
        if (std::isnan(it.score)) throw EvaluationError("NaN score");
    std::sort(all.begin(), all.end(), [](const Item& a, const Item& b) { return a.score < b.score; });
    // Sum of doubled mid-ranks of anomalous items; a tie block at positions
    // i..j-1 (0-based) has doubled mid-rank (i + 1) + j.
    std::uint64_t twice_rank_sum = 0;
    for (std::size_t i = 0; i < all.size();) {
        std::size_t j = i;
        std::uint64_t anomalous_in_block = 0;
        while (j < all.size() && all[j].score == all[i].score) anomalous_in_block += all[j++].anomalous ? 1 : 0;
        twice_rank_sum += anomalous_in_block * static_cast<std::uint64_t>(i + 1 + j);
        i = j;
    }
    const std::uint64_t n1 = anomalous.size();
    return twice_rank_sum - n1 * (n1 + 1);
}

/// Probability that a random anomalous score outranks a random normal one.
inline double auc(std::span<const double> normal, std::span<const double> anomalous)
{
    if (normal.empty() || anomalous.empty()) throw EvaluationError("AUC needs at least one normal and one anomalous score");
    const std::uint64_t twice_u = twice_mann_whitney_u(normal, anomalous);
    return static_cast<double>(twice_u) / (2.0 * static_cast<double>(normal.size()) * static_cast<double>(anomalous.size()));
}

inline double auc(std::span<const ScoredTile> scored)
{
    std::vector<double> normal, anomalous;
    for (const auto& s : scored) {
        if (!s.anomalous) throw EvaluationError("scored tile " + s.tile.str() + " has no truth label");
        (*s.anomalous ? anomalous : normal).push_back(s.score);
    }
    return auc(normal, anomalous);
}

// ----------------------------------------------------------- localization

struct Saliency {
    Channel map; // SALIENCY channel on the tile grid, values in [0, 1]
    bool all_zero = false;
};

/// Bilinear resize of an m x m map to n x n (pixel-center aligned).
inline std::vector<float> upsample_bilinear(const std::vector<double>& src, int m, int n)
{
    std::vector<float> out(static_cast<std::size_t>(n) * n);
    const double scale = static_cast<double>(m) / n;
    auto coord = [&](int i, int& i0, int& i1, double& w) {
        const double x = std::clamp((i + 0.5) * scale - 0.5, 0.0, static_cast<double>(m - 1));
        i0 = static_cast<int>(std::floor(x));
        i1 = std::min(i0 + 1, m - 1);
        w = x - i0;
    };
    for (int r = 0; r < n; ++r) {
        int r0, r1;
        double wr;
        coord(r, r0, r1, wr);
        for (int c = 0; c < n; ++c) {
            int c0, c1;
            double wc;
            coord(c, c0, c1, wc);
            const double top = src[r0 * m + c0] * (1 - wc) + src[r0 * m + c1] * wc;
            const double bot = src[r1 * m + c0] * (1 - wc) + src[r1 * m + c1] * wc;
            out[static_cast<std::size_t>(r) * n + c] = static_cast<float>(top * (1 - wr) + bot * wr);
        }
    }
    return out;
}

/// GradCAM of s^1 over the last conv stage, upsampled and max-normalized.
template <typename T>
Saliency localize(const ModelState<T>& m, const FusedTile& tile)
{
    ExampleCache<T> c;
    forward_example(m, tile, c);
    Vec<T> dz = Vec<T>::Zero(m.config.z_dim);
    Vec<T> ds(2);
    ds << T(0), T(1);
    const Vec<T> dpooled = head_backward(m, c, dz, ds, static_cast<T*>(nullptr));
    const Mat<T> da = last_activation_grad(c, dpooled);
    const Mat<T>& a = c.act.back();
    const int fm = c.out_size.back();
    std::vector<double> cam(static_cast<std::size_t>(fm) * fm, 0.0);
    for (Eigen::Index ch = 0; ch < a.rows(); ++ch) {
        const double alpha = static_cast<double>(da.row(ch).mean());
        for (Eigen::Index q = 0; q < a.cols(); ++q) cam[static_cast<std::size_t>(q)] += alpha * static_cast<double>(a(ch, q));
    }
    for (double& v : cam) v = std::max(0.0, v);

    Saliency s;
    s.map = Channel(ChannelKind::SALIENCY, tile.grid);
    s.map.data = upsample_bilinear(cam, fm, tile.grid.size);
    const float mx = *std::max_element(s.map.data.begin(), s.map.data.end());
    if (!(mx > 0.0f)) {
        std::fill(s.map.data.begin(), s.map.data.end(), 0.0f);
        s.all_zero = true;
        return s;
    }
    for (float& v : s.map.data) v /= mx;
    return s;
}

/// Value-weighted centroid (row, col) in pixel-center coordinates, or nullopt
/// for an all-zero map.
inline std::optional<std::pair<double, double>> mass_centroid(const Channel& ch)
{
    double total = 0, sr = 0, sc = 0;
    for (int r = 0; r < ch.grid.size; ++r)
        for (int c = 0; c < ch.grid.size; ++c) {
            const double v = ch.at(r, c);
            total += v;
            sr += v * (r + 0.5);
            sc += v * (c + 0.5);
        }
    if (!(total > 0)) return std::nullopt;
    return std::make_pair(sr / total, sc / total);
}

// -------------------------------------------------------------- histogram

struct Histogram {
    std::vector<double> edges; // bins + 1 edges over [0, 1]
    std::vector<std::size_t> counts;
    std::vector<double> fractions;
    double threshold = 0.6;
    double fraction_below = 0;
};

/// Fixed-width bins over [0, 1]; scores outside the range land in the end bins.
inline Histogram health_histogram(std::span<const double> scores, int bins, double threshold = 0.6)
{
    if (bins < 1) throw ConfigError("histogram needs at least one bin");
    if (scores.empty()) throw InsufficientDataError("histogram needs at least one score");
    Histogram h;
    h.threshold = threshold;
    for (int i = 0; i <= bins; ++i) h.edges.push_back(static_cast<double>(i) / bins);
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    std::size_t below = 0;
    for (double s : scores) {
        if (std::isnan(s)) throw DataError("NaN score");
        const auto b = static_cast<long>(std::floor(std::clamp(s, 0.0, 1.0) * bins));
        ++h.counts[static_cast<std::size_t>(std::clamp<long>(b, 0, bins - 1))];
        if (s < threshold) ++below;
    }
    for (auto c : h.counts) h.fractions.push_back(static_cast<double>(c) / static_cast<double>(scores.size()));
    h.fraction_below = static_cast<double>(below) / static_cast<double>(scores.size());
    return h;
}

} // namespace semand
