#pragma once

// Desk-scale network: conv backbone f, projection head g (rectified output),
// score head k (softmax). Forward, manual backprop, AdamW with warmup plus
// cosine decay, a single SSL training step, and checkpoints.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "semand/config.hpp"
#include "semand/errors.hpp"
#include "semand/io.hpp"
#include "semand/objective.hpp"
#include "semand/parallel.hpp"
#include "semand/raster.hpp"
#include "semand/rng.hpp"

namespace semand {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

// ------------------------------------------------------------------ configs

struct ConvStage {
    int filters = 16;
    int kernel = 3;
    int stride = 2;
    friend bool operator==(const ConvStage&, const ConvStage&) = default;
};

struct ModelConfig {
    int input_channels = 7;
    int input_size = 256;
    std::vector<ConvStage> conv_stages{{16, 3, 2}, {32, 3, 2}, {64, 3, 2}, {128, 3, 2}};
    int h_dim = 128;
    int z_dim = 32;
    std::array<int, 2> g_hidden{128, 64};
    std::array<int, 2> k_hidden{32, 16};
    std::uint64_t seed = 0;
    bool zero_init_score_head = false;

    static constexpr int s_dim = 2;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;

    void validate() const
    {
        if (input_channels < 1 || input_channels > 7) throw ConfigError("input_channels must be in [1, 7]");
        if (input_size < 1) throw ConfigError("input_size must be positive");
        if (conv_stages.empty()) throw ConfigError("at least one conv stage is required");
        for (const auto& s : conv_stages)
            if (s.filters < 1 || s.kernel < 1 || s.kernel % 2 == 0 || s.stride < 1) throw ConfigError("conv stages need positive filters/stride and odd kernels");
        if (h_dim < 1 || z_dim < 1 || g_hidden[0] < 1 || g_hidden[1] < 1 || k_hidden[0] < 1 || k_hidden[1] < 1)
            throw ConfigError("layer widths must be positive");
    }

    /// Side length of the last conv stage's feature map.
    int feature_size() const
    {
        int n = input_size;
        for (const auto& s : conv_stages) n = (n + 2 * (s.kernel / 2) - s.kernel) / s.stride + 1;
        return n;
    }
};

inline nlohmann::json to_json(const ModelConfig& c)
{
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& s : c.conv_stages) stages.push_back({s.filters, s.kernel, s.stride});
    return {{"input_channels", c.input_channels},
            {"input_size", c.input_size},
            {"conv_stages", stages},
            {"h_dim", c.h_dim},
            {"z_dim", c.z_dim},
            {"g_hidden", {c.g_hidden[0], c.g_hidden[1]}},
            {"k_hidden", {c.k_hidden[0], c.k_hidden[1]}},
            {"seed", c.seed},
            {"zero_init_score_head", c.zero_init_score_head}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j)
{
    reject_unknown_keys(j, {"input_channels", "input_size", "conv_stages", "h_dim", "z_dim", "g_hidden", "k_hidden", "seed", "zero_init_score_head"},
                        "model config");
    ModelConfig c;
    try {
        c.input_channels = j.value("input_channels", c.input_channels);
        c.input_size = j.value("input_size", c.input_size);
        if (j.contains("conv_stages")) {
            c.conv_stages.clear();
            for (const auto& s : j.at("conv_stages")) c.conv_stages.push_back({s.at(0).get<int>(), s.at(1).get<int>(), s.at(2).get<int>()});
        }
        c.h_dim = j.value("h_dim", c.h_dim);
        c.z_dim = j.value("z_dim", c.z_dim);
        if (j.contains("g_hidden")) c.g_hidden = {j.at("g_hidden").at(0).get<int>(), j.at("g_hidden").at(1).get<int>()};
        if (j.contains("k_hidden")) c.k_hidden = {j.at("k_hidden").at(0).get<int>(), j.at("k_hidden").at(1).get<int>()};
        c.seed = j.value("seed", c.seed);
        c.zero_init_score_head = j.value("zero_init_score_head", c.zero_init_score_head);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad model config: ") + e.what());
    }
    c.validate();
    return c;
}

inline std::uint64_t config_hash(const ModelConfig& c) { return fnv1a64(to_json(c).dump()); }

struct TrainConfig {
    int batch_pairs = 32;
    int epochs = 10;
    double peak_lr = 1e-2;
    double warmup_epochs = 1.0;
    double cosine_decay_alpha = 0.001;
    double beta1 = 0.9; // "momentum"
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 1e-4;
    LossWeights weights;
    double tau = 0.5;
    double gamma = 1.0;
    double rho = 0.10;
    std::uint64_t seed = 0;
    /// Set by the trainer from the dataset size; drives the schedule.
    std::int64_t steps_per_epoch = 1;

    void validate() const
    {
        if (batch_pairs < 2) throw ConfigError("batch_pairs must be >= 2");
        if (epochs < 1) throw ConfigError("epochs must be >= 1");
        if (!(peak_lr > 0) || !(cosine_decay_alpha > 0) || !(warmup_epochs >= 0)) throw ConfigError("learning-rate parameters must be positive");
        if (!(beta1 > 0 && beta1 < 1 && beta2 > 0 && beta2 < 1 && adam_eps > 0 && weight_decay >= 0)) throw ConfigError("bad optimizer parameters");
        if (!(tau > 0) || !(gamma >= 0)) throw ConfigError("tau must be positive and gamma non-negative");
        if (weights.bc < 0 || weights.cl < 0 || weights.inv_focal < 0 || !(weights.sum() > 0)) throw ConfigError("loss weights must be non-negative with a positive sum");
        if (steps_per_epoch < 1) throw ConfigError("steps_per_epoch must be >= 1");
    }

    std::int64_t total_steps() const { return steps_per_epoch * epochs; }
    std::int64_t warmup_steps() const { return static_cast<std::int64_t>(std::llround(warmup_epochs * static_cast<double>(steps_per_epoch))); }
};

inline nlohmann::json to_json(const TrainConfig& c)
{
    return {{"batch_pairs", c.batch_pairs},
            {"epochs", c.epochs},
            {"peak_lr", c.peak_lr},
            {"warmup_epochs", c.warmup_epochs},
            {"cosine_decay_alpha", c.cosine_decay_alpha},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"adam_eps", c.adam_eps},
            {"weight_decay", c.weight_decay},
            {"lambda_bc", c.weights.bc},
            {"lambda_cl", c.weights.cl},
            {"lambda_if", c.weights.inv_focal},
            {"tau", c.tau},
            {"gamma", c.gamma},
            {"rho", c.rho},
            {"seed", c.seed}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j)
{
    reject_unknown_keys(j, {"batch_pairs", "epochs", "peak_lr", "warmup_epochs", "cosine_decay_alpha", "beta1", "beta2", "adam_eps", "weight_decay",
                            "lambda_bc", "lambda_cl", "lambda_if", "tau", "gamma", "rho", "seed"},
                        "train config");
    TrainConfig c;
    try {
        c.batch_pairs = j.value("batch_pairs", c.batch_pairs);
        c.epochs = j.value("epochs", c.epochs);
        c.peak_lr = j.value("peak_lr", c.peak_lr);
        c.warmup_epochs = j.value("warmup_epochs", c.warmup_epochs);
        c.cosine_decay_alpha = j.value("cosine_decay_alpha", c.cosine_decay_alpha);
        c.beta1 = j.value("beta1", c.beta1);
        c.beta2 = j.value("beta2", c.beta2);
        c.adam_eps = j.value("adam_eps", c.adam_eps);
        c.weight_decay = j.value("weight_decay", c.weight_decay);
        c.weights.bc = j.value("lambda_bc", c.weights.bc);
        c.weights.cl = j.value("lambda_cl", c.weights.cl);
        c.weights.inv_focal = j.value("lambda_if", c.weights.inv_focal);
        c.tau = j.value("tau", c.tau);
        c.gamma = j.value("gamma", c.gamma);
        c.rho = j.value("rho", c.rho);
        c.seed = j.value("seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad train config: ") + e.what());
    }
    c.validate();
    return c;
}

/// Linear warmup 0 -> peak, then cosine decay to alpha * peak at the last step.
inline double lr_at(std::int64_t step, const TrainConfig& c)
{
    if (step < 0) throw ConfigError("negative step");
    const std::int64_t warm = c.warmup_steps();
    const std::int64_t total = c.total_steps();
    if (warm > 0 && step <= warm) return c.peak_lr * static_cast<double>(step) / static_cast<double>(warm);
    if (total <= warm) return c.peak_lr;
    const double progress = std::min(1.0, static_cast<double>(step - warm) / static_cast<double>(total - warm));
    const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
    return c.peak_lr * (c.cosine_decay_alpha + (1.0 - c.cosine_decay_alpha) * cosine);
}

// ------------------------------------------------------------------ layout

struct DenseSpec {
    std::size_t w = 0, b = 0;
    int out = 0, in = 0;
};

struct ConvSpec {
    std::size_t w = 0, b = 0;
    int out = 0, in = 0, kernel = 3, stride = 1;
    int cols() const { return in * kernel * kernel; }
};

struct Layout {
    std::vector<ConvSpec> conv;
    DenseSpec fc_h;
    std::array<DenseSpec, 3> g;
    std::array<DenseSpec, 3> k;
    std::size_t total = 0;

    /// (rows, cols) of every parameter tensor in storage order.
    std::vector<std::pair<int, int>> shapes() const
    {
        std::vector<std::pair<int, int>> s;
        for (const auto& c : conv) {
            s.emplace_back(c.out, c.cols());
            s.emplace_back(c.out, 1);
        }
        auto dense = [&](const DenseSpec& d) {
            s.emplace_back(d.out, d.in);
            s.emplace_back(d.out, 1);
        };
        dense(fc_h);
        for (const auto& d : g) dense(d);
        for (const auto& d : k) dense(d);
        return s;
    }
};

inline Layout make_layout(const ModelConfig& cfg)
{
    cfg.validate();
    Layout L;
    std::size_t off = 0;
    int cin = cfg.input_channels;
    for (const auto& s : cfg.conv_stages) {
        ConvSpec c;
        c.out = s.filters;
        c.in = cin;
        c.kernel = s.kernel;
        c.stride = s.stride;
        c.w = off;
        off += static_cast<std::size_t>(c.out) * c.cols();
        c.b = off;
        off += c.out;
        L.conv.push_back(c);
        cin = s.filters;
    }
    auto dense = [&](int out, int in) {
        DenseSpec d{off, 0, out, in};
        off += static_cast<std::size_t>(out) * in;
        d.b = off;
        off += out;
        return d;
    };
    L.fc_h = dense(cfg.h_dim, cin);
    L.g = {dense(cfg.g_hidden[0], cfg.h_dim), dense(cfg.g_hidden[1], cfg.g_hidden[0]), dense(cfg.z_dim, cfg.g_hidden[1])};
    L.k = {dense(cfg.k_hidden[0], cfg.z_dim), dense(cfg.k_hidden[1], cfg.k_hidden[0]), dense(ModelConfig::s_dim, cfg.k_hidden[1])};
    L.total = off;
    return L;
}

// ------------------------------------------------------------------- state

template <typename T>
struct ModelState {
    ModelConfig config;
    Layout layout;
    std::vector<T> params;
    std::vector<T> adam_m;
    std::vector<T> adam_v;
    std::int64_t step = 0;
};

template <typename T>
ModelState<T> init_model(const ModelConfig& cfg)
{
    ModelState<T> m;
    m.config = cfg;
    m.layout = make_layout(cfg);
    m.params.assign(m.layout.total, T(0));
    m.adam_m.assign(m.layout.total, T(0));
    m.adam_v.assign(m.layout.total, T(0));
    Rng rng = make_rng(derive_seed(cfg.seed, 0x5eed));
    auto fill = [&](std::size_t off, std::size_t count, double stddev) {
        for (std::size_t i = 0; i < count; ++i) m.params[off + i] = static_cast<T>(stddev * normal01(rng));
    };
    for (const auto& c : m.layout.conv) fill(c.w, static_cast<std::size_t>(c.out) * c.cols(), std::sqrt(2.0 / c.cols()));
    auto dense = [&](const DenseSpec& d, double gain) { fill(d.w, static_cast<std::size_t>(d.out) * d.in, std::sqrt(gain / d.in)); };
    dense(m.layout.fc_h, 1.0);
    for (const auto& d : m.layout.g) dense(d, 2.0);
    // A positive output bias keeps the rectified z rows away from zero.
    for (int i = 0; i < m.layout.g[2].out; ++i) m.params[m.layout.g[2].b + i] = T(0.1);
    dense(m.layout.k[0], 2.0);
    dense(m.layout.k[1], 2.0);
    if (!cfg.zero_init_score_head) dense(m.layout.k[2], 1.0);
    return m;
}

// ----------------------------------------------------------------- forward

template <typename T>
struct ExampleCache {
    std::vector<Mat<T>> cols; // im2col per stage
    std::vector<Mat<T>> act;  // rectified output per stage, filters x (size*size)
    std::vector<int> in_size, out_size;
    Vec<T> pooled, h;
    std::array<Vec<T>, 3> g; // g[2] = z
    std::array<Vec<T>, 2> k;
    Vec<T> s;
};

namespace detail {

template <typename T>
Eigen::Map<const Mat<T>> weight(const std::vector<T>& p, std::size_t off, int rows, int cols)
{
    return Eigen::Map<const Mat<T>>(p.data() + off, rows, cols);
}

template <typename T>
Eigen::Map<const Vec<T>> bias(const std::vector<T>& p, std::size_t off, int n)
{
    return Eigen::Map<const Vec<T>>(p.data() + off, n);
}

template <typename T>
Eigen::Map<Mat<T>> weight_grad(T* g, std::size_t off, int rows, int cols)
{
    return Eigen::Map<Mat<T>>(g + off, rows, cols);
}

template <typename T>
Eigen::Map<Vec<T>> bias_grad(T* g, std::size_t off, int n)
{
    return Eigen::Map<Vec<T>>(g + off, n);
}

inline int conv_out_size(int in, int kernel, int stride) { return (in + 2 * (kernel / 2) - kernel) / stride + 1; }

/// x: channels x (n*n), row-major; returns (channels*k*k) x (m*m).
template <typename T, typename Src>
Mat<T> im2col(const Src& x, int channels, int n, int kernel, int stride, int m)
{
    const int pad = kernel / 2;
    Mat<T> cols = Mat<T>::Zero(static_cast<Eigen::Index>(channels) * kernel * kernel, static_cast<Eigen::Index>(m) * m);
    for (int c = 0; c < channels; ++c) {
        for (int ki = 0; ki < kernel; ++ki) {
            for (int kj = 0; kj < kernel; ++kj) {
                T* dst = cols.row((static_cast<Eigen::Index>(c) * kernel + ki) * kernel + kj).data();
                for (int oy = 0; oy < m; ++oy) {
                    const int iy = oy * stride + ki - pad;
                    if (iy < 0 || iy >= n) continue;
                    for (int ox = 0; ox < m; ++ox) {
                        const int ix = ox * stride + kj - pad;
                        if (ix < 0 || ix >= n) continue;
                        dst[oy * m + ox] = static_cast<T>(x(c, iy * n + ix));
                    }
                }
            }
        }
    }
    return cols;
}

template <typename T>
Mat<T> col2im(const Mat<T>& cols, int channels, int n, int kernel, int stride, int m)
{
    const int pad = kernel / 2;
    Mat<T> x = Mat<T>::Zero(channels, static_cast<Eigen::Index>(n) * n);
    for (int c = 0; c < channels; ++c) {
        for (int ki = 0; ki < kernel; ++ki) {
            for (int kj = 0; kj < kernel; ++kj) {
                const T* src = cols.row((static_cast<Eigen::Index>(c) * kernel + ki) * kernel + kj).data();
                T* dst = x.row(c).data();
                for (int oy = 0; oy < m; ++oy) {
                    const int iy = oy * stride + ki - pad;
                    if (iy < 0 || iy >= n) continue;
                    for (int ox = 0; ox < m; ++ox) {
                        const int ix = ox * stride + kj - pad;
                        if (ix < 0 || ix >= n) continue;
                        dst[iy * n + ix] += src[oy * m + ox];
                    }
                }
            }
        }
    }
    return x;
}

template <typename T>
Vec<T> relu(Vec<T> v)
{
    return v.cwiseMax(T(0));
}

template <typename T>
Vec<T> softmax2(const Vec<T>& logits)
{
    const T mx = logits.maxCoeff();
    Vec<T> e = (logits.array() - mx).exp().matrix();
    return e / e.sum();
}

} // namespace detail

inline void check_input(const ModelConfig& cfg, const FusedTile& t)
{
    if (static_cast<int>(t.channel_count()) != cfg.input_channels)
        throw ConfigError("tile has " + std::to_string(t.channel_count()) + " channels, model expects " + std::to_string(cfg.input_channels));
    if (t.grid.size != cfg.input_size) throw ConfigError("tile size " + std::to_string(t.grid.size) + " does not match model input " + std::to_string(cfg.input_size));
    if (t.data.size() != t.channel_count() * t.grid.pixel_count()) throw ConfigError("tile data size mismatch");
}

template <typename T>
void forward_example(const ModelState<T>& m, const FusedTile& tile, ExampleCache<T>& c)
{
    check_input(m.config, tile);
    const auto& L = m.layout;
    const auto& p = m.params;
    const std::size_t nst = L.conv.size();
    c.cols.resize(nst);
    c.act.resize(nst);
    c.in_size.resize(nst);
    c.out_size.resize(nst);
    int n = tile.grid.size;
    for (std::size_t i = 0; i < nst; ++i) {
        const auto& cs = L.conv[i];
        const int mo = detail::conv_out_size(n, cs.kernel, cs.stride);
        if (mo < 1) throw ConfigError("input too small for the conv stack");
        if (i == 0) {
            Eigen::Map<const Mat<float>> x(tile.data.data(), cs.in, static_cast<Eigen::Index>(n) * n);
            c.cols[i] = detail::im2col<T>(x, cs.in, n, cs.kernel, cs.stride, mo);
        } else {
            c.cols[i] = detail::im2col<T>(c.act[i - 1], cs.in, n, cs.kernel, cs.stride, mo);
        }
        Mat<T> pre = detail::weight(p, cs.w, cs.out, cs.cols()) * c.cols[i];
        pre.colwise() += detail::bias(p, cs.b, cs.out);
        c.act[i] = pre.cwiseMax(T(0));
        c.in_size[i] = n;
        c.out_size[i] = mo;
        n = mo;
    }
    c.pooled = c.act.back().rowwise().mean();
    c.h = detail::weight(p, L.fc_h.w, L.fc_h.out, L.fc_h.in) * c.pooled + detail::bias(p, L.fc_h.b, L.fc_h.out);
    Vec<T> x = c.h;
    for (int i = 0; i < 3; ++i) {
        const auto& d = L.g[i];
        c.g[i] = detail::relu<T>(detail::weight(p, d.w, d.out, d.in) * x + detail::bias(p, d.b, d.out));
        x = c.g[i];
    }
    for (int i = 0; i < 2; ++i) {
        const auto& d = L.k[i];
        c.k[i] = detail::relu<T>(detail::weight(p, d.w, d.out, d.in) * x + detail::bias(p, d.b, d.out));
        x = c.k[i];
    }
    const auto& d = L.k[2];
    c.s = detail::softmax2<T>(detail::weight(p, d.w, d.out, d.in) * x + detail::bias(p, d.b, d.out));
}

/// Backprop from (dL/dz, dL/ds) to the pooled backbone features. Head
/// parameter gradients are accumulated into `grad` when it is non-null.
template <typename T>
Vec<T> head_backward(const ModelState<T>& m, const ExampleCache<T>& c, const Vec<T>& dz, const Vec<T>& ds, T* grad)
{
    const auto& L = m.layout;
    const auto& p = m.params;
    auto dense_back = [&](const DenseSpec& d, const Vec<T>& input, const Vec<T>& dy) -> Vec<T> {
        if (grad) {
            detail::weight_grad(grad, d.w, d.out, d.in).noalias() += dy * input.transpose();
            detail::bias_grad(grad, d.b, d.out) += dy;
        }
        return detail::weight(p, d.w, d.out, d.in).transpose() * dy;
    };
    auto rect = [](Vec<T> dy, const Vec<T>& out) {
        for (Eigen::Index i = 0; i < dy.size(); ++i)
            if (!(out(i) > T(0))) dy(i) = T(0);
        return dy;
    };

    Vec<T> dlogits = (c.s.array() * (ds.array() - c.s.dot(ds))).matrix();
    Vec<T> dx = dense_back(L.k[2], c.k[1], dlogits);
    dx = dense_back(L.k[1], c.k[0], rect(dx, c.k[1]));
    dx = dense_back(L.k[0], c.g[2], rect(dx, c.k[0]));
    Vec<T> dzt = dz + dx;
    dx = dense_back(L.g[2], c.g[1], rect(dzt, c.g[2]));
    dx = dense_back(L.g[1], c.g[0], rect(dx, c.g[1]));
    dx = dense_back(L.g[0], c.h, rect(dx, c.g[0]));
    return dense_back(L.fc_h, c.pooled, dx);
}

/// Gradient with respect to the last conv stage's rectified activations.
template <typename T>
Mat<T> last_activation_grad(const ExampleCache<T>& c, const Vec<T>& dpooled)
{
    const auto& a = c.act.back();
    Mat<T> da(a.rows(), a.cols());
    const T inv = T(1) / static_cast<T>(a.cols());
    for (Eigen::Index r = 0; r < a.rows(); ++r) da.row(r).setConstant(dpooled(r) * inv);
    return da;
}

template <typename T>
void conv_backward(const ModelState<T>& m, const ExampleCache<T>& c, Mat<T> da, T* grad)
{
    const auto& L = m.layout;
    for (std::size_t i = L.conv.size(); i-- > 0;) {
        const auto& cs = L.conv[i];
        const Mat<T>& a = c.act[i];
        for (Eigen::Index r = 0; r < da.rows(); ++r)
            for (Eigen::Index q = 0; q < da.cols(); ++q)
                if (!(a(r, q) > T(0))) da(r, q) = T(0);
        detail::weight_grad(grad, cs.w, cs.out, cs.cols()).noalias() += da * c.cols[i].transpose();
        detail::bias_grad(grad, cs.b, cs.out) += da.rowwise().sum();
        if (i == 0) break;
        const Mat<T> dcols = detail::weight(m.params, cs.w, cs.out, cs.cols()).transpose() * da;
        da = detail::col2im(dcols, cs.in, c.in_size[i], cs.kernel, cs.stride, c.out_size[i]);
    }
}

template <typename T>
void backward_example(const ModelState<T>& m, const ExampleCache<T>& c, const Vec<T>& dz, const Vec<T>& ds, T* grad)
{
    const Vec<T> dpooled = head_backward(m, c, dz, ds, grad);
    conv_backward(m, c, last_activation_grad(c, dpooled), grad);
}

struct ForwardResult {
    MatrixXd h, z, s; // one row per input
};

template <typename T>
ForwardResult forward(const ModelState<T>& m, std::span<const FusedTile> tiles, unsigned threads = 1)
{
    ForwardResult r;
    const auto n = static_cast<Eigen::Index>(tiles.size());
    r.h.resize(n, m.config.h_dim);
    r.z.resize(n, m.config.z_dim);
    r.s.resize(n, ModelConfig::s_dim);
    parallel_for(tiles.size(), threads, [&](std::size_t i) {
        ExampleCache<T> c;
        forward_example(m, tiles[i], c);
        const auto row = static_cast<Eigen::Index>(i);
        r.h.row(row) = c.h.template cast<double>().transpose();
        r.z.row(row) = c.g[2].template cast<double>().transpose();
        r.s.row(row) = c.s.template cast<double>().transpose();
    });
    return r;
}

// --------------------------------------------------------------- training

/// Loss and parameter gradient of the SSL objective on one batch of pairs
/// (normals[i] <-> augmented[i]). Per-example gradients are summed in index
/// order, so the result does not depend on the thread count.
template <typename T>
LossReport loss_and_grad(const ModelState<T>& m, std::span<const FusedTile> normals, std::span<const FusedTile> augmented, const TrainConfig& cfg,
                         std::vector<T>& grad, unsigned threads = 1)
{
    if (normals.size() != augmented.size() || normals.empty()) throw ConfigError("normal and augmented batches must be non-empty and equal in size");
    const std::size_t n = normals.size();
    std::vector<ExampleCache<T>> caches(2 * n);
    parallel_for(2 * n, threads, [&](std::size_t i) { forward_example(m, i < n ? normals[i] : augmented[i - n], caches[i]); });

    BatchFeatures b;
    const auto N = static_cast<Eigen::Index>(n);
    b.z_normal.resize(N, m.config.z_dim);
    b.z_aug.resize(N, m.config.z_dim);
    b.s_normal.resize(N, 2);
    b.s_aug.resize(N, 2);
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        b.z_normal.row(r) = caches[i].g[2].template cast<double>().transpose();
        b.z_aug.row(r) = caches[n + i].g[2].template cast<double>().transpose();
        b.s_normal.row(r) = caches[i].s.template cast<double>().transpose();
        b.s_aug.row(r) = caches[n + i].s.template cast<double>().transpose();
    }
    b.tau = cfg.tau;
    b.gamma = cfg.gamma;
    b.weights = cfg.weights;

    LossReport rep;
    try {
        rep = loss_total(b);
    } catch (const NormalizationError& e) {
        throw TrainingError(std::string("training aborted at step ") + std::to_string(m.step) + ": " + e.what());
    }
    if (!std::isfinite(rep.l_total)) throw TrainingError("training aborted at step " + std::to_string(m.step) + ": non-finite loss");

    std::vector<std::vector<T>> per(2 * n);
    parallel_for(2 * n, threads, [&](std::size_t i) {
        per[i].assign(m.layout.total, T(0));
        const auto r = static_cast<Eigen::Index>(i < n ? i : i - n);
        const MatrixXd& gz = i < n ? rep.grads.z_normal : rep.grads.z_aug;
        const MatrixXd& gs = i < n ? rep.grads.s_normal : rep.grads.s_aug;
        const Vec<T> dz = gz.row(r).transpose().template cast<T>();
        const Vec<T> ds = gs.row(r).transpose().template cast<T>();
        backward_example(m, caches[i], dz, ds, per[i].data());
    });
    grad.assign(m.layout.total, T(0));
    for (const auto& g : per)
        for (std::size_t j = 0; j < g.size(); ++j) grad[j] += g[j];
    return rep;
}

/// One AdamW update with decoupled weight decay.
template <typename T>
void adamw_update(ModelState<T>& m, const std::vector<T>& grad, double lr, const TrainConfig& cfg)
{
    ++m.step;
    const double t = static_cast<double>(m.step);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < m.params.size(); ++i) {
        const double g = static_cast<double>(grad[i]);
        const double mi = cfg.beta1 * static_cast<double>(m.adam_m[i]) + (1.0 - cfg.beta1) * g;
        const double vi = cfg.beta2 * static_cast<double>(m.adam_v[i]) + (1.0 - cfg.beta2) * g * g;
        m.adam_m[i] = static_cast<T>(mi);
        m.adam_v[i] = static_cast<T>(vi);
        if (lr == 0.0) continue;
        const double p = static_cast<double>(m.params[i]);
        const double upd = (mi / bc1) / (std::sqrt(vi / bc2) + cfg.adam_eps) + cfg.weight_decay * p;
        m.params[i] = static_cast<T>(p - lr * upd);
    }
}

/// Forward, loss, backprop and one optimizer step at lr_at(step + 1), or at
/// `lr_override` when given.
template <typename T>
LossReport train_step(ModelState<T>& m, std::span<const FusedTile> normals, std::span<const FusedTile> augmented, const TrainConfig& cfg,
                      std::optional<double> lr_override = std::nullopt, unsigned threads = 1)
{
    std::vector<T> grad;
    LossReport rep = loss_and_grad(m, normals, augmented, cfg, grad, threads);
    const double lr = lr_override ? *lr_override : lr_at(m.step + 1, cfg);
    adamw_update(m, grad, lr, cfg);
    for (const T& v : m.params)
        if (!std::isfinite(static_cast<double>(v))) throw TrainingError("training aborted at step " + std::to_string(m.step) + ": non-finite parameter");
    return rep;
}

// ------------------------------------------------------------- checkpoint

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// "SMCK", u32 version, u64 config hash, u32 + config JSON, u32 tensor
/// count with (rows, cols) per tensor, then float32 params, Adam m, Adam v,
/// and the i64 step counter. Little-endian throughout.
template <typename T>
std::string encode_checkpoint(const ModelState<T>& m)
{
    std::string buf = "SMCK";
    detail::put_u32(buf, kCheckpointVersion);
    detail::put_u64(buf, config_hash(m.config));
    const std::string cfg = to_json(m.config).dump();
    detail::put_u32(buf, static_cast<std::uint32_t>(cfg.size()));
    buf += cfg;
    const auto shapes = m.layout.shapes();
    detail::put_u32(buf, static_cast<std::uint32_t>(shapes.size()));
    for (const auto& [r, c] : shapes) {
        detail::put_u32(buf, static_cast<std::uint32_t>(r));
        detail::put_u32(buf, static_cast<std::uint32_t>(c));
    }
    for (const auto* v : {&m.params, &m.adam_m, &m.adam_v})
        for (T x : *v) detail::put_f32(buf, static_cast<float>(x));
    detail::put_u64(buf, static_cast<std::uint64_t>(m.step));
    return buf;
}

template <typename T>
ModelState<T> decode_checkpoint(const std::string& bytes, const std::optional<ModelConfig>& expected = std::nullopt)
{
    try {
        detail::ByteReader rd(bytes, "checkpoint");
        if (rd.bytes(4) != "SMCK") throw CheckpointError("not a checkpoint (bad magic)");
        const auto version = rd.u32();
        if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
        const auto hash = rd.u64();
        const std::string cfg_text = rd.bytes(rd.u32());
        ModelConfig cfg;
        try {
            cfg = model_config_from_json(nlohmann::json::parse(cfg_text));
        } catch (const std::exception& e) {
            throw CheckpointError(std::string("corrupt checkpoint config: ") + e.what());
        }
        if (config_hash(cfg) != hash) throw CheckpointError("checkpoint config hash mismatch");
        if (expected && config_hash(*expected) != hash) throw CheckpointError("checkpoint was written for a different model config");
        ModelState<T> m = init_model<T>(cfg);
        const auto shapes = m.layout.shapes();
        if (rd.u32() != shapes.size()) throw CheckpointError("checkpoint tensor count mismatch");
        for (const auto& [r, c] : shapes) {
            const auto fr = rd.u32(), fc = rd.u32();
            if (fr != static_cast<std::uint32_t>(r) || fc != static_cast<std::uint32_t>(c)) throw CheckpointError("checkpoint tensor shape mismatch");
        }
        for (auto* v : {&m.params, &m.adam_m, &m.adam_v})
            for (T& x : *v) x = static_cast<T>(rd.f32());
        m.step = static_cast<std::int64_t>(rd.u64());
        if (!rd.at_end()) throw CheckpointError("trailing bytes after checkpoint");
        return m;
    } catch (const DataError& e) {
        throw CheckpointError(e.what());
    }
}

template <typename T>
void save_checkpoint(const ModelState<T>& m, const std::filesystem::path& path)
{
    detail::write_file(path, encode_checkpoint(m));
}

template <typename T = float>
ModelState<T> load_checkpoint(const std::filesystem::path& path, const std::optional<ModelConfig>& expected = std::nullopt)
{
    std::string bytes;
    try {
        bytes = detail::read_file(path);
    } catch (const IoError& e) {
        throw CheckpointError(e.what());
    }
    return decode_checkpoint<T>(bytes, expected);
}

} // namespace semand
