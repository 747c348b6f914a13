#pragma once

// Self-supervision losses and their gradients with respect to network
// outputs: cross-entropy (BC), cross-set contrastive (CL), inverse focal (IF)
// and their weighted mean.

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>

#include "semand/errors.hpp"

namespace semand {

using MatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kProbEpsilon = 1e-12;

struct LossWeights {
    double bc = 1.0;
    double cl = 1.0;
    double inv_focal = 1.5;

    double sum() const { return bc + cl + inv_focal; }
};

struct BatchFeatures {
    MatrixXd z_normal; // N x d
    MatrixXd z_aug;    // N x d
    MatrixXd s_normal; // N x 2
    MatrixXd s_aug;    // N x 2
    double tau = 0.5;
    double gamma = 1.0;
    LossWeights weights;

    Eigen::Index n() const { return z_normal.rows(); }
};

struct LossGrads {
    MatrixXd z_normal, z_aug, s_normal, s_aug;

    static LossGrads zeros_like(const BatchFeatures& b)
    {
        LossGrads g;
        g.z_normal = MatrixXd::Zero(b.z_normal.rows(), b.z_normal.cols());
        g.z_aug = MatrixXd::Zero(b.z_aug.rows(), b.z_aug.cols());
        g.s_normal = MatrixXd::Zero(b.s_normal.rows(), b.s_normal.cols());
        g.s_aug = MatrixXd::Zero(b.s_aug.rows(), b.s_aug.cols());
        return g;
    }
};

struct ComponentLoss {
    double value = 0;
    LossGrads grads;
    bool clamped = false; // a probability fell below the log clamp
};

struct LossReport {
    double l_bc = 0, l_cl = 0, l_if = 0, l_total = 0;
    LossGrads grads;
    bool clamped = false;
};

namespace detail {

inline void check_shapes(const BatchFeatures& b, bool need_z, bool need_s)
{
    const auto n = b.n();
    if (n < 1) throw ConfigError("batch must contain at least one pair");
    if (need_z) {
        if (b.z_aug.rows() != n || b.z_aug.cols() != b.z_normal.cols() || b.z_normal.cols() < 1)
            throw ConfigError("contrastive feature arrays have mismatched shapes");
        if (!b.z_normal.allFinite() || !b.z_aug.allFinite()) throw DataError("non-finite contrastive features");
        if (!(b.tau > 0)) throw ConfigError("temperature must be positive");
    }
    if (need_s) {
        if (b.s_normal.rows() != n || b.s_aug.rows() != n || b.s_normal.cols() != 2 || b.s_aug.cols() != 2)
            throw ConfigError("score arrays must be N x 2");
        if (!b.s_normal.allFinite() || !b.s_aug.allFinite()) throw DataError("non-finite scores");
    }
}

/// Row-normalizes z; zero rows are an error.
inline MatrixXd unit_rows(const MatrixXd& z, Eigen::VectorXd& norms)
{
    norms = z.rowwise().norm();
    MatrixXd u = z;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        if (!(norms(i) > 0)) throw NormalizationError("contrastive feature row " + std::to_string(i) + " has zero norm");
        u.row(i) /= norms(i);
    }
    return u;
}

/// Backprop through u = z / |z|.
inline MatrixXd unit_rows_backward(const MatrixXd& u, const Eigen::VectorXd& norms, const MatrixXd& gu)
{
    MatrixXd gz(u.rows(), u.cols());
    for (Eigen::Index i = 0; i < u.rows(); ++i) gz.row(i) = (gu.row(i) - u.row(i) * u.row(i).dot(gu.row(i))) / norms(i);
    return gz;
}

/// Sum over j != i of -ln[e^{P_ij} / (e^{P_ij} + sum_k e^{Q_ik})], with
/// gradients accumulated into gP and gQ scaled by `scale`.
inline double contrastive_half(const MatrixXd& P, const MatrixXd& Q, double scale, MatrixXd& gP, MatrixXd& gQ)
{
    const auto n = P.rows();
    double total = 0.0;
    Eigen::VectorXd e(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double qmax = Q.row(i).maxCoeff();
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;
            const double m = std::max(P(i, j), qmax);
            const double ep = std::exp(P(i, j) - m);
            double denom = ep;
            for (Eigen::Index k = 0; k < n; ++k) {
                e(k) = std::exp(Q(i, k) - m);
                denom += e(k);
            }
            total += -(P(i, j) - m) + std::log(denom);
            gP(i, j) += scale * (ep / denom - 1.0);
            for (Eigen::Index k = 0; k < n; ++k) gQ(i, k) += scale * e(k) / denom;
        }
    }
    return total;
}

inline double clamped_log(double s, bool& clamped)
{
    if (s < kProbEpsilon) {
        clamped = true;
        return std::log(kProbEpsilon);
    }
    return std::log(s);
}

} // namespace detail

/// Checks every batch invariant, including that score rows lie on the simplex.
inline void validate(const BatchFeatures& b)
{
    detail::check_shapes(b, true, true);
    for (const MatrixXd* s : {&b.s_normal, &b.s_aug}) {
        for (Eigen::Index i = 0; i < s->rows(); ++i) {
            if (!((*s)(i, 0) > 0 && (*s)(i, 0) < 1 && (*s)(i, 1) > 0 && (*s)(i, 1) < 1)) throw DataError("score entries must lie in (0, 1)");
            if (std::abs((*s)(i, 0) + (*s)(i, 1) - 1.0) > 1e-6) throw DataError("score rows must sum to 1");
        }
    }
    if ((b.z_normal.array() < 0).any() || (b.z_aug.array() < 0).any()) throw DataError("contrastive features must be non-negative");
    if ((b.z_normal.rowwise().norm().array() == 0).any() || (b.z_aug.rowwise().norm().array() == 0).any())
        throw NormalizationError("contrastive feature row has zero norm");
}

/// -mean ln s_n^0 - mean ln s_a^1
inline ComponentLoss loss_bc(const BatchFeatures& b)
{
    detail::check_shapes(b, false, true);
    ComponentLoss out;
    out.grads = LossGrads::zeros_like(b);
    const double n = static_cast<double>(b.n());
    double acc = 0.0;
    for (Eigen::Index i = 0; i < b.n(); ++i) {
        const double sn = b.s_normal(i, 0), sa = b.s_aug(i, 1);
        acc -= detail::clamped_log(sn, out.clamped) + detail::clamped_log(sa, out.clamped);
        out.grads.s_normal(i, 0) = sn < kProbEpsilon ? 0.0 : -1.0 / (n * sn);
        out.grads.s_aug(i, 1) = sa < kProbEpsilon ? 0.0 : -1.0 / (n * sa);
    }
    out.value = acc / n;
    return out;
}

/// -mean[e^{gamma s} ln s] over s_n^0 and s_a^1.
inline ComponentLoss loss_if(const BatchFeatures& b)
{
    detail::check_shapes(b, false, true);
    ComponentLoss out;
    out.grads = LossGrads::zeros_like(b);
    const double n = static_cast<double>(b.n());
    const double g = b.gamma;
    double acc = 0.0;
    auto term = [&](double s, double& grad) {
        const double w = std::exp(g * s);
        const double ls = detail::clamped_log(s, out.clamped);
        grad = s < kProbEpsilon ? -g * w * ls / n : -(g * w * ls + w / s) / n;
        return w * ls;
    };
    for (Eigen::Index i = 0; i < b.n(); ++i) {
        const double tn = term(b.s_normal(i, 0), out.grads.s_normal(i, 0));
        acc -= tn + term(b.s_aug(i, 1), out.grads.s_aug(i, 1));
    }
    out.value = acc / n;
    return out;
}

/// Cross-set contrastive loss. Positives are same-set pairs (j != i); the
/// denominator holds the positive plus all N cross-set terms.
inline ComponentLoss loss_cl(const BatchFeatures& b)
{
    detail::check_shapes(b, true, false);
    ComponentLoss out;
    out.grads = LossGrads::zeros_like(b);
    const auto n = b.n();
    if (n == 1) return out;

    Eigen::VectorXd nu, nv;
    const MatrixXd U = detail::unit_rows(b.z_normal, nu);
    const MatrixXd V = detail::unit_rows(b.z_aug, nv);
    const double inv_tau = 1.0 / b.tau;
    const MatrixXd A = (U * U.transpose()) * inv_tau;
    const MatrixXd B = (U * V.transpose()) * inv_tau;
    const MatrixXd C = (V * V.transpose()) * inv_tau;
    const MatrixXd Bt = B.transpose();

    const double scale = 1.0 / (2.0 * static_cast<double>(n) * static_cast<double>(n));
    MatrixXd gA = MatrixXd::Zero(n, n), gB = MatrixXd::Zero(n, n), gC = MatrixXd::Zero(n, n), gBt = MatrixXd::Zero(n, n);
    double total = detail::contrastive_half(A, B, scale, gA, gB);
    total += detail::contrastive_half(C, Bt, scale, gC, gBt);
    gB += gBt.transpose();
    out.value = total * scale;

    const MatrixXd gU = ((gA + gA.transpose()) * U + gB * V) * inv_tau;
    const MatrixXd gV = ((gC + gC.transpose()) * V + gB.transpose() * U) * inv_tau;
    out.grads.z_normal = detail::unit_rows_backward(U, nu, gU);
    out.grads.z_aug = detail::unit_rows_backward(V, nv, gV);
    return out;
}

/// Weighted mean of the three components. A component with zero weight is
/// still reported when it can be evaluated (NaN otherwise) but contributes
/// nothing to the total or its gradient.
inline LossReport loss_total(const BatchFeatures& b)
{
    const auto& w = b.weights;
    if (w.bc < 0 || w.cl < 0 || w.inv_focal < 0) throw ConfigError("loss weights must be non-negative");
    const double wsum = w.sum();
    if (!(wsum > 0)) throw ConfigError("loss weights sum to zero");

    LossReport r;
    r.grads = LossGrads::zeros_like(b);
    auto add = [&](const ComponentLoss& c, double weight, double& slot) {
        slot = c.value;
        r.clamped = r.clamped || c.clamped;
        if (weight == 0) return;
        r.l_total += weight * c.value;
        const double k = weight / wsum;
        r.grads.z_normal += k * c.grads.z_normal;
        r.grads.z_aug += k * c.grads.z_aug;
        r.grads.s_normal += k * c.grads.s_normal;
        r.grads.s_aug += k * c.grads.s_aug;
    };
    add(loss_bc(b), w.bc, r.l_bc);
    add(loss_if(b), w.inv_focal, r.l_if);
    if (w.cl > 0) {
        add(loss_cl(b), w.cl, r.l_cl);
    } else {
        try {
            r.l_cl = loss_cl(b).value;
        } catch (const NormalizationError&) {
            r.l_cl = std::numeric_limits<double>::quiet_NaN();
        }
    }
    r.l_total /= wsum;
    return r;
}

} // namespace semand
