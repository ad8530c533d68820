#pragma once

#include <atomic>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "core.hpp"
#include "normal.hpp"
#include "preferences.hpp"

namespace prefgp {

/// Squared-exponential kernel hyperparameters. Fixed per fit, never learned.
struct KernelConfig {
    double signal_variance = 1.0;
    double length_scale = 0.2;
    double jitter = 1e-8;

    void validate() const {
        if (!(signal_variance > 0.0) || !(length_scale > 0.0) || !(jitter > 0.0))
            throw InputError("kernel hyperparameters must be strictly positive");
        if (!(jitter < signal_variance)) throw InputError("kernel jitter must be much smaller than the signal variance");
    }
    bool operator==(const KernelConfig&) const = default;
};

enum class MeanKind { zero, linear };

/// Prior mean. The linear variant weights every objective equally, so it
/// evaluates to the component mean.
struct MeanConfig {
    MeanKind kind = MeanKind::zero;
    /// Query count after which the linear mean reverts to zero.
    std::optional<std::size_t> switch_after;

    double operator()(const PolicyValue& v) const {
        return kind == MeanKind::linear ? v.values().mean() : 0.0;
    }
    MeanKind kind_at(std::size_t query_index) const {
        if (switch_after && query_index >= *switch_after) return MeanKind::zero;
        return kind;
    }
    bool operator==(const MeanConfig&) const = default;
};

/// Newton solver controls for the Laplace fit.
struct FitOptions {
    double sigma = 0.01;  // comparison noise of the probit model
    double tol = 1e-6;    // on the gradient norm of the negative log posterior
    int max_iter = 100;
    int max_halvings = 20;

    void validate() const {
        if (!(sigma > 0.0)) throw InputError("noise sigma must be positive");
        if (!(tol > 0.0) || max_iter < 1 || max_halvings < 0) throw InputError("invalid fit options");
    }
    bool operator==(const FitOptions&) const = default;
};

/// k(a,b) without jitter.
inline double kernel(const Vector& a, const Vector& b, const KernelConfig& cfg) {
    return cfg.signal_variance * std::exp(-(a - b).squaredNorm() / (2.0 * cfg.length_scale * cfg.length_scale));
}

/// Gram matrix over X with jitter on the diagonal.
inline Matrix kernel_matrix(std::span<const PolicyValue> xs, const KernelConfig& cfg) {
    if (xs.empty()) throw InputError("kernel_matrix: no points");
    const auto n = static_cast<Eigen::Index>(xs.size());
    const auto d = xs.front().dims();
    for (const auto& x : xs)
        if (x.dims() != d) throw InputError("kernel_matrix: dimension mismatch");
    Matrix k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        k(i, i) = cfg.signal_variance + cfg.jitter;
        for (Eigen::Index j = 0; j < i; ++j) k(i, j) = k(j, i) = kernel(xs[i].values(), xs[j].values(), cfg);
    }
    return k;
}

/// log Phi((f_winner - f_loser) / (sqrt(2) sigma)).
inline double pairwise_log_likelihood(double f_winner, double f_loser, double sigma) {
    if (!(sigma > 0.0)) throw InputError("pairwise likelihood: sigma must be positive");
    return normal::log_cdf((f_winner - f_loser) / (std::numbers::sqrt2 * sigma));
}

/// Comparison expressed as row indices into the training inputs.
struct IndexedComparison {
    Eigen::Index winner;
    Eigen::Index loser;
};

/// Negative log posterior S(f) = -sum log Phi(z_m) + 1/2 (f-m)^T K^-1 (f-m)
/// over latent values at the training inputs (up to a constant).
class LaplaceObjective {
public:
    LaplaceObjective(Matrix k, Vector prior_mean, std::vector<IndexedComparison> comparisons, double sigma)
        : k_(std::move(k)), mean_(std::move(prior_mean)), comps_(std::move(comparisons)), sigma_(sigma),
          scale_(1.0 / (std::numbers::sqrt2 * sigma)) {
        if (k_.rows() != mean_.size()) throw InputError("objective: kernel and mean sizes differ");
        if (!(sigma > 0.0)) throw InputError("objective: sigma must be positive");
        llt_.compute(k_);
        if (llt_.info() != Eigen::Success) throw NumericalError("kernel matrix is not positive definite");
    }

    Eigen::Index size() const { return mean_.size(); }
    const Matrix& kernel() const { return k_; }
    const Eigen::LLT<Matrix>& kernel_llt() const { return llt_; }
    const Vector& prior_mean() const { return mean_; }
    const std::vector<IndexedComparison>& comparisons() const { return comps_; }
    double sigma() const { return sigma_; }

    double negative_log_likelihood(const Vector& f) const {
        double s = 0.0;
        for (const auto& c : comps_) s -= normal::log_cdf(z(f, c));
        return s;
    }

    /// Gradient of sum log Phi(z_m) with respect to f.
    Vector log_likelihood_gradient(const Vector& f) const {
        Vector g = Vector::Zero(size());
        for (const auto& c : comps_) {
            const double r = normal::inverse_mills(z(f, c)) * scale_;
            g[c.winner] += r;
            g[c.loser] -= r;
        }
        return g;
    }

    /// W: Hessian of the negative log likelihood. Positive semi-definite;
    /// rows of items in no comparison are zero.
    Matrix likelihood_hessian(const Vector& f) const {
        Matrix w = Matrix::Zero(size(), size());
        for (const auto& c : comps_) {
            const double zz = z(f, c);
            const double r = normal::inverse_mills(zz);
            const double h = r * (zz + r) * scale_ * scale_;
            w(c.winner, c.winner) += h;
            w(c.loser, c.loser) += h;
            w(c.winner, c.loser) -= h;
            w(c.loser, c.winner) -= h;
        }
        return w;
    }

    double value(const Vector& f) const {
        const Vector centered = f - mean_;
        return negative_log_likelihood(f) + 0.5 * centered.dot(llt_.solve(centered));
    }

    Vector gradient(const Vector& f) const {
        const Vector centered = f - mean_;
        return llt_.solve(centered) - log_likelihood_gradient(f);
    }

private:
    double z(const Vector& f, const IndexedComparison& c) const { return (f[c.winner] - f[c.loser]) * scale_; }

    Matrix k_;
    Eigen::LLT<Matrix> llt_;
    Vector mean_;
    std::vector<IndexedComparison> comps_;
    double sigma_;
    double scale_;
};

/// Counts predictive variances that came out slightly negative and were
/// clamped to zero.
inline std::atomic<std::uint64_t>& variance_clamp_count() {
    static std::atomic<std::uint64_t> count{0};
    return count;
}

struct Prediction {
    double mean;
    double variance;
};

/// Fitted Laplace posterior. Immutable once built by fit_laplace.
class GPState {
public:
    GPState() = default;

    bool fitted() const { return fitted_; }
    const std::vector<ItemId>& ids() const { return ids_; }
    const std::vector<PolicyValue>& inputs() const { return inputs_; }
    const Vector& prior_mean_at_inputs() const { return prior_mean_; }
    const Vector& map_latent() const { return latent_; }
    const Matrix& neg_loglik_hessian() const { return w_; }
    const Eigen::LLT<Matrix>& kernel_factorization() const { return k_llt_; }
    const KernelConfig& kernel_config() const { return kernel_; }
    const MeanConfig& mean_config() const { return mean_; }
    double noise_sigma() const { return sigma_; }
    std::size_t comparison_count() const { return comparison_count_; }
    int iterations() const { return iterations_; }
    double gradient_norm() const { return gradient_norm_; }

    /// MAP latent utility of a training item, if present.
    std::optional<double> latent_of(ItemId id) const {
        for (std::size_t i = 0; i < ids_.size(); ++i)
            if (ids_[i] == id) return latent_[static_cast<Eigen::Index>(i)];
        return std::nullopt;
    }

    /// Bit-level equality of everything the fit produced.
    bool operator==(const GPState& o) const {
        auto same = [](const auto& a, const auto& b) { return a.rows() == b.rows() && a.cols() == b.cols() && a == b; };
        return fitted_ == o.fitted_ && ids_ == o.ids_ && inputs_ == o.inputs_ && same(prior_mean_, o.prior_mean_) &&
               same(latent_, o.latent_) && same(w_, o.w_) && same(alpha_, o.alpha_) && kernel_ == o.kernel_ &&
               mean_ == o.mean_ && sigma_ == o.sigma_ && comparison_count_ == o.comparison_count_;
    }

private:
    friend GPState fit_laplace(const PreferenceDataset&, const KernelConfig&, const MeanConfig&, const FitOptions&);
    friend Prediction predict(const GPState&, const PolicyValue&);

    bool fitted_ = false;
    std::vector<ItemId> ids_;
    std::vector<PolicyValue> inputs_;
    Vector prior_mean_;
    Vector latent_;
    Matrix w_;
    Eigen::LLT<Matrix> k_llt_;
    Vector alpha_;             // K^-1 (f - m)
    Matrix sqrt_w_;            // symmetric square root of W
    Eigen::LLT<Matrix> b_llt_; // I + W^1/2 K W^1/2
    KernelConfig kernel_;
    MeanConfig mean_;
    double sigma_ = 0.01;
    std::size_t comparison_count_ = 0;
    int iterations_ = 0;
    double gradient_norm_ = 0.0;
};

namespace detail {
inline Matrix symmetric_sqrt(const Matrix& w) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(w);
    if (eig.info() != Eigen::Success) throw NumericalError("eigen-decomposition of W failed");
    const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}
}  // namespace detail

/// Laplace fit by damped Newton on S(f).
///
/// The iteration runs in the a = K^-1 (f - m) parameterization with the
/// symmetric B = I + W^1/2 K W^1/2 system, so neither K nor W is inverted and
/// singular W (items in no comparison) needs no special casing. A step is
/// halved while it increases S.
inline GPState fit_laplace(const PreferenceDataset& dataset, const KernelConfig& kernel_cfg, const MeanConfig& mean_cfg,
                           const FitOptions& opts) {
    kernel_cfg.validate();
    opts.validate();

    GPState gp;
    gp.kernel_ = kernel_cfg;
    gp.mean_ = mean_cfg;
    gp.sigma_ = opts.sigma;
    gp.fitted_ = true;
    gp.comparison_count_ = dataset.comparisons().size();

    std::map<ItemId, Eigen::Index> index;
    for (const auto& [id, value] : dataset.items()) {
        index.emplace(id, static_cast<Eigen::Index>(gp.ids_.size()));
        gp.ids_.push_back(id);
        gp.inputs_.push_back(value);
    }
    const auto n = static_cast<Eigen::Index>(gp.ids_.size());
    if (n == 0) return gp;

    std::vector<IndexedComparison> comps;
    comps.reserve(dataset.comparisons().size());
    for (const auto& c : dataset.comparisons()) comps.push_back({index.at(c.winner), index.at(c.loser)});

    Vector m(n);
    for (Eigen::Index i = 0; i < n; ++i) m[i] = mean_cfg(gp.inputs_[static_cast<std::size_t>(i)]);

    const LaplaceObjective objective(kernel_matrix(gp.inputs_, kernel_cfg), m, std::move(comps), opts.sigma);
    const Matrix& k = objective.kernel();
    const Matrix identity = Matrix::Identity(n, n);

    Vector a = Vector::Zero(n);
    Vector f = m;
    auto posterior = [&](const Vector& aa, const Vector& ff) {
        return objective.negative_log_likelihood(ff) + 0.5 * aa.dot(ff - m);
    };
    double s = posterior(a, f);
    double grad_norm = (a - objective.log_likelihood_gradient(f)).norm();

    int iter = 0;
    while (grad_norm > opts.tol && iter < opts.max_iter) {
        ++iter;
        const Vector g = objective.log_likelihood_gradient(f);
        const Matrix w = objective.likelihood_hessian(f);
        const Matrix sw = detail::symmetric_sqrt(w);
        Eigen::LLT<Matrix> b_llt(identity + sw * k * sw);
        if (b_llt.info() != Eigen::Success) throw NumericalError("B = I + W^1/2 K W^1/2 not positive definite");

        const Vector b = w * (f - m) + g;
        const Vector a_newton = b - sw * b_llt.solve(sw * (k * b));
        const Vector step = a_newton - a;

        bool accepted = false;
        double t = 1.0;
        for (int h = 0; h <= opts.max_halvings; ++h, t *= 0.5) {
            const Vector a_try = a + t * step;
            const Vector f_try = m + k * a_try;
            const double s_try = posterior(a_try, f_try);
            if (s_try <= s) {
                a = a_try;
                f = f_try;
                s = s_try;
                accepted = true;
                break;
            }
        }
        grad_norm = (a - objective.log_likelihood_gradient(f)).norm();
        if (!accepted) break;
    }
    if (!(grad_norm <= opts.tol))
        throw ConvergenceError("Laplace fit did not converge after " + std::to_string(iter) +
                                   " iterations (gradient norm " + std::to_string(grad_norm) + ")",
                               grad_norm);

    gp.prior_mean_ = m;
    gp.latent_ = f;
    gp.alpha_ = a;
    gp.w_ = objective.likelihood_hessian(f);
    gp.sqrt_w_ = detail::symmetric_sqrt(gp.w_);
    gp.k_llt_ = objective.kernel_llt();
    gp.b_llt_.compute(identity + gp.sqrt_w_ * k * gp.sqrt_w_);
    if (gp.b_llt_.info() != Eigen::Success) throw NumericalError("B = I + W^1/2 K W^1/2 not positive definite");
    gp.iterations_ = iter;
    gp.gradient_norm_ = grad_norm;
    return gp;
}

/// Laplace predictive mean and variance at x:
///   mean = m(x) + k*^T K^-1 (f - m)
///   var  = k(x,x) - k*^T W^1/2 B^-1 W^1/2 k*
inline Prediction predict(const GPState& gp, const PolicyValue& x) {
    if (!gp.fitted_) throw StateError("predict on an unfitted GP");
    const auto& cfg = gp.kernel_;
    const double prior_mean = gp.mean_(x);
    const double prior_var = cfg.signal_variance + cfg.jitter;
    const auto n = static_cast<Eigen::Index>(gp.ids_.size());
    if (n == 0) return {prior_mean, prior_var};
    if (x.dims() != gp.inputs_.front().dims()) throw InputError("predict: dimension mismatch");

    Vector k_star(n);
    for (Eigen::Index i = 0; i < n; ++i) k_star[i] = kernel(x.values(), gp.inputs_[static_cast<std::size_t>(i)].values(), cfg);

    const double mean = prior_mean + k_star.dot(gp.alpha_);
    const Vector v = gp.b_llt_.matrixL().solve(gp.sqrt_w_ * k_star);
    double var = prior_var - v.squaredNorm();
    if (var < 0.0) {
        if (var < -10.0 * cfg.jitter) throw NumericalError("predictive variance " + std::to_string(var) + " is negative");
        variance_clamp_count().fetch_add(1, std::memory_order_relaxed);
        var = 0.0;
    }
    return {mean, var};
}

}  // namespace prefgp
