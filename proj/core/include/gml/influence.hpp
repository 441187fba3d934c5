#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace gml {

inline constexpr double kProbabilityEpsilon = 1e-6;
inline constexpr double kTauMin = 0.01;
inline constexpr double kTauMax = 100.0;

enum class Direction { increasing, decreasing };

/// Sigmoid influence model: p(x) = 1 / (1 + exp(-tau * (x - alpha))).
/// tau > 0 for increasing features, tau < 0 for decreasing ones.
struct SigmoidParams {
    double alpha = 0.0;
    double tau = 1.0;
    Direction direction = Direction::increasing;

    bool operator==(const SigmoidParams&) const = default;
};

/// Evaluates the sigmoid, clamped to [eps, 1 - eps].
double sigmoid_eval(const SigmoidParams& params, double x);

struct FitPair {
    double x = 0.0;
    double y = 0.0;  // class indicator; fractional targets are accepted

    bool operator==(const FitPair&) const = default;
};

struct FitOptions {
    int max_iterations = 200;
    double tolerance = 1e-6;
    double tau_min = kTauMin;
    double tau_max = kTauMax;
};

/// Fitted influence model plus the least-squares statistics the confidence
/// bound needs.
struct FitState {
    std::vector<FitPair> pairs;
    SigmoidParams params;
    bool trusted = false;  // false when the defaults were used
    int iterations = 0;

    std::size_t count = 0;
    double mean_x = 0.0;
    double sxx = 0.0;                // sum of squared x deviations
    double residual_variance = 0.0;  // of the linear fit y ~ x, SSE / (n - 2)
    double t_quantile = 0.0;         // Student t, 0.975 quantile with n - 2 dof
};

/// Maximum-likelihood Bernoulli fit of (alpha, tau). The sign of tau follows
/// `defaults.direction` and |tau| stays inside [tau_min, tau_max]. With fewer
/// than 3 pairs, identical targets, or constant x the defaults are returned
/// (alpha replaced by the constant x in the last case) and the fit is untrusted.
FitState fit_sigmoid(std::vector<FitPair> pairs, const SigmoidParams& defaults, const FitOptions& options = {});

/// Negative log-likelihood of the pairs under `params` (unclamped sigmoid).
double sigmoid_nll(std::span<const FitPair> pairs, const SigmoidParams& params);

struct Confidence {
    double theta = 0.0;
};

/// theta = max(0, 1 - h), h the half-width of the 95% prediction interval of a
/// linear regression of y on x evaluated at x. Zero for untrusted fits and for
/// fewer than 3 pairs.
Confidence confidence_theta(const FitState& fit, double x);

/// theta * tau * (x - alpha): log-weight of a unary factor.
double unary_weight(Confidence confidence, const SigmoidParams& params, double x);

/// Same form as unary_weight with x the pairwise similarity.
double binary_weight(Confidence confidence, const SigmoidParams& params, double similarity);

}  // namespace gml
