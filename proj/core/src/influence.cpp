#include "gml/influence.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/students_t.hpp>

namespace gml {

namespace {

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double logistic(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// NLL with logit z = slope * x + offset.
double nll(std::span<const FitPair> pairs, double slope, double offset) {
    double total = 0.0;
    for (const auto& p : pairs) {
        const double z = slope * p.x + offset;
        total += softplus(z) - p.y * z;
    }
    return total;
}

// Offset minimizing the NLL for a fixed slope: root of sum(sigmoid(z_i)) = sum(y_i).
// The left side is increasing in the offset, so a bracketed Newton step with a
// bisection fallback always converges.
double best_offset(std::span<const FitPair> pairs, double slope, double target) {
    auto excess = [&](double b) {
        double s = 0.0, ds = 0.0;
        for (const auto& p : pairs) {
            const double q = logistic(slope * p.x + b);
            s += q;
            ds += q * (1.0 - q);
        }
        return std::pair{s - target, ds};
    };
    double lo = 0.0, hi = 0.0;
    {
        double mean = 0.0;
        for (const auto& p : pairs) mean += p.x;
        mean /= static_cast<double>(pairs.size());
        lo = hi = -slope * mean;
    }
    double step = 1.0;
    while (excess(lo).first > 0.0) {
        lo -= step;
        step *= 2.0;
    }
    step = 1.0;
    while (excess(hi).first < 0.0) {
        hi += step;
        step *= 2.0;
    }
    double b = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const auto [f, df] = excess(b);
        if (f > 0.0) {
            hi = b;
        } else {
            lo = b;
        }
        double next = (df > 0.0) ? b - f / df : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - b) < 1e-12 * (1.0 + std::abs(b)) || hi - lo < 1e-14 * (1.0 + std::abs(b))) {
            return next;
        }
        b = next;
    }
    return b;
}

void fill_regression_stats(FitState& fit) {
    const auto& pairs = fit.pairs;
    const std::size_t n = pairs.size();
    fit.count = n;
    if (n == 0) return;
    double mx = 0.0, my = 0.0;
    for (const auto& p : pairs) {
        mx += p.x;
        my += p.y;
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (const auto& p : pairs) {
        sxx += (p.x - mx) * (p.x - mx);
        sxy += (p.x - mx) * (p.y - my);
    }
    fit.mean_x = mx;
    fit.sxx = sxx;
    if (n < 3) return;
    const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
    double sse = 0.0;
    for (const auto& p : pairs) {
        const double r = p.y - (my + slope * (p.x - mx));
        sse += r * r;
    }
    fit.residual_variance = std::max(0.0, sse / static_cast<double>(n - 2));
    boost::math::students_t dist(static_cast<double>(n - 2));
    fit.t_quantile = boost::math::quantile(dist, 0.975);
}

}  // namespace

double sigmoid_eval(const SigmoidParams& params, double x) {
    const double p = logistic(params.tau * (x - params.alpha));
    return std::clamp(p, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
}

double sigmoid_nll(std::span<const FitPair> pairs, const SigmoidParams& params) {
    return nll(pairs, params.tau, -params.tau * params.alpha);
}

FitState fit_sigmoid(std::vector<FitPair> pairs, const SigmoidParams& defaults, const FitOptions& options) {
    FitState fit;
    for (auto& p : pairs) p.y = std::clamp(p.y, 0.0, 1.0);
    fit.pairs = std::move(pairs);
    fit.params = defaults;
    fill_regression_stats(fit);

    const auto& data = fit.pairs;
    if (data.size() < 3) return fit;
    const bool constant_y = std::all_of(data.begin(), data.end(), [&](const FitPair& p) { return p.y == data.front().y; });
    if (constant_y) return fit;
    const bool constant_x = std::all_of(data.begin(), data.end(), [&](const FitPair& p) { return p.x == data.front().x; });
    if (constant_x) {
        fit.params.alpha = data.front().x;
        return fit;
    }

    double target = 0.0;
    for (const auto& p : data) target += p.y;
    const double sign = defaults.direction == Direction::increasing ? 1.0 : -1.0;

    // The profile NLL over the slope is convex, hence unimodal in log|tau|.
    auto profile = [&](double log_tau) {
        const double slope = sign * std::exp(log_tau);
        const double offset = best_offset(data, slope, target);
        return std::pair{nll(data, slope, offset), offset};
    };

    constexpr double kInvPhi = 0.6180339887498949;
    double lo = std::log(options.tau_min);
    double hi = std::log(options.tau_max);
    double x1 = hi - kInvPhi * (hi - lo);
    double x2 = lo + kInvPhi * (hi - lo);
    double f1 = profile(x1).first;
    double f2 = profile(x2).first;
    int it = 0;
    while (it < options.max_iterations && hi - lo > options.tolerance) {
        ++it;
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - kInvPhi * (hi - lo);
            f1 = profile(x1).first;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + kInvPhi * (hi - lo);
            f2 = profile(x2).first;
        }
    }
    fit.iterations = it;

    // The optimum may sit on the box boundary (separable evidence).
    double best_log_tau = 0.5 * (lo + hi);
    auto best = profile(best_log_tau);
    for (double edge : {std::log(options.tau_min), std::log(options.tau_max)}) {
        const auto candidate = profile(edge);
        if (candidate.first < best.first) {
            best = candidate;
            best_log_tau = edge;
        }
    }
    double tau_abs = std::exp(best_log_tau);
    if (best_log_tau == std::log(options.tau_max)) tau_abs = options.tau_max;
    if (best_log_tau == std::log(options.tau_min)) tau_abs = options.tau_min;
    const double slope = sign * tau_abs;
    fit.params.tau = slope;
    fit.params.alpha = -best.second / slope;
    fit.trusted = true;
    return fit;
}

Confidence confidence_theta(const FitState& fit, double x) {
    if (!fit.trusted || fit.count < 3 || fit.sxx <= 0.0) return {0.0};
    const double n = static_cast<double>(fit.count);
    const double d = x - fit.mean_x;
    const double h = fit.t_quantile * std::sqrt(fit.residual_variance * (1.0 + 1.0 / n + d * d / fit.sxx));
    return {std::clamp(1.0 - h, 0.0, 1.0)};
}

double unary_weight(Confidence confidence, const SigmoidParams& params, double x) {
    return confidence.theta * params.tau * (x - params.alpha);
}

double binary_weight(Confidence confidence, const SigmoidParams& params, double similarity) {
    return confidence.theta * params.tau * (similarity - params.alpha);
}

}  // namespace gml
