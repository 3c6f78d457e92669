#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace slowfast {

struct RatePoint {
    double epsilon = 0.0;
    double error = 0.0;
    double stderr_ = 0.0;
};

struct RateFitResult {
    std::vector<RatePoint> points;           // admissible points used by the fit
    std::vector<RatePoint> excluded;         // stderr > 0.3 * error
    double slope = 0.0;                      // of log2 error vs log2 epsilon
    double intercept = 0.0;
    double r_squared = 0.0;
    double slope_ci_halfwidth = 0.0;         // 95%
};

/// Weighted least squares of log2(error) on log2(epsilon), weights
/// 1/stderr^2 propagated to log scale. Points with stderr > 0.3*error are
/// excluded and reported.
inline RateFitResult fit_rate(const std::vector<RatePoint>& raw) {
    RateFitResult out;
    for (const auto& p : raw) {
        if (!(p.error > 0.0)) {
            out.excluded.push_back(p);
            continue;
        }
        if (p.stderr_ > 0.3 * p.error)
            out.excluded.push_back(p);
        else
            out.points.push_back(p);
    }
    if (out.points.size() < 4)
        throw std::invalid_argument("fit_rate: need at least 4 admissible points");

    const double ln2 = std::log(2.0);
    double sw = 0.0, swx = 0.0, swy = 0.0, swxx = 0.0, swxy = 0.0;
    std::vector<double> xs, ys, ws;
    for (const auto& p : out.points) {
        const double x = std::log2(p.epsilon);
        const double y = std::log2(p.error);
        // stderr on log2 scale; zero stderr gets a nominal tight weight
        const double sy = p.stderr_ > 0.0 ? p.stderr_ / (p.error * ln2) : 1e-6;
        const double w = 1.0 / (sy * sy);
        xs.push_back(x);
        ys.push_back(y);
        ws.push_back(w);
        sw += w;
        swx += w * x;
        swy += w * y;
        swxx += w * x * x;
        swxy += w * x * y;
    }
    const double denom = sw * swxx - swx * swx;
    out.slope = (sw * swxy - swx * swy) / denom;
    out.intercept = (swy - out.slope * swx) / sw;

    double ss_res = 0.0, ss_tot = 0.0;
    const double ybar = swy / sw;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double fit = out.intercept + out.slope * xs[i];
        ss_res += ws[i] * (ys[i] - fit) * (ys[i] - fit);
        ss_tot += ws[i] * (ys[i] - ybar) * (ys[i] - ybar);
    }
    out.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;

    const double n = static_cast<double>(xs.size());
    if (n > 2.0) {
        const double s2 = ss_res / (n - 2.0);
        out.slope_ci_halfwidth = 1.96 * std::sqrt(s2 * sw / denom);
    }
    return out;
}

}  // namespace slowfast
