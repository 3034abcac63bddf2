#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "perclab/error.hpp"

namespace perclab {

struct SeriesPoint {
    double n = 0;
    double estimate = 0;
    double stderr_ = 0;
};

/// f(n) = A n^(-alpha); [ci_low, ci_high] is a 95% bootstrap interval.
struct ExponentFit {
    double alpha = 0;
    double amplitude = 0;
    double ci_low = 0;
    double ci_high = 0;
    double r_squared = 0;
    std::string method = "weighted-log-log";
    std::size_t points = 0;
    std::size_t dropped_zero = 0;  // zero estimates excluded before fitting
    std::optional<double> correction;  // B of the optional A n^-alpha (1 + B/n) ansatz
};

inline nlohmann::json to_json(const ExponentFit& f) {
    nlohmann::json j{{"alpha", f.alpha},   {"amplitude", f.amplitude}, {"ci_low", f.ci_low},
                     {"ci_high", f.ci_high}, {"r_squared", f.r_squared}, {"method", f.method},
                     {"points", f.points}, {"dropped_zero", f.dropped_zero}};
    if (f.correction) j["correction"] = *f.correction;
    return j;
}

namespace detail {

struct LineFit {
    double slope = 0;
    double intercept = 0;
    double r_squared = 0;
};

inline LineFit weighted_line(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& w) {
    double sw = 0, sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sw += w[i];
        sx += w[i] * x[i];
        sy += w[i] * y[i];
    }
    const double mx = sx / sw, my = sy / sw;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += w[i] * (x[i] - mx) * (x[i] - mx);
        sxy += w[i] * (x[i] - mx) * (y[i] - my);
        syy += w[i] * (y[i] - my) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double sse = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - f.intercept - f.slope * x[i];
        sse += w[i] * r * r;
    }
    f.r_squared = syy > 0 ? std::clamp(1 - sse / syy, 0.0, 1.0) : 1.0;
    return f;
}

struct Prepared {
    std::vector<double> x, y, sigma;  // ln n, ln f, sd of ln f
    std::size_t dropped = 0;
};

inline Prepared prepare(const std::vector<SeriesPoint>& series) {
    Prepared p;
    std::set<double> scales;
    for (const auto& s : series) {
        if (!(s.n > 0)) throw SpecError("series scale must be positive");
        if (s.estimate < 0 || std::isnan(s.estimate)) throw SpecError("nonpositive estimate in series");
        if (s.stderr_ < 0) throw SpecError("negative stderr in series");
        if (s.estimate == 0) {
            ++p.dropped;
            continue;
        }
        if (!scales.insert(s.n).second) throw SpecError("degenerate scales: n = " + std::to_string(s.n) + " repeats");
        p.x.push_back(std::log(s.n));
        p.y.push_back(std::log(s.estimate));
        p.sigma.push_back(s.stderr_ / s.estimate);
    }
    if (p.x.size() < 3) throw SpecError("power-law fit needs at least 3 positive points with distinct scales");
    return p;
}

/// Inverse-variance weights; zero variances are floored at the smallest positive one so a
/// single exact point cannot take all the weight. All-zero means plain least squares.
inline std::vector<double> weights(const std::vector<double>& sigma) {
    double floor_var = 0;
    for (double s : sigma)
        if (s > 0) floor_var = floor_var == 0 ? s * s : std::min(floor_var, s * s);
    std::vector<double> w(sigma.size(), 1.0);
    if (floor_var == 0) return w;
    for (std::size_t i = 0; i < sigma.size(); ++i) w[i] = 1.0 / std::max(sigma[i] * sigma[i], floor_var);
    return w;
}

} // namespace detail

/// Weighted least squares of ln f on ln n (delta-method weights), with a parametric
/// bootstrap: every point is redrawn as ln f + sigma Z and refitted; the interval is
/// alpha +- 1.96 times the bootstrap standard deviation.
inline ExponentFit fit_power_law(const std::vector<SeriesPoint>& series, std::size_t bootstrap_B = 1000,
                                 std::uint64_t seed = 12345) {
    const auto p = detail::prepare(series);
    const auto w = detail::weights(p.sigma);
    const auto line = detail::weighted_line(p.x, p.y, w);
    ExponentFit f;
    f.alpha = -line.slope;
    f.amplitude = std::exp(line.intercept);
    f.r_squared = line.r_squared;
    f.points = p.x.size();
    f.dropped_zero = p.dropped;
    f.method = "weighted-log-log";
    double s1 = 0, s2 = 0;
    if (bootstrap_B >= 2) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> z(0.0, 1.0);
        std::vector<double> yb(p.y.size());
        for (std::size_t b = 0; b < bootstrap_B; ++b) {
            for (std::size_t i = 0; i < yb.size(); ++i) yb[i] = p.y[i] + p.sigma[i] * z(rng);
            const double a = -detail::weighted_line(p.x, yb, w).slope;
            s1 += a;
            s2 += a * a;
        }
        const double B = static_cast<double>(bootstrap_B);
        const double sd = std::sqrt(std::max(0.0, (s2 - s1 * s1 / B) / (B - 1)));
        f.ci_low = f.alpha - 1.96 * sd;
        f.ci_high = f.alpha + 1.96 * sd;
    } else {
        f.ci_low = f.ci_high = f.alpha;
    }
    return f;
}

/// Optional finite-size ansatz A n^-alpha (1 + B/n), fitted by Gauss-Newton on the log scale
/// from the plain power-law fit. The interval is the linearized 95% interval for alpha.
inline ExponentFit fit_power_law_corrected(const std::vector<SeriesPoint>& series, int iterations = 200) {
    const auto p = detail::prepare(series);
    if (p.x.size() < 4) throw SpecError("corrected fit needs at least 4 positive points");
    const auto w = detail::weights(p.sigma);
    const auto base = detail::weighted_line(p.x, p.y, w);
    double la = base.intercept, alpha = -base.slope, B = 0;
    const auto resid = [&](double la_, double al_, double B_, std::size_t i) {
        const double n = std::exp(p.x[i]);
        const double g = 1 + B_ / n;
        if (g <= 0) return std::numeric_limits<double>::infinity();
        return p.y[i] - (la_ - al_ * p.x[i] + std::log(g));
    };
    const auto sse = [&](double la_, double al_, double B_) {
        double s = 0;
        for (std::size_t i = 0; i < p.x.size(); ++i) {
            const double r = resid(la_, al_, B_, i);
            s += w[i] * r * r;
        }
        return s;
    };
    double JtJ[3][3] = {};
    for (int it = 0; it < iterations; ++it) {
        double Jtr[3] = {0, 0, 0};
        for (auto& row : JtJ) std::fill(row, row + 3, 0.0);
        for (std::size_t i = 0; i < p.x.size(); ++i) {
            const double n = std::exp(p.x[i]);
            const double J[3] = {1.0, -p.x[i], 1.0 / (n + B)};
            const double r = resid(la, alpha, B, i);
            for (int a = 0; a < 3; ++a) {
                Jtr[a] += w[i] * J[a] * r;
                for (int b = 0; b < 3; ++b) JtJ[a][b] += w[i] * J[a] * J[b];
            }
        }
        // solve JtJ d = Jtr by Cramer's rule
        const auto det3 = [](const double m[3][3]) {
            return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                   m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        };
        const double D = det3(JtJ);
        if (std::abs(D) < 1e-300) break;
        double d[3];
        for (int c = 0; c < 3; ++c) {
            double M[3][3];
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b) M[a][b] = b == c ? Jtr[a] : JtJ[a][b];
            d[c] = det3(M) / D;
        }
        double step = 1.0;
        const double cur = sse(la, alpha, B);
        while (step > 1e-8 && !(sse(la + step * d[0], alpha + step * d[1], B + step * d[2]) <= cur)) step /= 2;
        if (step <= 1e-8) break;
        la += step * d[0];
        alpha += step * d[1];
        B += step * d[2];
        if (std::abs(step * d[1]) < 1e-14 && std::abs(step * d[2]) < 1e-14 * (1 + std::abs(B))) break;
    }
    ExponentFit f;
    f.alpha = alpha;
    f.amplitude = std::exp(la);
    f.correction = B;
    f.points = p.x.size();
    f.dropped_zero = p.dropped;
    f.method = "corrected-log-log";
    double ybar = 0, sw = 0;
    for (std::size_t i = 0; i < p.y.size(); ++i) {
        ybar += w[i] * p.y[i];
        sw += w[i];
    }
    ybar /= sw;
    double syy = 0;
    for (std::size_t i = 0; i < p.y.size(); ++i) syy += w[i] * (p.y[i] - ybar) * (p.y[i] - ybar);
    f.r_squared = syy > 0 ? std::clamp(1 - sse(la, alpha, B) / syy, 0.0, 1.0) : 1.0;
    // variance of alpha from the inverse normal matrix (weights are inverse variances)
    const double cof = JtJ[0][0] * JtJ[2][2] - JtJ[0][2] * JtJ[2][0];
    const double det = JtJ[0][0] * (JtJ[1][1] * JtJ[2][2] - JtJ[1][2] * JtJ[2][1]) -
                       JtJ[0][1] * (JtJ[1][0] * JtJ[2][2] - JtJ[1][2] * JtJ[2][0]) +
                       JtJ[0][2] * (JtJ[1][0] * JtJ[2][1] - JtJ[1][1] * JtJ[2][0]);
    const bool has_noise = std::any_of(p.sigma.begin(), p.sigma.end(), [](double s) { return s > 0; });
    const double sd = (has_noise && det > 0) ? std::sqrt(std::max(0.0, cof / det)) : 0.0;
    f.ci_low = alpha - 1.96 * sd;
    f.ci_high = alpha + 1.96 * sd;
    return f;
}

struct RatioExponent {
    double n = 0;  // the smaller scale of the pair
    double alpha = 0;
    double stderr_ = 0;
};

/// alpha_k = log_base(f(n) / f(base n)) for every pair present in the series.
inline std::vector<RatioExponent> ratio_exponent(const std::vector<SeriesPoint>& series, double base = 2) {
    require(base > 1, "ratio base must exceed 1");
    std::vector<RatioExponent> out;
    for (const auto& a : series)
        for (const auto& b : series)
            if (std::abs(b.n - base * a.n) < 1e-9 * b.n) {
                if (a.estimate <= 0 || b.estimate <= 0) throw SpecError("ratio exponent needs positive estimates");
                const double lb = std::log(base);
                const double ra = a.stderr_ / a.estimate, rb = b.stderr_ / b.estimate;
                out.push_back({a.n, std::log(a.estimate / b.estimate) / lb, std::sqrt(ra * ra + rb * rb) / lb});
            }
    if (out.empty()) throw SpecError("ratio exponent: no (n, " + std::to_string(base) + " n) pair in the series");
    std::sort(out.begin(), out.end(), [](const RatioExponent& x, const RatioExponent& y) { return x.n < y.n; });
    return out;
}

struct PaperTarget {
    std::string tag;
    double exponent = 0;
    std::string locus;
    bool conjectural = false;
};

/// Decay exponents the theory predicts for each measured quantity, in dimension d.
inline std::vector<PaperTarget> paper_targets(std::size_t d) {
    const double dd = static_cast<double>(d);
    return {
        {"pi", 2.0, "full-space one-arm asymptotic", false},
        {"pi_H", 3.0, "half-space one-arm theorem", false},
        {"tau", dd - 2, "bulk two-point function", false},
        {"tau_box", dd - 2, "box-restricted two-point theorem", false},
        {"tau_H_one", dd - 1, "half-space two-point, one point on the boundary", false},
        {"tau_H_both", dd, "half-space two-point, both points on the boundary", false},
        {"tail_H", 0.75, "half-space cluster-size tail", false},
        {"corner", 2 * dd - 2, "corner one-arm conjecture", true},
        {"brw_survival", 1.0, "critical tree survival (Kolmogorov)", false},
    };
}

inline PaperTarget lookup_target(const std::string& tag, std::size_t d) {
    for (auto& t : paper_targets(d))
        if (t.tag == tag) return t;
    throw SpecError("no target exponent for quantity '" + tag + "'");
}

/// Pass when the fitted exponent lies within the tolerance band around the target.
inline bool within_band(const ExponentFit& f, double target, double tolerance) {
    return std::abs(f.alpha - target) <= tolerance;
}

} // namespace perclab
