#include "naln/evalstats.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>

#include "naln/errors.hpp"

namespace naln {

namespace {

double t_pdf(double x, double df) {
    const double log_norm =
        std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) - 0.5 * std::log(df * M_PI);
    return std::exp(log_norm - 0.5 * (df + 1.0) * std::log1p(x * x / df));
}

double simpson(double a, double b, double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adapt(const std::function<double(double)>& f, double a, double b, double fa, double fm,
             double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson(a, m, fa, flm, fm);
    const double right = simpson(m, b, fm, frm, fb);
    const double err = left + right - whole;
    if (depth <= 0 || std::fabs(err) <= 15.0 * tol) return left + right + err / 15.0;
    return adapt(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adapt(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
    if (a == b) return 0.0;
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    return adapt(f, a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), tol, 60);
}

constexpr double kCdfTol = 1e-10;

// one-sided tail P(T > t) for t > 0; integrates x -> 1/u beyond 1 to avoid
// cancellation in heavy tails
double upper_tail(double t, double df) {
    auto pdf = [df](double x) { return t_pdf(x, df); };
    if (t <= 1.0) {
        double inner = integrate(pdf, 0.0, t, kCdfTol);
        return 0.5 - inner;
    }
    auto transformed = [df](double u) {
        if (u <= 0.0) return 0.0;
        return t_pdf(1.0 / u, df) / (u * u);
    };
    return integrate(transformed, 0.0, 1.0 / t, kCdfTol);
}

double two_sided_p(double t, double df) {
    const double p = 2.0 * upper_tail(std::fabs(t), df);
    return std::min(1.0, std::max(p, std::numeric_limits<double>::min()));
}

void check_scores(const std::vector<double>& scores, const char* which) {
    for (double s : scores)
        if (!std::isfinite(s)) throw DataError(std::string("non-finite score in ") + which);
}

double mean_of(const std::vector<double>& xs) {
    double acc = 0.0;
    for (double x : xs) acc += x;
    return acc / static_cast<double>(xs.size());
}

double sample_var(const std::vector<double>& xs, double mean) {
    double acc = 0.0;
    for (double x : xs) acc += (x - mean) * (x - mean);
    return acc / static_cast<double>(xs.size() - 1);
}

}  // namespace

void ConditionResults::validate() const {
    if (scores.empty()) throw ParameterError("condition \"" + condition + "\" has no scores");
    check_scores(scores, condition.c_str());
}

double student_t_cdf(double t, double df) {
    if (!(df > 0.0)) throw ParameterError("degrees of freedom must be positive");
    if (t >= 0.0) return 1.0 - upper_tail(t, df);
    return upper_tail(-t, df);
}

TTestResult paired_ttest(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size())
        throw ShapeError("paired test needs aligned scores, got " + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()));
    if (a.size() < 2) throw ParameterError("paired test needs at least 2 pairs");
    check_scores(a, "first condition");
    check_scores(b, "second condition");

    const std::size_t n = a.size();
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
    const double md = mean_of(d);
    const double var = sample_var(d, md);
    if (var <= 0.0) throw StatisticsError("paired differences have zero variance");

    TTestResult r;
    r.df = static_cast<double>(n - 1);
    r.t = md / std::sqrt(var / static_cast<double>(n));
    r.p = two_sided_p(r.t, r.df);
    return r;
}

TTestResult welch_ttest(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 2 || b.size() < 2) throw ParameterError("welch test needs at least 2 per group");
    check_scores(a, "first condition");
    check_scores(b, "second condition");

    const double ma = mean_of(a), mb = mean_of(b);
    const double va = sample_var(a, ma) / static_cast<double>(a.size());
    const double vb = sample_var(b, mb) / static_cast<double>(b.size());
    if (va + vb <= 0.0) throw StatisticsError("both groups have zero variance");

    TTestResult r;
    r.t = (ma - mb) / std::sqrt(va + vb);
    r.df = (va + vb) * (va + vb) /
           (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1));
    r.p = two_sided_p(r.t, r.df);
    return r;
}

std::pair<double, double> summarize(const std::vector<double>& scores) {
    if (scores.empty()) throw ParameterError("cannot summarize an empty score list");
    check_scores(scores, "scores");
    const double m = mean_of(scores);
    if (scores.size() == 1) return {m, 0.0};
    const double se = std::sqrt(sample_var(scores, m) / static_cast<double>(scores.size()));
    return {m, se};
}

std::string results_table(const std::vector<ConditionResults>& conditions) {
    std::string out;
    char line[160];
    for (const ConditionResults& c : conditions) {
        c.validate();
        auto [mean, se] = summarize(c.scores);
        std::snprintf(line, sizeof(line), "condition %s: n %zu mean %.6f se %.6f\n",
                      c.condition.c_str(), c.scores.size(), mean, se);
        out += line;
    }
    return out;
}

std::string ttest_to_text(const std::string& label, const TTestResult& r) {
    char line[160];
    std::snprintf(line, sizeof(line), "%s: t %.6f df %g p %.6g\n", label.c_str(), r.t, r.df, r.p);
    return line;
}

}  // namespace naln
