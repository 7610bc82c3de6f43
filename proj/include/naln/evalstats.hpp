#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace naln {

// one experimental condition with a score per paired unit (seed or subject)
struct ConditionResults {
    std::string condition;
    std::vector<double> scores;

    void validate() const;
};

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
    double df = 0.0;  // integral for the paired test, fractional for Welch
};

// two-sided paired test on a - b, df = n - 1
TTestResult paired_ttest(const std::vector<double>& a, const std::vector<double>& b);

// two-sided unequal-variance test with Welch-Satterthwaite df
TTestResult welch_ttest(const std::vector<double>& a, const std::vector<double>& b);

// (mean, standard error), SE = 0 for a single score
std::pair<double, double> summarize(const std::vector<double>& scores);

// CDF of Student's t with df degrees of freedom, numerically integrated
double student_t_cdf(double t, double df);

std::string results_table(const std::vector<ConditionResults>& conditions);
std::string ttest_to_text(const std::string& label, const TTestResult& r);

}  // namespace naln
