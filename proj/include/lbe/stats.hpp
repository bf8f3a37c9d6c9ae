#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace lbe {

struct MeanSE {
    double mean = 0.0;
    double var = 0.0;  // unbiased sample variance
    double se = 0.0;
    std::size_t n = 0;
};

MeanSE mean_se(const std::vector<double>& xs);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;   // from residuals
    double residual_rms = 0.0;
};

// Ordinary least squares y = intercept + slope * x.
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);
// Fit of log y against log x.
LineFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

double normal_cdf(double x, double mean = 0.0, double var = 1.0);
double exponential_cdf(double x, double rate);

// One-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf);
// Two-sample statistic.
double ks_two_sample(std::vector<double> a, std::vector<double> b);
// Asymptotic p-value of sqrt(n_eff) * D.
double ks_pvalue(double d, double n_eff);

}  // namespace lbe
