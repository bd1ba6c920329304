#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "levyreg/errors.hpp"

namespace levyreg {

/// Neumaier compensated sum.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) comp_ += (sum_ - t) + x;
        else comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

struct Estimate {
    double mean = 0.0;
    double se = 0.0;
};

/// Mean with a batch-means standard error over `batches` contiguous batches.
inline Estimate batch_means(std::span<const double> values, int batches) {
    const std::size_t n = values.size();
    if (batches < 2) throw DomainError("batch_means: need at least two batches");
    if (n < static_cast<std::size_t>(batches)) throw DomainError("batch_means: fewer values than batches");
    std::vector<double> bm(batches);
    CompensatedSum total;
    for (int b = 0; b < batches; ++b) {
        const std::size_t lo = n * b / batches, hi = n * (b + 1) / batches;
        CompensatedSum s;
        for (std::size_t i = lo; i < hi; ++i) s.add(values[i]);
        bm[b] = s.value() / static_cast<double>(hi - lo);
        total.add(s.value());
    }
    const double mean = total.value() / static_cast<double>(n);
    double var = 0.0;
    for (double m : bm) var += (m - mean) * (m - mean);
    var /= (batches - 1);
    return {mean, std::sqrt(var / batches)};
}

/// Batch means of each batch, in order.
inline std::vector<double> batch_averages(std::span<const double> values, int batches) {
    const std::size_t n = values.size();
    std::vector<double> bm(batches, 0.0);
    for (int b = 0; b < batches; ++b) {
        const std::size_t lo = n * b / batches, hi = n * (b + 1) / batches;
        CompensatedSum s;
        for (std::size_t i = lo; i < hi; ++i) s.add(values[i]);
        bm[b] = hi > lo ? s.value() / static_cast<double>(hi - lo) : 0.0;
    }
    return bm;
}

inline Estimate mean_and_se(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n < 2) throw DomainError("mean_and_se: need at least two values");
    CompensatedSum s;
    for (double v : values) s.add(v);
    const double mean = s.value() / static_cast<double>(n);
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n - 1);
    return {mean, std::sqrt(var / static_cast<double>(n))};
}

/// sup |F_a - F_b| of the two empirical CDFs.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw DomainError("ks_two_sample: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(i / na - j / nb));
    }
    return d;
}

/// Asymptotic 1% critical value of the two-sample statistic.
inline double ks_critical_1pct(std::size_t n, std::size_t m) {
    const double dn = static_cast<double>(n), dm = static_cast<double>(m);
    return 1.6276 * std::sqrt((dn + dm) / (dn * dm));
}

/// sup |F_n - F| against a continuous CDF.
inline double ks_one_sample(std::vector<double> a, const std::function<double(double)>& cdf) {
    if (a.empty()) throw DomainError("ks_one_sample: empty sample");
    std::sort(a.begin(), a.end());
    const double n = static_cast<double>(a.size());
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double f = cdf(a[i]);
        d = std::max({d, (i + 1) / n - f, f - i / n});
    }
    return d;
}

inline double ks_critical_1pct(std::size_t n) { return 1.6276 / std::sqrt(static_cast<double>(n)); }

}  // namespace levyreg
