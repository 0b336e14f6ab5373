// Brute-force reference implementations used as independent oracles.
// Everything here is deliberately naive and kept separate from the library
// code paths it checks.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>
#include <vector>

namespace oracle {

// Classic agglomerative single linkage: repeatedly merge the two clusters
// with the highest inter-cluster |corr| (smallest dissimilarity), stopping
// when every between-cluster linkage falls below the cutoff.
inline std::vector<int> single_linkage(const Eigen::MatrixXd& sigma, double cutoff) {
    const int p = static_cast<int>(sigma.rows());
    std::vector<std::set<int>> clusters;
    for (int j = 0; j < p; ++j) clusters.push_back({j});
    while (clusters.size() > 1) {
        double best = -1.0;
        size_t ba = 0, bb = 0;
        for (size_t a = 0; a < clusters.size(); ++a)
            for (size_t b = a + 1; b < clusters.size(); ++b) {
                double link = 0.0;
                for (int i : clusters[a])
                    for (int j : clusters[b]) link = std::max(link, std::fabs(sigma(i, j)));
                if (link > best) {
                    best = link;
                    ba = a;
                    bb = b;
                }
            }
        if (best < cutoff) break;
        clusters[ba].insert(clusters[bb].begin(), clusters[bb].end());
        clusters.erase(clusters.begin() + bb);
    }
    std::vector<int> label(p, -1);
    for (size_t c = 0; c < clusters.size(); ++c)
        for (int j : clusters[c]) label[j] = static_cast<int>(c);
    return label;
}

// Partitions equal up to relabeling.
inline bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) return false;
    std::vector<std::pair<int, int>> pairs;
    for (size_t i = 0; i < a.size(); ++i)
        for (size_t j = i + 1; j < a.size(); ++j)
            if ((a[i] == a[j]) != (b[i] == b[j])) return false;
    return true;
}

// Direct O(p^2) scan of the multiple-knockoff threshold rule.
struct ThresholdScan {
    double threshold = std::numeric_limits<double>::infinity();
    std::vector<int> selected;
};

inline ThresholdScan knockoff_threshold_scan(const Eigen::VectorXi& kappa,
                                             const Eigen::VectorXd& tau, double target, int m) {
    const int p = static_cast<int>(kappa.size());
    ThresholdScan out;
    for (int c = 0; c < p; ++c) {
        const double t = tau[c];
        if (!(t > 0.0)) continue;
        int orig = 0, knock = 0;
        for (int j = 0; j < p; ++j) {
            if (tau[j] < t) continue;
            if (kappa[j] == 0) ++orig;
            else ++knock;
        }
        const double ratio = (1.0 / m + static_cast<double>(knock) / m) / std::max(1, orig);
        if (ratio <= target && t < out.threshold) out.threshold = t;
    }
    if (std::isfinite(out.threshold))
        for (int j = 0; j < p; ++j)
            if (kappa[j] == 0 && tau[j] >= out.threshold) out.selected.push_back(j);
    return out;
}

// Textbook OLS score statistic with intercept-only covariates.
inline double classic_score_z(const Eigen::VectorXd& y, const Eigen::VectorXd& g) {
    const int n = static_cast<int>(y.size());
    const Eigen::VectorXd yc = y.array() - y.mean();
    const Eigen::VectorXd gc = g.array() - g.mean();
    const double sigma2 = yc.squaredNorm() / n;
    return gc.dot(yc) / std::sqrt(sigma2 * gc.squaredNorm());
}

// Regularized upper incomplete gamma Q(a, x) (series / continued fraction).
inline double gamma_q(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_q domain");
    if (x == 0.0) return 1.0;
    const double gln = std::lgamma(a);
    if (x < a + 1.0) {
        double ap = a, sum = 1.0 / a, del = sum;
        for (int i = 0; i < 500; ++i) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::fabs(del) < std::fabs(sum) * 1e-15) break;
        }
        return 1.0 - sum * std::exp(-x + a * std::log(x) - gln);
    }
    double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
    for (int i = 1; i < 500; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < 1e-300) d = 1e-300;
        c = b + an / c;
        if (std::fabs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - gln) * h;
}

inline double chisq_upper(double x, double df) { return gamma_q(0.5 * df, 0.5 * x); }

// Chi-square goodness-of-fit p-value against a uniform distribution over k bins.
inline double uniform_gof_p(const std::vector<long>& counts) {
    const int k = static_cast<int>(counts.size());
    long n = 0;
    for (long c : counts) n += c;
    const double expect = static_cast<double>(n) / k;
    double stat = 0.0;
    for (long c : counts) stat += (c - expect) * (c - expect) / expect;
    return chisq_upper(stat, k - 1.0);
}

// One-sample Kolmogorov-Smirnov test against Uniform(0,1).
inline double ks_uniform_p(std::vector<double> x) {
    std::sort(x.begin(), x.end());
    const int n = static_cast<int>(x.size());
    double d = 0.0;
    for (int i = 0; i < n; ++i) {
        d = std::max(d, std::fabs(x[i] - static_cast<double>(i) / n));
        d = std::max(d, std::fabs(static_cast<double>(i + 1) / n - x[i]));
    }
    const double lambda = (std::sqrt(static_cast<double>(n)) + 0.12 + 0.11 / std::sqrt(static_cast<double>(n))) * d;
    double p = 0.0;
    for (int k = 1; k <= 100; ++k)
        p += 2.0 * ((k % 2 == 1) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    return std::clamp(p, 0.0, 1.0);
}

// Random correlation matrix: normalized Gram of a random n x p matrix.
template <typename RngT>
Eigen::MatrixXd random_correlation(int p, int n, RngT& rng) {
    Eigen::MatrixXd a(n, p);
    for (int j = 0; j < p; ++j)
        for (int i = 0; i < n; ++i) a(i, j) = rng.next_normal();
    Eigen::MatrixXd c = a.transpose() * a / static_cast<double>(n);
    Eigen::VectorXd d = c.diagonal().cwiseSqrt();
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) c(i, j) /= d[i] * d[j];
    c.diagonal().setOnes();
    return 0.5 * (c + c.transpose()).eval();
}

}  // namespace oracle
