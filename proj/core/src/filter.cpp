#include "gk/filter.hpp"
#include "gk/errors.hpp"
#include "gk/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace gk {

FeatureStats feature_stats(const Eigen::VectorXd& z,
                           const std::vector<Eigen::VectorXd>& knockoff_z) {
    const int p = static_cast<int>(z.size());
    const int m = static_cast<int>(knockoff_z.size());
    if (m < 1) throw data_error("feature_stats: need at least one knockoff copy");
    for (const auto& k : knockoff_z)
        if (k.size() != p) throw data_error("feature_stats: knockoff length mismatch");

    FeatureStats st;
    st.kappa.resize(p);
    st.tau.resize(p);
    st.w.resize(p);
    st.q = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());

    std::vector<double> scores(m + 1), rest, copies(m);
    for (int j = 0; j < p; ++j) {
        scores[0] = z[j] * z[j];
        for (int k = 0; k < m; ++k) {
            copies[k] = knockoff_z[k][j] * knockoff_z[k][j];
            scores[k + 1] = copies[k];
        }
        // Largest score wins; the original wins ties, then the lowest copy.
        int arg = 0;
        for (int k = 1; k <= m; ++k)
            if (scores[k] > scores[arg]) arg = k;
        const double top = scores[arg];
        st.kappa[j] = arg;

        // tau: median of the scores left after removing every instance of the max.
        rest.clear();
        for (int k = 0; k <= m; ++k)
            if (scores[k] < top) rest.push_back(scores[k]);
        st.tau[j] = rest.empty() ? 0.0 : top - median_inplace(rest);

        // w: importance gap against the median over all m knockoff copies.
        double kmax = copies[0];
        for (int k = 1; k < m; ++k) kmax = std::max(kmax, copies[k]);
        if (scores[0] >= kmax) {
            std::vector<double> all_copies(copies);
            st.w[j] = scores[0] - median_inplace(all_copies);
        } else {
            st.w[j] = 0.0;
        }
    }
    return st;
}

namespace {

// Achieved FDP estimate at every distinct positive tau candidate, candidates
// sorted descending. Returns (candidates, ratios).
void candidate_ratios(const FeatureStats& stats, int m,
                      std::vector<double>& ts, std::vector<double>& ratios) {
    const int p = stats.p();
    std::vector<int> order(p);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return stats.tau[a] > stats.tau[b]; });

    ts.clear();
    ratios.clear();
    int n_orig = 0, n_knock = 0;
    for (int i = 0; i < p;) {
        const double t = stats.tau[order[i]];
        // accumulate all entries tied at this tau
        while (i < p && stats.tau[order[i]] == t) {
            if (stats.kappa[order[i]] == 0)
                ++n_orig;
            else
                ++n_knock;
            ++i;
        }
        if (t <= 0.0) break;
        const double ratio =
            (1.0 / m + static_cast<double>(n_knock) / m) / std::max(1, n_orig);
        ts.push_back(t);
        ratios.push_back(ratio);
    }
}

}  // namespace

SelectionResult knockoff_threshold(const FeatureStats& stats, double fdr_target, int m) {
    if (!(fdr_target > 0.0 && fdr_target < 1.0))
        throw data_error("knockoff_threshold: fdr_target must be in (0,1)");
    if (m < 1) throw data_error("knockoff_threshold: m must be >= 1");

    std::vector<double> ts, ratios;
    candidate_ratios(stats, m, ts, ratios);

    SelectionResult out;
    out.fdr_target = fdr_target;
    out.threshold = std::numeric_limits<double>::infinity();
    // min over feasible candidates; candidates are descending, so keep the last hit
    for (size_t i = 0; i < ts.size(); ++i)
        if (ratios[i] <= fdr_target) out.threshold = ts[i];

    if (std::isfinite(out.threshold)) {
        for (int j = 0; j < stats.p(); ++j)
            if (stats.kappa[j] == 0 && stats.tau[j] >= out.threshold) out.selected.push_back(j);
    }
    return out;
}

Eigen::VectorXd q_values(const FeatureStats& stats, int m) {
    if (m < 1) throw data_error("q_values: m must be >= 1");
    const int p = stats.p();
    Eigen::VectorXd q = Eigen::VectorXd::Ones(p);

    std::vector<double> ts, ratios;
    candidate_ratios(stats, m, ts, ratios);
    if (ts.empty()) return q;

    // suffix minima over descending candidates = best achievable ratio with
    // a threshold at or below each candidate
    std::vector<double> best(ts.size());
    double run = std::numeric_limits<double>::infinity();
    for (int i = static_cast<int>(ts.size()) - 1; i >= 0; --i) {
        run = std::min(run, ratios[i]);
        best[i] = run;
    }
    for (int j = 0; j < p; ++j) {
        if (stats.kappa[j] != 0 || stats.tau[j] <= 0.0) continue;
        // first candidate with t <= tau_j (ts descending)
        const auto it = std::lower_bound(ts.begin(), ts.end(), stats.tau[j],
                                         [](double t, double tau) { return t > tau; });
        if (it != ts.end())
            q[j] = std::min(1.0, best[static_cast<size_t>(it - ts.begin())]);
    }
    return q;
}

}
