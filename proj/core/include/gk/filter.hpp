#pragma once

#include <Eigen/Dense>
#include <vector>

namespace gk {

// Per-variant multiple-knockoff statistics. kappa is the index of the
// largest squared score among (original, copy 1..m) with 0 meaning the
// original; tau is the gap between that maximum and the median of the
// remaining values; w is the signed importance statistic
// (T - median_m T^m) * 1{T >= max_m T^m}. q is filled by q_values().
struct FeatureStats {
    Eigen::VectorXi kappa;
    Eigen::VectorXd tau;
    Eigen::VectorXd w;
    Eigen::VectorXd q;
    int p() const { return static_cast<int>(kappa.size()); }
};

struct SelectionResult {
    double threshold = 0.0;   // +inf when nothing is selectable
    std::vector<int> selected;
    double fdr_target = 0.0;
};

FeatureStats feature_stats(const Eigen::VectorXd& z,
                           const std::vector<Eigen::VectorXd>& knockoff_z);

// Multiple-knockoff selection rule: the threshold is the smallest positive
// tau value t with
//   (1/m + #{kappa>=1, tau>=t}/m) / max(1, #{kappa=0, tau>=t}) <= fdr_target.
SelectionResult knockoff_threshold(const FeatureStats& stats, double fdr_target, int m);

// q_j = smallest FDR target at which variant j is selected (1 when it never
// is). Exact, computed from the achieved ratios.
Eigen::VectorXd q_values(const FeatureStats& stats, int m);

}
