#pragma once

#include "gk/ld_panel.hpp"

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace gk {

struct Study {
    std::string name;
    double n = 0.0;        // sample size
    Eigen::VectorXd z;     // aligned to a shared variant order
};

struct StudyPanel {
    std::vector<Study> studies;
    Eigen::MatrixXd cor_s;  // L x L study correlation from sample overlap

    int n_studies() const { return static_cast<int>(studies.size()); }
    int n_variants() const { return studies.empty() ? 0 : static_cast<int>(studies[0].z.size()); }
};

// Correlation between studies estimated from LD-whitened Z-scores over the
// variants that look null in every study (|z| < null_z_cut). Requires at
// least min_null eligible variants. When no panel is given the scores are
// used unwhitened. Result is projected to the nearest unit-diagonal PSD
// matrix (eigenvalue clipping, diagonal rescale).
Eigen::MatrixXd estimate_study_correlation(const std::vector<Study>& studies,
                                           const LdPanel* panel = nullptr,
                                           double null_z_cut = 2.0, int min_null = 100);

// Exact solution of
//   minimize w^T cor_s w  subject to  sum_l w_l sqrt(n_l) = 1, w >= 0
// by enumerating the 2^L - 1 support patterns (L <= 20). Ties prefer the
// larger support, which returns the symmetric point under full overlap.
Eigen::VectorXd optimal_weights(const StudyPanel& panel);

struct MetaZResult {
    Eigen::VectorXd z;
    double variance_scalar = 1.0;  // u^T cor_s u with u_l = w_l sqrt(n_l); divides the sum
};

// z_meta = sum_l w_l sqrt(n_l) z_l / sqrt(variance_scalar); unit null variance
// given cor_s.
MetaZResult combine_meta_z(const StudyPanel& panel, const Eigen::VectorXd& weights);

// Fisher's combined probability test; p-values at 0 are clamped to 1e-300.
double fisher_combine(const std::vector<double>& p_values, bool* clamped = nullptr);

// Per-variant Fisher combination of two-sided p-values with the sign taken
// from the n-weighted mean of the study z-scores.
Eigen::VectorXd fisher_meta_z(const std::vector<Study>& studies);

}
