#pragma once

#include <Eigen/Dense>
#include <compare>
#include <cstdint>
#include <string>
#include <vector>

namespace gk {

struct VariantId {
    int32_t chrom = 0;
    int64_t pos = 0;
    std::string ref;
    std::string alt;

    auto operator<=>(const VariantId&) const = default;

    // "chrom:pos:ref:alt" (the form used in summary-statistic tables).
    std::string str() const;
    static VariantId parse(const std::string& text);
};

// One LD block: variant metadata plus the Pearson correlation matrix.
struct LdPanel {
    std::vector<VariantId> variants;
    Eigen::MatrixXd sigma;

    int p() const { return static_cast<int>(variants.size()); }
};

enum class LdFormat { dense_text, dense_binary };

// Reads and validates a panel. Symmetry is enforced by averaging with the
// transpose; entries beyond [-1-1e-6, 1+1e-6], non-finite values, or a
// dimension mismatch raise data_error / io_error.
LdPanel load_ld_panel(const std::string& path, LdFormat format);
void save_ld_panel(const LdPanel& panel, const std::string& path, LdFormat format);

// Shrinkage toward the identity: sigma <- (1-eps)*sigma + eps*I.
// Keeps the unit diagonal and lifts the smallest eigenvalue to at least
// eps + (1-eps)*lambda_min.
LdPanel regularize(const LdPanel& panel, double eps = 0.05);

struct ClusterAssignment {
    std::vector<int> cluster_of;       // variant index -> cluster index
    std::vector<int> representative;   // cluster index -> variant index
    int n_clusters() const { return static_cast<int>(representative.size()); }
};

// Single-linkage agglomeration on 1-|corr|, cut so that no between-cluster
// |corr| reaches the cutoff. The representative maximizes the sum of
// absolute within-cluster correlations; ties break on the smallest
// (chrom,pos,ref,alt).
ClusterAssignment cluster_variants(const LdPanel& panel, double cutoff = 0.75);

// Selected representatives plus same-cluster neighbors that are both in
// high LD with the representative (|corr| >= cutoff) and at least as strong
// in signal (|z_j| >= |z_rep|).
std::vector<int> expand_selection(const ClusterAssignment& clusters, const LdPanel& panel,
                                  const std::vector<int>& selected_reps,
                                  const Eigen::VectorXd& z, double cutoff = 0.75);

}
