#pragma once

#include "gk/ld_panel.hpp"

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace gk {

enum class ZSource { direct, from_p, meta };

// Per-variant signed Z-scores plus provenance. n is 0 where unknown.
struct ZVector {
    std::vector<VariantId> variants;
    Eigen::VectorXd z;
    Eigen::VectorXd n;
    ZSource source = ZSource::direct;
    int clamped = 0;  // p-values clamped at 1e-300 during conversion

    int p() const { return static_cast<int>(variants.size()); }
};

// Summary-statistics TSV with header columns chrom, pos, ref, alt and either
// z or the pair (p, beta_sign); n is optional. Rows with z use it directly;
// otherwise p and beta_sign are converted.
ZVector read_sumstats(const std::string& path);
void write_sumstats(const ZVector& zv, const std::string& path);

// Cohort TSV: header `y`, covariate columns starting with `x`, then variant
// columns named chrom:pos:ref:alt holding 0/1/2 dosages. The intercept is
// prepended to the covariates on load.
struct CohortFile {
    Eigen::VectorXd y;
    Eigen::MatrixXd x;
    Eigen::MatrixXd geno;
    std::vector<VariantId> variants;
};
CohortFile read_cohort(const std::string& path);

// Dense kinship text file: first line "n=<count>", then an n x n matrix.
Eigen::MatrixXd read_kinship_matrix(const std::string& path);

struct StudyManifestEntry {
    std::string name;
    double n = 0.0;
    std::string path;
};
// Study manifest TSV with header: name, n, path.
std::vector<StudyManifestEntry> read_study_manifest(const std::string& path);

// FNV-1a 64-bit digest of a file's bytes, as "fnv1a64:<hex>".
std::string file_digest(const std::string& path);

}
