#pragma once

#include "gk/assoc.hpp"
#include "gk/knockoff.hpp"
#include "gk/ld_panel.hpp"
#include "gk/rng.hpp"

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <string>
#include <vector>

namespace gk {

// Binary haplotype pool; genotypes are sums of two haplotype rows.
struct HaplotypePool {
    Eigen::Matrix<int8_t, Eigen::Dynamic, Eigen::Dynamic> haps;  // H x p, entries 0/1
    std::vector<VariantId> variants;
    Eigen::VectorXd freq;  // per-site allele frequency of the pool

    int n_haps() const { return static_cast<int>(haps.rows()); }
    int n_sites() const { return static_cast<int>(haps.cols()); }
    void recompute_freq();
};

HaplotypePool load_haplotypes(const std::string& path);
void save_haplotypes(const HaplotypePool& pool, const std::string& path);

// Deterministic synthetic pool with a blocky AR(1)-like LD profile over a
// 200kb coordinate range. Used for the bundled data file.
HaplotypePool synthetic_pool(uint64_t seed, int n_haps, int n_sites);

// Keeps sites with minor allele frequency above the cutoff.
HaplotypePool filter_maf(const HaplotypePool& pool, double min_maf = 0.01);
HaplotypePool subset_sites(const HaplotypePool& pool, const std::vector<int>& sites);

// Pearson correlation of haplotype columns (equals the implied genotype
// correlation under random mating).
Eigen::MatrixXd pool_correlation(const HaplotypePool& pool);

// The fixed three-generation 10-member pedigree:
// members 0,1 grandparents; 2,3 their children; 4,5 married-in parents;
// 6,7 children of (2,4); 8,9 children of (3,5).
inline constexpr int pedigree_size = 10;
Eigen::MatrixXd pedigree_kinship();

struct HapPair {
    int a = -1;
    int b = -1;
};

// No-recombination gene dropping: the child gets one intact haplotype from
// each parent, chosen with probability 1/2.
HapPair gene_drop(const HapPair& parent_a, const HapPair& parent_b, Rng& rng);

struct PedigreeCohort {
    std::vector<std::array<HapPair, pedigree_size>> families;
    int n() const { return static_cast<int>(families.size()) * pedigree_size; }
};

PedigreeCohort build_pedigree_cohort(const HaplotypePool& pool, int n_families, Rng& rng);

// Genotype dosage matrices at the given pool sites.
Eigen::MatrixXd genotypes(const HaplotypePool& pool, const PedigreeCohort& cohort,
                          const std::vector<int>& sites);
Eigen::MatrixXd sample_unrelated_genotypes(const HaplotypePool& pool, int n, Rng& rng);
Eigen::MatrixXd sample_unrelated_genotypes(const HaplotypePool& pool, int n,
                                           const std::vector<int>& sites, Rng& rng);

enum class PhenotypeKind { quantitative, dichotomous };
enum class RelatednessKind { unrelated, pedigree };
enum class Scheme { none, A, B, C };

struct SimScenario {
    PhenotypeKind phenotype = PhenotypeKind::quantitative;
    RelatednessKind relatedness = RelatednessKind::unrelated;
    double theta = 0.0;
    Scheme scheme = Scheme::none;
    int n_causal = 10;
    double effect_a = -1.0;  // negative -> 1 for quantitative, 2.5 for dichotomous; 0 = global null
    double prevalence = 0.10;
    int n = 10000;                // analyzed sample size
    int foundation_families = 0;  // 0 -> n families (10n individuals)
    int replicates = 100;
    uint64_t seed = 1;
    int n_sites = 0;  // 0 -> all pool sites
    int m_copies = 5;
    DiagMethod d_method = DiagMethod::sdp_ascent;
    double cluster_cutoff = 0.75;
    double ld_reg_eps = 0.05;
    std::string haplotype_path;  // empty -> built-in synthetic pool
    std::vector<double> fdr_targets{0.1};
    std::vector<std::string> methods{"ghost-mixed", "ghost-score"};
    int workers = 1;

    double effect() const {
        if (effect_a >= 0.0) return effect_a;
        return phenotype == PhenotypeKind::quantitative ? 1.0 : 2.5;
    }
};

struct PhenotypeSim {
    Eigen::VectorXd y;
    Eigen::VectorXd x1;
    std::vector<int> causal;  // column indices into the analyzed genotype matrix
    Eigen::VectorXd beta;
    double beta0 = 0.0;
};

// Phenotypes per the generative models: 10 causal representatives with
// |beta_j| = sqrt(a / (n_causal * Var(G_j))), half protective; quantitative
// residual variance 8 (unrelated) or 8 - theta (pedigree); dichotomous
// intercept calibrated by root finding so the prevalence hits its target.
PhenotypeSim simulate_phenotypes(const Eigen::MatrixXd& geno, const SimScenario& sc,
                                 const std::optional<Kinship>& kinship, Rng& rng);

struct SchemeSample {
    std::vector<int> indices;  // rows of the foundation matrix, family-contiguous
    std::vector<int> family_of;
    std::vector<std::vector<int>> members_per_family;  // within-family member ids, per sampled family
    bool padded = false;  // scheme C had fewer cases than requested
};

SchemeSample apply_scheme(const Eigen::VectorXd& y, int n_families, Scheme scheme, int n_target,
                          Rng& rng);

struct RelatednessK {
    double k = 0.0;
    bool defined = false;  // false when no within-family pairs were sampled
};

// Concordant within-family pairs over all within-family pairs, restricted to
// the sampled individuals.
RelatednessK relatedness_k(const std::vector<int>& family_of, const std::vector<int>& status);

struct FdrPower {
    double fdr = 0.0;    // 0 when nothing is selected
    double power = 0.0;  // true selections / n_causal
};
FdrPower fdr_power(const std::vector<int>& selected, const std::vector<int>& causal, int n_causal);

struct ExperimentCell {
    std::string method;
    double fdr_target = 0.0;
    double fdr = 0.0, fdr_se = 0.0;
    double power = 0.0, power_se = 0.0;
    int replicates_used = 0;
};

struct ReplicateRecord {
    int replicate = 0;
    std::string method;
    double fdr_target = 0.0;
    int n_selected = 0;
    int n_true = 0;
    double fdr = 0.0;
    double power = 0.0;
    std::string status;  // "ok" or the failure reason
};

struct ExperimentResult {
    std::vector<ExperimentCell> cells;
    std::vector<ReplicateRecord> log;
    int replicates_failed = 0;
    int p_representatives = 0;
};

// Full FDR/power experiment across replicates. Methods:
//   ghost-mixed / ghost-score       knockoff Z-scores from the summary-level
//                                   transform, z from the mixed-model or the
//                                   unadjusted score test
//   individual-mixed / individual-score
//                                   second-order knockoff genotypes per sample,
//                                   tested like the originals
//   ghost-wald / ghost-lrt          fixed-effect test inputs (unrelated)
//   ghost-mega / ghost-meta / ghost-fisher
//                                   pooled vs two-study combined inputs (unrelated)
ExperimentResult run_experiment(const SimScenario& sc);

// Scenario config parsing (key = value lines). Throws data_error naming the
// offending key.
SimScenario parse_scenario(const std::string& path);

}
