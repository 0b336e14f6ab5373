#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

namespace gk {

enum class Family { gaussian, binomial };

// Block-diagonal relatedness matrix. Blocks are stored deduplicated:
// instance i is unique_blocks[block_of[i]]. Identity kinship is n blocks
// of size one.
struct Kinship {
    std::vector<Eigen::MatrixXd> unique_blocks;
    std::vector<int> block_of;
    std::vector<int> offset;  // start row of each instance
    int total = 0;

    static Kinship identity(int n);
    static Kinship repeated(const Eigen::MatrixXd& block, int count);
    static Kinship dense(const Eigen::MatrixXd& k);
    // Per-family principal submatrices of `block` (used when sampling
    // schemes keep only some members of each family).
    static Kinship from_subsets(const Eigen::MatrixXd& block,
                                const std::vector<std::vector<int>>& members_per_family);

    int n() const { return total; }
    int n_blocks() const { return static_cast<int>(block_of.size()); }
    int block_size(int i) const {
        return static_cast<int>(unique_blocks[block_of[i]].rows());
    }
    void finalize();
};

struct Cohort {
    Eigen::VectorXd y;
    Eigen::MatrixXd x;     // covariates including the intercept column
    Eigen::MatrixXd geno;  // n x p dosages
    std::optional<Kinship> kinship;
};

struct FitOptions {
    std::optional<double> fix_theta;  // pin the variance component (0 = no random effect)
    int max_pql_iters = 100;
    double tol = 1e-6;
};

// Null model state shared read-only by the per-variant score tests.
// Holds the factored covariance Omega = dispersion + theta*Phi and the
// projection Psi = Omega^-1 - Omega^-1 X (X^T Omega^-1 X)^-1 X^T Omega^-1.
class NullModel {
public:
    Family family = Family::gaussian;
    double theta = 0.0;
    double phi = 1.0;
    double loglik = 0.0;
    Eigen::VectorXd alpha;
    Eigen::VectorXd b;       // BLUP of the random effect
    Eigen::VectorXd mu;      // fitted means
    Eigen::VectorXd y_work;  // working response
    Eigen::VectorXd psi_y;   // Psi * y_work, the score-test numerator vector

    Eigen::VectorXd solve_omega(const Eigen::VectorXd& v) const;
    Eigen::VectorXd apply_psi(const Eigen::VectorXd& v) const;

    // populated by fit_null
    Kinship kinship;
    std::vector<Eigen::LLT<Eigen::MatrixXd>> factors;
    std::vector<int> factor_of;        // instance -> factors index, -1 for scalar blocks
    std::vector<double> scalar_omega;  // instance -> scalar Omega, for size-1 blocks
    Eigen::MatrixXd omega_inv_x;
    Eigen::MatrixXd xt_oinv_x_inv;
};

NullModel fit_null(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                   const std::optional<Kinship>& kinship, Family family,
                   const FitOptions& opts = {});
NullModel fit_null(const Cohort& cohort, Family family, const FitOptions& opts = {});

struct ScoreResult {
    double t_stat = 0.0;
    double var_t = 0.0;
    double z = 0.0;
    double p = 1.0;
    int beta_sign = 0;
};

// T = g^T Psi y_work, Var(T) = g^T Psi g, z = T / sqrt(Var).
ScoreResult score_test(const NullModel& null, const Eigen::VectorXd& g);

// Fixed-effect single-variant tests for unrelated cohorts. In the gaussian
// family all three tests share the null-model ML dispersion, which makes
// score, Wald and LRT z identical (exact linear-model equivalence).
ScoreResult wald_test(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                      const Eigen::VectorXd& g, Family family);
ScoreResult lrt_test(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                     const Eigen::VectorXd& g, Family family);

// z = sign * |Phi^-1(p/2)|; p below 1e-300 is clamped (flag set).
double p_to_z(double p, int beta_sign, bool* clamped = nullptr);

// Generic golden-section maximizer on [lo, hi].
double golden_max(const std::function<double(double)>& f, double lo, double hi, int iters = 80);

}
