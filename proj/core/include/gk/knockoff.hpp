#pragma once

#include "gk/ld_panel.hpp"
#include "gk/rng.hpp"

#include <Eigen/Dense>
#include <vector>

namespace gk {

enum class DiagMethod { equi, sdp_ascent };

// Diagonal D = diag(s) of the knockoff construction, solved for a given
// number of copies m. Feasibility: (m+1)/m * Sigma - D is PSD, 0 <= s_j <= 1.
// For m = 1 this is the classic 2*Sigma - D condition.
struct KnockoffDiag {
    Eigen::VectorXd s;
    DiagMethod method = DiagMethod::equi;
    int m = 1;
};

// Closed-form equicorrelated feasible point: s_j = min(1, (m+1)/m * lambda_min).
KnockoffDiag solve_diag_equi(const LdPanel& panel, int m = 1);

// Coordinate ascent on minimize sum |1 - s_j| subject to the PSD constraint,
// one coordinate at a time via its exact Schur-complement bound. Starts from
// the equicorrelated point, so the objective never exceeds it.
KnockoffDiag solve_diag_sdp(const LdPanel& panel, int m = 1, int max_iters = 200,
                            double tol = 1e-10);

// Precomputed sampler for one LD block. The knockoff scores are
//   ztilde = stack_m(proj * z) + noise,   noise ~ N(0, V),
// where V has diagonal blocks 2D - D Sigma^-1 D and off-diagonal blocks
// D - D Sigma^-1 D. V is never factored densely: writing B for the
// off-diagonal block, V = I_m (x) D + 1 1^T (x) B, which an orthogonal
// m x m mixer turns into blkdiag(D + mB, D, ..., D). Negative eigenvalues
// of D + mB are clipped at zero; the clipped mass must stay below
// 1e-6 * trace(V) or construction fails.
struct KnockoffTransform {
    int p = 0;
    int m = 1;
    Eigen::MatrixXd sigma;        // the (regularized) LD matrix the transform was built from
    Eigen::VectorXd s;            // diagonal of D
    Eigen::MatrixXd proj;         // p x p, I - D Sigma^-1 (shared by every copy)
    Eigen::MatrixXd head_factor;  // p x p factor C, C C^T = clip(D + m*B)
    Eigen::VectorXd tail_sqrt;    // sqrt(s), factor of the remaining m-1 blocks
    Eigen::MatrixXd mix;          // m x m orthogonal, first column 1/sqrt(m)
    double clipped_mass = 0.0;

    Eigen::MatrixXd stacked_projection() const;  // pm x p
    Eigen::MatrixXd noise_cov() const;           // pm x pm (after clipping)
    Eigen::MatrixXd noise_factor() const;        // pm x pm F with F F^T = noise_cov()
    // Gram of (z, ztilde^1, ..., ztilde^m): diagonal blocks Sigma,
    // off-diagonal blocks Sigma - D.
    Eigen::MatrixXd joint_gram() const;
};

KnockoffTransform build_transform(const LdPanel& panel, const KnockoffDiag& diag, int m);

// One draw of m knockoff copies for a z vector. Deterministic in (seed, inputs).
std::vector<Eigen::VectorXd> sample_knockoffs(const KnockoffTransform& t,
                                              const Eigen::VectorXd& z, uint64_t seed);
std::vector<Eigen::VectorXd> sample_knockoffs(const KnockoffTransform& t,
                                              const Eigen::VectorXd& z, Rng& rng);

// Row-wise sampling: every row of `rows` gets an independent noise draw.
// Returns n x (p*m), copies laid out block by block. Used for second-order
// knockoffs of individual-level (standardized) genotypes.
Eigen::MatrixXd sample_knockoff_rows(const KnockoffTransform& t, const Eigen::MatrixXd& rows,
                                     Rng& rng);

}
