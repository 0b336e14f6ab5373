#include "gk/knockoff.hpp"
#include "gk/errors.hpp"

#include <algorithm>
#include <cmath>

namespace gk {

namespace {

double feasibility_gamma(int m) {
    if (m < 1) throw data_error("knockoff copy count must be >= 1");
    return (m + 1.0) / m;
}

double smallest_eigenvalue(const Eigen::MatrixXd& a) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

}  // namespace

KnockoffDiag solve_diag_equi(const LdPanel& panel, int m) {
    const double gamma = feasibility_gamma(m);
    const double lmin = smallest_eigenvalue(panel.sigma);
    if (lmin <= 0.0)
        throw numeric_error("solve_diag_equi: panel is not positive definite; regularize first");
    KnockoffDiag d;
    d.method = DiagMethod::equi;
    d.m = m;
    d.s = Eigen::VectorXd::Constant(panel.p(), std::min(1.0, gamma * lmin));
    return d;
}

KnockoffDiag solve_diag_sdp(const LdPanel& panel, int m, int max_iters, double tol) {
    const double gamma = feasibility_gamma(m);
    const int p = panel.p();
    const Eigen::MatrixXd& sig = panel.sigma;

    KnockoffDiag d = solve_diag_equi(panel, m);  // feasible start
    d.method = DiagMethod::sdp_ascent;
    if (p == 1) {
        d.s[0] = std::min(1.0, gamma * sig(0, 0));
        return d;
    }

    // Coordinate j's exact Schur bound on s_j, with A = gamma*Sigma - D:
    //   gamma*Sigma_jj - gamma^2 Sigma_{j,-j} (A_{-j,-j})^-1 Sigma_{-j,j}
    //   = s_j + 1 / (A^-1)_jj.
    // A^-1 is kept current with Sherman-Morrison rank-one updates and
    // refreshed from a Cholesky solve every sweep. eta keeps the iterate
    // strictly inside the PSD cone.
    const double eta = 1e-6;
    d.s *= (1.0 - eta);  // step off the equicorrelated boundary

    Eigen::MatrixXd a = gamma * sig;
    a.diagonal() -= d.s;
    double prev_obj = static_cast<double>(p) - d.s.sum();

    for (int sweep = 0; sweep < max_iters; ++sweep) {
        Eigen::LLT<Eigen::MatrixXd> llt(a);
        if (llt.info() != Eigen::Success) {
            a.diagonal().array() += 1e-12;
            llt.compute(a);
            if (llt.info() != Eigen::Success)
                throw numeric_error("solve_diag_sdp: iterate left the PSD cone");
        }
        Eigen::MatrixXd ainv = llt.solve(Eigen::MatrixXd::Identity(p, p));
        for (int j = 0; j < p; ++j) {
            const double vjj = ainv(j, j);
            if (!(vjj > 0.0)) throw numeric_error("solve_diag_sdp: lost positive definiteness");
            const double cap = d.s[j] + 1.0 / vjj;
            const double new_s = std::min(1.0, d.s[j] + (1.0 - eta) / vjj);
            const double delta = std::min(new_s, cap) - d.s[j];
            if (delta <= 0.0) continue;
            const double denom = 1.0 - delta * vjj;
            if (!(denom > 0.0)) continue;
            const Eigen::VectorXd v = ainv.col(j);
            ainv.noalias() += (delta / denom) * (v * v.transpose());
            a(j, j) -= delta;
            d.s[j] += delta;
        }
        const double obj = static_cast<double>(p) - d.s.sum();
        if (prev_obj - obj < tol) break;
        prev_obj = obj;
    }
    for (int j = 0; j < p; ++j) d.s[j] = std::clamp(d.s[j], 0.0, 1.0);

    // The eta backoff can leave the iterate a hair short of the
    // equicorrelated start when that start is already optimal; never return
    // anything worse than it.
    const KnockoffDiag equi = solve_diag_equi(panel, m);
    if (equi.s.sum() > d.s.sum()) d.s = equi.s;
    return d;
}

KnockoffTransform build_transform(const LdPanel& panel, const KnockoffDiag& diag, int m) {
    if (m < 1) throw data_error("build_transform: m must be >= 1");
    const int p = panel.p();
    if (diag.s.size() != p) throw data_error("build_transform: diag length does not match panel");

    Eigen::LLT<Eigen::MatrixXd> llt(panel.sigma);
    if (llt.info() != Eigen::Success)
        throw numeric_error("build_transform: panel is not positive definite; regularize first");

    KnockoffTransform t;
    t.p = p;
    t.m = m;
    t.sigma = panel.sigma;
    t.s = diag.s;

    // Sigma^-1 D, then P = I - D Sigma^-1 = I - (Sigma^-1 D)^T.
    const Eigen::MatrixXd sinv_d = llt.solve(Eigen::MatrixXd(diag.s.asDiagonal()));
    t.proj = Eigen::MatrixXd::Identity(p, p) - sinv_d.transpose();

    // B = D - D Sigma^-1 D; head block of the mixed noise covariance is D + m*B.
    Eigen::MatrixXd d_sinv_d = diag.s.asDiagonal() * sinv_d;
    d_sinv_d = 0.5 * (d_sinv_d + d_sinv_d.transpose()).eval();
    Eigen::MatrixXd head = -static_cast<double>(m) * d_sinv_d;
    head.diagonal() += (m + 1.0) * diag.s;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(head);
    if (es.info() != Eigen::Success) throw numeric_error("build_transform: eigensolver failed");
    Eigen::VectorXd lam = es.eigenvalues();
    double clipped = 0.0;
    for (int i = 0; i < p; ++i) {
        if (lam[i] < 0.0) {
            clipped += -lam[i];
            lam[i] = 0.0;
        }
    }
    const double trace_v = head.trace() + (m - 1.0) * diag.s.sum();
    if (clipped >= 1e-6 * std::max(trace_v, 1e-300))
        throw numeric_error(
            "build_transform: noise covariance is not PSD within tolerance; "
            "the diagonal is infeasible for " + std::to_string(m) +
            " copies or the panel needs stronger regularization");
    t.clipped_mass = clipped;
    t.head_factor = es.eigenvectors() * lam.cwiseSqrt().asDiagonal();
    t.tail_sqrt = diag.s.cwiseMax(0.0).cwiseSqrt();

    // Orthogonal mixer with first column 1/sqrt(m) (Householder reflection).
    t.mix = Eigen::MatrixXd::Identity(m, m);
    if (m > 1) {
        Eigen::VectorXd v = Eigen::VectorXd::Constant(m, 1.0 / std::sqrt(static_cast<double>(m)));
        v[0] -= 1.0;
        t.mix -= (2.0 / v.squaredNorm()) * (v * v.transpose());
    }
    return t;
}

Eigen::MatrixXd KnockoffTransform::stacked_projection() const {
    Eigen::MatrixXd out(p * m, p);
    for (int k = 0; k < m; ++k) out.middleRows(k * p, p) = proj;
    return out;
}

Eigen::MatrixXd KnockoffTransform::noise_cov() const {
    const Eigen::MatrixXd f = noise_factor();
    return f * f.transpose();
}

Eigen::MatrixXd KnockoffTransform::noise_factor() const {
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(p * m, p * m);
    for (int km = 0; km < m; ++km) {
        for (int kb = 0; kb < m; ++kb) {
            const double w = mix(km, kb);
            if (w == 0.0) continue;
            if (kb == 0)
                f.block(km * p, 0, p, p) = w * head_factor;
            else
                f.block(km * p, kb * p, p, p).diagonal() = w * tail_sqrt;
        }
    }
    return f;
}

Eigen::MatrixXd KnockoffTransform::joint_gram() const {
    const int q = (m + 1) * p;
    Eigen::MatrixXd g(q, q);
    Eigen::MatrixXd off = sigma;
    off.diagonal() -= s;
    for (int a = 0; a <= m; ++a)
        for (int b = 0; b <= m; ++b)
            g.block(a * p, b * p, p, p) = (a == b) ? sigma : off;
    return g;
}

std::vector<Eigen::VectorXd> sample_knockoffs(const KnockoffTransform& t,
                                              const Eigen::VectorXd& z, Rng& rng) {
    if (z.size() != t.p) throw data_error("sample_knockoffs: z length does not match transform");
    const Eigen::VectorXd mean = t.proj * z;

    // One rotated-noise block per copy; the head block carries the cross-copy
    // covariance, the rest are diagonal.
    std::vector<Eigen::VectorXd> eta(t.m);
    Eigen::VectorXd eps(t.p);
    for (int k = 0; k < t.m; ++k) {
        for (int i = 0; i < t.p; ++i) eps[i] = rng.next_normal();
        eta[k] = (k == 0) ? Eigen::VectorXd(t.head_factor * eps)
                          : Eigen::VectorXd(t.tail_sqrt.cwiseProduct(eps));
    }
    std::vector<Eigen::VectorXd> out(t.m);
    for (int km = 0; km < t.m; ++km) {
        out[km] = mean;
        for (int kb = 0; kb < t.m; ++kb) out[km] += t.mix(km, kb) * eta[kb];
    }
    return out;
}

std::vector<Eigen::VectorXd> sample_knockoffs(const KnockoffTransform& t,
                                              const Eigen::VectorXd& z, uint64_t seed) {
    Rng rng(seed);
    return sample_knockoffs(t, z, rng);
}

Eigen::MatrixXd sample_knockoff_rows(const KnockoffTransform& t, const Eigen::MatrixXd& rows,
                                     Rng& rng) {
    if (rows.cols() != t.p)
        throw data_error("sample_knockoff_rows: column count does not match transform");
    const int n = static_cast<int>(rows.rows());
    const Eigen::MatrixXd mean = rows * t.proj.transpose();

    std::vector<Eigen::MatrixXd> eta(t.m);
    Eigen::MatrixXd eps(n, t.p);
    for (int k = 0; k < t.m; ++k) {
        for (int j = 0; j < t.p; ++j)
            for (int i = 0; i < n; ++i) eps(i, j) = rng.next_normal();
        if (k == 0)
            eta[k] = eps * t.head_factor.transpose();
        else
            eta[k] = eps * t.tail_sqrt.asDiagonal();
    }
    Eigen::MatrixXd out(n, t.p * t.m);
    for (int km = 0; km < t.m; ++km) {
        Eigen::Ref<Eigen::MatrixXd> blk = out.middleCols(km * t.p, t.p);
        blk = mean;
        for (int kb = 0; kb < t.m; ++kb) blk += t.mix(km, kb) * eta[kb];
    }
    return out;
}

}
