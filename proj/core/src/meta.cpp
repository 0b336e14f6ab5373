#include "gk/meta.hpp"
#include "gk/errors.hpp"
#include "gk/stats.hpp"
#include "gk/assoc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gk {

namespace {

void check_aligned(const std::vector<Study>& studies) {
    if (studies.empty()) throw data_error("meta: no studies");
    const int p = static_cast<int>(studies[0].z.size());
    for (const auto& s : studies) {
        if (s.z.size() != p) throw data_error("meta: study '" + s.name + "' has mismatched variant count");
        if (!(s.n > 0.0)) throw data_error("meta: study '" + s.name + "' needs a positive sample size");
    }
}

Eigen::MatrixXd nearest_unit_psd(Eigen::MatrixXd c) {
    c = 0.5 * (c + c.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
    Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
    c = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
    Eigen::VectorXd d = c.diagonal().cwiseMax(1e-12).cwiseSqrt();
    for (int i = 0; i < c.rows(); ++i)
        for (int j = 0; j < c.cols(); ++j) c(i, j) /= d[i] * d[j];
    c.diagonal().setOnes();
    return 0.5 * (c + c.transpose()).eval();
}

}  // namespace

Eigen::MatrixXd estimate_study_correlation(const std::vector<Study>& studies,
                                           const LdPanel* panel, double null_z_cut,
                                           int min_null) {
    check_aligned(studies);
    const int l = static_cast<int>(studies.size());
    if (l == 1) return Eigen::MatrixXd::Ones(1, 1);
    const int p = static_cast<int>(studies[0].z.size());
    if (panel && panel->p() != p)
        throw data_error("estimate_study_correlation: panel does not match study variant count");

    std::vector<int> eligible;
    for (int j = 0; j < p; ++j) {
        bool ok = true;
        for (const auto& s : studies)
            if (std::fabs(s.z[j]) >= null_z_cut) { ok = false; break; }
        if (ok) eligible.push_back(j);
    }
    if (static_cast<int>(eligible.size()) < min_null)
        throw data_error("estimate_study_correlation: only " +
                         std::to_string(eligible.size()) + " null-eligible variants (need " +
                         std::to_string(min_null) + ")");
    // cap the whitening problem at a deterministic stride of the eligible set
    constexpr int kMaxNull = 5000;
    if (static_cast<int>(eligible.size()) > kMaxNull) {
        std::vector<int> strided;
        const double step = static_cast<double>(eligible.size()) / kMaxNull;
        for (int k = 0; k < kMaxNull; ++k)
            strided.push_back(eligible[static_cast<size_t>(k * step)]);
        eligible = std::move(strided);
    }
    const int ne = static_cast<int>(eligible.size());

    // Whitened null scores per study; under the null the whitened entries are
    // i.i.d. across variants with cross-study correlation cor_s.
    Eigen::MatrixXd w(ne, l);
    if (panel) {
        Eigen::MatrixXd sub(ne, ne);
        for (int a = 0; a < ne; ++a)
            for (int c = 0; c < ne; ++c) sub(a, c) = panel->sigma(eligible[a], eligible[c]);
        sub = (1.0 - 0.05) * sub + 0.05 * Eigen::MatrixXd::Identity(ne, ne);
        Eigen::LLT<Eigen::MatrixXd> llt(sub);
        if (llt.info() != Eigen::Success)
            throw numeric_error("estimate_study_correlation: LD subset not positive definite");
        for (int s = 0; s < l; ++s) {
            Eigen::VectorXd zs(ne);
            for (int a = 0; a < ne; ++a) zs[a] = studies[s].z[eligible[a]];
            w.col(s) = llt.matrixL().solve(zs);
        }
    } else {
        for (int s = 0; s < l; ++s)
            for (int a = 0; a < ne; ++a) w(a, s) = studies[s].z[eligible[a]];
    }

    Eigen::RowVectorXd mean = w.colwise().mean();
    w.rowwise() -= mean;
    Eigen::MatrixXd cov = w.transpose() * w / static_cast<double>(ne - 1);
    Eigen::VectorXd sd = cov.diagonal().cwiseMax(1e-12).cwiseSqrt();
    Eigen::MatrixXd cor(l, l);
    for (int a = 0; a < l; ++a)
        for (int c = 0; c < l; ++c) cor(a, c) = cov(a, c) / (sd[a] * sd[c]);
    // entries within sampling noise of zero are noise, not overlap
    const double noise_floor = 2.0 / std::sqrt(static_cast<double>(ne));
    for (int a = 0; a < l; ++a)
        for (int c = 0; c < l; ++c)
            if (a != c && std::fabs(cor(a, c)) < noise_floor) cor(a, c) = 0.0;
    return nearest_unit_psd(cor);
}

Eigen::VectorXd optimal_weights(const StudyPanel& panel) {
    const int l = panel.n_studies();
    if (l < 1) throw data_error("optimal_weights: no studies");
    if (l > 20) throw data_error("optimal_weights: more than 20 studies is unsupported");
    if (panel.cor_s.rows() != l || panel.cor_s.cols() != l)
        throw data_error("optimal_weights: cor_s dimension mismatch");

    Eigen::VectorXd a(l);
    for (int i = 0; i < l; ++i) {
        if (!(panel.studies[i].n > 0.0)) throw data_error("optimal_weights: sample sizes must be positive");
        a[i] = std::sqrt(panel.studies[i].n);
    }

    Eigen::VectorXd best_w;
    double best_obj = std::numeric_limits<double>::infinity();
    int best_size = -1;

    for (uint32_t mask = 1; mask < (1u << l); ++mask) {
        std::vector<int> sup;
        for (int i = 0; i < l; ++i)
            if (mask & (1u << i)) sup.push_back(i);
        const int k = static_cast<int>(sup.size());

        Eigen::MatrixXd c(k, k);
        Eigen::VectorXd as(k);
        for (int i = 0; i < k; ++i) {
            as[i] = a[sup[i]];
            for (int j = 0; j < k; ++j) c(i, j) = panel.cor_s(sup[i], sup[j]);
        }
        // Stationary point of the equality-constrained QP via pseudo-inverse;
        // singular cor blocks (full overlap) fall back to the minimum-norm
        // symmetric solution.
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
        const double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
        Eigen::VectorXd inv_lam = es.eigenvalues();
        for (int i = 0; i < k; ++i)
            inv_lam[i] = (std::fabs(inv_lam[i]) > 1e-12 * std::max(lmax, 1.0)) ? 1.0 / inv_lam[i] : 0.0;
        const Eigen::VectorXd pinv_a =
            es.eigenvectors() * inv_lam.asDiagonal() * (es.eigenvectors().transpose() * as);
        const double denom = as.dot(pinv_a);
        if (!(denom > 1e-14)) continue;
        Eigen::VectorXd ws = pinv_a / denom;

        // Re-impose the constraint exactly and verify feasibility.
        const double con = as.dot(ws);
        if (!(std::fabs(con) > 1e-14)) continue;
        ws /= con;
        if (ws.minCoeff() < -1e-12) continue;

        const double obj = ws.dot(c * ws);
        const bool better = obj < best_obj - 1e-12 ||
                            (obj < best_obj + 1e-12 && k > best_size);
        if (better) {
            best_obj = obj;
            best_size = k;
            best_w = Eigen::VectorXd::Zero(l);
            for (int i = 0; i < k; ++i) best_w[sup[i]] = std::max(0.0, ws[i]);
        }
    }
    if (best_size < 0) throw numeric_error("optimal_weights: no feasible support found");
    return best_w;
}

MetaZResult combine_meta_z(const StudyPanel& panel, const Eigen::VectorXd& weights) {
    const int l = panel.n_studies();
    check_aligned(panel.studies);
    if (weights.size() != l) throw data_error("combine_meta_z: weight count mismatch");

    Eigen::VectorXd u(l);
    for (int i = 0; i < l; ++i) u[i] = weights[i] * std::sqrt(panel.studies[i].n);
    const double var_scalar = u.dot(panel.cor_s * u);
    if (!(var_scalar > 1e-14))
        throw numeric_error("combine_meta_z: degenerate combination (zero null variance)");

    MetaZResult out;
    out.variance_scalar = var_scalar;
    out.z = Eigen::VectorXd::Zero(panel.n_variants());
    for (int i = 0; i < l; ++i) out.z += u[i] * panel.studies[i].z;
    out.z /= std::sqrt(var_scalar);
    return out;
}

double fisher_combine(const std::vector<double>& p_values, bool* clamped) {
    if (clamped) *clamped = false;
    if (p_values.empty()) throw data_error("fisher_combine: no p-values");
    double x = 0.0;
    for (double p : p_values) {
        if (!(p >= 0.0) || p > 1.0) throw data_error("fisher_combine: p-values must be in [0, 1]");
        if (p < 1e-300) {
            p = 1e-300;
            if (clamped) *clamped = true;
        }
        x += -2.0 * std::log(p);
    }
    return chisq_even_df_upper(x, static_cast<int>(p_values.size()));
}

Eigen::VectorXd fisher_meta_z(const std::vector<Study>& studies) {
    check_aligned(studies);
    const int p = static_cast<int>(studies[0].z.size());
    Eigen::VectorXd out(p);
    std::vector<double> ps(studies.size());
    for (int j = 0; j < p; ++j) {
        double signed_sum = 0.0;
        for (size_t s = 0; s < studies.size(); ++s) {
            ps[s] = two_sided_p(studies[s].z[j]);
            signed_sum += studies[s].n * studies[s].z[j];
        }
        const double pc = fisher_combine(ps);
        const int sign = signed_sum >= 0.0 ? 1 : -1;
        out[j] = p_to_z(std::max(pc, 1e-300), sign);
    }
    return out;
}

}
