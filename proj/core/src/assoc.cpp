#include "gk/assoc.hpp"
#include "gk/errors.hpp"
#include "gk/stats.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

namespace gk {

void Kinship::finalize() {
    offset.resize(block_of.size());
    total = 0;
    for (size_t i = 0; i < block_of.size(); ++i) {
        offset[i] = total;
        total += static_cast<int>(unique_blocks[block_of[i]].rows());
    }
}

Kinship Kinship::identity(int n) {
    Kinship k;
    k.unique_blocks.push_back(Eigen::MatrixXd::Ones(1, 1));
    k.block_of.assign(n, 0);
    k.finalize();
    return k;
}

Kinship Kinship::repeated(const Eigen::MatrixXd& block, int count) {
    Kinship k;
    k.unique_blocks.push_back(block);
    k.block_of.assign(count, 0);
    k.finalize();
    return k;
}

Kinship Kinship::dense(const Eigen::MatrixXd& m) {
    Kinship k;
    k.unique_blocks.push_back(m);
    k.block_of.assign(1, 0);
    k.finalize();
    return k;
}

Kinship Kinship::from_subsets(const Eigen::MatrixXd& block,
                              const std::vector<std::vector<int>>& members_per_family) {
    Kinship k;
    std::map<std::vector<int>, int> seen;
    for (const auto& members : members_per_family) {
        if (members.empty()) continue;
        auto it = seen.find(members);
        if (it == seen.end()) {
            const int sz = static_cast<int>(members.size());
            Eigen::MatrixXd sub(sz, sz);
            for (int a = 0; a < sz; ++a)
                for (int c = 0; c < sz; ++c) sub(a, c) = block(members[a], members[c]);
            it = seen.emplace(members, static_cast<int>(k.unique_blocks.size())).first;
            k.unique_blocks.push_back(std::move(sub));
        }
        k.block_of.push_back(it->second);
    }
    k.finalize();
    return k;
}

double golden_max(const std::function<double(double)>& f, double lo, double hi, int iters) {
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < iters; ++it) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = f(x1);
        }
    }
    return 0.5 * (a + b);
}

namespace {

double expit(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Eigen-rotated view of the cohort: within every kinship block the data are
// expressed in the block's eigenbasis, turning theta*Phi into a diagonal.
struct RotatedData {
    Eigen::VectorXd y;
    Eigen::MatrixXd x;
    Eigen::VectorXd lambda;
};

RotatedData rotate(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const Kinship& kin,
                   std::vector<Eigen::MatrixXd>& unique_u, std::vector<Eigen::VectorXd>& unique_l) {
    unique_u.resize(kin.unique_blocks.size());
    unique_l.resize(kin.unique_blocks.size());
    for (size_t u = 0; u < kin.unique_blocks.size(); ++u) {
        if (kin.unique_blocks[u].rows() == 1) {
            unique_u[u] = Eigen::MatrixXd::Ones(1, 1);
            unique_l[u] = kin.unique_blocks[u].diagonal();
            continue;
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(kin.unique_blocks[u]);
        if (es.info() != Eigen::Success) throw numeric_error("kinship eigendecomposition failed");
        unique_u[u] = es.eigenvectors();
        unique_l[u] = es.eigenvalues();
    }
    RotatedData r;
    r.y.resize(kin.n());
    r.x.resize(kin.n(), x.cols());
    r.lambda.resize(kin.n());
    for (int i = 0; i < kin.n_blocks(); ++i) {
        const int off = kin.offset[i], sz = kin.block_size(i);
        const auto& u = unique_u[kin.block_of[i]];
        if (sz == 1) {
            r.y[off] = y[off];
            r.x.row(off) = x.row(off);
        } else {
            r.y.segment(off, sz) = u.transpose() * y.segment(off, sz);
            r.x.middleRows(off, sz) = u.transpose() * x.middleRows(off, sz);
        }
        r.lambda.segment(off, sz) = unique_l[kin.block_of[i]];
    }
    return r;
}

// Gaussian profile objective at weights d_i > 0 (Omega = scale * diag(d) in
// the rotated basis). Returns the GLS pieces for reuse.
struct GlsFit {
    Eigen::VectorXd alpha;
    double rss_q = 0.0;  // sum r_i^2 / d_i
};

GlsFit gls(const RotatedData& r, const Eigen::VectorXd& d) {
    const int q = static_cast<int>(r.x.cols());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(q, q);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(q);
    const Eigen::VectorXd inv_d = d.cwiseInverse();
    a.noalias() = r.x.transpose() * inv_d.asDiagonal() * r.x;
    c.noalias() = r.x.transpose() * inv_d.cwiseProduct(r.y);
    GlsFit fit;
    fit.alpha = a.ldlt().solve(c);
    const Eigen::VectorXd resid = r.y - r.x * fit.alpha;
    fit.rss_q = resid.cwiseProduct(inv_d).dot(resid);
    return fit;
}

// Shared assembly of the factored-Omega state once (theta, dispersion or
// weights) is settled. For gaussian fits omega per unique block; for
// binomial per instance (the working weights differ across blocks).
void assemble_factors(NullModel& nm, const Kinship& kin, double theta,
                      const Eigen::VectorXd& omega_diag_term) {
    nm.factors.clear();
    nm.factor_of.assign(kin.n_blocks(), -1);
    nm.scalar_omega.assign(kin.n_blocks(), 0.0);
    for (int i = 0; i < kin.n_blocks(); ++i) {
        const int off = kin.offset[i], sz = kin.block_size(i);
        const Eigen::MatrixXd& phi = kin.unique_blocks[kin.block_of[i]];
        if (sz == 1) {
            nm.scalar_omega[i] = omega_diag_term[off] + theta * phi(0, 0);
            if (nm.scalar_omega[i] <= 0.0) throw numeric_error("null fit: non-positive covariance");
            continue;
        }
        Eigen::MatrixXd om = theta * phi;
        om.diagonal() += omega_diag_term.segment(off, sz);
        Eigen::LLT<Eigen::MatrixXd> llt(om);
        if (llt.info() != Eigen::Success)
            throw numeric_error("null fit: covariance block is not positive definite");
        nm.factor_of[i] = static_cast<int>(nm.factors.size());
        nm.factors.push_back(std::move(llt));
    }
}

void finish_projection(NullModel& nm, const Eigen::MatrixXd& x) {
    const int q = static_cast<int>(x.cols());
    nm.omega_inv_x.resize(x.rows(), q);
    for (int j = 0; j < q; ++j) nm.omega_inv_x.col(j) = nm.solve_omega(x.col(j));
    const Eigen::MatrixXd xtox = x.transpose() * nm.omega_inv_x;
    nm.xt_oinv_x_inv = xtox.ldlt().solve(Eigen::MatrixXd::Identity(q, q));
    nm.psi_y = nm.apply_psi(nm.y_work);
}

NullModel fit_gaussian(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const Kinship& kin,
                       const FitOptions& opts) {
    const int n = static_cast<int>(y.size());
    std::vector<Eigen::MatrixXd> unique_u;
    std::vector<Eigen::VectorXd> unique_l;
    const RotatedData r = rotate(y, x, kin, unique_u, unique_l);

    double theta = 0.0, phi = 1.0, best_ll = 0.0;
    if (opts.fix_theta && *opts.fix_theta == 0.0) {
        const GlsFit f = gls(r, Eigen::VectorXd::Ones(n));
        phi = f.rss_q / n;
        best_ll = -0.5 * (n * std::log(phi) + n + n * std::log(2.0 * M_PI));
    } else if (opts.fix_theta) {
        theta = *opts.fix_theta;
        auto obj = [&](double log_phi) {
            const double ph = std::exp(log_phi);
            const Eigen::VectorXd d = (theta * r.lambda).array() + ph;
            if (d.minCoeff() <= 0.0) return -1e300;
            const GlsFit f = gls(r, d);
            return -0.5 * (d.array().log().sum() + f.rss_q);
        };
        const double lp = golden_max(obj, std::log(1e-8), std::log(1e8));
        phi = std::exp(lp);
        const Eigen::VectorXd d = (theta * r.lambda).array() + phi;
        best_ll = -0.5 * (d.array().log().sum() + gls(r, d).rss_q + n * std::log(2.0 * M_PI));
    } else {
        // Profile the total variance out and search the heritability ratio.
        auto obj = [&](double h) {
            const Eigen::VectorXd d = (h * r.lambda).array() + (1.0 - h);
            if (d.minCoeff() <= 1e-12) return -1e300;
            const GlsFit f = gls(r, d);
            const double v = f.rss_q / n;
            return -0.5 * (n * std::log(v) + d.array().log().sum());
        };
        const double h = golden_max(obj, 0.0, 0.9999);
        const Eigen::VectorXd d = (h * r.lambda).array() + (1.0 - h);
        const GlsFit f = gls(r, d);
        const double v = f.rss_q / n;
        theta = h * v;
        phi = (1.0 - h) * v;
        best_ll = -0.5 * (n * std::log(v) + d.array().log().sum() + n + n * std::log(2.0 * M_PI));
    }

    NullModel nm;
    nm.family = Family::gaussian;
    nm.kinship = kin;
    nm.theta = theta;
    nm.phi = phi;
    nm.loglik = best_ll;
    nm.y_work = y;
    assemble_factors(nm, kin, theta, Eigen::VectorXd::Constant(n, phi));

    // GLS coefficients and BLUP in original coordinates.
    Eigen::MatrixXd oinv_x(n, x.cols());
    for (int j = 0; j < x.cols(); ++j) oinv_x.col(j) = nm.solve_omega(x.col(j));
    nm.alpha = (x.transpose() * oinv_x).ldlt().solve(oinv_x.transpose() * y);
    const Eigen::VectorXd resid = y - x * nm.alpha;
    const Eigen::VectorXd oinv_r = nm.solve_omega(resid);
    nm.b.resize(n);
    for (int i = 0; i < kin.n_blocks(); ++i) {
        const int off = kin.offset[i], sz = kin.block_size(i);
        nm.b.segment(off, sz) =
            theta * kin.unique_blocks[kin.block_of[i]] * oinv_r.segment(off, sz);
    }
    nm.mu = x * nm.alpha + nm.b;
    finish_projection(nm, x);
    return nm;
}

// One PQL solve at fixed theta; returns the working log likelihood and
// leaves the converged state in nm (factors, alpha, mu, b, y_work).
double pql_at_theta(NullModel& nm, const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                    const Kinship& kin, double theta, const FitOptions& opts) {
    const int n = static_cast<int>(y.size());
    const int q = static_cast<int>(x.cols());
    Eigen::VectorXd mu = (y.array() + 0.5) / 2.0;
    Eigen::VectorXd eta = mu.unaryExpr([](double v) { return std::log(v / (1.0 - v)); });
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(q);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd ytil(n), w(n);

    double ll = 0.0;
    bool converged = false;
    for (int iter = 0; iter < opts.max_pql_iters; ++iter) {
        for (int i = 0; i < n; ++i) {
            if (mu[i] < 1e-10 || mu[i] > 1.0 - 1e-10)
                throw numeric_error("binomial null fit: fitted probabilities at 0/1 (separation)");
            w[i] = mu[i] * (1.0 - mu[i]);
        }
        ytil = eta + (y - mu).cwiseQuotient(w);
        assemble_factors(nm, kin, theta, w.cwiseInverse());

        Eigen::MatrixXd oinv_x(n, q);
        for (int j = 0; j < q; ++j) oinv_x.col(j) = nm.solve_omega(x.col(j));
        const Eigen::VectorXd alpha_new =
            (x.transpose() * oinv_x).ldlt().solve(oinv_x.transpose() * ytil);
        const Eigen::VectorXd resid = ytil - x * alpha_new;
        const Eigen::VectorXd oinv_r = nm.solve_omega(resid);
        for (int i = 0; i < kin.n_blocks(); ++i) {
            const int off = kin.offset[i], sz = kin.block_size(i);
            b.segment(off, sz) =
                theta * kin.unique_blocks[kin.block_of[i]] * oinv_r.segment(off, sz);
        }
        eta = x * alpha_new + b;
        for (int i = 0; i < n; ++i) mu[i] = expit(eta[i]);

        const double step = (alpha_new - alpha).cwiseAbs().maxCoeff();
        alpha = alpha_new;
        if (step < opts.tol) {
            double logdet = 0.0;
            for (int i = 0; i < kin.n_blocks(); ++i) {
                if (nm.factor_of[i] < 0)
                    logdet += std::log(nm.scalar_omega[i]);
                else {
                    const auto& l = nm.factors[nm.factor_of[i]].matrixLLT();
                    for (int d = 0; d < l.rows(); ++d) logdet += 2.0 * std::log(l(d, d));
                }
            }
            ll = -0.5 * (logdet + resid.dot(oinv_r));
            converged = true;
            break;
        }
    }
    if (!converged)
        throw numeric_error("binomial null fit: PQL did not converge in " +
                            std::to_string(opts.max_pql_iters) + " iterations");
    nm.alpha = alpha;
    nm.b = b;
    nm.mu = mu;
    nm.y_work = ytil;
    return ll;
}

// REML profile of the variance component on the converged working model
// (weights and working response held fixed). Rotating by W^(1/2) and the
// per-block eigenbasis of W^(1/2) Phi W^(1/2) turns every evaluation into
// scalar work.
double working_reml_theta(const Eigen::VectorXd& ytil, const Eigen::MatrixXd& x,
                          const Eigen::VectorXd& w, const Kinship& kin) {
    const int n = static_cast<int>(ytil.size());
    const int q = static_cast<int>(x.cols());
    Eigen::VectorXd lambda(n), yr(n);
    Eigen::MatrixXd xr(n, q);
    double logw = 0.0;
    for (int i = 0; i < kin.n_blocks(); ++i) {
        const int off = kin.offset[i], sz = kin.block_size(i);
        const Eigen::MatrixXd& phi = kin.unique_blocks[kin.block_of[i]];
        const Eigen::VectorXd ws = w.segment(off, sz).cwiseSqrt();
        for (int k = 0; k < sz; ++k) logw += std::log(w[off + k]);
        if (sz == 1) {
            lambda[off] = phi(0, 0) * w[off];
            yr[off] = ws[0] * ytil[off];
            xr.row(off) = ws[0] * x.row(off);
            continue;
        }
        Eigen::MatrixXd b = ws.asDiagonal() * phi * ws.asDiagonal();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b);
        if (es.info() != Eigen::Success)
            throw numeric_error("binomial null fit: block eigendecomposition failed");
        lambda.segment(off, sz) = es.eigenvalues().cwiseMax(0.0);
        yr.segment(off, sz) =
            es.eigenvectors().transpose() * ws.cwiseProduct(ytil.segment(off, sz));
        xr.middleRows(off, sz) =
            es.eigenvectors().transpose() * (ws.asDiagonal() * x.middleRows(off, sz));
    }
    auto obj = [&](double h) {
        const double theta = h / (1.0 - h);
        const Eigen::VectorXd dvec = (theta * lambda).array() + 1.0;
        const Eigen::VectorXd inv_d = dvec.cwiseInverse();
        const Eigen::MatrixXd a = xr.transpose() * inv_d.asDiagonal() * xr;
        const Eigen::VectorXd c = xr.transpose() * inv_d.cwiseProduct(yr);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
        const Eigen::VectorXd alpha = ldlt.solve(c);
        const Eigen::VectorXd resid = yr - xr * alpha;
        const double rss_q = resid.cwiseProduct(inv_d).dot(resid);
        double logdet_a = 0.0;
        for (int k = 0; k < q; ++k) logdet_a += std::log(std::max(ldlt.vectorD()[k], 1e-300));
        return -0.5 * (dvec.array().log().sum() - logw + rss_q + logdet_a);
    };
    const double h = golden_max(obj, 0.0, 0.995, 60);
    return h / (1.0 - h);
}

NullModel fit_binomial(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const Kinship& kin,
                       const FitOptions& opts) {
    bool any0 = false, any1 = false;
    for (int i = 0; i < y.size(); ++i) {
        if (y[i] == 0.0) any0 = true;
        else if (y[i] == 1.0) any1 = true;
        else throw data_error("binomial null fit: phenotype values must be 0/1");
    }
    if (!any0 || !any1) throw data_error("binomial null fit: phenotype has a single class");

    NullModel nm;
    nm.family = Family::binomial;
    nm.kinship = kin;
    nm.phi = 1.0;

    // Alternate the PQL mean update with a variance-component update on the
    // converged working model until theta stabilizes.
    double theta = opts.fix_theta ? *opts.fix_theta : 0.5;
    double ll = pql_at_theta(nm, y, x, kin, theta, opts);
    if (!opts.fix_theta) {
        for (int outer = 0; outer < 40; ++outer) {
            const Eigen::VectorXd w = nm.mu.array() * (1.0 - nm.mu.array());
            const double theta_new = working_reml_theta(nm.y_work, x, w, kin);
            ll = pql_at_theta(nm, y, x, kin, theta_new, opts);
            const bool settled = std::fabs(theta_new - theta) < 1e-4 * (1.0 + theta_new);
            theta = theta_new;
            if (settled) break;
        }
    }
    nm.theta = theta;
    nm.loglik = ll;
    finish_projection(nm, x);
    return nm;
}

}  // namespace

Eigen::VectorXd NullModel::solve_omega(const Eigen::VectorXd& v) const {
    Eigen::VectorXd out(v.size());
    for (int i = 0; i < kinship.n_blocks(); ++i) {
        const int off = kinship.offset[i], sz = kinship.block_size(i);
        if (factor_of[i] < 0)
            out[off] = v[off] / scalar_omega[i];
        else
            out.segment(off, sz) = factors[factor_of[i]].solve(v.segment(off, sz));
    }
    return out;
}

Eigen::VectorXd NullModel::apply_psi(const Eigen::VectorXd& v) const {
    Eigen::VectorXd w = solve_omega(v);
    w.noalias() -= omega_inv_x * (xt_oinv_x_inv * (omega_inv_x.transpose() * v));
    return w;
}

NullModel fit_null(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                   const std::optional<Kinship>& kinship, Family family,
                   const FitOptions& opts) {
    const int n = static_cast<int>(y.size());
    if (x.rows() != n) throw data_error("null fit: covariate rows do not match phenotype length");
    if (!y.allFinite() || !x.allFinite()) throw data_error("null fit: non-finite values in input");
    Kinship kin = kinship ? *kinship : Kinship::identity(n);
    if (kin.n() != n) throw data_error("null fit: kinship dimension does not match phenotype");
    if (opts.fix_theta && *opts.fix_theta < 0.0) throw data_error("null fit: theta must be >= 0");
    return family == Family::gaussian ? fit_gaussian(y, x, kin, opts)
                                      : fit_binomial(y, x, kin, opts);
}

NullModel fit_null(const Cohort& cohort, Family family, const FitOptions& opts) {
    return fit_null(cohort.y, cohort.x, cohort.kinship, family, opts);
}

ScoreResult score_test(const NullModel& null, const Eigen::VectorXd& g) {
    if (g.size() != null.y_work.size())
        throw data_error("score_test: genotype length does not match cohort");
    ScoreResult r;
    r.t_stat = g.dot(null.psi_y);
    r.var_t = g.dot(null.apply_psi(g));
    if (r.var_t <= 1e-12)
        throw degenerate_variant_error("score_test: variant has (near) zero variance");
    r.z = r.t_stat / std::sqrt(r.var_t);
    r.p = two_sided_p(r.z);
    r.beta_sign = (r.t_stat > 0.0) - (r.t_stat < 0.0);
    return r;
}

namespace {

struct GlmFit {
    Eigen::VectorXd beta;
    Eigen::MatrixXd cov;  // (X^T W X)^-1
    double deviance = 0.0;
};

GlmFit logistic_irls(const Eigen::VectorXd& y, const Eigen::MatrixXd& x) {
    const int n = static_cast<int>(y.size());
    const int q = static_cast<int>(x.cols());
    GlmFit fit;
    fit.beta = Eigen::VectorXd::Zero(q);
    double dev_prev = 1e300;
    for (int iter = 0; iter < 60; ++iter) {
        Eigen::VectorXd eta = x * fit.beta;
        Eigen::VectorXd mu(n), w(n);
        double dev = 0.0;
        for (int i = 0; i < n; ++i) {
            eta[i] = std::clamp(eta[i], -30.0, 30.0);
            mu[i] = expit(eta[i]);
            w[i] = std::max(mu[i] * (1.0 - mu[i]), 1e-10);
            dev -= 2.0 * (y[i] * std::log(std::max(mu[i], 1e-300)) +
                          (1.0 - y[i]) * std::log(std::max(1.0 - mu[i], 1e-300)));
        }
        const Eigen::VectorXd ytil = eta + (y - mu).cwiseQuotient(w);
        const Eigen::MatrixXd xtwx = x.transpose() * w.asDiagonal() * x;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(xtwx);
        if (ldlt.info() != Eigen::Success)
            throw numeric_error("logistic fit: singular weighted normal equations");
        fit.beta = ldlt.solve(x.transpose() * w.cwiseProduct(ytil));
        fit.deviance = dev;
        fit.cov = ldlt.solve(Eigen::MatrixXd::Identity(q, q));
        if (std::fabs(dev - dev_prev) < 1e-10 * (std::fabs(dev) + 1.0)) return fit;
        dev_prev = dev;
    }
    throw numeric_error("logistic fit did not converge");
}

void check_polymorphic(const Eigen::VectorXd& g) {
    const double mean = g.mean();
    const double var = (g.array() - mean).square().sum() / g.size();
    if (var <= 1e-12)
        throw degenerate_variant_error("fixed-effect test: variant has (near) zero variance");
}

// The shared gaussian statistic: with the null ML dispersion, score, Wald
// and LRT collapse to the same z.
ScoreResult gaussian_fixed(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                           const Eigen::VectorXd& g, bool as_lrt) {
    const int n = static_cast<int>(y.size());
    const Eigen::MatrixXd xtx_inv =
        (x.transpose() * x).ldlt().solve(Eigen::MatrixXd::Identity(x.cols(), x.cols()));
    const Eigen::VectorXd ry = y - x * (xtx_inv * (x.transpose() * y));
    const Eigen::VectorXd rg = g - x * (xtx_inv * (x.transpose() * g));
    const double gg = rg.squaredNorm();
    if (gg <= 1e-12) throw degenerate_variant_error("fixed-effect test: variant collinear with covariates");
    const double beta = rg.dot(ry) / gg;
    const double sigma2 = ry.squaredNorm() / n;
    const double z = rg.dot(ry) / std::sqrt(sigma2 * gg);

    ScoreResult r;
    r.z = z;
    r.p = two_sided_p(z);
    r.beta_sign = (beta > 0.0) - (beta < 0.0);
    if (as_lrt) {
        r.t_stat = z * z;  // deviance difference
        r.var_t = 1.0;
    } else {
        r.t_stat = beta;
        r.var_t = sigma2 / gg;
    }
    return r;
}

}  // namespace

ScoreResult wald_test(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                      const Eigen::VectorXd& g, Family family) {
    check_polymorphic(g);
    if (family == Family::gaussian) return gaussian_fixed(y, x, g, false);

    Eigen::MatrixXd xg(x.rows(), x.cols() + 1);
    xg << x, g;
    const GlmFit fit = logistic_irls(y, xg);
    const int j = static_cast<int>(x.cols());
    const double se = std::sqrt(fit.cov(j, j));
    ScoreResult r;
    r.t_stat = fit.beta[j];
    r.var_t = fit.cov(j, j);
    r.z = fit.beta[j] / se;
    r.p = two_sided_p(r.z);
    r.beta_sign = (fit.beta[j] > 0.0) - (fit.beta[j] < 0.0);
    return r;
}

ScoreResult lrt_test(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                     const Eigen::VectorXd& g, Family family) {
    check_polymorphic(g);
    if (family == Family::gaussian) return gaussian_fixed(y, x, g, true);

    Eigen::MatrixXd xg(x.rows(), x.cols() + 1);
    xg << x, g;
    const GlmFit full = logistic_irls(y, xg);
    const GlmFit null = logistic_irls(y, x);
    const double dev_diff = std::max(0.0, null.deviance - full.deviance);
    const double bsign = full.beta[static_cast<int>(x.cols())];
    ScoreResult r;
    r.t_stat = dev_diff;
    r.var_t = 1.0;
    r.beta_sign = (bsign > 0.0) - (bsign < 0.0);
    r.z = (r.beta_sign == 0 ? 1.0 : r.beta_sign) * std::sqrt(dev_diff);
    r.p = chisq1_upper(dev_diff);
    return r;
}

double p_to_z(double p, int beta_sign, bool* clamped) {
    if (clamped) *clamped = false;
    if (!(p >= 0.0) || p > 1.0) throw data_error("p_to_z: p must be in [0, 1]");
    if (p < 1e-300) {  // p = 0 shows up in real summary tables; clamp it
        p = 1e-300;
        if (clamped) *clamped = true;
    }
    const double mag = (p == 1.0) ? 0.0 : std::fabs(norm_quantile(0.5 * p));
    return beta_sign >= 0 ? mag : -mag;
}

}
