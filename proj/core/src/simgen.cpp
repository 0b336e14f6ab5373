#include "gk/simgen.hpp"
#include "gk/errors.hpp"
#include "gk/filter.hpp"
#include "gk/meta.hpp"
#include "gk/stats.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

namespace gk {

void HaplotypePool::recompute_freq() {
    freq.resize(n_sites());
    for (int j = 0; j < n_sites(); ++j) {
        double s = 0.0;
        for (int h = 0; h < n_haps(); ++h) s += haps(h, j);
        freq[j] = s / n_haps();
    }
}

HaplotypePool load_haplotypes(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open haplotype file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw data_error(path + ": empty haplotype file");

    HaplotypePool pool;
    {
        std::istringstream hdr(line);
        std::string tok;
        while (hdr >> tok) pool.variants.push_back(VariantId::parse(tok));
    }
    const int p = static_cast<int>(pool.variants.size());
    if (p == 0) throw data_error(path + ": no variants in header");

    std::vector<int8_t> flat;
    int rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        int v, col = 0;
        while (row >> v) {
            if (v != 0 && v != 1) throw data_error(path + ": haplotype entries must be 0/1");
            flat.push_back(static_cast<int8_t>(v));
            ++col;
        }
        if (col != p) throw data_error(path + ": haplotype row length mismatch");
        ++rows;
    }
    if (rows < 2) throw data_error(path + ": need at least two haplotypes");
    pool.haps.resize(rows, p);
    for (int h = 0; h < rows; ++h)
        for (int j = 0; j < p; ++j) pool.haps(h, j) = flat[static_cast<size_t>(h) * p + j];
    pool.recompute_freq();
    return pool;
}

void save_haplotypes(const HaplotypePool& pool, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write haplotype file: " + path);
    for (int j = 0; j < pool.n_sites(); ++j) out << (j ? "\t" : "") << pool.variants[j].str();
    out << "\n";
    for (int h = 0; h < pool.n_haps(); ++h) {
        for (int j = 0; j < pool.n_sites(); ++j)
            out << (j ? "\t" : "") << static_cast<int>(pool.haps(h, j));
        out << "\n";
    }
}

HaplotypePool synthetic_pool(uint64_t seed, int n_haps, int n_sites) {
    if (n_haps < 2 || n_sites < 1) throw data_error("synthetic_pool: bad dimensions");
    Rng rng(seed);
    // Per-site target frequency and a blocky latent AR(1) correlation profile.
    Eigen::VectorXd f(n_sites), rho(n_sites), thresh(n_sites);
    for (int j = 0; j < n_sites; ++j) f[j] = 0.05 + 0.45 * rng.next_double();
    rho[0] = 0.0;
    for (int j = 1; j < n_sites; ++j) {
        const bool block_break = rng.next_double() < 0.18;
        rho[j] = block_break ? 0.15 * rng.next_double() : 0.90 + 0.095 * rng.next_double();
    }
    for (int j = 0; j < n_sites; ++j) thresh[j] = norm_quantile(f[j]);

    HaplotypePool pool;
    pool.haps.resize(n_haps, n_sites);
    const char* alts = "CGT";
    const double span = 200000.0;
    for (int j = 0; j < n_sites; ++j) {
        VariantId v;
        v.chrom = 1;
        v.pos = 1 + static_cast<int64_t>(span * (j + 0.5) / n_sites);
        v.ref = "A";
        v.alt = std::string(1, alts[j % 3]);
        pool.variants.push_back(v);
    }
    for (int h = 0; h < n_haps; ++h) {
        double x = rng.next_normal();
        pool.haps(h, 0) = x < thresh[0] ? 1 : 0;
        for (int j = 1; j < n_sites; ++j) {
            x = rho[j] * x + std::sqrt(1.0 - rho[j] * rho[j]) * rng.next_normal();
            pool.haps(h, j) = x < thresh[j] ? 1 : 0;
        }
    }
    pool.recompute_freq();
    return pool;
}

HaplotypePool filter_maf(const HaplotypePool& pool, double min_maf) {
    std::vector<int> keep;
    for (int j = 0; j < pool.n_sites(); ++j) {
        const double maf = std::min(pool.freq[j], 1.0 - pool.freq[j]);
        if (maf > min_maf) keep.push_back(j);
    }
    return subset_sites(pool, keep);
}

HaplotypePool subset_sites(const HaplotypePool& pool, const std::vector<int>& sites) {
    HaplotypePool out;
    out.haps.resize(pool.n_haps(), static_cast<int>(sites.size()));
    for (size_t k = 0; k < sites.size(); ++k) {
        out.haps.col(k) = pool.haps.col(sites[k]);
        out.variants.push_back(pool.variants[sites[k]]);
    }
    out.recompute_freq();
    return out;
}

Eigen::MatrixXd pool_correlation(const HaplotypePool& pool) {
    const int h = pool.n_haps(), p = pool.n_sites();
    Eigen::MatrixXd z(h, p);
    for (int j = 0; j < p; ++j) {
        double mean = pool.freq[j];
        double sd = std::sqrt(std::max(mean * (1.0 - mean), 1e-12));
        for (int i = 0; i < h; ++i) z(i, j) = (pool.haps(i, j) - mean) / sd;
    }
    Eigen::MatrixXd c = z.transpose() * z / static_cast<double>(h);
    c.diagonal().setOnes();
    return 0.5 * (c + c.transpose()).eval();
}

Eigen::MatrixXd pedigree_kinship() {
    Eigen::MatrixXd phi(pedigree_size, pedigree_size);
    phi << 1,    0,    0.5,  0.5,  0,   0,   0.25,  0.25,  0.25,  0.25,
           0,    1,    0.5,  0.5,  0,   0,   0.25,  0.25,  0.25,  0.25,
           0.5,  0.5,  1,    0.5,  0,   0,   0.5,   0.5,   0.25,  0.25,
           0.5,  0.5,  0.5,  1,    0,   0,   0.25,  0.25,  0.5,   0.5,
           0,    0,    0,    0,    1,   0,   0.5,   0.5,   0,     0,
           0,    0,    0,    0,    0,   1,   0,     0,     0.5,   0.5,
           0.25, 0.25, 0.5,  0.25, 0.5, 0,   1,     0.5,   0.125, 0.125,
           0.25, 0.25, 0.5,  0.25, 0.5, 0,   0.5,   1,     0.125, 0.125,
           0.25, 0.25, 0.25, 0.5,  0,   0.5, 0.125, 0.125, 1,     0.5,
           0.25, 0.25, 0.25, 0.5,  0,   0.5, 0.125, 0.125, 0.5,   1;
    return phi;
}

HapPair gene_drop(const HapPair& parent_a, const HapPair& parent_b, Rng& rng) {
    HapPair child;
    child.a = rng.next_bool() ? parent_a.b : parent_a.a;
    child.b = rng.next_bool() ? parent_b.b : parent_b.a;
    return child;
}

namespace {

HapPair draw_founder(const HaplotypePool& pool, Rng& rng) {
    HapPair p;
    p.a = static_cast<int>(rng.next_below(pool.n_haps()));
    p.b = static_cast<int>(rng.next_below(pool.n_haps()));
    return p;
}

}  // namespace

PedigreeCohort build_pedigree_cohort(const HaplotypePool& pool, int n_families, Rng& rng) {
    if (n_families < 1) throw data_error("build_pedigree_cohort: need at least one family");
    PedigreeCohort cohort;
    cohort.families.resize(n_families);
    for (auto& fam : cohort.families) {
        fam[0] = draw_founder(pool, rng);  // grandparents
        fam[1] = draw_founder(pool, rng);
        fam[2] = gene_drop(fam[0], fam[1], rng);  // lineal parents (siblings)
        fam[3] = gene_drop(fam[0], fam[1], rng);
        fam[4] = draw_founder(pool, rng);  // married-in parents
        fam[5] = draw_founder(pool, rng);
        fam[6] = gene_drop(fam[2], fam[4], rng);  // grandchildren
        fam[7] = gene_drop(fam[2], fam[4], rng);
        fam[8] = gene_drop(fam[3], fam[5], rng);
        fam[9] = gene_drop(fam[3], fam[5], rng);
    }
    return cohort;
}

Eigen::MatrixXd genotypes(const HaplotypePool& pool, const PedigreeCohort& cohort,
                          const std::vector<int>& sites) {
    Eigen::MatrixXd g(cohort.n(), static_cast<int>(sites.size()));
    int row = 0;
    for (const auto& fam : cohort.families) {
        for (const auto& member : fam) {
            for (size_t k = 0; k < sites.size(); ++k)
                g(row, static_cast<int>(k)) =
                    pool.haps(member.a, sites[k]) + pool.haps(member.b, sites[k]);
            ++row;
        }
    }
    return g;
}

Eigen::MatrixXd sample_unrelated_genotypes(const HaplotypePool& pool, int n,
                                           const std::vector<int>& sites, Rng& rng) {
    if (pool.n_haps() < 1) throw data_error("sample_unrelated_genotypes: empty pool");
    Eigen::MatrixXd g(n, static_cast<int>(sites.size()));
    for (int i = 0; i < n; ++i) {
        const HapPair pr = draw_founder(pool, rng);
        for (size_t k = 0; k < sites.size(); ++k)
            g(i, static_cast<int>(k)) = pool.haps(pr.a, sites[k]) + pool.haps(pr.b, sites[k]);
    }
    return g;
}

Eigen::MatrixXd sample_unrelated_genotypes(const HaplotypePool& pool, int n, Rng& rng) {
    std::vector<int> all(pool.n_sites());
    std::iota(all.begin(), all.end(), 0);
    return sample_unrelated_genotypes(pool, n, all, rng);
}

PhenotypeSim simulate_phenotypes(const Eigen::MatrixXd& geno, const SimScenario& sc,
                                 const std::optional<Kinship>& kinship, Rng& rng) {
    const int n = static_cast<int>(geno.rows());
    const int p = static_cast<int>(geno.cols());
    if (sc.n_causal > p) throw data_error("simulate_phenotypes: fewer variants than causal slots");
    const bool related = kinship.has_value();
    if (related && kinship->n() != n)
        throw data_error("simulate_phenotypes: kinship does not match genotype rows");
    if (sc.phenotype == PhenotypeKind::quantitative && related && sc.theta >= 8.0)
        throw data_error("simulate_phenotypes: quantitative residual variance 8 - theta must stay positive");

    PhenotypeSim sim;

    // causal representatives, drawn without replacement
    std::vector<int> perm(p);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = 0; i < sc.n_causal; ++i) {
        const int j = i + static_cast<int>(rng.next_below(p - i));
        std::swap(perm[i], perm[j]);
    }
    sim.causal.assign(perm.begin(), perm.begin() + sc.n_causal);

    const double a = sc.effect();
    sim.beta = Eigen::VectorXd::Zero(p);
    for (int i = 0; i < sc.n_causal; ++i) {
        const int j = sim.causal[i];
        const double mean = geno.col(j).mean();
        const double var = (geno.col(j).array() - mean).square().sum() / n;
        if (var <= 1e-12) throw data_error("simulate_phenotypes: causal variant is monomorphic");
        const double mag = std::sqrt(a / (sc.n_causal * var));
        sim.beta[j] = (i < sc.n_causal / 2) ? -mag : mag;  // half protective
    }

    sim.x1.resize(n);
    for (int i = 0; i < n; ++i) sim.x1[i] = rng.next_normal();

    Eigen::VectorXd eta = sim.x1 + geno * sim.beta;

    Eigen::VectorXd random_part = Eigen::VectorXd::Zero(n);
    if (related && sc.theta > 0.0) {
        // b ~ N(0, theta * Phi), block by block
        std::vector<Eigen::MatrixXd> chols;
        for (const auto& blk : kinship->unique_blocks)
            chols.push_back(Eigen::LLT<Eigen::MatrixXd>(blk).matrixL());
        for (int i = 0; i < kinship->n_blocks(); ++i) {
            const int off = kinship->offset[i], sz = kinship->block_size(i);
            Eigen::VectorXd eps(sz);
            for (int k = 0; k < sz; ++k) eps[k] = rng.next_normal();
            random_part.segment(off, sz) = std::sqrt(sc.theta) * (chols[kinship->block_of[i]] * eps);
        }
    }

    if (sc.phenotype == PhenotypeKind::quantitative) {
        const double resid_var = related ? 8.0 - sc.theta : 8.0;
        const double sd = std::sqrt(resid_var);
        sim.y.resize(n);
        for (int i = 0; i < n; ++i) sim.y[i] = eta[i] + random_part[i] + sd * rng.next_normal();
        return sim;
    }

    // dichotomous: unrelated uses an N(0,1) latent covariate term instead of b
    if (!related)
        for (int i = 0; i < n; ++i) random_part[i] = rng.next_normal();
    eta += random_part;

    // intercept by bisection so that mean(pi) equals the prevalence
    auto mean_pi = [&](double b0) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += 1.0 / (1.0 + std::exp(-(b0 + eta[i])));
        return s / n;
    };
    double lo = -40.0, hi = 40.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (mean_pi(mid) < sc.prevalence ? lo : hi) = mid;
    }
    sim.beta0 = 0.5 * (lo + hi);

    sim.y.resize(n);
    for (int i = 0; i < n; ++i) {
        const double pi = 1.0 / (1.0 + std::exp(-(sim.beta0 + eta[i])));
        sim.y[i] = rng.next_double() < pi ? 1.0 : 0.0;
    }
    return sim;
}

namespace {

std::vector<int> sample_without_replacement(std::vector<int> from, int k, Rng& rng) {
    for (int i = 0; i < k; ++i) {
        const int j = i + static_cast<int>(rng.next_below(from.size() - i));
        std::swap(from[i], from[j]);
    }
    from.resize(k);
    std::sort(from.begin(), from.end());
    return from;
}

}  // namespace

SchemeSample apply_scheme(const Eigen::VectorXd& y, int n_families, Scheme scheme, int n_target,
                          Rng& rng) {
    if (scheme == Scheme::none) throw data_error("apply_scheme: no scheme given");
    const int n = static_cast<int>(y.size());
    if (n != n_families * pedigree_size)
        throw data_error("apply_scheme: foundation size does not match family count");
    const int half = n_target / 2;

    std::vector<int> cases, controls;
    std::vector<int> case_families, control_families;
    std::vector<std::vector<int>> fam_cases(n_families);
    for (int i = 0; i < n; ++i)
        (y[i] == 1.0 ? cases : controls).push_back(i);
    for (int f = 0; f < n_families; ++f) {
        bool has_case = false;
        for (int m = 0; m < pedigree_size; ++m)
            if (y[f * pedigree_size + m] == 1.0) {
                has_case = true;
                fam_cases[f].push_back(f * pedigree_size + m);
            }
        (has_case ? case_families : control_families).push_back(f);
    }

    SchemeSample out;
    std::vector<int> chosen;
    if (scheme == Scheme::A) {
        if (static_cast<int>(cases.size()) < half)
            throw data_error("scheme A: fewer than " + std::to_string(half) +
                             " cases in the foundation data; enlarge the foundation pool");
        if (static_cast<int>(controls.size()) < half)
            throw data_error("scheme A: not enough controls in the foundation data");
        auto c1 = sample_without_replacement(cases, half, rng);
        auto c0 = sample_without_replacement(controls, half, rng);
        chosen.insert(chosen.end(), c1.begin(), c1.end());
        chosen.insert(chosen.end(), c0.begin(), c0.end());
    } else if (scheme == Scheme::B) {
        const int fam_half = n_target / (2 * pedigree_size);
        if (fam_half * 2 * pedigree_size != n_target)
            throw data_error("scheme B: target size must be a multiple of 20");
        if (static_cast<int>(case_families.size()) < fam_half)
            throw data_error("scheme B: fewer than " + std::to_string(fam_half) +
                             " case families; enlarge the foundation pool");
        if (static_cast<int>(control_families.size()) < fam_half)
            throw data_error("scheme B: fewer than " + std::to_string(fam_half) +
                             " control families; enlarge the foundation pool");
        auto fc = sample_without_replacement(case_families, fam_half, rng);
        auto f0 = sample_without_replacement(control_families, fam_half, rng);
        for (int f : fc)
            for (int m = 0; m < pedigree_size; ++m) chosen.push_back(f * pedigree_size + m);
        for (int f : f0)
            for (int m = 0; m < pedigree_size; ++m) chosen.push_back(f * pedigree_size + m);
    } else {  // Scheme C
        std::vector<int> case_pool;
        for (int f : case_families)
            case_pool.insert(case_pool.end(), fam_cases[f].begin(), fam_cases[f].end());
        std::vector<int> control_pool;
        for (int f : control_families)
            for (int m = 0; m < pedigree_size; ++m) control_pool.push_back(f * pedigree_size + m);

        int take_cases = half;
        int take_controls = half;
        if (static_cast<int>(case_pool.size()) < half) {
            take_cases = static_cast<int>(case_pool.size());
            take_controls = n_target - take_cases;  // keep the sample size, note the shortfall
            out.padded = true;
        }
        if (static_cast<int>(control_pool.size()) < take_controls)
            throw data_error("scheme C: not enough controls in control families; enlarge the foundation pool");
        auto c1 = take_cases == static_cast<int>(case_pool.size())
                      ? (std::sort(case_pool.begin(), case_pool.end()), case_pool)
                      : sample_without_replacement(case_pool, take_cases, rng);
        auto c0 = sample_without_replacement(control_pool, take_controls, rng);
        chosen.insert(chosen.end(), c1.begin(), c1.end());
        chosen.insert(chosen.end(), c0.begin(), c0.end());
    }

    std::sort(chosen.begin(), chosen.end());
    out.indices = chosen;
    out.family_of.reserve(chosen.size());
    int last_family = -1;
    for (int idx : chosen) {
        const int f = idx / pedigree_size;
        out.family_of.push_back(f);
        if (f != last_family) {
            out.members_per_family.emplace_back();
            last_family = f;
        }
        out.members_per_family.back().push_back(idx % pedigree_size);
    }
    return out;
}

RelatednessK relatedness_k(const std::vector<int>& family_of, const std::vector<int>& status) {
    if (family_of.size() != status.size())
        throw data_error("relatedness_k: input length mismatch");
    std::map<int, std::pair<long, long>> fam;  // family -> (n_case, n_control)
    for (size_t i = 0; i < family_of.size(); ++i) {
        auto& f = fam[family_of[i]];
        (status[i] ? f.first : f.second)++;
    }
    long concordant = 0, pairs = 0;
    for (const auto& [f, counts] : fam) {
        const long k = counts.first + counts.second;
        pairs += k * (k - 1) / 2;
        concordant += counts.first * (counts.first - 1) / 2 +
                      counts.second * (counts.second - 1) / 2;
    }
    RelatednessK out;
    if (pairs == 0) return out;  // undefined, warning flag
    out.defined = true;
    out.k = static_cast<double>(concordant) / static_cast<double>(pairs);
    return out;
}

FdrPower fdr_power(const std::vector<int>& selected, const std::vector<int>& causal, int n_causal) {
    if (n_causal < 1) throw data_error("fdr_power: n_causal must be positive");
    int n_true = 0;
    for (int j : selected)
        if (std::find(causal.begin(), causal.end(), j) != causal.end()) ++n_true;
    FdrPower out;
    out.fdr = selected.empty()
                  ? 0.0
                  : static_cast<double>(static_cast<int>(selected.size()) - n_true) / selected.size();
    out.power = static_cast<double>(n_true) / n_causal;
    return out;
}

// ---------------------------------------------------------------------------
// Experiment harness
// ---------------------------------------------------------------------------

namespace {

enum class ZKind { mixed, score, wald, lrt, mega, meta, fisher };
enum class KnockKind { ghost, individual };

struct MethodSpec {
    std::string name;
    KnockKind knock = KnockKind::ghost;
    ZKind z = ZKind::mixed;
    int stable_id = 0;  // keeps knockoff noise independent of the method list order
};

MethodSpec parse_method(const std::string& name) {
    static const std::map<std::string, std::pair<KnockKind, std::pair<ZKind, int>>> table = {
        {"ghost-mixed", {KnockKind::ghost, {ZKind::mixed, 1}}},
        {"ghost-score", {KnockKind::ghost, {ZKind::score, 2}}},
        {"individual-mixed", {KnockKind::individual, {ZKind::mixed, 3}}},
        {"individual-score", {KnockKind::individual, {ZKind::score, 4}}},
        {"ghost-wald", {KnockKind::ghost, {ZKind::wald, 5}}},
        {"ghost-lrt", {KnockKind::ghost, {ZKind::lrt, 6}}},
        {"ghost-mega", {KnockKind::ghost, {ZKind::mega, 7}}},
        {"ghost-meta", {KnockKind::ghost, {ZKind::meta, 8}}},
        {"ghost-fisher", {KnockKind::ghost, {ZKind::fisher, 9}}},
    };
    auto it = table.find(name);
    if (it == table.end()) throw data_error("unknown method '" + name + "'");
    MethodSpec spec;
    spec.name = name;
    spec.knock = it->second.first;
    spec.z = it->second.second.first;
    spec.stable_id = it->second.second.second;
    return spec;
}

Eigen::MatrixXd column_correlation(const Eigen::MatrixXd& g) {
    const int n = static_cast<int>(g.rows());
    const int p = static_cast<int>(g.cols());
    Eigen::MatrixXd z(n, p);
    for (int j = 0; j < p; ++j) {
        const double mean = g.col(j).mean();
        double sd = std::sqrt((g.col(j).array() - mean).square().sum() / n);
        if (sd < 1e-9) sd = 1.0;  // monomorphic column: zero out its correlations
        z.col(j) = (g.col(j).array() - mean) / sd;
    }
    Eigen::MatrixXd c = z.transpose() * z / static_cast<double>(n);
    c.diagonal().setOnes();
    return 0.5 * (c + c.transpose()).eval();
}

Eigen::MatrixXd standardize_columns(const Eigen::MatrixXd& g) {
    Eigen::MatrixXd z(g.rows(), g.cols());
    for (int j = 0; j < g.cols(); ++j) {
        const double mean = g.col(j).mean();
        double sd = std::sqrt((g.col(j).array() - mean).square().sum() / g.rows());
        if (sd < 1e-9) sd = 1.0;
        z.col(j) = (g.col(j).array() - mean) / sd;
    }
    return z;
}

Eigen::VectorXd z_scores(const NullModel& nm, const Eigen::MatrixXd& g) {
    Eigen::VectorXd z(g.cols());
    for (int j = 0; j < g.cols(); ++j) {
        try {
            z[j] = score_test(nm, g.col(j)).z;
        } catch (const degenerate_variant_error&) {
            z[j] = 0.0;
        }
    }
    return z;
}

struct Prepared {
    HaplotypePool pool;
    std::vector<int> rep_sites;
    std::vector<VariantId> rep_ids;
    std::vector<MethodSpec> methods;
    LdPanel rep_panel;  // pool LD over representatives, regularized
};

struct RepOutcome {
    std::vector<ReplicateRecord> recs;
    bool failed = false;
    std::string why;
};

void score_against(const NullModel& nm, const Eigen::MatrixXd& cols, int p, int m,
                   std::vector<Eigen::VectorXd>& out) {
    out.assign(m, Eigen::VectorXd(p));
    for (int k = 0; k < m; ++k)
        for (int j = 0; j < p; ++j) {
            try {
                out[k][j] = score_test(nm, cols.col(k * p + j)).z;
            } catch (const degenerate_variant_error&) {
                out[k][j] = 0.0;
            }
        }
}

RepOutcome run_replicate(const Prepared& prep, const SimScenario& sc, int rep) {
    RepOutcome out;
    const uint64_t rep_seed = derive_seed(sc.seed, rep);
    Rng rng(rep_seed);
    const int m = sc.m_copies;

    // --- data generation --------------------------------------------------
    Eigen::MatrixXd g;
    std::optional<Kinship> kin;
    PhenotypeSim ph;
    const bool related = sc.relatedness == RelatednessKind::pedigree;
    if (!related) {
        g = sample_unrelated_genotypes(prep.pool, sc.n, prep.rep_sites, rng);
        ph = simulate_phenotypes(g, sc, std::nullopt, rng);
    } else {
        const int fams = sc.scheme == Scheme::none
                             ? sc.n / pedigree_size
                             : (sc.foundation_families > 0 ? sc.foundation_families : sc.n);
        if (fams < 1) throw data_error("run_experiment: pedigree scenario needs n >= 10");
        PedigreeCohort cohort = build_pedigree_cohort(prep.pool, fams, rng);
        Eigen::MatrixXd gf = genotypes(prep.pool, cohort, prep.rep_sites);
        Kinship kf = Kinship::repeated(pedigree_kinship(), fams);
        PhenotypeSim phf = simulate_phenotypes(gf, sc, kf, rng);
        if (sc.scheme == Scheme::none) {
            g = std::move(gf);
            kin = std::move(kf);
            ph = std::move(phf);
        } else {
            SchemeSample ss = apply_scheme(phf.y, fams, sc.scheme, sc.n, rng);
            const int ns = static_cast<int>(ss.indices.size());
            g.resize(ns, gf.cols());
            ph = phf;
            ph.y.resize(ns);
            ph.x1.resize(ns);
            for (int i = 0; i < ns; ++i) {
                g.row(i) = gf.row(ss.indices[i]);
                ph.y[i] = phf.y[ss.indices[i]];
                ph.x1[i] = phf.x1[ss.indices[i]];
            }
            kin = Kinship::from_subsets(pedigree_kinship(), ss.members_per_family);
        }
    }

    const int n = static_cast<int>(g.rows());
    const int p = static_cast<int>(g.cols());
    Eigen::MatrixXd x(n, 2);
    x.col(0).setOnes();
    x.col(1) = ph.x1;
    const Family fam =
        sc.phenotype == PhenotypeKind::quantitative ? Family::gaussian : Family::binomial;

    // --- z-score inputs ----------------------------------------------------
    bool need_mixed = false, need_naive = false, need_halves = false, need_individual = false;
    for (const auto& ms : prep.methods) {
        need_mixed |= ms.z == ZKind::mixed;
        need_naive |= ms.z == ZKind::score || ms.z == ZKind::mega;
        need_halves |= ms.z == ZKind::meta || ms.z == ZKind::fisher;
        need_individual |= ms.knock == KnockKind::individual;
    }

    std::optional<NullModel> nm_mixed, nm_naive;
    if (need_mixed) nm_mixed = fit_null(ph.y, x, kin, fam, {});
    if (need_naive) {
        FitOptions fo;
        fo.fix_theta = 0.0;
        nm_naive = fit_null(ph.y, x, std::nullopt, fam, fo);
    }

    std::map<ZKind, Eigen::VectorXd> zvec;
    if (need_mixed) zvec[ZKind::mixed] = z_scores(*nm_mixed, g);
    if (need_naive) {
        zvec[ZKind::score] = z_scores(*nm_naive, g);
        zvec[ZKind::mega] = zvec[ZKind::score];
    }
    for (const auto& ms : prep.methods) {
        if (ms.z == ZKind::wald || ms.z == ZKind::lrt) {
            Eigen::VectorXd z(p);
            for (int j = 0; j < p; ++j) {
                try {
                    z[j] = (ms.z == ZKind::wald) ? wald_test(ph.y, x, g.col(j), fam).z
                                                 : lrt_test(ph.y, x, g.col(j), fam).z;
                } catch (const degenerate_variant_error&) {
                    z[j] = 0.0;
                }
            }
            zvec[ms.z] = z;
        }
    }
    if (need_halves) {
        if (related) throw data_error("meta methods require an unrelated scenario");
        const int h = n / 2;
        FitOptions fo;
        fo.fix_theta = 0.0;
        std::vector<Study> studies(2);
        for (int s = 0; s < 2; ++s) {
            const int off = s * h;
            const int len = (s == 0) ? h : n - h;
            NullModel half = fit_null(ph.y.segment(off, len), x.middleRows(off, len),
                                      std::nullopt, fam, fo);
            studies[s].name = s == 0 ? "half1" : "half2";
            studies[s].n = len;
            studies[s].z = z_scores(half, g.middleRows(off, len));
        }
        for (const auto& ms : prep.methods) {
            if (ms.z == ZKind::meta) {
                StudyPanel sp;
                sp.studies = studies;
                sp.cor_s = estimate_study_correlation(studies, &prep.rep_panel, 2.0,
                                                      std::min(100, std::max(10, p / 2)));
                zvec[ZKind::meta] = combine_meta_z(sp, optimal_weights(sp)).z;
            } else if (ms.z == ZKind::fisher) {
                zvec[ZKind::fisher] = fisher_meta_z(studies);
            }
        }
    }

    // --- knockoff machinery -------------------------------------------------
    // This replicate's empirical genotype correlation drives both the ghost
    // transform and the individual-level knockoff genotypes.
    LdPanel sample_panel{prep.rep_ids, column_correlation(g)};
    const LdPanel reg = regularize(sample_panel, sc.ld_reg_eps);
    const KnockoffDiag diag = sc.d_method == DiagMethod::equi ? solve_diag_equi(reg, m)
                                                              : solve_diag_sdp(reg, m);
    const KnockoffTransform transform = build_transform(reg, diag, m);

    Eigen::MatrixXd indiv_knockoffs;  // n x (p*m), shared by individual-* methods
    if (need_individual) {
        Rng krng = Rng::child(rep_seed, 50);
        indiv_knockoffs = sample_knockoff_rows(transform, standardize_columns(g), krng);
    }

    // --- per-method selection ----------------------------------------------
    for (const auto& ms : prep.methods) {
        const Eigen::VectorXd& z = zvec.at(ms.z);
        std::vector<Eigen::VectorXd> kz;
        if (ms.knock == KnockKind::ghost) {
            // one shared noise stream per replicate: method comparisons see
            // the same knockoff draw, which tightens paired differences
            // without touching any method's marginal distribution
            Rng krng = Rng::child(rep_seed, 100);
            kz = sample_knockoffs(transform, z, krng);
        } else {
            const NullModel& nm = ms.z == ZKind::mixed ? *nm_mixed : *nm_naive;
            score_against(nm, indiv_knockoffs, p, m, kz);
        }
        const FeatureStats stats = feature_stats(z, kz);
        for (double target : sc.fdr_targets) {
            const SelectionResult sel = knockoff_threshold(stats, target, m);
            ReplicateRecord rec;
            rec.replicate = rep;
            rec.method = ms.name;
            rec.fdr_target = target;
            rec.n_selected = static_cast<int>(sel.selected.size());
            const FdrPower fp = fdr_power(sel.selected, ph.causal, sc.n_causal);
            rec.n_true = static_cast<int>(std::lround(fp.power * sc.n_causal));
            rec.fdr = fp.fdr;
            rec.power = fp.power;
            rec.status = "ok";
            out.recs.push_back(rec);
        }
    }
    return out;
}

}  // namespace

ExperimentResult run_experiment(const SimScenario& sc) {
    if (sc.replicates < 1) throw data_error("run_experiment: need at least one replicate");
    if (sc.scheme != Scheme::none &&
        (sc.relatedness != RelatednessKind::pedigree || sc.phenotype != PhenotypeKind::dichotomous))
        throw data_error("run_experiment: sampling schemes require pedigree dichotomous scenarios");

    Prepared prep;
    for (const auto& name : sc.methods) {
        MethodSpec ms = parse_method(name);
        if ((ms.z == ZKind::wald || ms.z == ZKind::lrt || ms.z == ZKind::meta ||
             ms.z == ZKind::fisher || ms.z == ZKind::mega) &&
            sc.relatedness != RelatednessKind::unrelated)
            throw data_error("method '" + name + "' requires an unrelated scenario");
        prep.methods.push_back(ms);
    }

    prep.pool = sc.haplotype_path.empty() ? synthetic_pool(0x9c0ffee5u, 2000, 500)
                                          : load_haplotypes(sc.haplotype_path);
    prep.pool = filter_maf(prep.pool, 0.01);
    if (sc.n_sites > 0 && sc.n_sites < prep.pool.n_sites()) {
        std::vector<int> all(prep.pool.n_sites());
        std::iota(all.begin(), all.end(), 0);
        Rng site_rng = Rng::child(sc.seed, 0xA11CE);
        prep.pool = subset_sites(prep.pool, sample_without_replacement(all, sc.n_sites, site_rng));
    }

    // Cluster once on the pool LD; causal variants and truth bookkeeping live
    // at representative resolution.
    LdPanel pool_panel{prep.pool.variants, pool_correlation(prep.pool)};
    const ClusterAssignment clusters = cluster_variants(pool_panel, sc.cluster_cutoff);
    prep.rep_sites = clusters.representative;
    std::sort(prep.rep_sites.begin(), prep.rep_sites.end());
    for (int s : prep.rep_sites) prep.rep_ids.push_back(prep.pool.variants[s]);
    if (static_cast<int>(prep.rep_sites.size()) < sc.n_causal)
        throw data_error("run_experiment: fewer clusters than causal slots");

    // Pool LD over the representatives, kept for study-correlation whitening.
    {
        const int nrep = static_cast<int>(prep.rep_sites.size());
        LdPanel ref;
        ref.variants = prep.rep_ids;
        ref.sigma.resize(nrep, nrep);
        for (int a = 0; a < nrep; ++a)
            for (int b = 0; b < nrep; ++b)
                ref.sigma(a, b) = pool_panel.sigma(prep.rep_sites[a], prep.rep_sites[b]);
        prep.rep_panel = regularize(ref, sc.ld_reg_eps);
    }

    std::vector<RepOutcome> outcomes(sc.replicates);
    std::atomic<int> next(0);
    auto worker = [&]() {
        for (int i = next.fetch_add(1); i < sc.replicates; i = next.fetch_add(1)) {
            try {
                outcomes[i] = run_replicate(prep, sc, i);
            } catch (const std::exception& e) {
                outcomes[i].failed = true;
                outcomes[i].why = e.what();
            }
        }
    };
    const int workers = std::max(1, sc.workers);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool_threads;
        for (int t = 0; t < workers; ++t) pool_threads.emplace_back(worker);
        for (auto& t : pool_threads) t.join();
    }

    ExperimentResult result;
    result.p_representatives = static_cast<int>(prep.rep_sites.size());
    std::map<std::pair<std::string, double>, std::vector<std::pair<double, double>>> cells;
    for (int i = 0; i < sc.replicates; ++i) {
        if (outcomes[i].failed) {
            ++result.replicates_failed;
            ReplicateRecord rec;
            rec.replicate = i;
            rec.method = "*";
            rec.status = outcomes[i].why;
            result.log.push_back(rec);
            continue;
        }
        for (const auto& rec : outcomes[i].recs) {
            result.log.push_back(rec);
            cells[{rec.method, rec.fdr_target}].push_back({rec.fdr, rec.power});
        }
    }
    for (const auto& ms : prep.methods) {
        for (double target : sc.fdr_targets) {
            const auto& v = cells[{ms.name, target}];
            ExperimentCell cell;
            cell.method = ms.name;
            cell.fdr_target = target;
            cell.replicates_used = static_cast<int>(v.size());
            if (!v.empty()) {
                double sf = 0, sp = 0;
                for (const auto& [f, pw] : v) {
                    sf += f;
                    sp += pw;
                }
                cell.fdr = sf / v.size();
                cell.power = sp / v.size();
                double vf = 0, vp = 0;
                for (const auto& [f, pw] : v) {
                    vf += (f - cell.fdr) * (f - cell.fdr);
                    vp += (pw - cell.power) * (pw - cell.power);
                }
                if (v.size() > 1) {
                    cell.fdr_se = std::sqrt(vf / (v.size() - 1) / v.size());
                    cell.power_se = std::sqrt(vp / (v.size() - 1) / v.size());
                }
            }
            result.cells.push_back(cell);
        }
    }
    return result;
}

SimScenario parse_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open scenario file: " + path);
    SimScenario sc;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw data_error(path + ":" + std::to_string(lineno) + ": expected key = value");
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r\n");
            const auto e = s.find_last_not_of(" \t\r\n");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        auto bad = [&](const std::string& why) {
            return data_error(path + ": bad value for key '" + key + "': " + why);
        };
        try {
            if (key == "phenotype") {
                if (val == "quantitative") sc.phenotype = PhenotypeKind::quantitative;
                else if (val == "dichotomous") sc.phenotype = PhenotypeKind::dichotomous;
                else throw bad("want quantitative|dichotomous");
            } else if (key == "relatedness") {
                if (val == "unrelated") sc.relatedness = RelatednessKind::unrelated;
                else if (val == "pedigree") sc.relatedness = RelatednessKind::pedigree;
                else throw bad("want unrelated|pedigree");
            } else if (key == "theta") {
                sc.theta = std::stod(val);
            } else if (key == "scheme") {
                if (val == "none") sc.scheme = Scheme::none;
                else if (val == "A") sc.scheme = Scheme::A;
                else if (val == "B") sc.scheme = Scheme::B;
                else if (val == "C") sc.scheme = Scheme::C;
                else throw bad("want none|A|B|C");
            } else if (key == "replicates") {
                sc.replicates = std::stoi(val);
            } else if (key == "seed") {
                sc.seed = std::stoull(val);
            } else if (key == "n") {
                sc.n = std::stoi(val);
            } else if (key == "foundation_families") {
                sc.foundation_families = std::stoi(val);
            } else if (key == "n_causal") {
                sc.n_causal = std::stoi(val);
            } else if (key == "effect_a") {
                sc.effect_a = std::stod(val);
            } else if (key == "prevalence") {
                sc.prevalence = std::stod(val);
            } else if (key == "n_sites") {
                sc.n_sites = std::stoi(val);
            } else if (key == "m_copies") {
                sc.m_copies = std::stoi(val);
            } else if (key == "knockoff_d") {
                if (val == "equi") sc.d_method = DiagMethod::equi;
                else if (val == "sdp") sc.d_method = DiagMethod::sdp_ascent;
                else throw bad("want equi|sdp");
            } else if (key == "cluster_cutoff") {
                sc.cluster_cutoff = std::stod(val);
            } else if (key == "ld_reg_eps") {
                sc.ld_reg_eps = std::stod(val);
            } else if (key == "haplotypes") {
                sc.haplotype_path = val;
            } else if (key == "workers") {
                sc.workers = std::stoi(val);
            } else if (key == "fdr_targets" || key == "methods") {
                std::istringstream vs(val);
                std::string tok;
                std::vector<std::string> items;
                while (std::getline(vs, tok, ','))
                    if (!trim(tok).empty()) items.push_back(trim(tok));
                if (items.empty()) throw bad("empty list");
                if (key == "fdr_targets") {
                    sc.fdr_targets.clear();
                    for (const auto& s : items) sc.fdr_targets.push_back(std::stod(s));
                } else {
                    sc.methods = items;
                }
            } else {
                throw data_error(path + ": unknown scenario key '" + key + "'");
            }
        } catch (const data_error&) {
            throw;
        } catch (const std::exception&) {
            throw bad("unparseable");
        }
    }
    return sc;
}

}
