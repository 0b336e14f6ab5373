#include "gk/assoc.hpp"
#include "gk/filter.hpp"
#include "gk/knockoff.hpp"
#include "gk/ld_panel.hpp"
#include "gk/rng.hpp"
#include "gk/simgen.hpp"

#include <benchmark/benchmark.h>

#include <numeric>

using namespace gk;

namespace {

LdPanel random_panel(int p, uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd a(2 * p, p);
    for (int j = 0; j < p; ++j)
        for (int i = 0; i < 2 * p; ++i) a(i, j) = rng.next_normal();
    Eigen::MatrixXd c = a.transpose() * a / (2.0 * p);
    Eigen::VectorXd d = c.diagonal().cwiseSqrt();
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) c(i, j) /= d[i] * d[j];
    c.diagonal().setOnes();
    LdPanel panel;
    for (int j = 0; j < p; ++j) panel.variants.push_back(VariantId{1, j + 1, "A", "C"});
    panel.sigma = 0.5 * (c + c.transpose());
    return regularize(panel, 0.05);
}

void bm_solve_diag_equi(benchmark::State& state) {
    const LdPanel panel = random_panel(static_cast<int>(state.range(0)), 1);
    for (auto _ : state) benchmark::DoNotOptimize(solve_diag_equi(panel, 5));
}

void bm_solve_diag_sdp(benchmark::State& state) {
    const LdPanel panel = random_panel(static_cast<int>(state.range(0)), 2);
    for (auto _ : state) benchmark::DoNotOptimize(solve_diag_sdp(panel, 5));
}

void bm_build_transform(benchmark::State& state) {
    const LdPanel panel = random_panel(static_cast<int>(state.range(0)), 3);
    const KnockoffDiag d = solve_diag_sdp(panel, 5);
    for (auto _ : state) benchmark::DoNotOptimize(build_transform(panel, d, 5));
}

void bm_sample_knockoffs(benchmark::State& state) {
    const LdPanel panel = random_panel(static_cast<int>(state.range(0)), 4);
    const KnockoffTransform t = build_transform(panel, solve_diag_sdp(panel, 5), 5);
    Rng rng(5);
    Eigen::VectorXd z(panel.p());
    for (int j = 0; j < panel.p(); ++j) z[j] = rng.next_normal();
    uint64_t seed = 0;
    for (auto _ : state) benchmark::DoNotOptimize(sample_knockoffs(t, z, ++seed));
}

void bm_filter(benchmark::State& state) {
    const int p = static_cast<int>(state.range(0));
    Rng rng(6);
    Eigen::VectorXd z(p);
    std::vector<Eigen::VectorXd> kz(5, Eigen::VectorXd(p));
    for (int j = 0; j < p; ++j) z[j] = 2.0 * rng.next_normal();
    for (auto& k : kz)
        for (int j = 0; j < p; ++j) k[j] = rng.next_normal();
    for (auto _ : state) {
        FeatureStats st = feature_stats(z, kz);
        benchmark::DoNotOptimize(knockoff_threshold(st, 0.1, 5));
        benchmark::DoNotOptimize(q_values(st, 5));
    }
}

void bm_cluster(benchmark::State& state) {
    const LdPanel panel = random_panel(static_cast<int>(state.range(0)), 7);
    for (auto _ : state) benchmark::DoNotOptimize(cluster_variants(panel, 0.75));
}

struct PedigreeFixture {
    Eigen::VectorXd y;
    Eigen::MatrixXd x;
    Eigen::MatrixXd g;
    Kinship kin;
};

PedigreeFixture pedigree_cohort(int fams, Family family) {
    HaplotypePool pool = filter_maf(synthetic_pool(42, 1000, 120), 0.01);
    Rng rng(fams);
    const PedigreeCohort cohort = build_pedigree_cohort(pool, fams, rng);
    std::vector<int> sites(pool.n_sites());
    std::iota(sites.begin(), sites.end(), 0);
    PedigreeFixture f;
    f.g = genotypes(pool, cohort, sites);
    f.kin = Kinship::repeated(pedigree_kinship(), fams);
    SimScenario sc;
    sc.phenotype = family == Family::gaussian ? PhenotypeKind::quantitative
                                              : PhenotypeKind::dichotomous;
    sc.relatedness = RelatednessKind::pedigree;
    sc.theta = 4.0;
    const PhenotypeSim sim = simulate_phenotypes(f.g, sc, f.kin, rng);
    f.y = sim.y;
    f.x.resize(f.g.rows(), 2);
    f.x.col(0).setOnes();
    f.x.col(1) = sim.x1;
    return f;
}

void bm_fit_null_gaussian(benchmark::State& state) {
    const PedigreeFixture f = pedigree_cohort(static_cast<int>(state.range(0)), Family::gaussian);
    for (auto _ : state) benchmark::DoNotOptimize(fit_null(f.y, f.x, f.kin, Family::gaussian, {}));
}

void bm_fit_null_binomial(benchmark::State& state) {
    const PedigreeFixture f = pedigree_cohort(static_cast<int>(state.range(0)), Family::binomial);
    for (auto _ : state) benchmark::DoNotOptimize(fit_null(f.y, f.x, f.kin, Family::binomial, {}));
}

void bm_score_test(benchmark::State& state) {
    const PedigreeFixture f = pedigree_cohort(static_cast<int>(state.range(0)), Family::gaussian);
    const NullModel nm = fit_null(f.y, f.x, f.kin, Family::gaussian, {});
    int j = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(score_test(nm, f.g.col(j)));
        j = (j + 1) % static_cast<int>(f.g.cols());
    }
}

}  // namespace

BENCHMARK(bm_solve_diag_equi)->Arg(100)->Arg(250)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_solve_diag_sdp)->Arg(100)->Arg(250)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_build_transform)->Arg(100)->Arg(250)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_sample_knockoffs)->Arg(250)->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_filter)->Arg(1000)->Arg(5000)->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_cluster)->Arg(400)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_fit_null_gaussian)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_fit_null_binomial)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_score_test)->Arg(200)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
