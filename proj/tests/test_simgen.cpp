#include "gk/simgen.hpp"
#include "gk/errors.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <unistd.h>

using namespace gk;

namespace {

HaplotypePool constant_pool(int sites, int8_t a, int8_t b) {
    HaplotypePool pool;
    pool.haps.resize(2, sites);
    pool.haps.row(0).setConstant(a);
    pool.haps.row(1).setConstant(b);
    const char* alts = "CGT";
    for (int j = 0; j < sites; ++j)
        pool.variants.push_back(VariantId{1, j + 1, "A", std::string(1, alts[j % 3])});
    pool.recompute_freq();
    return pool;
}

}  // namespace

TEST_CASE("the pedigree kinship matrix matches its literal definition") {
    const Eigen::MatrixXd phi = pedigree_kinship();
    REQUIRE(phi.rows() == 10);
    // independently written reference, row by row
    const double want[10][10] = {
        {1, 0, 0.5, 0.5, 0, 0, 0.25, 0.25, 0.25, 0.25},
        {0, 1, 0.5, 0.5, 0, 0, 0.25, 0.25, 0.25, 0.25},
        {0.5, 0.5, 1, 0.5, 0, 0, 0.5, 0.5, 0.25, 0.25},
        {0.5, 0.5, 0.5, 1, 0, 0, 0.25, 0.25, 0.5, 0.5},
        {0, 0, 0, 0, 1, 0, 0.5, 0.5, 0, 0},
        {0, 0, 0, 0, 0, 1, 0, 0, 0.5, 0.5},
        {0.25, 0.25, 0.5, 0.25, 0.5, 0, 1, 0.5, 0.125, 0.125},
        {0.25, 0.25, 0.5, 0.25, 0.5, 0, 0.5, 1, 0.125, 0.125},
        {0.25, 0.25, 0.25, 0.5, 0, 0.5, 0.125, 0.125, 1, 0.5},
        {0.25, 0.25, 0.25, 0.5, 0, 0.5, 0.125, 0.125, 0.5, 1},
    };
    for (int a = 0; a < 10; ++a)
        for (int b = 0; b < 10; ++b) CHECK(phi(a, b) == want[a][b]);
    // symmetry and PSD
    CHECK((phi - phi.transpose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(phi, Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("gene dropping transmits intact parental haplotypes") {
    Rng rng(191);
    SUBCASE("homozygous parents give a deterministic child") {
        const HapPair pa{0, 0}, pb{1, 1};
        const HapPair child = gene_drop(pa, pb, rng);
        CHECK(child.a == 0);
        CHECK(child.b == 1);
    }
    SUBCASE("each parental haplotype is transmitted half the time") {
        const HapPair pa{0, 1}, pb{2, 3};
        int from_a0 = 0;
        const int n = 10000;
        for (int i = 0; i < n; ++i) {
            const HapPair child = gene_drop(pa, pb, rng);
            CHECK((child.a == 0 || child.a == 1));
            CHECK((child.b == 2 || child.b == 3));
            if (child.a == 0) ++from_a0;
        }
        CHECK(std::fabs(from_a0 / static_cast<double>(n) - 0.5) < 0.02);
    }
}

TEST_CASE("degenerate pools give degenerate genotypes") {
    Rng rng(193);
    const HaplotypePool zeros = constant_pool(5, 0, 0);
    const Eigen::MatrixXd g0 = sample_unrelated_genotypes(zeros, 20, rng);
    CHECK(g0.cwiseAbs().maxCoeff() == 0.0);
    const HaplotypePool ones = constant_pool(5, 1, 1);
    const Eigen::MatrixXd g2 = sample_unrelated_genotypes(ones, 20, rng);
    CHECK((g2.array() == 2.0).all());
}

TEST_CASE("unrelated sampling preserves pool allele frequencies") {
    HaplotypePool pool = synthetic_pool(777, 400, 40);
    Rng rng(197);
    const Eigen::MatrixXd g = sample_unrelated_genotypes(pool, 10000, rng);
    for (int j = 0; j < pool.n_sites(); ++j) {
        const double emp = g.col(j).sum() / (2.0 * g.rows());
        CHECK(std::fabs(emp - pool.freq[j]) < 0.02);
    }
}

TEST_CASE("gene-dropping reproduces parent-child relatedness") {
    HaplotypePool pool = synthetic_pool(881, 600, 30);
    pool = filter_maf(pool, 0.05);
    Rng rng(199);
    const int fams = 10000;
    const PedigreeCohort cohort = build_pedigree_cohort(pool, fams, rng);
    std::vector<int> sites(pool.n_sites());
    std::iota(sites.begin(), sites.end(), 0);
    const Eigen::MatrixXd g = genotypes(pool, cohort, sites);

    // standardized cross products estimate the relationship coefficient
    auto relationship = [&](int ma, int mb) {
        double acc = 0.0;
        long cnt = 0;
        for (int j = 0; j < pool.n_sites(); ++j) {
            const double f = pool.freq[j];
            const double sd2 = 2.0 * f * (1.0 - f);
            for (int fam = 0; fam < fams; ++fam) {
                const double za = g(fam * 10 + ma, j) - 2.0 * f;
                const double zb = g(fam * 10 + mb, j) - 2.0 * f;
                acc += za * zb / sd2;
                ++cnt;
            }
        }
        return acc / cnt;
    };
    // lineal parent (2) and grandchild rows (6,7) carry coefficient 0.5
    const double pc = relationship(2, 6);
    CHECK(std::fabs(pc / 0.5 - 1.0) < 0.05);
    // married-in parent (4) against its children (6,7)
    const double mc = relationship(4, 7);
    CHECK(std::fabs(mc / 0.5 - 1.0) < 0.05);
    // cousins
    const double cz = relationship(6, 8);
    CHECK(std::fabs(cz / 0.125 - 1.0) < 0.08);
    // unrelated married-ins
    CHECK(std::fabs(relationship(4, 5)) < 0.01);
}

TEST_CASE("pedigree cohorts use the exact block-diagonal kinship") {
    const Kinship k = Kinship::repeated(pedigree_kinship(), 2);
    CHECK(k.n() == 20);
    CHECK(k.unique_blocks.size() == 1);
    CHECK((k.unique_blocks[0] - pedigree_kinship()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("phenotype simulation") {
    // independent sites: the variance-sum oracle is exact in expectation,
    // matching the harness where causal variants are cluster representatives
    HaplotypePool pool;
    {
        Rng prng(883);
        pool.haps.resize(800, 60);
        const char* alts = "CGT";
        for (int j = 0; j < 60; ++j) {
            pool.variants.push_back(VariantId{1, j + 1, "A", std::string(1, alts[j % 3])});
            const double f = 0.1 + 0.4 * prng.next_double();
            for (int h = 0; h < 800; ++h) pool.haps(h, j) = prng.next_double() < f ? 1 : 0;
        }
        pool.recompute_freq();
    }
    pool = filter_maf(pool, 0.05);
    Rng rng(211);
    const Eigen::MatrixXd g = sample_unrelated_genotypes(pool, 10000, rng);

    SUBCASE("quantitative: causal variance explained is near the budget") {
        SimScenario sc;
        sc.phenotype = PhenotypeKind::quantitative;
        const PhenotypeSim sim = simulate_phenotypes(g, sc, std::nullopt, rng);
        CHECK(static_cast<int>(sim.causal.size()) == 10);
        const Eigen::VectorXd gb = g * sim.beta;
        const double var = (gb.array() - gb.mean()).square().sum() / g.rows();
        CHECK(var == doctest::Approx(1.0).epsilon(0.10));
        // half the signs are protective
        int neg = 0;
        for (int j : sim.causal) neg += sim.beta[j] < 0 ? 1 : 0;
        CHECK(neg == 5);
    }
    SUBCASE("dichotomous: prevalence lands on its target") {
        SimScenario sc;
        sc.phenotype = PhenotypeKind::dichotomous;
        double total = 0.0;
        for (int rep = 0; rep < 10; ++rep) {
            const PhenotypeSim sim = simulate_phenotypes(g, sc, std::nullopt, rng);
            total += sim.y.mean();
        }
        CHECK(std::fabs(total / 10.0 - 0.10) < 0.01);
    }
    SUBCASE("a zero effect budget zeroes every coefficient") {
        SimScenario sc;
        sc.effect_a = 0.0;
        const PhenotypeSim sim = simulate_phenotypes(g, sc, std::nullopt, rng);
        CHECK(sim.beta.cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("quantitative pedigree residual variance must stay positive") {
        SimScenario sc;
        sc.phenotype = PhenotypeKind::quantitative;
        sc.relatedness = RelatednessKind::pedigree;
        sc.theta = 9.0;
        const Kinship kin = Kinship::repeated(pedigree_kinship(), 1000);
        Eigen::MatrixXd gp = g.topRows(10000);
        CHECK_THROWS_AS(simulate_phenotypes(gp, sc, kin, rng), data_error);
    }
}

TEST_CASE("sampling schemes") {
    // foundation with hand-made case pattern: family 0 all cases, family 1
    // all controls, family 2 mixed
    Eigen::VectorXd y(30);
    y.setZero();
    y.segment(0, 10).setOnes();
    y[20] = 1.0;
    Rng rng(223);

    SUBCASE("scheme A keeps all cases when the count matches exactly") {
        // 11 cases total; ask for 22 = 11 + 11
        const SchemeSample ss = apply_scheme(y, 3, Scheme::A, 22, rng);
        CHECK(static_cast<int>(ss.indices.size()) == 22);
        int cases = 0;
        for (int idx : ss.indices) cases += y[idx] == 1.0 ? 1 : 0;
        CHECK(cases == 11);
    }
    SUBCASE("scheme B takes whole families") {
        const SchemeSample ss = apply_scheme(y, 3, Scheme::B, 20, rng);
        CHECK(static_cast<int>(ss.indices.size()) == 20);
        CHECK(ss.members_per_family.size() == 2);
        for (const auto& fam : ss.members_per_family)
            CHECK(static_cast<int>(fam.size()) == pedigree_size);
    }
    SUBCASE("scheme C draws controls from control families only") {
        const SchemeSample ss = apply_scheme(y, 3, Scheme::C, 20, rng);
        for (int idx : ss.indices) {
            const int fam = idx / pedigree_size;
            if (y[idx] == 0.0) CHECK(fam == 1);  // the only pure control family
        }
        CHECK_FALSE(ss.padded);  // 11 cases available for 10 slots
    }
}

TEST_CASE("scheme C padding flag only fires on a case shortfall") {
    Eigen::VectorXd y(40);
    y.setZero();
    y.segment(0, 10).setOnes();  // family 0: all cases
    y[10] = 1.0;                 // family 1: one case
    Rng rng(227);
    // 11 cases available, 6 requested -> no padding
    const SchemeSample ss = apply_scheme(y, 4, Scheme::C, 12, rng);
    CHECK_FALSE(ss.padded);
    int cases = 0;
    for (int idx : ss.indices) cases += y[idx] == 1.0 ? 1 : 0;
    CHECK(cases == 6);
}

TEST_CASE("relatedness K") {
    SUBCASE("fully concordant families give K = 1") {
        const RelatednessK k = relatedness_k({0, 0, 0, 1, 1}, {1, 1, 1, 0, 0});
        CHECK(k.defined);
        CHECK(k.k == doctest::Approx(1.0));
    }
    SUBCASE("no within-family pairs is undefined") {
        const RelatednessK k = relatedness_k({0, 1, 2, 3}, {1, 0, 1, 0});
        CHECK_FALSE(k.defined);
    }
    SUBCASE("two-family toy: one concordant pair of two") {
        // family 0: two cases (concordant); family 1: case + control (discordant)
        const RelatednessK k = relatedness_k({0, 0, 1, 1}, {1, 1, 1, 0});
        CHECK(k.defined);
        CHECK(k.k == doctest::Approx(0.5));
    }
}

TEST_CASE("scheme relatedness ordering matches the design") {
    SimScenario sc;
    sc.phenotype = PhenotypeKind::dichotomous;
    sc.relatedness = RelatednessKind::pedigree;
    sc.theta = 4.0;
    HaplotypePool pool = synthetic_pool(991, 500, 50);
    pool = filter_maf(pool, 0.05);
    Rng rng(229);
    const int fams = 600;
    const PedigreeCohort cohort = build_pedigree_cohort(pool, fams, rng);
    std::vector<int> sites(pool.n_sites());
    std::iota(sites.begin(), sites.end(), 0);
    const Eigen::MatrixXd g = genotypes(pool, cohort, sites);
    const Kinship kin = Kinship::repeated(pedigree_kinship(), fams);
    const PhenotypeSim sim = simulate_phenotypes(g, sc, kin, rng);

    auto k_for = [&](Scheme scheme) {
        const SchemeSample ss = apply_scheme(sim.y, fams, scheme, 600, rng);
        std::vector<int> status;
        for (int idx : ss.indices) status.push_back(sim.y[idx] == 1.0 ? 1 : 0);
        const RelatednessK k = relatedness_k(ss.family_of, status);
        REQUIRE(k.defined);
        return k.k;
    };
    const double ka = k_for(Scheme::A);
    const double kb = k_for(Scheme::B);
    const double kc = k_for(Scheme::C);
    CHECK(ka < kb);
    CHECK(kb <= kc);
    CHECK(kc >= 0.95);
    CHECK(ka > 0.15);
    CHECK(ka < 0.65);
    CHECK(kb > 0.55);
}

TEST_CASE("FDR/power bookkeeping matches hand-computed values") {
    const FdrPower fp = fdr_power({1, 2, 3}, {1, 4}, 2);
    CHECK(fp.fdr == doctest::Approx(2.0 / 3.0));
    CHECK(fp.power == doctest::Approx(0.5));
    const FdrPower none = fdr_power({}, {1, 4}, 2);
    CHECK(none.fdr == 0.0);
    CHECK(none.power == 0.0);
}

TEST_CASE("haplotype files round-trip") {
    HaplotypePool pool = synthetic_pool(313, 12, 9);
    const std::string path = "gk_test_haps_" + std::to_string(::getpid());
    save_haplotypes(pool, path);
    const HaplotypePool back = load_haplotypes(path);
    CHECK(back.n_haps() == 12);
    CHECK(back.n_sites() == 9);
    CHECK((back.haps.cast<int>() - pool.haps.cast<int>()).cwiseAbs().maxCoeff() == 0);
    for (int j = 0; j < 9; ++j) CHECK(back.variants[j] == pool.variants[j]);
    std::remove(path.c_str());
}

TEST_CASE("experiments: null scenario has zero power, determinism holds") {
    SimScenario sc;
    sc.phenotype = PhenotypeKind::quantitative;
    sc.relatedness = RelatednessKind::unrelated;
    sc.n = 300;
    sc.n_sites = 60;
    sc.replicates = 4;
    sc.seed = 4242;
    sc.m_copies = 3;
    sc.methods = {"ghost-score"};
    sc.fdr_targets = {0.2};

    SUBCASE("null effects never find power") {
        SimScenario null_sc = sc;
        null_sc.effect_a = 0.0;
        const ExperimentResult r = run_experiment(null_sc);
        REQUIRE(r.cells.size() == 1);
        CHECK(r.cells[0].power == 0.0);
        CHECK(r.cells[0].replicates_used == 4);
    }
    SUBCASE("same scenario, same numbers, any worker count") {
        const ExperimentResult a = run_experiment(sc);
        SimScenario sc2 = sc;
        sc2.workers = 2;
        const ExperimentResult b = run_experiment(sc2);
        REQUIRE(a.cells.size() == b.cells.size());
        for (size_t i = 0; i < a.cells.size(); ++i) {
            CHECK(a.cells[i].fdr == b.cells[i].fdr);
            CHECK(a.cells[i].power == b.cells[i].power);
        }
        REQUIRE(a.log.size() == b.log.size());
        for (size_t i = 0; i < a.log.size(); ++i) {
            CHECK(a.log[i].n_selected == b.log[i].n_selected);
            CHECK(a.log[i].fdr == b.log[i].fdr);
        }
    }
}

TEST_CASE("scenario files parse and complain by key") {
    const std::string path = "gk_test_scen_" + std::to_string(::getpid());
    {
        std::ofstream f(path);
        f << "# desk scenario\n"
             "phenotype = dichotomous\n"
             "relatedness = pedigree\n"
             "theta = 4\n"
             "scheme = C\n"
             "replicates = 7\n"
             "seed = 99\n"
             "fdr_targets = 0.1, 0.2\n"
             "methods = ghost-mixed, ghost-score\n";
    }
    const SimScenario sc = parse_scenario(path);
    CHECK(sc.phenotype == PhenotypeKind::dichotomous);
    CHECK(sc.scheme == Scheme::C);
    CHECK(sc.theta == 4.0);
    CHECK(sc.replicates == 7);
    CHECK(sc.seed == 99);
    CHECK(sc.fdr_targets == std::vector<double>{0.1, 0.2});
    CHECK(sc.methods == std::vector<std::string>{"ghost-mixed", "ghost-score"});

    {
        std::ofstream f(path);
        f << "phenotipo = dichotomous\n";
    }
    try {
        parse_scenario(path);
        CHECK(false);
    } catch (const data_error& e) {
        CHECK(std::string(e.what()).find("phenotipo") != std::string::npos);
    }
    {
        std::ofstream f(path);
        f << "scheme = Q\n";
    }
    try {
        parse_scenario(path);
        CHECK(false);
    } catch (const data_error& e) {
        CHECK(std::string(e.what()).find("scheme") != std::string::npos);
    }
    std::remove(path.c_str());
}

TEST_CASE("scheme C with strong relatedness: unadjusted scores inflate the FDR") {
    SimScenario sc;
    sc.phenotype = PhenotypeKind::dichotomous;
    sc.relatedness = RelatednessKind::pedigree;
    sc.theta = 7.0;
    sc.scheme = Scheme::C;
    sc.n = 1000;
    sc.foundation_families = 1000;
    sc.n_sites = 150;
    sc.replicates = 40;
    sc.seed = 515;
    sc.m_copies = 5;
    sc.fdr_targets = {0.1};
    sc.methods = {"ghost-mixed", "ghost-score"};
    sc.workers = 2;
    const ExperimentResult r = run_experiment(sc);
    REQUIRE(r.cells.size() == 2);
    const auto& mixed = r.cells[0].method == "ghost-mixed" ? r.cells[0] : r.cells[1];
    const auto& naive = r.cells[0].method == "ghost-score" ? r.cells[0] : r.cells[1];
    CHECK(naive.fdr > mixed.fdr);
}

TEST_CASE("related quantitative experiments run end to end") {
    SimScenario sc;
    sc.phenotype = PhenotypeKind::quantitative;
    sc.relatedness = RelatednessKind::pedigree;
    sc.theta = 4.0;
    sc.n = 600;  // 60 pedigrees
    sc.n_sites = 80;
    sc.replicates = 6;
    sc.seed = 99;
    sc.m_copies = 3;
    sc.fdr_targets = {0.2};
    sc.methods = {"ghost-mixed", "individual-mixed"};
    sc.workers = 2;
    const ExperimentResult r = run_experiment(sc);
    REQUIRE(r.cells.size() == 2);
    for (const auto& c : r.cells) {
        CHECK(c.replicates_used == 6);
        CHECK(c.power > 0.0);  // a = 1 at n = 600 finds at least something
    }
}

TEST_CASE("experiment validation") {
    SimScenario sc;
    sc.methods = {"no-such-method"};
    CHECK_THROWS_AS(run_experiment(sc), data_error);
    SimScenario sc2;
    sc2.relatedness = RelatednessKind::pedigree;
    sc2.scheme = Scheme::A;  // quantitative + scheme is invalid
    CHECK_THROWS_AS(run_experiment(sc2), data_error);
    SimScenario sc3;
    sc3.relatedness = RelatednessKind::pedigree;
    sc3.methods = {"ghost-wald"};
    CHECK_THROWS_AS(run_experiment(sc3), data_error);
}
