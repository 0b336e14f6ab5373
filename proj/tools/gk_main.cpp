// gk: knockoff-based variable selection from GWAS summary statistics,
// association testing, overlap-aware meta-analysis and the simulation
// harness.

#include "gk/assoc.hpp"
#include "gk/errors.hpp"
#include "gk/filter.hpp"
#include "gk/io.hpp"
#include "gk/knockoff.hpp"
#include "gk/ld_panel.hpp"
#include "gk/meta.hpp"
#include "gk/simgen.hpp"
#include "gk/stats.hpp"
#include "gk/version.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <thread>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ------------------------- logging -------------------------

int log_level() {
    static int level = [] {
        const char* env = std::getenv("GK_LOG");
        if (!env) return 1;
        const std::string s(env);
        if (s == "error") return 0;
        if (s == "warn") return 1;
        if (s == "info") return 2;
        if (s == "debug") return 3;
        return 1;
    }();
    return level;
}

void log_msg(int level, const std::string& msg) {
    static const char* names[] = {"error", "warn", "info", "debug"};
    if (level <= log_level()) std::cerr << "gk [" << names[level] << "] " << msg << "\n";
}

// ------------------------- manifests -------------------------

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

struct Manifest {
    std::string subcommand;
    json config = json::object();
    uint64_t master_seed = 0;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;

    void write(const fs::path& out_dir) const {
        json j;
        j["tool"] = "gk";
        j["version"] = gk::version;
        j["subcommand"] = subcommand;
        j["config"] = config;
        j["master_seed"] = master_seed;
        json digests = json::object();
        for (const auto& p : inputs) digests[p] = gk::file_digest(p);
        j["inputs"] = digests;
        j["outputs"] = outputs;
        j["created_utc"] = utc_now();
        std::ofstream f(out_dir / "manifest.json");
        if (!f) throw gk::io_error("cannot write manifest in " + out_dir.string());
        f << j.dump(2) << "\n";
    }
};

fs::path ensure_out_dir(const std::string& out) {
    fs::path dir(out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw gk::io_error("cannot create output directory " + out + ": " + ec.message());
    return dir;
}

gk::LdFormat parse_format(const std::string& f) {
    if (f == "dense-text" || f == "text") return gk::LdFormat::dense_text;
    if (f == "dense-binary" || f == "binary") return gk::LdFormat::dense_binary;
    throw gk::data_error("unknown LD format '" + f + "' (want dense-text|dense-binary)");
}

// ------------------------- solve-d -------------------------

int cmd_solve_d(const std::string& ld_path, const std::string& format, const std::string& method,
                int m, double eps, const std::string& out) {
    const gk::LdPanel panel = gk::load_ld_panel(ld_path, parse_format(format));
    const gk::LdPanel reg = gk::regularize(panel, eps);
    const gk::KnockoffDiag diag = method == "equi" ? gk::solve_diag_equi(reg, m)
                                                   : gk::solve_diag_sdp(reg, m);
    const fs::path dir = ensure_out_dir(out);
    {
        std::ofstream f(dir / "diag.tsv");
        if (!f) throw gk::io_error("cannot write " + (dir / "diag.tsv").string());
        f << "variant\ts\n";
        f.precision(17);
        for (int j = 0; j < panel.p(); ++j) f << panel.variants[j].str() << '\t' << diag.s[j] << "\n";
    }
    Manifest mf;
    mf.subcommand = "solve-d";
    mf.config = {{"ld", ld_path}, {"format", format}, {"method", method}, {"m", m}, {"eps", eps},
                 {"out", out}};
    mf.inputs = {ld_path};
    mf.outputs = {"diag.tsv"};
    mf.write(dir);
    return 0;
}

// ------------------------- knockoff-filter -------------------------

struct FilterConfig {
    std::vector<std::string> ld_paths;
    std::string format = "dense-text";
    std::string sumstats;
    std::string exclude;  // optional variant-id exclusion list
    int m = 5;
    double fdr = 0.1;
    uint64_t seed = 1;
    int workers = 0;
    double cutoff = 0.75;
    double eps = 0.05;
    std::string method = "equi";
    std::string out;
};

struct BlockResult {
    // matched variants of this block, in panel order
    std::vector<gk::VariantId> ids;
    Eigen::VectorXd z;
    std::vector<int> cluster_of;       // per matched variant
    std::vector<int> rep_index;        // per cluster -> matched index
    std::vector<int> rep_of_variant;   // per matched variant -> its cluster's rep
    Eigen::MatrixXd sigma;             // matched sub-panel (unregularized)
    // representative-level stats
    std::vector<int> reps;             // matched indices, cluster order
    Eigen::VectorXd rep_z;
    std::vector<Eigen::VectorXd> rep_knockoffs;
    int dropped = 0;
};

BlockResult process_block(const gk::LdPanel& panel, const gk::ZVector& zv,
                          const std::map<std::string, int>& z_index, const FilterConfig& cfg,
                          uint64_t block_seed) {
    BlockResult br;
    std::vector<int> matched_panel_idx;
    for (int j = 0; j < panel.p(); ++j) {
        const auto it = z_index.find(panel.variants[j].str());
        if (it == z_index.end()) {
            ++br.dropped;
            continue;
        }
        matched_panel_idx.push_back(j);
        br.ids.push_back(panel.variants[j]);
        br.z.conservativeResize(br.ids.size());
        br.z[br.ids.size() - 1] = zv.z[it->second];
    }
    const int pm = static_cast<int>(matched_panel_idx.size());
    if (pm == 0) return br;

    br.sigma.resize(pm, pm);
    for (int a = 0; a < pm; ++a)
        for (int b = 0; b < pm; ++b)
            br.sigma(a, b) = panel.sigma(matched_panel_idx[a], matched_panel_idx[b]);

    gk::LdPanel sub{br.ids, br.sigma};
    const gk::ClusterAssignment clusters = gk::cluster_variants(sub, cfg.cutoff);
    br.cluster_of = clusters.cluster_of;
    br.rep_index = clusters.representative;
    br.rep_of_variant.resize(pm);
    for (int j = 0; j < pm; ++j) br.rep_of_variant[j] = clusters.representative[clusters.cluster_of[j]];

    br.reps = clusters.representative;
    const int nrep = static_cast<int>(br.reps.size());
    gk::LdPanel rep_panel;
    rep_panel.sigma.resize(nrep, nrep);
    for (int a = 0; a < nrep; ++a) {
        rep_panel.variants.push_back(br.ids[br.reps[a]]);
        for (int b = 0; b < nrep; ++b) rep_panel.sigma(a, b) = br.sigma(br.reps[a], br.reps[b]);
    }
    br.rep_z.resize(nrep);
    for (int a = 0; a < nrep; ++a) br.rep_z[a] = br.z[br.reps[a]];

    const gk::LdPanel reg = gk::regularize(rep_panel, cfg.eps);
    const gk::KnockoffDiag diag = cfg.method == "equi" ? gk::solve_diag_equi(reg, cfg.m)
                                                       : gk::solve_diag_sdp(reg, cfg.m);
    const gk::KnockoffTransform tr = gk::build_transform(reg, diag, cfg.m);
    br.rep_knockoffs = gk::sample_knockoffs(tr, br.rep_z, block_seed);
    return br;
}

int cmd_knockoff_filter(const FilterConfig& cfg) {
    const gk::ZVector zv = gk::read_sumstats(cfg.sumstats);
    if (zv.clamped) log_msg(1, std::to_string(zv.clamped) + " p-values clamped at 1e-300");
    std::map<std::string, int> z_index;
    for (int j = 0; j < zv.p(); ++j) z_index[zv.variants[j].str()] = j;
    if (!cfg.exclude.empty()) {
        std::ifstream ex(cfg.exclude);
        if (!ex) throw gk::io_error("cannot open exclusion list: " + cfg.exclude);
        std::string id;
        int removed = 0;
        while (std::getline(ex, id))
            if (!id.empty()) removed += static_cast<int>(z_index.erase(id));
        log_msg(2, "exclusion list removed " + std::to_string(removed) + " variants");
    }

    std::vector<gk::LdPanel> panels;
    for (const auto& p : cfg.ld_paths) panels.push_back(gk::load_ld_panel(p, parse_format(cfg.format)));

    // Blocks are independent; per-block seeds come from the master seed and
    // the block id, so the worker count never changes the result.
    std::vector<BlockResult> blocks(panels.size());
    std::atomic<size_t> next(0);
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto worker = [&]() {
        for (size_t i = next.fetch_add(1); i < panels.size(); i = next.fetch_add(1)) {
            try {
                blocks[i] = process_block(panels[i], zv, z_index, cfg,
                                          gk::derive_seed(cfg.seed, i));
            } catch (...) {
                std::lock_guard<std::mutex> lk(failure_mu);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const int workers = cfg.workers > 0 ? cfg.workers
                                        : static_cast<int>(std::thread::hardware_concurrency());
    if (workers <= 1 || panels.size() == 1) {
        worker();
    } else {
        std::vector<std::thread> ts;
        for (int t = 0; t < std::min<int>(workers, static_cast<int>(panels.size())); ++t)
            ts.emplace_back(worker);
        for (auto& t : ts) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    int total_matched = 0, total_dropped = 0;
    for (const auto& b : blocks) {
        total_matched += static_cast<int>(b.ids.size());
        total_dropped += b.dropped;
    }
    log_msg(2, "matched " + std::to_string(total_matched) + " variants, dropped " +
                   std::to_string(total_dropped));
    if (total_matched == 0)
        throw gk::empty_result_error("no summary-statistic variants matched the LD panels");

    // Genome-wide stats over all representatives, merged in block order.
    Eigen::VectorXd all_z;
    std::vector<Eigen::VectorXd> all_knock(cfg.m);
    std::vector<std::pair<int, int>> rep_origin;  // (block, rep position)
    int nrep_total = 0;
    for (size_t bi = 0; bi < blocks.size(); ++bi) nrep_total += static_cast<int>(blocks[bi].reps.size());
    all_z.resize(nrep_total);
    for (int k = 0; k < cfg.m; ++k) all_knock[k].resize(nrep_total);
    int at = 0;
    for (size_t bi = 0; bi < blocks.size(); ++bi) {
        const auto& b = blocks[bi];
        for (size_t r = 0; r < b.reps.size(); ++r, ++at) {
            all_z[at] = b.rep_z[static_cast<int>(r)];
            for (int k = 0; k < cfg.m; ++k) all_knock[k][at] = b.rep_knockoffs[k][static_cast<int>(r)];
            rep_origin.push_back({static_cast<int>(bi), static_cast<int>(r)});
        }
    }
    gk::FeatureStats stats = gk::feature_stats(all_z, all_knock);
    stats.q = gk::q_values(stats, cfg.m);
    const gk::SelectionResult sel = gk::knockoff_threshold(stats, cfg.fdr, cfg.m);

    // Expand each block's selected representatives within their clusters.
    std::vector<std::vector<int>> selected_reps_per_block(blocks.size());
    for (int gidx : sel.selected)
        selected_reps_per_block[rep_origin[gidx].first].push_back(
            blocks[rep_origin[gidx].first].reps[rep_origin[gidx].second]);
    std::vector<std::set<int>> selected_variants(blocks.size());
    for (size_t bi = 0; bi < blocks.size(); ++bi) {
        const auto& b = blocks[bi];
        if (selected_reps_per_block[bi].empty() || b.ids.empty()) continue;
        gk::LdPanel sub{b.ids, b.sigma};
        gk::ClusterAssignment ca;
        ca.cluster_of = b.cluster_of;
        ca.representative = b.rep_index;
        const auto expanded =
            gk::expand_selection(ca, sub, selected_reps_per_block[bi], b.z, cfg.cutoff);
        selected_variants[bi].insert(expanded.begin(), expanded.end());
    }

    // Representative-level stats indexed back per block for the output table.
    std::vector<std::map<int, int>> rep_to_global(blocks.size());
    for (int gidx = 0; gidx < nrep_total; ++gidx)
        rep_to_global[rep_origin[gidx].first][blocks[rep_origin[gidx].first]
                                                  .reps[rep_origin[gidx].second]] = gidx;

    const fs::path dir = ensure_out_dir(cfg.out);
    {
        std::ofstream f(dir / "selection.tsv");
        if (!f) throw gk::io_error("cannot write " + (dir / "selection.tsv").string());
        f << "variant\tz\tt\tkappa\ttau\tw\tq\tselected\tcluster\trepresentative\n";
        f.precision(10);
        for (size_t bi = 0; bi < blocks.size(); ++bi) {
            const auto& b = blocks[bi];
            for (size_t j = 0; j < b.ids.size(); ++j) {
                const int rep = b.rep_of_variant[j];
                const int gidx = rep_to_global[bi].at(rep);
                f << b.ids[j].str() << '\t' << b.z[static_cast<int>(j)] << '\t'
                  << b.z[static_cast<int>(j)] * b.z[static_cast<int>(j)] << '\t'
                  << stats.kappa[gidx] << '\t' << stats.tau[gidx] << '\t' << stats.w[gidx] << '\t'
                  << stats.q[gidx] << '\t'
                  << (selected_variants[bi].count(static_cast<int>(j)) ? 1 : 0) << '\t' << 'b'
                  << bi << ".c" << b.cluster_of[j] << '\t'
                  << (rep == static_cast<int>(j) ? 1 : 0) << "\n";
            }
        }
    }
    {
        std::ofstream f(dir / "manhattan.tsv");
        if (!f) throw gk::io_error("cannot write " + (dir / "manhattan.tsv").string());
        f << "variant\tpos\tw\tq\tneglog10p\n";
        f.precision(10);
        for (size_t bi = 0; bi < blocks.size(); ++bi) {
            const auto& b = blocks[bi];
            for (size_t j = 0; j < b.ids.size(); ++j) {
                const int gidx = rep_to_global[bi].at(b.rep_of_variant[j]);
                f << b.ids[j].str() << '\t' << b.ids[j].pos << '\t' << stats.w[gidx] << '\t'
                  << stats.q[gidx] << '\t' << gk::neg_log10_two_sided_p(b.z[static_cast<int>(j)])
                  << "\n";
            }
        }
    }
    Manifest mf;
    mf.subcommand = "knockoff-filter";
    mf.config = {{"ld", cfg.ld_paths},   {"format", cfg.format}, {"sumstats", cfg.sumstats},
                 {"m", cfg.m},           {"fdr", cfg.fdr},       {"seed", cfg.seed},
                 {"workers", workers},   {"cutoff", cfg.cutoff}, {"eps", cfg.eps},
                 {"method", cfg.method}, {"out", cfg.out},
                 {"threshold", std::isfinite(sel.threshold) ? json(sel.threshold) : json("inf")},
                 {"n_selected_representatives", sel.selected.size()},
                 {"dropped_unmatched", total_dropped}};
    if (!cfg.exclude.empty()) mf.config["exclude"] = cfg.exclude;
    mf.master_seed = cfg.seed;
    mf.inputs = cfg.ld_paths;
    mf.inputs.push_back(cfg.sumstats);
    if (!cfg.exclude.empty()) mf.inputs.push_back(cfg.exclude);
    mf.outputs = {"selection.tsv", "manhattan.tsv"};
    mf.write(dir);
    return 0;
}

// ------------------------- assoc -------------------------

int cmd_assoc(const std::string& cohort_path, const std::string& family_s, const std::string& test,
              const std::string& kinship_path, double fix_theta, bool has_fix_theta,
              const std::string& out) {
    const gk::CohortFile cf = gk::read_cohort(cohort_path);
    const gk::Family family =
        family_s == "gaussian" ? gk::Family::gaussian : gk::Family::binomial;

    std::optional<gk::Kinship> kin;
    if (!kinship_path.empty() && kinship_path != "identity")
        kin = gk::Kinship::dense(gk::read_kinship_matrix(kinship_path));

    gk::ZVector zv;
    zv.variants = cf.variants;
    zv.z.resize(cf.geno.cols());
    zv.n = Eigen::VectorXd::Constant(cf.geno.cols(), static_cast<double>(cf.y.size()));

    if (test == "score") {
        gk::FitOptions fo;
        if (has_fix_theta) fo.fix_theta = fix_theta;
        const gk::NullModel nm = gk::fit_null(cf.y, cf.x, kin, family, fo);
        log_msg(2, "null fit: theta=" + std::to_string(nm.theta) + " phi=" + std::to_string(nm.phi));
        for (int j = 0; j < cf.geno.cols(); ++j) zv.z[j] = gk::score_test(nm, cf.geno.col(j)).z;
    } else {
        if (kin) throw gk::data_error("wald/lrt tests support unrelated cohorts only");
        for (int j = 0; j < cf.geno.cols(); ++j)
            zv.z[j] = (test == "wald") ? gk::wald_test(cf.y, cf.x, cf.geno.col(j), family).z
                                       : gk::lrt_test(cf.y, cf.x, cf.geno.col(j), family).z;
    }

    const fs::path dir = ensure_out_dir(out);
    gk::write_sumstats(zv, (dir / "sumstats.tsv").string());
    Manifest mf;
    mf.subcommand = "assoc";
    mf.config = {{"cohort", cohort_path}, {"family", family_s}, {"test", test},
                 {"kinship", kinship_path.empty() ? "identity" : kinship_path}, {"out", out}};
    if (has_fix_theta) mf.config["fix_theta"] = fix_theta;
    mf.inputs = {cohort_path};
    if (kin) mf.inputs.push_back(kinship_path);
    mf.outputs = {"sumstats.tsv"};
    mf.write(dir);
    return 0;
}

// ------------------------- meta -------------------------

struct AlignedStudies {
    std::vector<gk::Study> studies;
    std::vector<gk::VariantId> variants;
    Eigen::VectorXd n_total;
};

AlignedStudies align_studies(const std::vector<gk::StudyManifestEntry>& entries) {
    std::vector<gk::ZVector> zvs;
    for (const auto& e : entries) zvs.push_back(gk::read_sumstats(e.path));

    // intersection in first-study order
    std::vector<std::map<std::string, int>> index(zvs.size());
    for (size_t s = 0; s < zvs.size(); ++s)
        for (int k = 0; k < zvs[s].p(); ++k) index[s][zvs[s].variants[k].str()] = k;
    std::vector<gk::VariantId> shared;
    for (int j = 0; j < zvs[0].p(); ++j) {
        const std::string id = zvs[0].variants[j].str();
        bool everywhere = true;
        for (size_t s = 1; s < zvs.size() && everywhere; ++s)
            everywhere = index[s].count(id) > 0;
        if (everywhere) shared.push_back(zvs[0].variants[j]);
    }
    if (shared.empty()) throw gk::empty_result_error("studies share no variants");

    AlignedStudies out;
    out.variants = shared;
    out.n_total = Eigen::VectorXd::Zero(static_cast<int>(shared.size()));
    for (size_t s = 0; s < zvs.size(); ++s) {
        gk::Study st;
        st.name = entries[s].name;
        st.n = entries[s].n;
        st.z.resize(static_cast<int>(shared.size()));
        for (size_t j = 0; j < shared.size(); ++j)
            st.z[static_cast<int>(j)] = zvs[s].z[index[s].at(shared[j].str())];
        out.studies.push_back(std::move(st));
        out.n_total.array() += entries[s].n;
    }
    return out;
}

int cmd_meta(const std::string& manifest_path, const std::string& ld_path,
             const std::string& format, const std::string& method, uint64_t seed,
             const std::string& out) {
    const auto entries = gk::read_study_manifest(manifest_path);
    AlignedStudies as = align_studies(entries);
    const int l = static_cast<int>(as.studies.size());

    json info;
    gk::ZVector zv;
    zv.variants = as.variants;
    zv.n = as.n_total;
    zv.source = gk::ZSource::meta;

    if (method == "fisher") {
        zv.z = gk::fisher_meta_z(as.studies);
        info["method"] = "fisher";
    } else {
        gk::StudyPanel sp;
        sp.studies = as.studies;
        std::optional<gk::LdPanel> panel;
        if (l == 1) {
            sp.cor_s = Eigen::MatrixXd::Ones(1, 1);
        } else {
            if (!ld_path.empty()) {
                gk::LdPanel full = gk::load_ld_panel(ld_path, parse_format(format));
                // restrict to the shared variants, in order
                std::map<std::string, int> idx;
                for (int j = 0; j < full.p(); ++j) idx[full.variants[j].str()] = j;
                gk::LdPanel subset;
                subset.variants = as.variants;
                subset.sigma.resize(as.variants.size(), as.variants.size());
                for (size_t a = 0; a < as.variants.size(); ++a) {
                    const auto ia = idx.find(as.variants[a].str());
                    if (ia == idx.end())
                        throw gk::data_error("meta: variant " + as.variants[a].str() +
                                             " missing from the LD panel");
                    for (size_t b = 0; b < as.variants.size(); ++b)
                        subset.sigma(a, b) = full.sigma(ia->second, idx.at(as.variants[b].str()));
                }
                panel = std::move(subset);
            } else {
                log_msg(1, "no --ld given; study correlation estimated without LD whitening");
            }
            sp.cor_s = gk::estimate_study_correlation(as.studies, panel ? &*panel : nullptr);
        }
        const Eigen::VectorXd w = gk::optimal_weights(sp);
        const gk::MetaZResult mz = gk::combine_meta_z(sp, w);
        zv.z = mz.z;
        info["method"] = "optimal";
        info["weights"] = std::vector<double>(w.data(), w.data() + w.size());
        info["normalization"] = mz.variance_scalar;
        json cor = json::array();
        for (int a = 0; a < l; ++a)
            cor.push_back(std::vector<double>(sp.cor_s.row(a).data(),
                                              sp.cor_s.row(a).data() + l));
        info["cor_s"] = cor;
        info["whitened"] = !ld_path.empty();
    }
    info["seed"] = seed;
    info["n_shared_variants"] = as.variants.size();

    const fs::path dir = ensure_out_dir(out);
    gk::write_sumstats(zv, (dir / "combined.tsv").string());
    {
        std::ofstream f(dir / "meta_info.json");
        f << info.dump(2) << "\n";
    }
    Manifest mf;
    mf.subcommand = "meta";
    mf.config = {{"studies", manifest_path}, {"ld", ld_path}, {"method", method}, {"seed", seed},
                 {"out", out}};
    mf.master_seed = seed;
    mf.inputs = {manifest_path};
    for (const auto& e : entries) mf.inputs.push_back(e.path);
    if (!ld_path.empty()) mf.inputs.push_back(ld_path);
    mf.outputs = {"combined.tsv", "meta_info.json"};
    mf.write(dir);
    return 0;
}

// ------------------------- simulate -------------------------

int cmd_simulate(const std::string& scenario_path, int workers_override, const std::string& out) {
    gk::SimScenario sc = gk::parse_scenario(scenario_path);
    if (workers_override > 0) sc.workers = workers_override;
    const gk::ExperimentResult res = gk::run_experiment(sc);

    const fs::path dir = ensure_out_dir(out);
    {
        std::ofstream f(dir / "results.tsv");
        f << "method\ttarget\tfdr\tfdr_se\tpower\tpower_se\treplicates_used\n";
        f.precision(10);
        for (const auto& c : res.cells)
            f << c.method << '\t' << c.fdr_target << '\t' << c.fdr << '\t' << c.fdr_se << '\t'
              << c.power << '\t' << c.power_se << '\t' << c.replicates_used << "\n";
    }
    {
        std::ofstream f(dir / "replicates.tsv");
        f << "replicate\tmethod\ttarget\tn_selected\tn_true\tfdr\tpower\tstatus\n";
        f.precision(10);
        for (const auto& r : res.log)
            f << r.replicate << '\t' << r.method << '\t' << r.fdr_target << '\t' << r.n_selected
              << '\t' << r.n_true << '\t' << r.fdr << '\t' << r.power << '\t' << r.status << "\n";
    }
    if (res.replicates_failed)
        log_msg(1, std::to_string(res.replicates_failed) + " replicates failed and were excluded");

    Manifest mf;
    mf.subcommand = "simulate";
    mf.config = {{"scenario", scenario_path},
                 {"workers", sc.workers},
                 {"out", out},
                 {"replicates_failed", res.replicates_failed},
                 {"p_representatives", res.p_representatives}};
    mf.master_seed = sc.seed;
    mf.inputs = {scenario_path};
    if (!sc.haplotype_path.empty()) mf.inputs.push_back(sc.haplotype_path);
    mf.outputs = {"results.tsv", "replicates.tsv"};
    mf.write(dir);
    return 0;
}

// ------------------------- hap-gen -------------------------

int cmd_hap_gen(uint64_t seed, int haps, int sites, const std::string& out) {
    const gk::HaplotypePool pool = gk::synthetic_pool(seed, haps, sites);
    gk::save_haplotypes(pool, out);
    log_msg(2, "wrote " + std::to_string(pool.n_haps()) + " x " + std::to_string(pool.n_sites()) +
                   " haplotypes to " + out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GhostKnockoffs: knockoff inference from GWAS summary statistics"};
    app.require_subcommand(1);
    app.set_version_flag("--version", gk::version);

    // solve-d
    std::string sd_ld, sd_format = "dense-text", sd_method = "equi", sd_out;
    int sd_m = 1;
    double sd_eps = 0.05;
    auto* sd = app.add_subcommand("solve-d", "Solve the knockoff diagonal for an LD panel");
    sd->add_option("--ld", sd_ld, "LD panel path")->required();
    sd->add_option("--format", sd_format, "dense-text|dense-binary");
    sd->add_option("--method", sd_method, "equi|sdp")->check(CLI::IsMember({"equi", "sdp"}));
    sd->add_option("--m", sd_m, "knockoff copies the diagonal must support");
    sd->add_option("--eps", sd_eps, "regularization strength");
    sd->add_option("--out", sd_out, "output directory")->required();

    // knockoff-filter
    FilterConfig fc;
    auto* kf = app.add_subcommand("knockoff-filter", "Run the knockoff filter on summary statistics");
    kf->add_option("--ld", fc.ld_paths, "LD panel path(s), one per block")->required();
    kf->add_option("--format", fc.format, "dense-text|dense-binary");
    kf->add_option("--sumstats", fc.sumstats, "summary statistics TSV")->required();
    kf->add_option("--exclude", fc.exclude, "file of variant ids to drop before clustering");
    kf->add_option("--m", fc.m, "knockoff copies per variant");
    kf->add_option("--fdr", fc.fdr, "target FDR");
    kf->add_option("--seed", fc.seed, "master seed");
    kf->add_option("--workers", fc.workers, "worker threads (0 = hardware)");
    kf->add_option("--cutoff", fc.cutoff, "clustering correlation cutoff");
    kf->add_option("--eps", fc.eps, "LD regularization strength");
    kf->add_option("--method", fc.method, "equi|sdp")->check(CLI::IsMember({"equi", "sdp"}));
    kf->add_option("--out", fc.out, "output directory")->required();

    // assoc
    std::string as_cohort, as_family = "gaussian", as_test = "score", as_kinship, as_out;
    double as_fix_theta = 0.0;
    auto* as = app.add_subcommand("assoc", "Single-variant association tests for a cohort");
    as->add_option("--cohort", as_cohort, "cohort TSV")->required();
    as->add_option("--family", as_family, "gaussian|binomial")
        ->check(CLI::IsMember({"gaussian", "binomial"}));
    as->add_option("--test", as_test, "score|wald|lrt")
        ->check(CLI::IsMember({"score", "wald", "lrt"}));
    as->add_option("--kinship", as_kinship, "kinship matrix file or 'identity'");
    auto* ft = as->add_option("--fix-theta", as_fix_theta, "pin the variance component");
    as->add_option("--out", as_out, "output directory")->required();

    // meta
    std::string mt_manifest, mt_ld, mt_format = "dense-text", mt_method = "optimal", mt_out;
    uint64_t mt_seed = 1;
    auto* mt = app.add_subcommand("meta", "Combine study Z-scores with overlap-aware weights");
    mt->add_option("--studies", mt_manifest, "study manifest TSV (name, n, path)")->required();
    mt->add_option("--ld", mt_ld, "LD panel used to whiten the correlation estimate");
    mt->add_option("--format", mt_format, "dense-text|dense-binary");
    mt->add_option("--method", mt_method, "optimal|fisher")
        ->check(CLI::IsMember({"optimal", "fisher"}));
    mt->add_option("--seed", mt_seed, "master seed (recorded in metadata)");
    mt->add_option("--out", mt_out, "output directory")->required();

    // simulate
    std::string sim_scenario, sim_out;
    int sim_workers = 0;
    auto* sm = app.add_subcommand("simulate", "Run an FDR/power simulation experiment");
    sm->add_option("--scenario", sim_scenario, "scenario config file")->required();
    sm->add_option("--workers", sim_workers, "worker threads override");
    sm->add_option("--out", sim_out, "output directory")->required();

    // pipeline
    FilterConfig pc;
    std::string pl_studies, pl_meta_method = "optimal";
    auto* pl = app.add_subcommand("pipeline",
                                  "End to end: optional meta-analysis, then the knockoff filter");
    pl->add_option("--ld", pc.ld_paths, "LD panel path(s)")->required();
    pl->add_option("--format", pc.format, "dense-text|dense-binary");
    pl->add_option("--sumstats", pc.sumstats, "summary statistics TSV (single-study input)");
    pl->add_option("--studies", pl_studies, "study manifest TSV (runs the meta stage first)");
    pl->add_option("--meta-method", pl_meta_method, "optimal|fisher");
    pl->add_option("--m", pc.m, "knockoff copies per variant");
    pl->add_option("--fdr", pc.fdr, "target FDR");
    pl->add_option("--seed", pc.seed, "master seed");
    pl->add_option("--workers", pc.workers, "worker threads (0 = hardware)");
    pl->add_option("--cutoff", pc.cutoff, "clustering correlation cutoff");
    pl->add_option("--eps", pc.eps, "LD regularization strength");
    pl->add_option("--method", pc.method, "equi|sdp");
    pl->add_option("--out", pc.out, "output directory")->required();

    // hap-gen
    uint64_t hg_seed = 1;
    int hg_haps = 2000, hg_sites = 500;
    std::string hg_out;
    auto* hg = app.add_subcommand("hap-gen", "Generate a synthetic haplotype pool");
    hg->add_option("--seed", hg_seed, "generator seed");
    hg->add_option("--haps", hg_haps, "haplotype count");
    hg->add_option("--sites", hg_sites, "site count");
    hg->add_option("--out", hg_out, "output haplotype TSV")->required();

    try {
        app.parse(argc, argv);
        if (sd->parsed()) return cmd_solve_d(sd_ld, sd_format, sd_method, sd_m, sd_eps, sd_out);
        if (kf->parsed()) return cmd_knockoff_filter(fc);
        if (as->parsed())
            return cmd_assoc(as_cohort, as_family, as_test, as_kinship, as_fix_theta,
                             !ft->empty(), as_out);
        if (mt->parsed()) return cmd_meta(mt_manifest, mt_ld, mt_format, mt_method, mt_seed, mt_out);
        if (sm->parsed()) return cmd_simulate(sim_scenario, sim_workers, sim_out);
        if (hg->parsed()) return cmd_hap_gen(hg_seed, hg_haps, hg_sites, hg_out);
        if (pl->parsed()) {
            if (pc.sumstats.empty() == pl_studies.empty())
                throw gk::data_error("pipeline: give exactly one of --sumstats or --studies");
            const fs::path dir = ensure_out_dir(pc.out);
            if (!pl_studies.empty()) {
                const fs::path meta_dir = dir / "meta";
                const int rc = cmd_meta(pl_studies, pc.ld_paths.size() == 1 ? pc.ld_paths[0] : "",
                                        pc.format, pl_meta_method, pc.seed, meta_dir.string());
                if (rc != 0) return rc;
                pc.sumstats = (meta_dir / "combined.tsv").string();
            }
            FilterConfig stage = pc;
            stage.out = (dir / "filter").string();
            return cmd_knockoff_filter(stage);
        }
        return 0;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return 2;
    } catch (const gk::empty_result_error& e) {
        log_msg(0, e.what());
        return 3;
    } catch (const gk::numeric_error& e) {
        log_msg(0, e.what());
        return 4;
    } catch (const gk::io_error& e) {
        log_msg(0, e.what());
        return 2;
    } catch (const gk::data_error& e) {
        log_msg(0, e.what());
        return 2;
    } catch (const std::exception& e) {
        log_msg(0, std::string("unexpected error: ") + e.what());
        return 4;
    }
}
