// End-to-end tests driving the gk binary. The binary path comes from the
// GK_BIN environment variable (set by ctest).
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

std::string gk_bin() {
    const char* env = std::getenv("GK_BIN");
    REQUIRE_MESSAGE(env != nullptr, "GK_BIN must point at the gk binary");
    return env;
}

struct RunResult {
    int exit_code = -1;
    std::string stderr_text;
};

RunResult run_gk(const std::string& args) {
    static int counter = 0;
    const std::string errfile = "gk_cli_stderr_" + std::to_string(::getpid()) + "_" +
                                std::to_string(counter++);
    const std::string cmd = gk_bin() + " " + args + " 2>" + errfile;
    const int rc = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    std::ifstream f(errfile);
    std::stringstream ss;
    ss << f.rdbuf();
    r.stderr_text = ss.str();
    std::remove(errfile.c_str());
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE_MESSAGE(f.good(), "missing file: " << p.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& stem) {
        path = fs::path("gk_cli_" + stem + "_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

void write_identity_panel(const fs::path& p, int n, int pos_base = 100) {
    std::ofstream f(p);
    f << "p=" << n << "\n";
    for (int j = 0; j < n; ++j) f << "1:" << pos_base + j << ":A:C\n";
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) f << (b ? " " : "") << (a == b ? 1 : 0);
        f << "\n";
    }
}

void write_sumstats_z(const fs::path& p, const std::vector<std::pair<std::string, double>>& rows) {
    std::ofstream f(p);
    f << "chrom\tpos\tref\talt\tz\tn\n";
    for (const auto& [id, z] : rows) {
        std::string chrom, pos, ref, alt;
        std::istringstream is(id);
        std::getline(is, chrom, ':');
        std::getline(is, pos, ':');
        std::getline(is, ref, ':');
        std::getline(is, alt, ':');
        f << chrom << '\t' << pos << '\t' << ref << '\t' << alt << '\t' << z << "\t1000\n";
    }
}

int count_selected(const fs::path& selection_tsv) {
    std::ifstream f(selection_tsv);
    std::string line;
    std::getline(f, line);  // header
    int n = 0;
    while (std::getline(f, line)) {
        std::istringstream is(line);
        std::vector<std::string> fields;
        std::string tok;
        while (std::getline(is, tok, '\t')) fields.push_back(tok);
        if (fields.size() >= 8 && fields[7] == "1") ++n;
    }
    return n;
}

}  // namespace

TEST_CASE("solve-d writes the expected diagonals") {
    TempDir td("solved");
    write_identity_panel(td.path / "eye.txt", 3);
    auto r = run_gk("solve-d --ld " + (td.path / "eye.txt").string() + " --out " +
                    (td.path / "out").string());
    CHECK(r.exit_code == 0);
    const std::string diag = slurp(td.path / "out" / "diag.tsv");
    CHECK(diag.find("1:100:A:C\t1\n") != std::string::npos);
    CHECK(fs::exists(td.path / "out" / "manifest.json"));

    std::ofstream f(td.path / "rho.txt");
    f << "p=2\n1:100:A:C\n1:200:A:G\n1 0.9\n0.9 1\n";
    f.close();
    r = run_gk("solve-d --ld " + (td.path / "rho.txt").string() + " --eps 0 --out " +
               (td.path / "out2").string());
    CHECK(r.exit_code == 0);
    const std::string diag2 = slurp(td.path / "out2" / "diag.tsv");
    CHECK(diag2.find("\t0.19999") != std::string::npos);
}

TEST_CASE("missing inputs exit with code 2 and name the path") {
    const auto r = run_gk("solve-d --ld does_not_exist.txt --out gk_cli_nowhere");
    CHECK(r.exit_code == 2);
    CHECK(r.stderr_text.find("does_not_exist.txt") != std::string::npos);
}

TEST_CASE("knockoff filter: null z-scores select nothing") {
    TempDir td("nullz");
    write_identity_panel(td.path / "ld.txt", 6);
    std::vector<std::pair<std::string, double>> rows;
    for (int j = 0; j < 6; ++j) rows.push_back({"1:" + std::to_string(100 + j) + ":A:C", 0.0});
    write_sumstats_z(td.path / "ss.tsv", rows);
    const auto r = run_gk("knockoff-filter --ld " + (td.path / "ld.txt").string() +
                          " --sumstats " + (td.path / "ss.tsv").string() +
                          " --m 5 --fdr 0.2 --seed 7 --out " + (td.path / "out").string());
    CHECK(r.exit_code == 0);
    CHECK(count_selected(td.path / "out" / "selection.tsv") == 0);
    CHECK(fs::exists(td.path / "out" / "manhattan.tsv"));
}

TEST_CASE("knockoff filter: exclusion list removes variants before clustering") {
    TempDir td("excl");
    write_identity_panel(td.path / "ld.txt", 4);
    std::vector<std::pair<std::string, double>> rows;
    for (int j = 0; j < 4; ++j) rows.push_back({"1:" + std::to_string(100 + j) + ":A:C", 9.0});
    write_sumstats_z(td.path / "ss.tsv", rows);
    {
        std::ofstream f(td.path / "drop.txt");
        f << "1:101:A:C\n";
    }
    const auto r = run_gk("knockoff-filter --ld " + (td.path / "ld.txt").string() +
                          " --sumstats " + (td.path / "ss.tsv").string() + " --exclude " +
                          (td.path / "drop.txt").string() + " --m 5 --fdr 0.2 --seed 7 --out " +
                          (td.path / "out").string());
    CHECK(r.exit_code == 0);
    const std::string table = slurp(td.path / "out" / "selection.tsv");
    CHECK(table.find("1:100:A:C") != std::string::npos);
    CHECK(table.find("1:101:A:C") == std::string::npos);
}

TEST_CASE("knockoff filter: empty intersection exits 3") {
    TempDir td("empty");
    write_identity_panel(td.path / "ld.txt", 3);
    write_sumstats_z(td.path / "ss.tsv", {{"9:999:T:G", 1.0}});
    const auto r = run_gk("knockoff-filter --ld " + (td.path / "ld.txt").string() +
                          " --sumstats " + (td.path / "ss.tsv").string() + " --out " +
                          (td.path / "out").string());
    CHECK(r.exit_code == 3);
}

TEST_CASE("knockoff filter: a strong signal is selected in nearly every seed") {
    TempDir td("signal");
    write_identity_panel(td.path / "ld.txt", 12);
    std::vector<std::pair<std::string, double>> rows;
    for (int j = 0; j < 12; ++j)
        rows.push_back({"1:" + std::to_string(100 + j) + ":A:C", j == 4 ? 10.0 : 0.3});
    write_sumstats_z(td.path / "ss.tsv", rows);
    int hits = 0;
    for (int seed = 1; seed <= 100; ++seed) {
        const std::string out = (td.path / ("out" + std::to_string(seed))).string();
        const auto r = run_gk("knockoff-filter --ld " + (td.path / "ld.txt").string() +
                              " --sumstats " + (td.path / "ss.tsv").string() +
                              " --m 5 --fdr 0.2 --seed " + std::to_string(seed) + " --out " + out);
        REQUIRE(r.exit_code == 0);
        std::ifstream f(fs::path(out) / "selection.tsv");
        std::string line;
        while (std::getline(f, line))
            if (line.rfind("1:104:A:C\t", 0) == 0 && line.find("\t1\t") != std::string::npos) {
                // confirm via the selected column specifically
                std::istringstream is(line);
                std::vector<std::string> fields;
                std::string tok;
                while (std::getline(is, tok, '\t')) fields.push_back(tok);
                if (fields[7] == "1") ++hits;
                break;
            }
        fs::remove_all(out);
    }
    CHECK(hits >= 95);
}

TEST_CASE("same seed gives byte-identical outputs across worker counts") {
    TempDir td("determ");
    // three LD blocks with correlated variants
    for (int b = 0; b < 3; ++b) {
        std::ofstream f(td.path / ("ld" + std::to_string(b) + ".txt"));
        f << "p=3\n";
        for (int j = 0; j < 3; ++j) f << (b + 1) << ":" << 100 + j << ":A:C\n";
        f << "1 0.8 0.1\n0.8 1 0.1\n0.1 0.1 1\n";
    }
    std::vector<std::pair<std::string, double>> rows;
    for (int b = 0; b < 3; ++b)
        for (int j = 0; j < 3; ++j)
            rows.push_back({std::to_string(b + 1) + ":" + std::to_string(100 + j) + ":A:C",
                            b == 1 && j == 0 ? 6.5 : 0.5});
    write_sumstats_z(td.path / "ss.tsv", rows);

    const std::string lds = (td.path / "ld0.txt").string() + " --ld " +
                            (td.path / "ld1.txt").string() + " --ld " +
                            (td.path / "ld2.txt").string();
    auto run_with = [&](const std::string& name, int workers) {
        const std::string out = (td.path / name).string();
        const auto r = run_gk("knockoff-filter --ld " + lds + " --sumstats " +
                              (td.path / "ss.tsv").string() + " --m 5 --fdr 0.2 --seed 11 " +
                              "--workers " + std::to_string(workers) + " --out " + out);
        REQUIRE(r.exit_code == 0);
        return slurp(fs::path(out) / "selection.tsv") + slurp(fs::path(out) / "manhattan.tsv");
    };
    const std::string a = run_with("a", 1);
    const std::string b = run_with("b", 4);
    const std::string c = run_with("c", 1);
    CHECK(a == b);
    CHECK(a == c);
}

TEST_CASE("meta with a single study passes z through") {
    TempDir td("meta1");
    write_sumstats_z(td.path / "s1.tsv", {{"1:100:A:C", 1.25}, {"1:101:A:C", -0.75}});
    {
        std::ofstream f(td.path / "studies.tsv");
        f << "name\tn\tpath\n";
        f << "one\t500\t" << (td.path / "s1.tsv").string() << "\n";
    }
    const auto r = run_gk("meta --studies " + (td.path / "studies.tsv").string() + " --out " +
                          (td.path / "out").string());
    CHECK(r.exit_code == 0);
    const std::string combined = slurp(td.path / "out" / "combined.tsv");
    CHECK(combined.find("1.25") != std::string::npos);
    CHECK(combined.find("-0.75") != std::string::npos);
    CHECK(fs::exists(td.path / "out" / "meta_info.json"));
}

TEST_CASE("pipeline equals its stages run individually") {
    TempDir td("pipe");
    write_identity_panel(td.path / "ld.txt", 5);
    std::vector<std::pair<std::string, double>> rows1, rows2;
    for (int j = 0; j < 5; ++j) {
        const std::string id = "1:" + std::to_string(100 + j) + ":A:C";
        rows1.push_back({id, j == 2 ? 4.0 : 0.2});
        rows2.push_back({id, j == 2 ? 3.5 : -0.1});
    }
    write_sumstats_z(td.path / "s1.tsv", rows1);
    write_sumstats_z(td.path / "s2.tsv", rows2);
    {
        std::ofstream f(td.path / "studies.tsv");
        f << "name\tn\tpath\n";
        f << "a\t400\t" << (td.path / "s1.tsv").string() << "\n";
        f << "b\t600\t" << (td.path / "s2.tsv").string() << "\n";
    }
    // stage by stage (fisher combination avoids the 100-null-variant floor)
    auto r = run_gk("meta --studies " + (td.path / "studies.tsv").string() +
                    " --method fisher --seed 5 --out " + (td.path / "meta_out").string());
    REQUIRE(r.exit_code == 0);
    r = run_gk("knockoff-filter --ld " + (td.path / "ld.txt").string() + " --sumstats " +
               (td.path / "meta_out" / "combined.tsv").string() +
               " --m 5 --fdr 0.2 --seed 5 --out " + (td.path / "manual").string());
    REQUIRE(r.exit_code == 0);
    // one-shot pipeline
    r = run_gk("pipeline --ld " + (td.path / "ld.txt").string() + " --studies " +
               (td.path / "studies.tsv").string() +
               " --meta-method fisher --m 5 --fdr 0.2 --seed 5 --out " +
               (td.path / "piped").string());
    REQUIRE(r.exit_code == 0);
    CHECK(slurp(td.path / "manual" / "selection.tsv") ==
          slurp(td.path / "piped" / "filter" / "selection.tsv"));
    CHECK(slurp(td.path / "manual" / "manhattan.tsv") ==
          slurp(td.path / "piped" / "filter" / "manhattan.tsv"));
}

TEST_CASE("assoc runs mixed-model score tests against a kinship file") {
    TempDir td("assoc");
    {
        std::ofstream f(td.path / "cohort.tsv");
        f << "y\tx1\t1:100:A:C\t1:200:A:G\n";
        unsigned state = 12345;
        auto next = [&]() { return (state = state * 1103515245 + 12345) >> 16 & 0x7fff; };
        for (int i = 0; i < 40; ++i)
            f << (next() % 1000) / 250.0 - 2.0 << '\t' << (next() % 1000) / 500.0 - 1.0 << '\t'
              << next() % 3 << '\t' << next() % 3 << "\n";
    }
    {
        // ten families of four, exchangeable 0.5 within
        std::ofstream f(td.path / "kin.txt");
        f << "n=40\n";
        for (int i = 0; i < 40; ++i) {
            for (int j = 0; j < 40; ++j)
                f << (j ? " " : "") << (i == j ? 1.0 : (i / 4 == j / 4 ? 0.5 : 0.0));
            f << "\n";
        }
    }
    const auto r = run_gk("assoc --cohort " + (td.path / "cohort.tsv").string() +
                          " --family gaussian --test score --kinship " +
                          (td.path / "kin.txt").string() + " --out " + (td.path / "out").string());
    CHECK(r.exit_code == 0);
    const std::string ss = slurp(td.path / "out" / "sumstats.tsv");
    CHECK(ss.find("1:100:A:C") == std::string::npos);  // columns, not ids, in the id fields
    CHECK(ss.find("chrom\tpos\tref\talt\tz\tn") == 0);
    CHECK(ss.find("\t100\t") != std::string::npos);
}

TEST_CASE("simulate: malformed scenario key exits 2 and is named") {
    TempDir td("scen");
    {
        std::ofstream f(td.path / "bad.cfg");
        f << "replicaties = 5\n";
    }
    const auto r = run_gk("simulate --scenario " + (td.path / "bad.cfg").string() + " --out " +
                          (td.path / "out").string());
    CHECK(r.exit_code == 2);
    CHECK(r.stderr_text.find("replicaties") != std::string::npos);
}

TEST_CASE("simulate: tiny experiment produces one row per method and target") {
    TempDir td("sim");
    {
        std::ofstream f(td.path / "tiny.cfg");
        f << "phenotype = quantitative\n"
             "relatedness = unrelated\n"
             "n = 200\n"
             "n_sites = 50\n"
             "replicates = 2\n"
             "seed = 3\n"
             "m_copies = 3\n"
             "fdr_targets = 0.1, 0.2\n"
             "methods = ghost-score, ghost-wald, ghost-lrt, ghost-mixed\n";
    }
    const auto r = run_gk("simulate --scenario " + (td.path / "tiny.cfg").string() + " --out " +
                          (td.path / "out").string());
    CHECK(r.exit_code == 0);
    std::ifstream f(td.path / "out" / "results.tsv");
    std::string line;
    std::getline(f, line);
    int rows = 0;
    while (std::getline(f, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 8);  // 4 methods x 2 targets
    CHECK(fs::exists(td.path / "out" / "replicates.tsv"));
    CHECK(fs::exists(td.path / "out" / "manifest.json"));
}
