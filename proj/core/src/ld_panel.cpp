#include "gk/ld_panel.hpp"
#include "gk/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace gk {

std::string VariantId::str() const {
    std::ostringstream os;
    os << chrom << ':' << pos << ':' << ref << ':' << alt;
    return os.str();
}

VariantId VariantId::parse(const std::string& text) {
    VariantId v;
    std::istringstream is(text);
    std::string tok;
    std::vector<std::string> parts;
    while (std::getline(is, tok, ':')) parts.push_back(tok);
    if (parts.size() != 4) throw data_error("bad variant id '" + text + "' (want chrom:pos:ref:alt)");
    try {
        v.chrom = std::stoi(parts[0]);
        v.pos = std::stoll(parts[1]);
    } catch (const std::exception&) {
        throw data_error("bad variant id '" + text + "': non-numeric chrom/pos");
    }
    v.ref = parts[2];
    v.alt = parts[3];
    if (v.pos <= 0) throw data_error("bad variant id '" + text + "': pos must be positive");
    if (v.ref == v.alt) throw data_error("bad variant id '" + text + "': ref == alt");
    return v;
}

namespace {

constexpr char kBinaryMagic[4] = {'G', 'K', 'L', 'D'};
constexpr uint32_t kBinaryVersion = 1;

void validate_and_symmetrize(LdPanel& panel, const std::string& path) {
    const int p = panel.p();
    if (panel.sigma.rows() != p || panel.sigma.cols() != p)
        throw data_error(path + ": matrix dimension does not match variant count");
    for (int j = 0; j < p; ++j) {
        for (int k = 0; k < p; ++k) {
            const double v = panel.sigma(j, k);
            if (!std::isfinite(v)) throw data_error(path + ": non-finite correlation entry");
            if (std::fabs(v) > 1.0 + 1e-6)
                throw data_error(path + ": correlation entry " + std::to_string(v) + " outside [-1,1]");
        }
        if (std::fabs(panel.sigma(j, j) - 1.0) > 1e-6)
            throw data_error(path + ": diagonal entry differs from 1");
    }
    panel.sigma = 0.5 * (panel.sigma + panel.sigma.transpose()).eval();
    for (int j = 0; j < p; ++j) {
        panel.sigma(j, j) = 1.0;
        for (int k = 0; k < p; ++k)
            panel.sigma(j, k) = std::clamp(panel.sigma(j, k), -1.0, 1.0);
    }
    panel.sigma = 0.5 * (panel.sigma + panel.sigma.transpose()).eval();
}

LdPanel load_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open LD panel: " + path);
    std::string line;
    if (!std::getline(in, line)) throw data_error(path + ": empty file");
    if (line.rfind("p=", 0) != 0) throw data_error(path + ": first line must be p=<count>");
    int p = 0;
    try {
        p = std::stoi(line.substr(2));
    } catch (const std::exception&) {
        throw data_error(path + ": bad variant count '" + line + "'");
    }
    if (p <= 0) throw data_error(path + ": variant count must be positive");

    LdPanel panel;
    panel.variants.reserve(p);
    for (int j = 0; j < p; ++j) {
        if (!std::getline(in, line)) throw data_error(path + ": truncated variant id list");
        panel.variants.push_back(VariantId::parse(line));
    }
    panel.sigma.resize(p, p);
    for (int j = 0; j < p; ++j) {
        if (!std::getline(in, line)) throw data_error(path + ": truncated matrix");
        std::istringstream row(line);
        for (int k = 0; k < p; ++k) {
            if (!(row >> panel.sigma(j, k)))
                throw data_error(path + ": matrix row " + std::to_string(j + 1) + " is short");
        }
    }
    validate_and_symmetrize(panel, path);
    return panel;
}

LdPanel load_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open LD panel: " + path);
    char magic[4];
    uint32_t version = 0, p32 = 0, reserved = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&p32), 4);
    in.read(reinterpret_cast<char*>(&reserved), 4);
    if (!in || std::memcmp(magic, kBinaryMagic, 4) != 0)
        throw data_error(path + ": not a GKLD binary panel");
    if (version != kBinaryVersion)
        throw data_error(path + ": unsupported GKLD version " + std::to_string(version));
    const int p = static_cast<int>(p32);
    if (p <= 0) throw data_error(path + ": variant count must be positive");

    LdPanel panel;
    panel.sigma.resize(p, p);
    // Row-major little-endian doubles.
    std::vector<double> row(p);
    for (int j = 0; j < p; ++j) {
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(p) * 8);
        if (!in) throw data_error(path + ": truncated matrix payload");
        for (int k = 0; k < p; ++k) panel.sigma(j, k) = row[k];
    }

    std::ifstream vars(path + ".vars");
    if (vars) {
        std::string line;
        while (std::getline(vars, line)) {
            if (!line.empty()) panel.variants.push_back(VariantId::parse(line));
        }
        if (static_cast<int>(panel.variants.size()) != p)
            throw data_error(path + ".vars: id count does not match matrix dimension");
    } else {
        // No sidecar: synthesize stable placeholder ids.
        for (int j = 0; j < p; ++j)
            panel.variants.push_back(VariantId{0, j + 1, "A", "C"});
    }
    validate_and_symmetrize(panel, path);
    return panel;
}

}  // namespace

LdPanel load_ld_panel(const std::string& path, LdFormat format) {
    return format == LdFormat::dense_text ? load_text(path) : load_binary(path);
}

void save_ld_panel(const LdPanel& panel, const std::string& path, LdFormat format) {
    const int p = panel.p();
    if (format == LdFormat::dense_text) {
        std::ofstream out(path);
        if (!out) throw io_error("cannot write LD panel: " + path);
        out << "p=" << p << "\n";
        for (const auto& v : panel.variants) out << v.str() << "\n";
        out.precision(17);
        for (int j = 0; j < p; ++j) {
            for (int k = 0; k < p; ++k) out << (k ? " " : "") << panel.sigma(j, k);
            out << "\n";
        }
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write LD panel: " + path);
    out.write(kBinaryMagic, 4);
    const uint32_t version = kBinaryVersion, p32 = static_cast<uint32_t>(p), reserved = 0;
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&p32), 4);
    out.write(reinterpret_cast<const char*>(&reserved), 4);
    std::vector<double> row(p);
    for (int j = 0; j < p; ++j) {
        for (int k = 0; k < p; ++k) row[k] = panel.sigma(j, k);
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(p) * 8);
    }
    std::ofstream vars(path + ".vars");
    if (!vars) throw io_error("cannot write LD panel sidecar: " + path + ".vars");
    for (const auto& v : panel.variants) vars << v.str() << "\n";
}

LdPanel regularize(const LdPanel& panel, double eps) {
    if (!(eps >= 0.0 && eps < 1.0)) throw data_error("regularize: eps must be in [0,1)");
    LdPanel out = panel;
    if (eps == 0.0) return out;
    out.sigma *= (1.0 - eps);
    out.sigma.diagonal().array() += eps;
    return out;
}

namespace {

// Union-find; single linkage with a cut at |corr| >= cutoff is exactly the
// connected components of the thresholded similarity graph.
struct DisjointSet {
    std::vector<int> parent;
    explicit DisjointSet(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

}  // namespace

ClusterAssignment cluster_variants(const LdPanel& panel, double cutoff) {
    if (!(cutoff > 0.0 && cutoff <= 1.0)) throw data_error("cluster_variants: cutoff must be in (0,1]");
    const int p = panel.p();
    DisjointSet ds(p);
    for (int j = 0; j < p; ++j)
        for (int k = j + 1; k < p; ++k)
            if (std::fabs(panel.sigma(j, k)) >= cutoff) ds.unite(j, k);

    ClusterAssignment out;
    out.cluster_of.assign(p, -1);
    std::vector<int> root_to_cluster(p, -1);
    std::vector<std::vector<int>> members;
    for (int j = 0; j < p; ++j) {
        const int r = ds.find(j);
        if (root_to_cluster[r] < 0) {
            root_to_cluster[r] = static_cast<int>(members.size());
            members.emplace_back();
        }
        out.cluster_of[j] = root_to_cluster[r];
        members[root_to_cluster[r]].push_back(j);
    }

    out.representative.resize(members.size());
    for (size_t c = 0; c < members.size(); ++c) {
        int best = -1;
        double best_sum = 0.0;
        for (int j : members[c]) {
            double sum = 0.0;
            for (int k : members[c]) sum += std::fabs(panel.sigma(j, k));
            if (best < 0 || sum > best_sum + 1e-12) {
                best = j;
                best_sum = sum;
            } else if (sum >= best_sum - 1e-12 && panel.variants[j] < panel.variants[best]) {
                // tie on the within-correlation sum: smaller id wins
                best = j;
                best_sum = std::max(best_sum, sum);
            }
        }
        out.representative[c] = best;
    }
    return out;
}

std::vector<int> expand_selection(const ClusterAssignment& clusters, const LdPanel& panel,
                                  const std::vector<int>& selected_reps,
                                  const Eigen::VectorXd& z, double cutoff) {
    if (z.size() != panel.p())
        throw data_error("expand_selection: z length does not match panel");
    std::set<int> reps(clusters.representative.begin(), clusters.representative.end());
    std::set<int> out;
    for (int r : selected_reps) {
        if (!reps.count(r)) throw data_error("expand_selection: index " + std::to_string(r) +
                                             " is not a representative");
        out.insert(r);
        const int c = clusters.cluster_of[r];
        for (int j = 0; j < panel.p(); ++j) {
            if (j == r || clusters.cluster_of[j] != c) continue;
            if (std::fabs(panel.sigma(j, r)) >= cutoff && std::fabs(z[j]) >= std::fabs(z[r]))
                out.insert(j);
        }
    }
    return std::vector<int>(out.begin(), out.end());
}

}
