#include "gk/io.hpp"
#include "gk/assoc.hpp"
#include "gk/errors.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace gk {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::string tok;
    std::istringstream is(line);
    while (std::getline(is, tok, '\t')) {
        if (!tok.empty() && tok.back() == '\r') tok.pop_back();
        out.push_back(tok);
    }
    return out;
}

int find_col(const std::vector<std::string>& header, const std::string& name) {
    for (size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    return -1;
}

bool is_missing(const std::string& s) { return s.empty() || s == "NA" || s == "."; }

}  // namespace

ZVector read_sumstats(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open summary statistics: " + path);
    std::string line;
    if (!std::getline(in, line)) throw data_error(path + ": empty summary statistics file");
    const auto header = split_tabs(line);
    const int ic = find_col(header, "chrom"), ip = find_col(header, "pos"),
              ir = find_col(header, "ref"), ia = find_col(header, "alt");
    const int iz = find_col(header, "z"), ipv = find_col(header, "p"),
              is = find_col(header, "beta_sign"), in_ = find_col(header, "n");
    if (ic < 0 || ip < 0 || ir < 0 || ia < 0)
        throw data_error(path + ": header must contain chrom, pos, ref, alt");
    if (iz < 0 && (ipv < 0 || is < 0))
        throw data_error(path + ": need a z column or the (p, beta_sign) pair");

    std::vector<VariantId> ids;
    std::vector<double> zs, ns;
    int clamped_count = 0;
    bool any_from_p = false;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        const auto f = split_tabs(line);
        auto field = [&](int idx) -> std::string {
            return idx >= 0 && idx < static_cast<int>(f.size()) ? f[idx] : std::string();
        };
        VariantId v;
        try {
            v = VariantId::parse(field(ic) + ":" + field(ip) + ":" + field(ir) + ":" + field(ia));
        } catch (const data_error& e) {
            throw data_error(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        double z;
        if (iz >= 0 && !is_missing(field(iz))) {
            z = std::stod(field(iz));
        } else if (ipv >= 0 && is >= 0 && !is_missing(field(ipv)) && !is_missing(field(is))) {
            bool clamped = false;
            const double p = std::stod(field(ipv));
            const int sign = std::stoi(field(is));
            try {
                z = p_to_z(p, sign, &clamped);
            } catch (const data_error& e) {
                throw data_error(path + ":" + std::to_string(lineno) + ": " + e.what());
            }
            if (clamped) ++clamped_count;
            any_from_p = true;
        } else {
            throw data_error(path + ":" + std::to_string(lineno) +
                             ": row has neither z nor (p, beta_sign)");
        }
        if (!std::isfinite(z))
            throw data_error(path + ":" + std::to_string(lineno) + ": non-finite z");
        ids.push_back(v);
        zs.push_back(z);
        ns.push_back(in_ >= 0 && !is_missing(field(in_)) ? std::stod(field(in_)) : 0.0);
    }
    if (ids.empty()) throw data_error(path + ": no variant rows");

    ZVector out;
    out.variants = std::move(ids);
    out.z = Eigen::Map<Eigen::VectorXd>(zs.data(), static_cast<int>(zs.size()));
    out.n = Eigen::Map<Eigen::VectorXd>(ns.data(), static_cast<int>(ns.size()));
    out.source = any_from_p ? ZSource::from_p : ZSource::direct;
    out.clamped = clamped_count;
    return out;
}

void write_sumstats(const ZVector& zv, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write summary statistics: " + path);
    out << "chrom\tpos\tref\talt\tz\tn\n";
    out.precision(17);
    for (int j = 0; j < zv.p(); ++j) {
        const auto& v = zv.variants[j];
        out << v.chrom << '\t' << v.pos << '\t' << v.ref << '\t' << v.alt << '\t' << zv.z[j]
            << '\t' << zv.n[j] << "\n";
    }
}

CohortFile read_cohort(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open cohort file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw data_error(path + ": empty cohort file");
    const auto header = split_tabs(line);
    if (header.empty() || header[0] != "y")
        throw data_error(path + ": first column must be y");

    CohortFile cf;
    std::vector<int> cov_cols, var_cols;
    for (size_t i = 1; i < header.size(); ++i) {
        if (header[i].find(':') != std::string::npos) {
            cf.variants.push_back(VariantId::parse(header[i]));
            var_cols.push_back(static_cast<int>(i));
        } else if (!header[i].empty() && header[i][0] == 'x') {
            cov_cols.push_back(static_cast<int>(i));
        } else {
            throw data_error(path + ": unrecognized cohort column '" + header[i] + "'");
        }
    }

    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        const auto f = split_tabs(line);
        if (f.size() != header.size())
            throw data_error(path + ": row has " + std::to_string(f.size()) + " fields, expected " +
                             std::to_string(header.size()));
        std::vector<double> vals(f.size());
        for (size_t i = 0; i < f.size(); ++i) vals[i] = std::stod(f[i]);
        rows.push_back(std::move(vals));
    }
    const int n = static_cast<int>(rows.size());
    if (n == 0) throw data_error(path + ": no data rows");

    cf.y.resize(n);
    cf.x.resize(n, static_cast<int>(cov_cols.size()) + 1);
    cf.geno.resize(n, static_cast<int>(var_cols.size()));
    for (int i = 0; i < n; ++i) {
        cf.y[i] = rows[i][0];
        cf.x(i, 0) = 1.0;
        for (size_t c = 0; c < cov_cols.size(); ++c) cf.x(i, static_cast<int>(c) + 1) = rows[i][cov_cols[c]];
        for (size_t c = 0; c < var_cols.size(); ++c) cf.geno(i, static_cast<int>(c)) = rows[i][var_cols[c]];
    }
    return cf;
}

Eigen::MatrixXd read_kinship_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open kinship file: " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("n=", 0) != 0)
        throw data_error(path + ": first line must be n=<count>");
    const int n = std::stoi(line.substr(2));
    if (n <= 0) throw data_error(path + ": bad sample count");
    Eigen::MatrixXd k(n, n);
    for (int i = 0; i < n; ++i) {
        if (!std::getline(in, line)) throw data_error(path + ": truncated kinship matrix");
        std::istringstream row(line);
        for (int j = 0; j < n; ++j)
            if (!(row >> k(i, j))) throw data_error(path + ": kinship row " + std::to_string(i + 1) + " is short");
    }
    return 0.5 * (k + k.transpose()).eval();
}

std::vector<StudyManifestEntry> read_study_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open study manifest: " + path);
    std::string line;
    if (!std::getline(in, line)) throw data_error(path + ": empty study manifest");
    const auto header = split_tabs(line);
    const int in_name = find_col(header, "name"), in_n = find_col(header, "n"),
              in_path = find_col(header, "path");
    if (in_name < 0 || in_n < 0 || in_path < 0)
        throw data_error(path + ": manifest header must contain name, n, path");
    std::vector<StudyManifestEntry> out;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        const auto f = split_tabs(line);
        StudyManifestEntry e;
        e.name = f[in_name];
        e.n = std::stod(f[in_n]);
        e.path = f[in_path];
        if (!(e.n > 0)) throw data_error(path + ": study '" + e.name + "' needs a positive n");
        out.push_back(e);
    }
    if (out.empty()) throw data_error(path + ": no studies listed");
    return out;
}

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open file for digest: " + path);
    uint64_t h = 0xcbf29ce484222325ULL;
    char buf[65536];
    while (in) {
        in.read(buf, sizeof(buf));
        const std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    std::ostringstream os;
    os << "fnv1a64:" << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

}
