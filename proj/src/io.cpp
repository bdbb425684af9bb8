#include "polydec/io.hpp"

#include <bit>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "polydec/input_tree.hpp"
#include "polydec/util.hpp"

namespace polydec {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "policy binaries are little-endian; big-endian hosts need byte swaps");

KV load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    KV kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected key=value, got '" + line + "'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": empty key or value");
        kv[key] = value;
    }
    return kv;
}

std::string config_digest(const KV& items) {
    std::ostringstream os;
    for (const auto& [k, v] : items) os << k << '=' << v << '\n';
    return fnv1a64_hex(os.str());
}

std::string resolve_out(const std::string& path) {
    const char* dir = std::getenv("POLYDEC_OUT_DIR");
    if (!dir || !*dir || path.empty() || path.front() == '/') return path;
    std::string d(dir);
    if (d.back() != '/') d += '/';
    return d + path;
}

namespace {

constexpr char kMagic[4] = {'P', 'D', 'P', 'B'};
constexpr uint32_t kPolicyVersion = 1;

void write_raw(std::ofstream& out, const void* p, size_t bytes) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(bytes));
}

void read_raw(std::ifstream& in, void* p, size_t bytes) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(bytes));
    if (!in) throw std::runtime_error("truncated policy file");
}

}  // namespace

void save_policy(const std::string& path, const PolicyArtifact& art) {
    json nodes = json::array();
    for (const TabularPolicy& pol : art.assembly.policies) {
        json axes = json::array();
        for (const AxisSpec& ax : pol.lattice.axes())
            axes.push_back({ax.lo, ax.hi, ax.points});
        json entry = {{"node", pol.spec.node_id},
                      {"inputs", pol.spec.inputs},
                      {"states", pol.spec.states},
                      {"axes", axes},
                      {"cells", pol.lattice.cells()}};
        for (const SolveStats& st : art.assembly.stats)
            if (st.node == pol.spec.node_id)
                entry["stats"] = {{"rounds", st.rounds},
                                  {"converged", st.converged},
                                  {"policy_change", st.policy_change},
                                  {"seconds", st.seconds}};
        nodes.push_back(entry);
    }
    json header = {{"format", "polydec-policy"},
                   {"tool", kToolVersion},
                   {"model", art.model},
                   {"overrides", art.overrides},
                   {"tree", art.tree},
                   {"n", art.n},
                   {"m", art.m},
                   {"seed", art.seed},
                   {"config_digest", art.digest},
                   {"total_parameters", art.assembly.total_parameters},
                   {"nodes", nodes}};
    const std::string head = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write policy file: " + path);
    write_raw(out, kMagic, 4);
    write_raw(out, &kPolicyVersion, 4);
    const uint64_t len = head.size();
    write_raw(out, &len, 8);
    write_raw(out, head.data(), head.size());
    for (const TabularPolicy& pol : art.assembly.policies) {
        write_raw(out, pol.control.data(), pol.control.size() * sizeof(double));
        write_raw(out, pol.value.data(), pol.value.size() * sizeof(double));
    }
    if (!out) throw std::runtime_error("short write to policy file: " + path);
}

PolicyArtifact load_policy(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open policy file: " + path);
    char magic[4];
    read_raw(in, magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("not a policy file (bad magic): " + path);
    uint32_t version = 0;
    read_raw(in, &version, 4);
    if (version != kPolicyVersion)
        throw std::runtime_error("unsupported policy version " + std::to_string(version));
    uint64_t len = 0;
    read_raw(in, &len, 8);
    if (len > (1ull << 30)) throw std::runtime_error("implausible header length");
    std::string head(len, '\0');
    read_raw(in, head.data(), len);
    json header = json::parse(head);

    PolicyArtifact art;
    art.model = header.at("model").get<std::string>();
    art.overrides = header.at("overrides").get<KV>();
    art.tree = header.at("tree").get<std::string>();
    art.n = header.at("n").get<int>();
    art.m = header.at("m").get<int>();
    art.seed = header.at("seed").get<uint64_t>();
    art.digest = header.at("config_digest").get<std::string>();
    art.assembly.total_parameters = header.at("total_parameters").get<int64_t>();
    art.assembly.tree = parse_tree(art.tree, art.n, art.m);

    for (const json& entry : header.at("nodes")) {
        TabularPolicy pol;
        pol.spec = subsystem_of(art.assembly.tree, entry.at("node").get<int>());
        if (pol.spec.inputs != entry.at("inputs").get<std::vector<int>>() ||
            pol.spec.states != entry.at("states").get<std::vector<int>>())
            throw std::runtime_error("policy header does not match its tree");
        std::vector<AxisSpec> axes;
        for (const json& ax : entry.at("axes"))
            axes.push_back({ax.at(0).get<double>(), ax.at(1).get<double>(), ax.at(2).get<int>()});
        pol.lattice = Lattice(axes);
        const int64_t cells = pol.lattice.cells();
        if (cells != entry.at("cells").get<int64_t>())
            throw std::runtime_error("policy header cell count mismatch");
        pol.control.resize(static_cast<size_t>(cells) * pol.spec.inputs.size());
        pol.value.resize(static_cast<size_t>(cells));
        read_raw(in, pol.control.data(), pol.control.size() * sizeof(double));
        read_raw(in, pol.value.data(), pol.value.size() * sizeof(double));
        if (entry.contains("stats")) {
            SolveStats st;
            st.node = pol.spec.node_id;
            st.rounds = entry["stats"].at("rounds").get<int>();
            st.converged = entry["stats"].at("converged").get<bool>();
            st.policy_change = entry["stats"].at("policy_change").get<double>();
            st.seconds = entry["stats"].at("seconds").get<double>();
            st.parameters = static_cast<int64_t>(pol.control.size());
            art.assembly.stats.push_back(st);
        }
        art.assembly.policies.push_back(std::move(pol));
    }
    return art;
}

namespace {

void write_meta(std::ofstream& out, const KV& meta) {
    out << "# polydec " << kToolVersion << "\n";
    for (const auto& [k, v] : meta) out << "# " << k << "=" << v << "\n";
}

}  // namespace

void write_trajectory_csv(const std::string& path, const SimResult& result, int n, int m,
                          const KV& meta) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write trajectory file: " + path);
    write_meta(out, meta);
    out << "t";
    for (int i = 1; i <= n; ++i) out << ",x" << i;
    for (int i = 1; i <= m; ++i) out << ",u" << i;
    out << "\n";
    char buf[32];
    for (size_t k = 0; k < result.times.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", result.times[k]);
        out << buf;
        for (int i = 0; i < n; ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", result.states[k](i));
            out << ',' << buf;
        }
        for (int i = 0; i < m; ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", result.inputs[k](i));
            out << ',' << buf;
        }
        out << "\n";
    }
    if (!out) throw std::runtime_error("short write to trajectory file: " + path);
}

void write_basin_csv(const std::string& path, const BasinField& field, const KV& meta) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write basin file: " + path);
    write_meta(out, meta);
    for (size_t d = 0; d < field.dims.size(); ++d)
        out << (d ? "," : "") << "x" << field.dims[d] + 1;
    out << ",converged,final_deviation\n";
    Lattice lattice(field.axes);
    Eigen::VectorXd coords(static_cast<long>(field.dims.size()));
    char buf[32];
    for (int64_t cell = 0; cell < lattice.cells(); ++cell) {
        lattice.cell_coords(cell, coords);
        for (long d = 0; d < coords.size(); ++d) {
            std::snprintf(buf, sizeof buf, "%.17g", coords(d));
            out << (d ? "," : "") << buf;
        }
        out << ',' << int(field.converged[static_cast<size_t>(cell)]);
        std::snprintf(buf, sizeof buf, "%.17g", field.final_dev[static_cast<size_t>(cell)]);
        out << ',' << buf << "\n";
    }
    if (!out) throw std::runtime_error("short write to basin file: " + path);
}

}  // namespace polydec
