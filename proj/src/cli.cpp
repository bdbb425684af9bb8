#include "polydec/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "polydec/dp.hpp"
#include "polydec/enumeration.hpp"
#include "polydec/input_tree.hpp"
#include "polydec/io.hpp"
#include "polydec/metrics.hpp"
#include "polydec/search.hpp"
#include "polydec/systems.hpp"
#include "polydec/util.hpp"

namespace polydec {

using nlohmann::json;

namespace {

const std::set<std::string> kModelKeys = {"lambda",  "dt",  "points", "actions",
                                          "rounds",  "tol", "sweeps", "decoupled_zero",
                                          "eps",     "leg_break"};
const std::set<std::string> kSearchKeys = {"population",       "elite_fraction",
                                           "tournament",       "mutation_retries",
                                           "mcts_max_nodes",   "mcts_max_children"};

// typed schema validation for --config files: known keys, numeric values
// (leg_break is the one enumerated string switch)
void check_config(const KV& kv, bool allow_search) {
    for (const auto& [k, v] : kv) {
        const bool model_key = kModelKeys.count(k) > 0;
        const bool search_key = allow_search && kSearchKeys.count(k) > 0;
        if (!model_key && !search_key)
            throw CLI::ValidationError("--config", "unknown config key '" + k + "'");
        if (k == "leg_break") {
            if (v != "flag" && v != "continue")
                throw CLI::ValidationError("--config", "leg_break must be flag or continue");
            continue;
        }
        char* end = nullptr;
        std::strtod(v.c_str(), &end);
        if (end == v.c_str() || *end != '\0')
            throw CLI::ValidationError("--config", "config key '" + k +
                                                       "' needs a numeric value, got '" + v + "'");
    }
}

KV subset(const KV& kv, const std::set<std::string>& keys) {
    KV out;
    for (const auto& [k, v] : kv)
        if (keys.count(k)) out[k] = v;
    return out;
}

double num(const KV& kv, const std::string& key, double fallback) {
    auto it = kv.find(key);
    return it == kv.end() ? fallback : std::strtod(it->second.c_str(), nullptr);
}

json finite_or_string(double v) {
    if (std::isfinite(v)) return v;
    return v > 0 ? "inf" : "-inf";
}

json metrics_json(const DecompositionMetrics& dm) {
    return {{"err_lqr", finite_or_string(dm.err)},
            {"F_err", dm.F_err},
            {"F_comp", dm.F_comp},
            {"F", dm.F}};
}

std::vector<double> parse_vector(const std::string& text) {
    std::vector<double> out;
    std::string item;
    std::stringstream ss(text);
    while (std::getline(ss, item, ',')) {
        char* end = nullptr;
        double v = std::strtod(item.c_str(), &end);
        if (end == item.c_str() || *end != '\0')
            throw std::runtime_error("expected comma-separated numbers, got '" + text + "'");
        out.push_back(v);
    }
    return out;
}

std::vector<int> parse_dims(const std::string& text, int n) {
    std::vector<int> dims;
    for (double v : parse_vector(text)) {
        int d = static_cast<int>(v);
        if (d != v || d < 1 || d > n)
            throw std::runtime_error("state index out of range: expected 1.." +
                                     std::to_string(n));
        dims.push_back(d - 1);
    }
    return dims;
}

// deterministic wall-clock substitution: nominal per-method step rates
int64_t steps_for_budget(const std::string& method, double seconds) {
    double rate = 20.0;  // ga and pareto: generations per second
    if (method == "mcts") rate = 2000.0;
    if (method == "random") rate = 20000.0;
    return std::max<int64_t>(1, static_cast<int64_t>(std::llround(seconds * rate)));
}

struct CommonOpts {
    std::string model;
    std::string config_path;
    uint64_t seed = 1;
    int workers = 1;
    double budget_seconds = 10.0;
    int64_t budget_steps = -1;
    std::string out_path;
};

void add_model_flags(CLI::App* sub, CommonOpts& o) {
    sub->add_option("--model", o.model, "registered system name")
        ->required()
        ->check(CLI::IsMember(list_systems()));
    sub->add_option("--config", o.config_path, "flat key=value override file");
}

KV load_checked_config(const CommonOpts& o, bool allow_search) {
    KV kv;
    if (!o.config_path.empty()) {
        kv = load_config(o.config_path);
        check_config(kv, allow_search);
    }
    return kv;
}

SearchConfig make_search_config(const CommonOpts& o, const KV& kv, const std::string& method) {
    SearchConfig cfg;
    cfg.seed = o.seed;
    cfg.workers = o.workers;
    cfg.budget_seconds = o.budget_seconds;
    cfg.budget_steps = o.budget_steps;
    // deterministic mode trades the wall clock for a fixed step budget
    if (cfg.budget_steps < 0 && o.workers == 1)
        cfg.budget_steps = steps_for_budget(method, o.budget_seconds);
    cfg.population = static_cast<int>(num(kv, "population", cfg.population));
    cfg.elite_fraction = num(kv, "elite_fraction", cfg.elite_fraction);
    cfg.tournament = static_cast<int>(num(kv, "tournament", cfg.tournament));
    cfg.mutation_retries = static_cast<int>(num(kv, "mutation_retries", cfg.mutation_retries));
    cfg.mcts_max_nodes = static_cast<int64_t>(num(kv, "mcts_max_nodes", double(cfg.mcts_max_nodes)));
    cfg.mcts_max_children =
        static_cast<int>(num(kv, "mcts_max_children", cfg.mcts_max_children));
    return cfg;
}

KV digest_items(const CommonOpts& o, const KV& kv, const std::string& method) {
    KV items = kv;
    items["model"] = o.model;
    if (!method.empty()) items["method"] = method;
    items["seed"] = std::to_string(o.seed);
    items["workers"] = std::to_string(o.workers);
    items["budget_steps"] = std::to_string(o.budget_steps);
    items["budget_seconds"] = std::to_string(o.budget_seconds);
    return items;
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write report file: " + path);
    f << j.dump(2) << "\n";
    if (!f) throw std::runtime_error("short write to report file: " + path);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"input-tree decomposition toolkit"};
    app.require_subcommand(1);

    // count
    auto* c_count = app.add_subcommand("count", "count decompositions for (n, m)");
    int cn = 0, cm = 0;
    c_count->add_option("--n", cn, "state variables")->required();
    c_count->add_option("--m", cm, "inputs")->required();
    c_count->callback([&] {
        CountBreakdown ct = count_decompositions(cn, cm);
        out << ct.total << "\n";
        for (const auto& e : ct.entries)
            out << "r=" << e.r << " k=" << e.k << " count=" << e.count << "\n";
    });

    // enumerate
    auto* c_enum = app.add_subcommand("enumerate", "list every decomposition, one per line");
    int en = 0, em = 0;
    uint64_t ecap = 1000000;
    c_enum->add_option("--n", en, "state variables")->required();
    c_enum->add_option("--m", em, "inputs")->required();
    c_enum->add_option("--cap", ecap, "refuse above this census size");
    c_enum->callback([&] {
        for (const InputTree& t : enumerate_all(en, em, ecap)) out << to_string(t) << "\n";
    });

    // sample
    auto* c_sample = app.add_subcommand("sample", "draw uniform decompositions");
    int sn = 0, sm = 0, scount = 1;
    uint64_t sseed = 1;
    c_sample->add_option("--n", sn, "state variables")->required();
    c_sample->add_option("--m", sm, "inputs")->required();
    c_sample->add_option("--count", scount, "samples to draw")->required();
    c_sample->add_option("--seed", sseed, "random seed");
    c_sample->callback([&] {
        UniformTreeSampler sampler(sn, sm);
        Rng rng(sseed);
        for (int i = 0; i < scount; ++i) out << to_string(sampler.draw(rng)) << "\n";
    });

    // estimate
    auto* c_est = app.add_subcommand("estimate", "score one decomposition");
    CommonOpts eo;
    std::string etree;
    add_model_flags(c_est, eo);
    c_est->add_option("--tree", etree, "canonical tree text (default: undecomposed)");
    c_est->callback([&] {
        KV kv = load_checked_config(eo, false);
        SystemModel sys = make_system(eo.model, subset(kv, kModelKeys));
        InputTree tree = etree.empty() ? InputTree::undecomposed(sys.n, sys.m)
                                       : parse_tree(etree, sys.n, sys.m);
        FitnessModel fm(sys);
        json j = metrics_json(fm.evaluate(tree));
        j["tool"] = kToolVersion;
        j["model"] = eo.model;
        j["tree"] = to_string(tree);
        j["config_digest"] = config_digest(digest_items(eo, kv, ""));
        out << j.dump() << "\n";
    });

    // search
    auto* c_search = app.add_subcommand("search", "single-objective decomposition search");
    CommonOpts so;
    std::string method;
    bool audit = false;
    add_model_flags(c_search, so);
    c_search->add_option("--method", method, "search engine")
        ->required()
        ->check(CLI::IsMember({"ga", "mcts", "random"}));
    c_search->add_option("--seed", so.seed, "random seed");
    c_search->add_option("--workers", so.workers, "worker threads; 1 = deterministic mode")
        ->check(CLI::PositiveNumber);
    c_search->add_option("--budget-seconds", so.budget_seconds, "wall-clock budget");
    c_search->add_option("--budget-steps", so.budget_steps,
                         "step budget (generations / rollouts / draws); wins over seconds");
    c_search->add_option("--out", so.out_path, "report JSON path");
    c_search->add_flag("--audit", audit, "verify MCTS backup invariants each rollout");
    c_search->callback([&] {
        KV kv = load_checked_config(so, true);
        SystemModel sys = make_system(so.model, subset(kv, kModelKeys));
        FitnessModel fm(sys);
        SearchConfig cfg = make_search_config(so, kv, method);
        cfg.audit = audit;
        SearchReport rep;
        if (method == "ga") rep = run_ga(fm, cfg);
        if (method == "mcts") rep = run_mcts(fm, cfg);
        if (method == "random") rep = run_random(fm, cfg);
        const bool deterministic = so.workers == 1;
        json hist = json::array();
        for (const BestSample& s : rep.history)
            hist.push_back({{"step", s.step},
                            {"seconds", deterministic ? 0.0 : s.seconds},
                            {"F", s.F},
                            {"tree", s.tree}});
        json j = {{"tool", kToolVersion},
                  {"model", so.model},
                  {"method", method},
                  {"seed", so.seed},
                  {"workers", so.workers},
                  {"deterministic", deterministic},
                  {"budget_steps", cfg.budget_steps},
                  {"config_digest", config_digest(digest_items(so, kv, method))},
                  {"found", rep.found},
                  {"best_tree", rep.best_tree},
                  {"best", metrics_json(rep.best)},
                  {"steps", rep.steps},
                  {"unique_decompositions", rep.unique_evaluated},
                  {"memo_hits", rep.memo_hits},
                  {"elapsed_seconds", deterministic ? 0.0 : rep.elapsed_seconds},
                  {"exhausted", rep.exhausted},
                  {"history", hist}};
        if (audit) j["audit"] = {{"checks", rep.audit_checks}, {"violations", rep.audit_violations}};
        if (!so.out_path.empty()) write_json_file(resolve_out(so.out_path), j);
        out << j.dump() << "\n";
    });

    // pareto
    auto* c_pareto = app.add_subcommand("pareto", "two-objective front over decompositions");
    CommonOpts po;
    add_model_flags(c_pareto, po);
    c_pareto->add_option("--seed", po.seed, "random seed");
    c_pareto->add_option("--workers", po.workers, "worker threads; 1 = deterministic mode")
        ->check(CLI::PositiveNumber);
    c_pareto->add_option("--budget-seconds", po.budget_seconds, "wall-clock budget");
    c_pareto->add_option("--budget-steps", po.budget_steps, "generation budget; wins over seconds");
    c_pareto->add_option("--out", po.out_path, "report JSON path");
    c_pareto->callback([&] {
        KV kv = load_checked_config(po, true);
        SystemModel sys = make_system(po.model, subset(kv, kModelKeys));
        FitnessModel fm(sys);
        SearchConfig cfg = make_search_config(po, kv, "pareto");
        ParetoReport rep = run_pareto(fm, cfg);
        const bool deterministic = po.workers == 1;
        json front = json::array();
        for (const ParetoEntry& e : rep.front) {
            json row = {{"tree", e.tree}, {"F_err", e.F_err}, {"F_comp", e.F_comp}};
            out << row.dump() << "\n";
            front.push_back(row);
        }
        if (!po.out_path.empty()) {
            json j = {{"tool", kToolVersion},
                      {"model", po.model},
                      {"method", "pareto"},
                      {"seed", po.seed},
                      {"workers", po.workers},
                      {"deterministic", deterministic},
                      {"budget_steps", cfg.budget_steps},
                      {"config_digest", config_digest(digest_items(po, kv, "pareto"))},
                      {"generations", rep.generations},
                      {"unique_decompositions", rep.unique_evaluated},
                      {"elapsed_seconds", deterministic ? 0.0 : rep.elapsed_seconds},
                      {"front", front}};
            write_json_file(resolve_out(po.out_path), j);
        }
    });

    // solve
    auto* c_solve = app.add_subcommand("solve", "compute lookup-table policies for a tree");
    CommonOpts vo;
    std::string vtree;
    add_model_flags(c_solve, vo);
    c_solve->add_option("--tree", vtree, "canonical tree text (default: undecomposed)");
    c_solve->add_option("--seed", vo.seed, "recorded in the artifact header");
    c_solve->add_option("--workers", vo.workers, "worker threads")->check(CLI::PositiveNumber);
    c_solve->add_option("--out", vo.out_path, "policy binary path")->required();
    c_solve->callback([&] {
        KV kv = load_checked_config(vo, false);
        KV model_kv = subset(kv, kModelKeys);
        SystemModel sys = make_system(vo.model, model_kv);
        InputTree tree = vtree.empty() ? InputTree::undecomposed(sys.n, sys.m)
                                       : parse_tree(vtree, sys.n, sys.m);
        PolicyArtifact art;
        art.model = vo.model;
        art.overrides = model_kv;
        art.tree = to_string(tree);
        art.n = sys.n;
        art.m = sys.m;
        art.seed = vo.seed;
        art.digest = config_digest(digest_items(vo, kv, "solve"));
        art.assembly = solve_decomposition(sys, tree, sys.grid, vo.workers);
        const std::string path = resolve_out(vo.out_path);
        save_policy(path, art);
        json nodes = json::array();
        for (const SolveStats& st : art.assembly.stats)
            nodes.push_back({{"node", st.node},
                             {"rounds", st.rounds},
                             {"converged", st.converged},
                             {"parameters", st.parameters}});
        out << json{{"tool", kToolVersion},
                    {"model", vo.model},
                    {"tree", art.tree},
                    {"parameters", art.assembly.total_parameters},
                    {"nodes", nodes},
                    {"out", path}}
                   .dump()
            << "\n";
    });

    // simulate
    auto* c_sim = app.add_subcommand("simulate", "roll out a saved policy");
    std::string sim_policy, sim_x0, sim_out;
    double sim_duration = 10.0, sim_dt = -1.0;
    int sim_stride = 1;
    c_sim->add_option("--policy", sim_policy, "policy binary from solve")->required();
    c_sim->add_option("--x0", sim_x0, "initial state, comma-separated")->required();
    c_sim->add_option("--duration", sim_duration, "simulated seconds");
    c_sim->add_option("--dt", sim_dt, "integration step (default: model's)");
    c_sim->add_option("--stride", sim_stride, "record every k-th step")
        ->check(CLI::PositiveNumber);
    c_sim->add_option("--out", sim_out, "trajectory CSV path");
    c_sim->callback([&] {
        PolicyArtifact art = load_policy(sim_policy);
        SystemModel sys = make_system(art.model, art.overrides);
        std::vector<double> x0v = parse_vector(sim_x0);
        if (static_cast<int>(x0v.size()) != sys.n)
            throw std::runtime_error("--x0 needs " + std::to_string(sys.n) + " values");
        Eigen::VectorXd x0 = Eigen::Map<Eigen::VectorXd>(x0v.data(), sys.n);
        SimConfig cfg;
        cfg.duration = sim_duration;
        cfg.dt = sim_dt;
        cfg.sample_stride = sim_stride;
        SimResult res = simulate(sys, assembly_controller(art.assembly), x0, cfg);
        json j = {{"tool", kToolVersion},
                  {"model", art.model},
                  {"tree", art.tree},
                  {"converged", res.converged},
                  {"diverged", res.diverged},
                  {"guard", res.guard_reason.empty() ? json(nullptr) : json(res.guard_reason)},
                  {"final_deviation", res.final_deviation},
                  {"steps", res.steps}};
        if (res.diverged) j["diverged_at"] = res.diverged_at;
        if (!sim_out.empty()) {
            const std::string path = resolve_out(sim_out);
            write_trajectory_csv(path, res, sys.n, sys.m,
                                 {{"model", art.model},
                                  {"tree", art.tree},
                                  {"seed", std::to_string(art.seed)},
                                  {"config_digest", art.digest}});
            j["out"] = path;
        }
        out << j.dump() << "\n";
    });

    // basin
    auto* c_basin = app.add_subcommand("basin", "convergence sweep over a state slice");
    std::string ba_policy, ba_slice, ba_x0, ba_out;
    double ba_duration = 10.0, ba_dt = -1.0;
    int ba_points = 0, ba_workers = 1;
    c_basin->add_option("--policy", ba_policy, "policy binary from solve")->required();
    c_basin->add_option("--slice", ba_slice, "swept state labels, e.g. 1,2")->required();
    c_basin->add_option("--points", ba_points, "grid points per swept axis")
        ->check(CLI::PositiveNumber);
    c_basin->add_option("--x0", ba_x0, "base state for unswept dims (default: goal)");
    c_basin->add_option("--duration", ba_duration, "simulated seconds per cell");
    c_basin->add_option("--dt", ba_dt, "integration step (default: model's)");
    c_basin->add_option("--workers", ba_workers, "worker threads")->check(CLI::PositiveNumber);
    c_basin->add_option("--out", ba_out, "basin CSV path");
    c_basin->callback([&] {
        PolicyArtifact art = load_policy(ba_policy);
        SystemModel sys = make_system(art.model, art.overrides);
        BasinSpec spec;
        spec.dims = parse_dims(ba_slice, sys.n);
        if (ba_points > 0)
            for (int d : spec.dims) {
                AxisSpec ax = sys.grid.state_axes[static_cast<size_t>(d)];
                ax.points = ba_points;
                spec.axes.push_back(ax);
            }
        if (!ba_x0.empty()) {
            std::vector<double> base = parse_vector(ba_x0);
            if (static_cast<int>(base.size()) != sys.n)
                throw std::runtime_error("--x0 needs " + std::to_string(sys.n) + " values");
            spec.base = Eigen::Map<Eigen::VectorXd>(base.data(), sys.n);
        }
        spec.sim.duration = ba_duration;
        spec.sim.dt = ba_dt;
        BasinField field = basin_sweep(sys, assembly_controller(art.assembly), spec, ba_workers);
        json j = {{"tool", kToolVersion},
                  {"model", art.model},
                  {"tree", art.tree},
                  {"cells", field.converged.size()},
                  {"converged_count", field.converged_count}};
        if (!ba_out.empty()) {
            const std::string path = resolve_out(ba_out);
            write_basin_csv(path, field,
                            {{"model", art.model},
                             {"tree", art.tree},
                             {"seed", std::to_string(art.seed)},
                             {"config_digest", art.digest}});
            j["out"] = path;
        }
        out << j.dump() << "\n";
    });

    std::vector<const char*> argv;
    argv.push_back("polydec");
    for (const std::string& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << json{{"error", e.what()}}.dump() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << json{{"error", e.what()}}.dump() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace polydec
