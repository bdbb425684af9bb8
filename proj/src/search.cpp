#include "polydec/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "polydec/enumeration.hpp"

namespace polydec {

namespace {

using Clock = std::chrono::steady_clock;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct Budget {
    double seconds;
    int64_t steps;
    Clock::time_point t0 = Clock::now();

    bool step_mode() const { return steps >= 0; }
    double elapsed() const { return std::chrono::duration<double>(Clock::now() - t0).count(); }
    // wall time never leaks into step-budgeted (reproducible) reports
    double stamp() const { return step_mode() ? 0.0 : elapsed(); }
    bool done(int64_t completed) const {
        return step_mode() ? completed >= steps : elapsed() >= seconds;
    }
};

DecompositionMetrics memo_eval(const FitnessModel& fm, MemoTable& memo, const InputTree& tree,
                               const std::string& key) {
    DecompositionMetrics dm;
    if (memo.lookup(key, &dm)) return dm;
    dm = fm.evaluate(tree);
    memo.insert(key, dm);
    return dm;
}

struct Scored {
    InputTree tree;
    std::string key;
    DecompositionMetrics dm;
};

void score_all(const FitnessModel& fm, MemoTable& memo, std::vector<Scored>& pop, int workers) {
    std::vector<size_t> miss;
    std::map<std::string, const InputTree*> missing;
    for (size_t i = 0; i < pop.size(); ++i) {
        if (memo.lookup(pop[i].key, &pop[i].dm)) continue;
        miss.push_back(i);
        if (!missing.count(pop[i].key)) missing.emplace(pop[i].key, &pop[i].tree);
    }
    std::vector<std::pair<const std::string*, const InputTree*>> work;
    work.reserve(missing.size());
    for (auto& [k, t] : missing) work.emplace_back(&k, t);
    std::vector<DecompositionMetrics> results(work.size());
    parallel_for(static_cast<int64_t>(work.size()), workers,
                 [&](int64_t i) { results[static_cast<size_t>(i)] = fm.evaluate(*work[i].second); });
    for (size_t i = 0; i < work.size(); ++i) memo.insert(*work[i].first, results[i]);
    for (size_t i : miss) memo.lookup(pop[i].key, &pop[i].dm);
}

struct BestTracker {
    SearchReport* rep;
    const Budget* budget;
    std::string best_key;

    void consider(const DecompositionMetrics& dm, const std::string& key, const InputTree& tree,
                  int64_t step) {
        if (rep->found && !better_candidate(dm, key, rep->best, best_key)) return;
        rep->found = true;
        rep->best = dm;
        best_key = key;
        rep->best_tree = to_string(tree);
        rep->history.push_back({step, budget->stamp(), dm.F, rep->best_tree});
    }
};

}  // namespace

bool MemoTable::lookup(const std::string& key, DecompositionMetrics* out) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = table_.find(key);
    if (it == table_.end()) return false;
    ++hits_;
    *out = it->second;
    return true;
}

void MemoTable::insert(const std::string& key, const DecompositionMetrics& dm) {
    std::lock_guard<std::mutex> lock(mu_);
    table_.emplace(key, dm);  // first writer wins
}

int64_t MemoTable::hits() const {
    std::lock_guard<std::mutex> lock(mu_);
    return hits_;
}

int64_t MemoTable::size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return static_cast<int64_t>(table_.size());
}

bool better_candidate(const DecompositionMetrics& a, const std::string& ka,
                      const DecompositionMetrics& b, const std::string& kb) {
    if (a.F != b.F) return a.F < b.F;
    if (a.F_comp != b.F_comp) return a.F_comp < b.F_comp;
    return ka < kb;
}

SearchReport run_ga(const FitnessModel& fm, const SearchConfig& cfg) {
    SearchReport rep;
    rep.method = "ga";
    Budget budget{cfg.budget_seconds, cfg.budget_steps};
    Rng rng(cfg.seed);
    MemoTable memo;
    BestTracker best{&rep, &budget, {}};
    const SystemModel& sys = fm.system();
    UniformTreeSampler sampler(sys.n, sys.m);

    const int pop_n = std::max(2, cfg.population);
    std::vector<Scored> pop(pop_n);
    for (auto& s : pop) {
        s.tree = sampler.draw(rng);
        s.key = tree_key(s.tree);
    }
    score_all(fm, memo, pop, cfg.workers);
    for (auto& s : pop) best.consider(s.dm, s.key, s.tree, 0);

    const int elite_n =
        std::min(pop_n - 1, std::max(1, static_cast<int>(std::ceil(cfg.elite_fraction * pop_n))));
    auto by_rank = [&pop](int a, int b) {
        return better_candidate(pop[a].dm, pop[a].key, pop[b].dm, pop[b].key);
    };

    int64_t gen = 0;
    while (!budget.done(gen)) {
        ++gen;
        std::vector<int> order(pop.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        std::sort(order.begin(), order.end(), by_rank);
        std::vector<Scored> next;
        next.reserve(pop.size());
        for (int i = 0; i < elite_n; ++i) next.push_back(pop[order[i]]);
        while (next.size() < pop.size()) {
            int parent = order[0];
            for (int t = 0; t < std::max(1, cfg.tournament); ++t) {
                int c = static_cast<int>(rng.below(pop.size()));
                if (t == 0 || by_rank(c, parent)) parent = c;
            }
            Scored child;
            child.tree = mutate(pop[parent].tree, rng, cfg.mutation_retries);
            child.key = tree_key(child.tree);
            next.push_back(std::move(child));
        }
        pop.swap(next);
        score_all(fm, memo, pop, cfg.workers);
        for (auto& s : pop) best.consider(s.dm, s.key, s.tree, gen);
    }
    rep.steps = gen;
    rep.unique_evaluated = memo.size();
    rep.memo_hits = memo.hits();
    rep.elapsed_seconds = budget.stamp();
    return rep;
}

SearchReport run_random(const FitnessModel& fm, const SearchConfig& cfg) {
    SearchReport rep;
    rep.method = "random";
    Budget budget{cfg.budget_seconds, cfg.budget_steps};
    Rng rng(cfg.seed);
    MemoTable memo;
    BestTracker best{&rep, &budget, {}};
    const SystemModel& sys = fm.system();
    UniformTreeSampler sampler(sys.n, sys.m);
    int64_t draws = 0;
    while (!budget.done(draws)) {
        ++draws;
        InputTree tree = sampler.draw(rng);
        std::string key = tree_key(tree);
        DecompositionMetrics dm = memo_eval(fm, memo, tree, key);
        best.consider(dm, key, tree, draws);
    }
    rep.steps = draws;
    rep.unique_evaluated = memo.size();
    rep.memo_hits = memo.hits();
    rep.elapsed_seconds = budget.stamp();
    return rep;
}

namespace {

struct Split {
    int leaf = 0;
    uint32_t imask = 0;  // over the leaf's inputs, bit set = first part
    uint64_t smask = 0;  // over the leaf's states, bit set = first part
    uint8_t arr = 0;     // 0: part2 under part1, 1: part1 under part2, 2: siblings
};

std::vector<Split> enumerate_splits(const InputTree& t) {
    std::vector<Split> out;
    for (size_t id = 1; id < t.nodes.size(); ++id) {
        if (!t.is_leaf(static_cast<int>(id))) continue;
        const TreeNode& node = t.nodes[id];
        const int ki = static_cast<int>(node.inputs.size());
        const int ks = static_cast<int>(node.states.size());
        if (ki < 2) continue;
        if (ki > 31 || ks > 24)
            throw std::invalid_argument("leaf too large to enumerate splits");
        const uint32_t ifull = (1u << ki) - 1;
        const uint64_t sfull = (1ull << ks) - 1;
        for (uint32_t im = 1; im < ifull; im += 2) {  // the leaf's first input stays in part 1
            for (uint64_t sm = 0; sm <= sfull; ++sm) {
                if (sm != sfull) out.push_back({static_cast<int>(id), im, sm, 0});
                if (sm != 0) out.push_back({static_cast<int>(id), im, sm, 1});
                if (sm != 0 && sm != sfull) out.push_back({static_cast<int>(id), im, sm, 2});
            }
        }
    }
    return out;
}

InputTree apply_split(const InputTree& t, const Split& sp) {
    std::vector<int> in1, in2, st1, st2;
    const TreeNode& leaf = t.nodes[sp.leaf];
    for (size_t i = 0; i < leaf.inputs.size(); ++i)
        (((sp.imask >> i) & 1u) ? in1 : in2).push_back(leaf.inputs[i]);
    for (size_t i = 0; i < leaf.states.size(); ++i)
        (((sp.smask >> i) & 1ull) ? st1 : st2).push_back(leaf.states[i]);

    InputTree out = t;
    const int w = static_cast<int>(out.nodes.size());
    TreeNode fresh;
    if (sp.arr == 0) {
        fresh.inputs = in2;
        fresh.states = st2;
        fresh.parent = sp.leaf;
    } else if (sp.arr == 1) {
        fresh.inputs = in1;
        fresh.states = st1;
        fresh.parent = sp.leaf;
    } else {
        fresh.inputs = in2;
        fresh.states = st2;
        fresh.parent = leaf.parent;
    }
    out.nodes.push_back(std::move(fresh));
    TreeNode& v = out.nodes[sp.leaf];
    if (sp.arr == 0) {
        v.inputs = in1;
        v.states = st1;
        v.children.push_back(w);
    } else if (sp.arr == 1) {
        v.inputs = in2;
        v.states = st2;
        v.children.push_back(w);
    } else {
        v.inputs = in1;
        v.states = st1;
        auto& sib = out.nodes[v.parent].children;
        sib.insert(std::find(sib.begin(), sib.end(), sp.leaf) + 1, w);
    }
    return out;
}

struct MNode {
    InputTree tree;
    std::string key;
    double fit = kInf;  // own fitness; the root's is excluded from backups
    double q = kInf;
    int64_t visits = 0;
    std::vector<Split> pending;
    std::vector<int> kids;
    int parent = -1;
    bool exhausted = false;
};

}  // namespace

SearchReport run_mcts(const FitnessModel& fm, const SearchConfig& cfg) {
    SearchReport rep;
    rep.method = "mcts";
    Budget budget{cfg.budget_seconds, cfg.budget_steps};
    Rng rng(cfg.seed);
    MemoTable memo;
    BestTracker best{&rep, &budget, {}};
    const SystemModel& sys = fm.system();

    std::vector<MNode> pool;
    pool.reserve(1024);
    int64_t rollouts = 0;

    auto make_node = [&](InputTree&& tree, int parent) {
        MNode node;
        node.tree = std::move(tree);
        node.key = tree_key(node.tree);
        node.parent = parent;
        if (parent >= 0) {
            DecompositionMetrics dm = memo_eval(fm, memo, node.tree, node.key);
            node.fit = dm.F;
            best.consider(dm, node.key, node.tree, rollouts);
        }
        node.q = node.fit;
        node.pending = enumerate_splits(node.tree);
        if (cfg.mcts_max_children > 0 &&
            node.pending.size() > static_cast<size_t>(cfg.mcts_max_children)) {
            rng.shuffle(node.pending);
            node.pending.resize(static_cast<size_t>(cfg.mcts_max_children));
        }
        pool.push_back(std::move(node));
        return static_cast<int>(pool.size()) - 1;
    };

    const int root = make_node(InputTree::undecomposed(sys.n, sys.m), -1);
    std::vector<int> path;
    while (!budget.done(rollouts) && !pool[root].exhausted &&
           static_cast<int64_t>(pool.size()) < cfg.mcts_max_nodes) {
        ++rollouts;
        path.assign(1, root);
        while (true) {
            const int node = path.back();
            if (!pool[node].pending.empty()) {
                // expand one unexplored child, drawn uniformly
                auto& pending = pool[node].pending;
                const size_t pick = static_cast<size_t>(rng.below(pending.size()));
                const Split sp = pending[pick];
                pending[pick] = pending.back();
                pending.pop_back();
                const int child = make_node(apply_split(pool[node].tree, sp), node);
                pool[node].kids.push_back(child);
                path.push_back(child);
                break;
            }
            int chosen = -1;
            double chosen_score = kInf;
            int ties = 0;
            const double log_term = std::log(static_cast<double>(pool[node].visits + 1));
            for (int c : pool[node].kids) {
                if (pool[c].exhausted) continue;
                const double score =
                    pool[c].q - std::sqrt(2.0 * log_term / static_cast<double>(pool[c].visits));
                if (chosen < 0 || score < chosen_score) {
                    chosen = c;
                    chosen_score = score;
                    ties = 1;
                } else if (score == chosen_score) {
                    ++ties;  // break ties uniformly at random
                    if (rng.below(static_cast<uint64_t>(ties)) == 0) chosen = c;
                }
            }
            if (chosen < 0) {
                pool[node].exhausted = true;  // no live children; close and back up
                break;
            }
            if (cfg.audit && pool[chosen].exhausted) ++rep.audit_violations;
            path.push_back(chosen);
            if (pool[chosen].pending.empty() && pool[chosen].kids.empty()) break;  // terminal
        }
        for (auto it = path.rbegin(); it != path.rend(); ++it) {
            MNode& nd = pool[*it];
            ++nd.visits;
            double q = nd.fit;
            bool all_done = nd.pending.empty();
            for (int c : nd.kids) {
                q = std::min(q, pool[c].q);
                all_done = all_done && pool[c].exhausted;
            }
            nd.q = q;
            nd.exhausted = all_done;
        }
        if (cfg.audit) {
            for (int id : path) {
                ++rep.audit_checks;
                const MNode& nd = pool[id];
                double q = nd.fit;
                for (int c : nd.kids) q = std::min(q, pool[c].q);
                if (!(q == nd.q || (std::isinf(q) && std::isinf(nd.q)))) ++rep.audit_violations;
            }
        }
    }
    rep.exhausted = pool[root].exhausted;
    rep.steps = rollouts;
    rep.unique_evaluated = memo.size();
    rep.memo_hits = memo.hits();
    rep.elapsed_seconds = budget.stamp();
    return rep;
}

namespace {

bool dominates(const DecompositionMetrics& a, const DecompositionMetrics& b) {
    return a.F_err <= b.F_err && a.F_comp <= b.F_comp &&
           (a.F_err < b.F_err || a.F_comp < b.F_comp);
}

struct PCand {
    Scored s;
    int rank = 0;
    double crowd = 0.0;
};

void rank_population(std::vector<PCand>& pop) {
    const size_t n = pop.size();
    std::vector<std::vector<int>> fronts;
    std::vector<int> dom_count(n, 0);
    std::vector<std::vector<int>> dominated(n);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            if (dominates(pop[i].s.dm, pop[j].s.dm)) dominated[i].push_back(static_cast<int>(j));
            else if (dominates(pop[j].s.dm, pop[i].s.dm)) ++dom_count[i];
        }
    std::vector<int> current;
    for (size_t i = 0; i < n; ++i)
        if (dom_count[i] == 0) current.push_back(static_cast<int>(i));
    int rank = 0;
    while (!current.empty()) {
        std::vector<int> next;
        for (int i : current) {
            pop[static_cast<size_t>(i)].rank = rank;
            for (int j : dominated[static_cast<size_t>(i)])
                if (--dom_count[static_cast<size_t>(j)] == 0) next.push_back(j);
        }
        fronts.push_back(std::move(current));
        current = std::move(next);
        ++rank;
    }
    // crowding distance per front over both objectives
    for (auto& front : fronts) {
        for (int i : front) pop[static_cast<size_t>(i)].crowd = 0.0;
        for (int obj = 0; obj < 2; ++obj) {
            auto value = [&pop, obj](int i) {
                const auto& dm = pop[static_cast<size_t>(i)].s.dm;
                return obj == 0 ? dm.F_err : dm.F_comp;
            };
            std::sort(front.begin(), front.end(), [&](int a, int b) {
                if (value(a) != value(b)) return value(a) < value(b);
                return pop[static_cast<size_t>(a)].s.key < pop[static_cast<size_t>(b)].s.key;
            });
            const double span = value(front.back()) - value(front.front());
            pop[static_cast<size_t>(front.front())].crowd = kInf;
            pop[static_cast<size_t>(front.back())].crowd = kInf;
            if (span <= 0.0) continue;
            for (size_t k = 1; k + 1 < front.size(); ++k)
                pop[static_cast<size_t>(front[k])].crowd +=
                    (value(front[k + 1]) - value(front[k - 1])) / span;
        }
    }
}

}  // namespace

ParetoReport run_pareto(const FitnessModel& fm, const SearchConfig& cfg) {
    ParetoReport rep;
    Budget budget{cfg.budget_seconds, cfg.budget_steps};
    Rng rng(cfg.seed);
    MemoTable memo;
    const SystemModel& sys = fm.system();
    UniformTreeSampler sampler(sys.n, sys.m);
    const int pop_n = std::max(4, cfg.population);

    std::vector<PCand> pop(static_cast<size_t>(pop_n));
    pop[0].s.tree = InputTree::undecomposed(sys.n, sys.m);
    for (size_t i = 1; i < pop.size(); ++i) pop[i].s.tree = sampler.draw(rng);
    {
        std::vector<Scored> tmp;
        for (auto& p : pop) {
            p.s.key = tree_key(p.s.tree);
            tmp.push_back(p.s);
        }
        score_all(fm, memo, tmp, cfg.workers);
        for (size_t i = 0; i < pop.size(); ++i) pop[i].s.dm = tmp[i].dm;
    }
    rank_population(pop);

    auto fitter = [&pop](int a, int b) {
        const PCand &pa = pop[static_cast<size_t>(a)], &pb = pop[static_cast<size_t>(b)];
        if (pa.rank != pb.rank) return pa.rank < pb.rank;
        if (pa.crowd != pb.crowd) return pa.crowd > pb.crowd;
        return pa.s.key < pb.s.key;
    };

    int64_t gen = 0;
    while (!budget.done(gen)) {
        ++gen;
        std::vector<Scored> offspring(pop.size());
        for (auto& child : offspring) {
            int parent = static_cast<int>(rng.below(pop.size()));
            const int rival = static_cast<int>(rng.below(pop.size()));
            if (fitter(rival, parent)) parent = rival;
            child.tree = mutate(pop[static_cast<size_t>(parent)].s.tree, rng,
                                cfg.mutation_retries);
            child.key = tree_key(child.tree);
        }
        score_all(fm, memo, offspring, cfg.workers);
        // pooled selection, deduplicated by canonical key
        std::vector<PCand> merged;
        merged.reserve(pop.size() * 2);
        std::map<std::string, bool> seen;
        for (auto& p : pop)
            if (!seen.count(p.s.key)) {
                seen.emplace(p.s.key, true);
                merged.push_back({p.s, 0, 0.0});
            }
        for (auto& s : offspring)
            if (!seen.count(s.key)) {
                seen.emplace(s.key, true);
                merged.push_back({s, 0, 0.0});
            }
        rank_population(merged);
        std::vector<int> order(merged.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        std::sort(order.begin(), order.end(), [&merged](int a, int b) {
            const PCand &pa = merged[static_cast<size_t>(a)], &pb = merged[static_cast<size_t>(b)];
            if (pa.rank != pb.rank) return pa.rank < pb.rank;
            if (pa.crowd != pb.crowd) return pa.crowd > pb.crowd;
            return pa.s.key < pb.s.key;
        });
        std::vector<PCand> next;
        next.reserve(pop.size());
        for (size_t i = 0; i < pop.size() && i < order.size(); ++i)
            next.push_back(merged[static_cast<size_t>(order[i])]);
        pop.swap(next);
        rank_population(pop);
    }

    std::vector<const PCand*> front;
    for (const auto& p : pop)
        if (p.rank == 0) front.push_back(&p);
    std::sort(front.begin(), front.end(), [](const PCand* a, const PCand* b) {
        if (a->s.dm.F_err != b->s.dm.F_err) return a->s.dm.F_err < b->s.dm.F_err;
        if (a->s.dm.F_comp != b->s.dm.F_comp) return a->s.dm.F_comp < b->s.dm.F_comp;
        return a->s.key < b->s.key;
    });
    std::string last_key;
    for (const PCand* p : front) {
        if (!rep.front.empty() && p->s.key == last_key) continue;
        last_key = p->s.key;
        rep.front.push_back({to_string(p->s.tree), p->s.dm.F_err, p->s.dm.F_comp});
    }
    rep.generations = gen;
    rep.unique_evaluated = memo.size();
    rep.elapsed_seconds = budget.stamp();
    return rep;
}

SearchReport exhaustive_best(const FitnessModel& fm, int64_t cap) {
    SearchReport rep;
    rep.method = "exhaustive";
    Budget budget{0.0, 0};
    BestTracker best{&rep, &budget, {}};
    const SystemModel& sys = fm.system();
    std::vector<InputTree> all = enumerate_all(sys.n, sys.m, cap);
    int64_t step = 0;
    for (const InputTree& tree : all) {
        DecompositionMetrics dm = fm.evaluate(tree);
        best.consider(dm, tree_key(tree), tree, step++);
    }
    rep.steps = static_cast<int64_t>(all.size());
    rep.unique_evaluated = static_cast<int64_t>(all.size());
    return rep;
}

}  // namespace polydec
