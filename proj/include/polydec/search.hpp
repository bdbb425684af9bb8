#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "polydec/metrics.hpp"
#include "polydec/util.hpp"

namespace polydec {

// Fitness cache shared by the search engines. Keys are canonical tree keys;
// inserts are first-writer-wins so concurrent evaluations stay consistent.
class MemoTable {
public:
    bool lookup(const std::string& key, DecompositionMetrics* out);
    void insert(const std::string& key, const DecompositionMetrics& dm);
    int64_t hits() const;
    int64_t size() const;

private:
    mutable std::mutex mu_;
    std::map<std::string, DecompositionMetrics> table_;
    int64_t hits_ = 0;
};

struct SearchConfig {
    uint64_t seed = 1;
    double budget_seconds = 10.0;
    // >= 0: run exactly this many steps (generations / rollouts / draws)
    // instead of the wall clock; required for reproducible reports
    int64_t budget_steps = -1;
    int workers = 1;

    int population = 100;
    double elite_fraction = 0.10;
    int tournament = 3;
    int mutation_retries = 20;

    int64_t mcts_max_nodes = 400000;
    int mcts_max_children = 0;  // 0 = enumerate every child
    bool audit = false;         // verify backup/selection invariants per rollout
};

struct BestSample {
    int64_t step = 0;
    double seconds = 0.0;
    double F = 0.0;
    std::string tree;
};

struct SearchReport {
    std::string method;
    std::string best_tree;
    DecompositionMetrics best;
    bool found = false;  // false when the budget expired before any evaluation
    int64_t steps = 0;
    int64_t unique_evaluated = 0;
    int64_t memo_hits = 0;
    double elapsed_seconds = 0.0;
    std::vector<BestSample> history;
    int64_t audit_checks = 0;
    int64_t audit_violations = 0;
    bool exhausted = false;  // MCTS: the whole space was explored
};

struct ParetoEntry {
    std::string tree;
    double F_err = 0.0;
    double F_comp = 0.0;
};

struct ParetoReport {
    std::vector<ParetoEntry> front;  // mutually non-dominated, F_err ascending
    int64_t generations = 0;
    int64_t unique_evaluated = 0;
    double elapsed_seconds = 0.0;
};

// candidate ordering shared by every engine: fitness, then compute ratio,
// then canonical key so that ties resolve identically across runs
bool better_candidate(const DecompositionMetrics& a, const std::string& ka,
                      const DecompositionMetrics& b, const std::string& kb);

SearchReport run_ga(const FitnessModel& fm, const SearchConfig& cfg);
SearchReport run_mcts(const FitnessModel& fm, const SearchConfig& cfg);
SearchReport run_random(const FitnessModel& fm, const SearchConfig& cfg);
ParetoReport run_pareto(const FitnessModel& fm, const SearchConfig& cfg);

// scores every proper decomposition (census must stay within cap)
SearchReport exhaustive_best(const FitnessModel& fm, int64_t cap = 1000000);

}  // namespace polydec
