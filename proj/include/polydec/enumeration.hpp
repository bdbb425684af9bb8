#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include "polydec/input_tree.hpp"

namespace polydec {

using BigInt = boost::multiprecision::cpp_int;

BigInt binomial(int n, int k);

// Number of surjections from an a-element set onto a b-element set.
BigInt surjections(int a, int b);

// Set partitions of an m-element set into exactly r blocks.
BigInt stirling2(int m, int r);

// Closed-form census of valid decompositions for n states and m inputs,
// grouped by (r = input groups, k = leaf groups). The undecomposed
// single-node arrangement is not a decomposition and is not counted.
struct CountBreakdown {
    int n = 0;
    int m = 0;
    BigInt total;
    struct Entry {
        int r;
        int k;
        BigInt count;
    };
    std::vector<Entry> entries;
};

// Throws std::invalid_argument for n < 1 or m < 2.
CountBreakdown count_decompositions(int n, int m);

// Materializes every valid decomposition exactly once. Throws if the census
// exceeds cap.
std::vector<InputTree> enumerate_all(int n, int m, uint64_t cap = 1000000);

// Draws exactly uniform samples from the full decomposition space without
// materializing it: input-group count and leaf count are drawn proportional
// to their census weights, the input partition is index-sampled among
// restricted-growth strings, the tree shape comes from a uniformly drawn
// tree code with the matching leaf count, and state labels are resampled
// until every leaf is covered.
class UniformTreeSampler {
public:
    UniformTreeSampler(int n, int m);
    InputTree draw(Rng& rng) const;
    const CountBreakdown& census() const { return census_; }

private:
    int n_;
    int m_;
    CountBreakdown census_;
};

InputTree sample_uniform(int n, int m, Rng& rng);

}  // namespace polydec
