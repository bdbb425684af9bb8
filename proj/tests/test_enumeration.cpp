#include <doctest.h>

#include <map>
#include <set>

#include "polydec/enumeration.hpp"
#include "polydec/input_tree.hpp"

using namespace polydec;

TEST_CASE("combinatorial helpers") {
    CHECK(binomial(5, 2) == 10);
    CHECK(binomial(5, 0) == 1);
    CHECK(binomial(3, 4) == 0);
    CHECK(surjections(3, 2) == 6);   // onto maps {1,2,3} -> {1,2}
    CHECK(surjections(2, 3) == 0);
    CHECK(stirling2(3, 2) == 3);
    CHECK(stirling2(4, 2) == 7);
}

TEST_CASE("census matches hand-counted small cases") {
    CHECK(count_decompositions(1, 2).total == 2);
    CHECK(count_decompositions(2, 2).total == 8);
    CHECK(count_decompositions(4, 2).total == 44);
    CHECK(count_decompositions(2, 3).total == 72);
    CHECK(count_decompositions(3, 3).total == 288);
    CHECK(count_decompositions(6, 3).total == 10512);
    CHECK(count_decompositions(3, 4).total == 3860);
    CHECK(count_decompositions(4, 4).total == 19388);
}

TEST_CASE("census rejects undefined shapes") {
    CHECK_THROWS(count_decompositions(0, 2));
    CHECK_THROWS(count_decompositions(2, 1));  // one input decomposes into nothing
}

TEST_CASE("formula agrees with exhaustive enumeration") {
    for (int n = 1; n <= 4; ++n)
        for (int m = 2; m <= 3; ++m) {
            CountBreakdown ct = count_decompositions(n, m);
            std::vector<InputTree> all = enumerate_all(n, m);
            CHECK(BigInt(all.size()) == ct.total);
        }
    // spot-check one larger shape
    CHECK(BigInt(enumerate_all(3, 4).size()) == count_decompositions(3, 4).total);
}

TEST_CASE("enumeration yields valid, distinct, never-undecomposed trees") {
    std::vector<InputTree> all = enumerate_all(3, 3);
    std::set<std::string> keys;
    for (const InputTree& t : all) {
        CHECK(validate(t).ok);
        CHECK_FALSE(t.is_undecomposed());
        keys.insert(tree_key(t));
    }
    CHECK(keys.size() == all.size());
}

TEST_CASE("enumeration refuses above the cap") {
    CHECK_THROWS(enumerate_all(4, 4, 1000));
}

TEST_CASE("two-input enumeration is the known list of eight") {
    std::vector<InputTree> all = enumerate_all(2, 2);
    REQUIRE(all.size() == 8);
    std::set<std::string> texts;
    for (const InputTree& t : all) texts.insert(to_string(t));
    // 2 decoupled splits and 3 state assignments per cascade direction
    CHECK(texts.count("[(u1|x1), (u2|x2)]") == 1);
    CHECK(texts.count("[(u1|x2), (u2|x1)]") == 1);
    int cascades = 0;
    for (const std::string& s : texts) cascades += s.find("->") != std::string::npos;
    CHECK(cascades == 6);
}

TEST_CASE("uniform sampling covers the space with the right frequencies") {
    UniformTreeSampler sampler(2, 2);
    Rng rng(42);
    std::map<std::string, int> hits;
    const int draws = 8000;
    for (int i = 0; i < draws; ++i) {
        InputTree t = sampler.draw(rng);
        CHECK(validate(t).ok);
        hits[tree_key(t)]++;
    }
    REQUIRE(hits.size() == 8);
    // 3-sigma band for a uniform multinomial cell
    const double sigma = std::sqrt(draws * (1.0 / 8) * (7.0 / 8));
    double chi2 = 0.0;
    for (const auto& [key, count] : hits) {
        CHECK(std::fabs(count - 1000.0) <= 3.0 * sigma);
        chi2 += (count - 1000.0) * (count - 1000.0) / 1000.0;
    }
    CHECK(chi2 < 24.322);  // 0.999 quantile, 7 dof
}

TEST_CASE("one-state sampling only produces the two cascades") {
    UniformTreeSampler sampler(1, 2);
    Rng rng(5);
    std::map<std::string, int> hits;
    for (int i = 0; i < 400; ++i) hits[to_string(sampler.draw(rng))]++;
    REQUIRE(hits.size() == 2);
    for (const auto& [text, count] : hits) CHECK(count > 120);  // roughly even
}

TEST_CASE("three-input uniformity by chi-square") {
    std::vector<InputTree> all = enumerate_all(2, 3);
    REQUIRE(all.size() == 72);
    UniformTreeSampler sampler(2, 3);
    Rng rng(9);
    std::map<std::string, int> hits;
    const int per = 5;
    const int draws = per * 72 * 20;  // 100 expected per bucket
    for (int i = 0; i < draws; ++i) hits[tree_key(sampler.draw(rng))]++;
    REQUIRE(hits.size() == 72);
    const double expected = double(draws) / 72;
    double chi2 = 0.0;
    for (const auto& [key, count] : hits)
        chi2 += (count - expected) * (count - expected) / expected;
    CHECK(chi2 < 112.32);  // 0.999 quantile, 71 dof
}

TEST_CASE("sampling is deterministic per seed") {
    UniformTreeSampler sampler(3, 3);
    Rng a(123), b(123), c(124);
    std::string sa, sb, sc;
    for (int i = 0; i < 50; ++i) {
        sa += to_string(sampler.draw(a));
        sb += to_string(sampler.draw(b));
        sc += to_string(sampler.draw(c));
    }
    CHECK(sa == sb);
    CHECK(sa != sc);
}
