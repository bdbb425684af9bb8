#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "polydec/enumeration.hpp"
#include "polydec/input_tree.hpp"

using namespace polydec;

namespace {
const char* kFigTree = "[(u2,u3|x2,x3)->[(u4|x1)], (u1|x4)]";
}

TEST_CASE("undecomposed tree owns everything") {
    InputTree t = InputTree::undecomposed(3, 2);
    CHECK(t.real_node_count() == 1);
    CHECK(t.is_undecomposed());
    CHECK(t.nodes[1].inputs == std::vector<int>{0, 1});
    CHECK(t.nodes[1].states == std::vector<int>{0, 1, 2});
    CHECK(validate(t).ok);
    CHECK(to_string(t) == "[(u1,u2|x1,x2,x3)]");
}

TEST_CASE("parse and to_string round-trip the reference tree") {
    InputTree t = parse_tree(kFigTree, 4, 4);
    CHECK(validate(t).ok);
    CHECK(to_string(t) == kFigTree);
    CHECK(t.real_node_count() == 3);
    CHECK(t.node_of_input(3) != -1);
    CHECK(t.node_of_state(0) == t.node_of_input(3));  // u4 and x1 share a node
    CHECK(t.depth(t.node_of_input(3)) == 2);
    // dims inferred when omitted
    InputTree t2 = parse_tree(kFigTree);
    CHECK(t2.n_states == 4);
    CHECK(t2.m_inputs == 4);
    CHECK(tree_key(t2) == tree_key(t));
}

TEST_CASE("parse rejects malformed and inconsistent text") {
    CHECK_THROWS(parse_tree("[(u1|x1)", 1, 1));                 // unbalanced
    CHECK_THROWS(parse_tree("[(u1|x1)]", 2, 1));                // state x2 unassigned
    CHECK_THROWS(parse_tree("[(u1|x1), (u1|x2)]", 2, 2));       // duplicate input
    CHECK_THROWS(parse_tree("[(u1,u2|)]", 1, 2));               // leaf without states
    CHECK_THROWS(parse_tree("[(u1|x1)->[(u2|)]]", 1, 2));       // leaf without states
    CHECK_THROWS(parse_tree("[(u3|x1)]", 1, 2));                // label out of range
}

TEST_CASE("validation catches structural defects") {
    InputTree t = InputTree::undecomposed(2, 2);
    t.nodes[1].states.clear();  // leaf with no states
    CHECK_FALSE(validate(t).ok);

    InputTree s = InputTree::undecomposed(2, 2);
    s.nodes[1].inputs = {0};  // input u2 unassigned
    CHECK_FALSE(validate(s).ok);
}

TEST_CASE("key matrices match the published four-input example") {
    InputTree t = parse_tree(kFigTree, 4, 4);
    TreeKeyMatrices km = key_matrices(t);
    const std::vector<std::vector<uint8_t>> C = {
        {0, 0, 0, 0}, {0, 0, 1, 0}, {0, 1, 0, 0}, {0, 1, 1, 0}};
    const std::vector<std::vector<uint8_t>> S = {
        {0, 0, 0, 1}, {0, 1, 1, 0}, {0, 1, 1, 0}, {1, 0, 0, 0}};
    CHECK(km.coupling == C);
    CHECK(km.dependence == S);
}

TEST_CASE("tree keys identify decompositions, not serializations") {
    // same structure, children listed in the opposite order
    InputTree a = parse_tree("[(u1|x1), (u2|x2)]", 2, 2);
    InputTree b = parse_tree("[(u2|x2), (u1|x1)]", 2, 2);
    CHECK(to_string(a) != to_string(b));
    CHECK(tree_key(a) == tree_key(b));

    // flipping a cascade direction must change the key
    InputTree c = parse_tree("[(u1|x1)->[(u2|x2)]]", 2, 2);
    InputTree d = parse_tree("[(u2|x2)->[(u1|x1)]]", 2, 2);
    CHECK(tree_key(c) != tree_key(d));
}

TEST_CASE("keys are collision-free across exhaustive enumerations") {
    for (auto [n, m] : {std::pair{2, 2}, std::pair{2, 3}, std::pair{3, 3}}) {
        std::vector<InputTree> all = enumerate_all(n, m);
        std::set<std::string> keys;
        for (const InputTree& t : all) keys.insert(tree_key(t));
        CHECK(keys.size() == all.size());
    }
}

TEST_CASE("subsystem extraction splits own, cascaded and decoupled inputs") {
    InputTree t = parse_tree(kFigTree, 4, 4);
    const int mid = t.node_of_input(1);  // the (u2,u3) node
    SubsystemSpec spec = subsystem_of(t, mid);
    CHECK(spec.inputs == std::vector<int>{1, 2});
    CHECK(spec.states == std::vector<int>{0, 1, 2});  // subtree adds x1
    CHECK(spec.cascaded == std::vector<int>{3});
    CHECK(spec.decoupled == std::vector<int>{0});

    const int leaf = t.node_of_input(3);  // the (u4) node
    SubsystemSpec ls = subsystem_of(t, leaf);
    CHECK(ls.inputs == std::vector<int>{3});
    CHECK(ls.states == std::vector<int>{0});
    CHECK(ls.cascaded.empty());
    CHECK(ls.decoupled == std::vector<int>{0, 1, 2});
}

TEST_CASE("subtree and depth walk the hierarchy") {
    InputTree t = parse_tree(kFigTree, 4, 4);
    const int mid = t.node_of_input(1);
    std::vector<int> sub = t.subtree(mid);
    CHECK(sub.size() == 2);
    CHECK(sub.front() == mid);
    CHECK(t.depth(0) == 0);
    CHECK(t.depth(mid) == 1);
}

TEST_CASE("mutation always yields valid non-trivial trees") {
    Rng rng(7);
    InputTree t = parse_tree("[(u1|x1), (u2|x2)]", 2, 2);
    for (int i = 0; i < 500; ++i) {
        t = mutate(t, rng);
        CHECK(validate(t).ok);
        CHECK_FALSE(t.is_undecomposed());
        CHECK(t.n_states == 2);
        CHECK(t.m_inputs == 2);
    }
}

TEST_CASE("mutation reaches the whole two-input space") {
    std::set<std::string> target;
    for (const InputTree& t : enumerate_all(2, 2)) target.insert(tree_key(t));
    REQUIRE(target.size() == 8);

    Rng rng(3);
    InputTree t = parse_tree("[(u1|x1), (u2|x2)]", 2, 2);
    std::set<std::string> seen{tree_key(t)};
    for (int i = 0; i < 4000 && seen.size() < target.size(); ++i) {
        t = mutate(t, rng);
        seen.insert(tree_key(t));
    }
    CHECK(seen == target);
}

TEST_CASE("mutation from a deep cascade keeps every input assigned") {
    Rng rng(11);
    InputTree t = parse_tree("[(u1|x1)->[(u2|x2)->[(u3|x3)]]]", 3, 3);
    std::map<std::string, int> shapes;
    for (int i = 0; i < 300; ++i) {
        t = mutate(t, rng);
        REQUIRE(validate(t).ok);
        for (int u = 0; u < 3; ++u) CHECK(t.node_of_input(u) > 0);
        for (int x = 0; x < 3; ++x) CHECK(t.node_of_state(x) > 0);
        shapes[tree_key(t)]++;
    }
    CHECK(shapes.size() > 5);  // the walk actually moves around
}
