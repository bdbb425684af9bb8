#pragma once

#include <string>
#include <vector>

#include "polydec/util.hpp"

namespace polydec {

// Rooted tree over disjoint input groups. Node 0 is a virtual root holding
// nothing; every other node owns a nonempty set of input indices and a
// (possibly empty, nonempty at leaves) set of state indices. A parent-child
// edge means the child's inputs are computed first and fed to the parent's
// subsystem; siblings are decoupled.
struct TreeNode {
    std::vector<int> inputs;   // global input indices, ascending
    std::vector<int> states;   // global state indices, ascending
    int parent = -1;           // -1 only for the virtual root
    std::vector<int> children; // node ids, serialization order
};

struct InputTree {
    int n_states = 0;
    int m_inputs = 0;
    std::vector<TreeNode> nodes; // nodes[0] = virtual root

    static InputTree undecomposed(int n_states, int m_inputs);

    int add_node(int parent, std::vector<int> inputs, std::vector<int> states);

    bool is_leaf(int id) const { return nodes[static_cast<size_t>(id)].children.empty(); }
    int real_node_count() const { return static_cast<int>(nodes.size()) - 1; }
    bool is_undecomposed() const { return real_node_count() == 1; }

    // id of the real node owning the given input/state, -1 if unassigned
    int node_of_input(int input) const;
    int node_of_state(int state) const;

    int depth(int id) const; // root = 0

    // ids of the subtree rooted at id (preorder, includes id)
    std::vector<int> subtree(int id) const;
};

struct ValidationReport {
    bool ok = true;
    std::vector<std::string> issues;
};

ValidationReport validate(const InputTree& tree);

// Binary connectivity/state-dependence signature. Row j of `coupling`
// marks inputs co-located with input j plus the inputs of its parent node;
// row j of `dependence` marks the states held by input j's node. Together
// they identify a decomposition independently of node numbering.
struct TreeKeyMatrices {
    std::vector<std::vector<uint8_t>> coupling;   // m x m
    std::vector<std::vector<uint8_t>> dependence; // m x n
};

TreeKeyMatrices key_matrices(const InputTree& tree);

// Packed byte string of the two key matrices; usable as a hash-map key.
std::string tree_key(const InputTree& tree);

// Subsystem induced by the subtree rooted at node_id: the node's own inputs
// act on the union of subtree states; strictly lower inputs are cascaded
// (their policies are substituted), all remaining inputs are decoupled.
struct SubsystemSpec {
    int node_id = -1;
    std::vector<int> inputs;
    std::vector<int> states;
    std::vector<int> cascaded;
    std::vector<int> decoupled;
};

SubsystemSpec subsystem_of(const InputTree& tree, int node_id);

// Text form, e.g. "[(u2,u3|x2,x3)->[(u4|x1)], (u1|x4)]". Child order is
// preserved, so to_string(parse(s)) == s for well-formed s without
// extraneous whitespace; parse(to_string(t)) equals t up to tree_key.
std::string to_string(const InputTree& tree);
InputTree parse_tree(const std::string& text);                 // dims inferred
InputTree parse_tree(const std::string& text, int n, int m);   // dims enforced

// One random structural edit: swap states between two nodes, move a state,
// move a subtree, or couple/decouple input groups (the last two chosen by
// drawing two inputs and checking whether they share a node). Invalid draws
// are retried up to retry_budget times; on exhaustion the input is returned
// unchanged. Never returns the undecomposed single-node tree and never an
// invalid one.
InputTree mutate(const InputTree& tree, Rng& rng, int retry_budget = 20);

}  // namespace polydec
