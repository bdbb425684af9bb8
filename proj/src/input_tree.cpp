#include "polydec/input_tree.hpp"

#include <algorithm>
#include <cassert>
#include <sstream>
#include <stdexcept>

namespace polydec {

namespace {

void sorted_insert(std::vector<int>& v, int x) {
    v.insert(std::lower_bound(v.begin(), v.end(), x), x);
}

void sorted_erase(std::vector<int>& v, int x) {
    auto it = std::lower_bound(v.begin(), v.end(), x);
    if (it != v.end() && *it == x) v.erase(it);
}

}  // namespace

InputTree InputTree::undecomposed(int n_states, int m_inputs) {
    InputTree t;
    t.n_states = n_states;
    t.m_inputs = m_inputs;
    t.nodes.resize(1);
    std::vector<int> ins(static_cast<size_t>(m_inputs));
    std::vector<int> sts(static_cast<size_t>(n_states));
    for (int i = 0; i < m_inputs; ++i) ins[static_cast<size_t>(i)] = i;
    for (int i = 0; i < n_states; ++i) sts[static_cast<size_t>(i)] = i;
    t.add_node(0, std::move(ins), std::move(sts));
    return t;
}

int InputTree::add_node(int parent, std::vector<int> inputs, std::vector<int> states) {
    std::sort(inputs.begin(), inputs.end());
    std::sort(states.begin(), states.end());
    TreeNode node;
    node.inputs = std::move(inputs);
    node.states = std::move(states);
    node.parent = parent;
    int id = static_cast<int>(nodes.size());
    nodes.push_back(std::move(node));
    nodes[static_cast<size_t>(parent)].children.push_back(id);
    return id;
}

int InputTree::node_of_input(int input) const {
    for (size_t i = 1; i < nodes.size(); ++i) {
        const auto& ins = nodes[i].inputs;
        if (std::binary_search(ins.begin(), ins.end(), input)) return static_cast<int>(i);
    }
    return -1;
}

int InputTree::node_of_state(int state) const {
    for (size_t i = 1; i < nodes.size(); ++i) {
        const auto& sts = nodes[i].states;
        if (std::binary_search(sts.begin(), sts.end(), state)) return static_cast<int>(i);
    }
    return -1;
}

int InputTree::depth(int id) const {
    int d = 0;
    while (nodes[static_cast<size_t>(id)].parent >= 0) {
        id = nodes[static_cast<size_t>(id)].parent;
        ++d;
    }
    return d;
}

std::vector<int> InputTree::subtree(int id) const {
    std::vector<int> out;
    std::vector<int> stack{id};
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        out.push_back(v);
        const auto& ch = nodes[static_cast<size_t>(v)].children;
        for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
    }
    return out;
}

ValidationReport validate(const InputTree& tree) {
    ValidationReport rep;
    auto flag = [&](const std::string& msg) {
        rep.ok = false;
        rep.issues.push_back(msg);
    };
    const int n = tree.n_states, m = tree.m_inputs;
    if (tree.nodes.empty()) {
        flag("tree has no nodes");
        return rep;
    }
    if (tree.nodes[0].parent != -1 || !tree.nodes[0].inputs.empty() || !tree.nodes[0].states.empty())
        flag("node 0 must be an empty virtual root");

    const int count = static_cast<int>(tree.nodes.size());
    std::vector<int> seen_in(static_cast<size_t>(std::max(m, 0)), -1);
    std::vector<int> seen_st(static_cast<size_t>(std::max(n, 0)), -1);
    std::vector<char> reached(static_cast<size_t>(count), 0);
    std::vector<int> stack{0};
    reached[0] = 1;
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        for (int c : tree.nodes[static_cast<size_t>(v)].children) {
            if (c <= 0 || c >= count) {
                flag("child id out of range");
                continue;
            }
            if (reached[static_cast<size_t>(c)]) {
                flag("node " + std::to_string(c) + " reached twice (cycle or shared child)");
                continue;
            }
            if (tree.nodes[static_cast<size_t>(c)].parent != v)
                flag("parent link of node " + std::to_string(c) + " disagrees with child list");
            reached[static_cast<size_t>(c)] = 1;
            stack.push_back(c);
        }
    }
    for (int i = 1; i < count; ++i) {
        if (!reached[static_cast<size_t>(i)]) flag("node " + std::to_string(i) + " unreachable from root");
        const TreeNode& nd = tree.nodes[static_cast<size_t>(i)];
        if (nd.inputs.empty()) flag("node " + std::to_string(i) + " has an empty input set");
        if (nd.children.empty() && nd.states.empty())
            flag("leaf node " + std::to_string(i) + " has an empty state set");
        for (int u : nd.inputs) {
            if (u < 0 || u >= m) {
                flag("input index out of range");
                continue;
            }
            if (seen_in[static_cast<size_t>(u)] >= 0)
                flag("input u" + std::to_string(u + 1) + " assigned to two nodes");
            seen_in[static_cast<size_t>(u)] = i;
        }
        for (int s : nd.states) {
            if (s < 0 || s >= n) {
                flag("state index out of range");
                continue;
            }
            if (seen_st[static_cast<size_t>(s)] >= 0)
                flag("state x" + std::to_string(s + 1) + " assigned to two nodes");
            seen_st[static_cast<size_t>(s)] = i;
        }
    }
    for (int u = 0; u < m; ++u)
        if (seen_in[static_cast<size_t>(u)] < 0) flag("input u" + std::to_string(u + 1) + " unassigned");
    for (int s = 0; s < n; ++s)
        if (seen_st[static_cast<size_t>(s)] < 0) flag("state x" + std::to_string(s + 1) + " unassigned");
    return rep;
}

TreeKeyMatrices key_matrices(const InputTree& tree) {
    const int n = tree.n_states, m = tree.m_inputs;
    TreeKeyMatrices km;
    km.coupling.assign(static_cast<size_t>(m), std::vector<uint8_t>(static_cast<size_t>(m), 0));
    km.dependence.assign(static_cast<size_t>(m), std::vector<uint8_t>(static_cast<size_t>(n), 0));
    for (size_t i = 1; i < tree.nodes.size(); ++i) {
        const TreeNode& nd = tree.nodes[i];
        for (int j : nd.inputs) {
            auto& crow = km.coupling[static_cast<size_t>(j)];
            for (int j2 : nd.inputs)
                if (j2 != j) crow[static_cast<size_t>(j2)] = 1;
            if (nd.parent > 0)
                for (int jp : tree.nodes[static_cast<size_t>(nd.parent)].inputs)
                    crow[static_cast<size_t>(jp)] = 1;
            auto& srow = km.dependence[static_cast<size_t>(j)];
            for (int s : nd.states) srow[static_cast<size_t>(s)] = 1;
        }
    }
    return km;
}

std::string tree_key(const InputTree& tree) {
    if (tree.m_inputs > 255 || tree.n_states > 255)
        throw std::invalid_argument("tree_key supports at most 255 inputs/states");
    TreeKeyMatrices km = key_matrices(tree);
    std::string out;
    out.push_back(static_cast<char>(tree.m_inputs));
    out.push_back(static_cast<char>(tree.n_states));
    int acc = 0, nbits = 0;
    auto push_bit = [&](uint8_t b) {
        acc = (acc << 1) | b;
        if (++nbits == 8) {
            out.push_back(static_cast<char>(acc));
            acc = 0;
            nbits = 0;
        }
    };
    for (const auto& row : km.coupling)
        for (uint8_t b : row) push_bit(b);
    for (const auto& row : km.dependence)
        for (uint8_t b : row) push_bit(b);
    if (nbits > 0) out.push_back(static_cast<char>(acc << (8 - nbits)));
    return out;
}

SubsystemSpec subsystem_of(const InputTree& tree, int node_id) {
    if (node_id <= 0 || node_id >= static_cast<int>(tree.nodes.size()))
        throw std::invalid_argument("subsystem_of: node_id must name a real node");
    SubsystemSpec sub;
    sub.node_id = node_id;
    sub.inputs = tree.nodes[static_cast<size_t>(node_id)].inputs;
    for (int v : tree.subtree(node_id)) {
        const TreeNode& nd = tree.nodes[static_cast<size_t>(v)];
        for (int s : nd.states) sub.states.push_back(s);
        if (v != node_id)
            for (int u : nd.inputs) sub.cascaded.push_back(u);
    }
    std::sort(sub.states.begin(), sub.states.end());
    std::sort(sub.cascaded.begin(), sub.cascaded.end());
    for (int u = 0; u < tree.m_inputs; ++u) {
        bool own = std::binary_search(sub.inputs.begin(), sub.inputs.end(), u);
        bool casc = std::binary_search(sub.cascaded.begin(), sub.cascaded.end(), u);
        if (!own && !casc) sub.decoupled.push_back(u);
    }
    return sub;
}

namespace {

void write_node(const InputTree& tree, int id, std::string& out) {
    const TreeNode& nd = tree.nodes[static_cast<size_t>(id)];
    out.push_back('(');
    for (size_t i = 0; i < nd.inputs.size(); ++i) {
        if (i) out.push_back(',');
        out += "u" + std::to_string(nd.inputs[i] + 1);
    }
    out.push_back('|');
    for (size_t i = 0; i < nd.states.size(); ++i) {
        if (i) out.push_back(',');
        out += "x" + std::to_string(nd.states[i] + 1);
    }
    out.push_back(')');
    if (!nd.children.empty()) {
        out += "->[";
        for (size_t i = 0; i < nd.children.size(); ++i) {
            if (i) out += ", ";
            write_node(tree, nd.children[i], out);
        }
        out.push_back(']');
    }
}

}  // namespace

std::string to_string(const InputTree& tree) {
    std::string out = "[";
    const auto& top = tree.nodes[0].children;
    for (size_t i = 0; i < top.size(); ++i) {
        if (i) out += ", ";
        write_node(tree, top[i], out);
    }
    out.push_back(']');
    return out;
}

namespace {

struct TreeParser {
    const std::string& s;
    size_t pos = 0;

    [[noreturn]] void fail(const std::string& msg) const {
        throw std::runtime_error("tree parse error at offset " + std::to_string(pos) + ": " + msg);
    }
    void ws() {
        while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t' || s[pos] == '\n' || s[pos] == '\r')) ++pos;
    }
    bool peek(char c) {
        ws();
        return pos < s.size() && s[pos] == c;
    }
    void expect(char c) {
        ws();
        if (pos >= s.size() || s[pos] != c) fail(std::string("expected '") + c + "'");
        ++pos;
    }
    bool try_eat(char c) {
        if (peek(c)) {
            ++pos;
            return true;
        }
        return false;
    }

    int label(char kind) {
        ws();
        if (pos >= s.size() || s[pos] != kind)
            fail(std::string("expected '") + kind + "' label");
        ++pos;
        size_t start = pos;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
        if (pos == start) fail("label needs a number");
        long v = std::stol(s.substr(start, pos - start));
        if (v < 1) fail("labels are 1-based");
        return static_cast<int>(v - 1);
    }

    void node(InputTree& t, int parent) {
        expect('(');
        std::vector<int> inputs, states;
        if (!peek('|')) {
            inputs.push_back(label('u'));
            while (try_eat(',')) inputs.push_back(label('u'));
        }
        expect('|');
        if (!peek(')')) {
            states.push_back(label('x'));
            while (try_eat(',')) states.push_back(label('x'));
        }
        expect(')');
        int id = t.add_node(parent, std::move(inputs), std::move(states));
        ws();
        if (pos + 1 < s.size() && s[pos] == '-' && s[pos + 1] == '>') {
            pos += 2;
            expect('[');
            node(t, id);
            while (try_eat(',')) node(t, id);
            expect(']');
        }
    }
};

}  // namespace

InputTree parse_tree(const std::string& text) {
    InputTree t;
    t.nodes.resize(1);
    TreeParser p{text};
    p.expect('[');
    if (!p.peek(']')) {
        p.node(t, 0);
        while (p.try_eat(',')) p.node(t, 0);
    }
    p.expect(']');
    p.ws();
    if (p.pos != text.size()) p.fail("trailing characters");
    int max_u = -1, max_x = -1;
    for (size_t i = 1; i < t.nodes.size(); ++i) {
        for (int u : t.nodes[i].inputs) max_u = std::max(max_u, u);
        for (int x : t.nodes[i].states) max_x = std::max(max_x, x);
    }
    t.m_inputs = max_u + 1;
    t.n_states = max_x + 1;
    ValidationReport rep = validate(t);
    if (!rep.ok) {
        std::string msg = "parsed tree is invalid:";
        for (const auto& is : rep.issues) msg += " " + is + ";";
        throw std::runtime_error(msg);
    }
    return t;
}

InputTree parse_tree(const std::string& text, int n, int m) {
    InputTree t = parse_tree(text);
    if (t.n_states != n || t.m_inputs != m)
        throw std::runtime_error("tree labels cover " + std::to_string(t.n_states) + " states / " +
                                 std::to_string(t.m_inputs) + " inputs, expected " + std::to_string(n) +
                                 "/" + std::to_string(m));
    return t;
}

// ---------------------------------------------------------------------------
// mutation

namespace {

// Renumber nodes in preorder, dropping ones marked removed (parent == -2).
InputTree compact(const InputTree& t) {
    InputTree out;
    out.n_states = t.n_states;
    out.m_inputs = t.m_inputs;
    out.nodes.resize(1);
    struct Item {
        int old_id;
        int new_parent;
    };
    std::vector<Item> stack;
    const auto& top = t.nodes[0].children;
    for (auto it = top.rbegin(); it != top.rend(); ++it) stack.push_back({*it, 0});
    while (!stack.empty()) {
        Item item = stack.back();
        stack.pop_back();
        const TreeNode& nd = t.nodes[static_cast<size_t>(item.old_id)];
        int id = out.add_node(item.new_parent, nd.inputs, nd.states);
        for (auto it = nd.children.rbegin(); it != nd.children.rend(); ++it)
            stack.push_back({*it, id});
    }
    return out;
}

bool repair_empty_leaf(InputTree& t, int id, Rng& rng) {
    TreeNode& nd = t.nodes[static_cast<size_t>(id)];
    if (!nd.children.empty() || !nd.states.empty()) return true;
    int a = nd.parent;
    while (a > 0) {
        TreeNode& anc = t.nodes[static_cast<size_t>(a)];
        if (!anc.states.empty()) {
            size_t k = static_cast<size_t>(rng.below(anc.states.size()));
            int s = anc.states[k];
            anc.states.erase(anc.states.begin() + static_cast<long>(k));
            sorted_insert(t.nodes[static_cast<size_t>(id)].states, s);
            return true;
        }
        a = anc.parent;
    }
    return false;
}

bool op_swap_states(InputTree& t, Rng& rng) {
    std::vector<int> cands;
    for (size_t i = 1; i < t.nodes.size(); ++i)
        if (!t.nodes[i].states.empty()) cands.push_back(static_cast<int>(i));
    if (cands.size() < 2) return false;
    size_t i1 = static_cast<size_t>(rng.below(cands.size()));
    size_t i2 = static_cast<size_t>(rng.below(cands.size() - 1));
    if (i2 >= i1) ++i2;
    TreeNode& a = t.nodes[static_cast<size_t>(cands[i1])];
    TreeNode& b = t.nodes[static_cast<size_t>(cands[i2])];
    size_t ka = static_cast<size_t>(rng.below(a.states.size()));
    size_t kb = static_cast<size_t>(rng.below(b.states.size()));
    int sa = a.states[ka], sb = b.states[kb];
    a.states.erase(a.states.begin() + static_cast<long>(ka));
    b.states.erase(b.states.begin() + static_cast<long>(kb));
    sorted_insert(a.states, sb);
    sorted_insert(b.states, sa);
    return true;
}

bool op_move_state(InputTree& t, Rng& rng) {
    if (t.real_node_count() < 2 || t.n_states == 0) return false;
    int s = static_cast<int>(rng.below(static_cast<uint64_t>(t.n_states)));
    int from = t.node_of_state(s);
    int to = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(t.real_node_count() - 1)));
    if (to >= from) ++to;
    sorted_erase(t.nodes[static_cast<size_t>(from)].states, s);
    sorted_insert(t.nodes[static_cast<size_t>(to)].states, s);
    return repair_empty_leaf(t, from, rng);
}

bool op_move_subtree(InputTree& t, Rng& rng) {
    if (t.real_node_count() < 2) return false;
    int s = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(t.real_node_count())));
    std::vector<int> sub = t.subtree(s);
    int old_parent = t.nodes[static_cast<size_t>(s)].parent;
    std::vector<int> cands;
    for (int v = 0; v < static_cast<int>(t.nodes.size()); ++v) {
        if (v == old_parent) continue;
        if (std::find(sub.begin(), sub.end(), v) != sub.end()) continue;
        cands.push_back(v);
    }
    if (cands.empty()) return false;
    int p = cands[static_cast<size_t>(rng.below(cands.size()))];
    auto& oc = t.nodes[static_cast<size_t>(old_parent)].children;
    oc.erase(std::find(oc.begin(), oc.end(), s));
    t.nodes[static_cast<size_t>(p)].children.push_back(s);
    t.nodes[static_cast<size_t>(s)].parent = p;
    if (old_parent != 0) return repair_empty_leaf(t, old_parent, rng);
    return true;
}

bool op_couple(InputTree& t, int na, int nb, Rng& rng) {
    if (t.real_node_count() <= 2) return false;  // result would be the undecomposed tree
    int da = t.depth(na), db = t.depth(nb);
    int survivor = (da <= db) ? na : nb;
    int other = (survivor == na) ? nb : na;
    TreeNode& so = t.nodes[static_cast<size_t>(other)];
    TreeNode& ss = t.nodes[static_cast<size_t>(survivor)];
    for (int u : so.inputs) sorted_insert(ss.inputs, u);
    for (int s : so.states) sorted_insert(ss.states, s);
    for (int c : so.children) {
        t.nodes[static_cast<size_t>(c)].parent = survivor;
        ss.children.push_back(c);
    }
    int o = so.parent;
    auto& oc = t.nodes[static_cast<size_t>(o)].children;
    oc.erase(std::find(oc.begin(), oc.end(), other));
    so.parent = -2;  // removed
    so.inputs.clear();
    so.states.clear();
    so.children.clear();
    if (o != 0 && o != survivor) return repair_empty_leaf(t, o, rng);
    return true;
}

bool op_decouple(InputTree& t, int v, int a, int b, Rng& rng) {
    TreeNode nd = t.nodes[static_cast<size_t>(v)];  // copy; v gets removed
    std::vector<int> in1{a}, in2{b};
    for (int u : nd.inputs) {
        if (u == a || u == b) continue;
        (rng.chance(0.5) ? in1 : in2).push_back(u);
    }
    std::vector<int> st1, st2;
    for (int s : nd.states) (rng.chance(0.5) ? st1 : st2).push_back(s);
    std::sort(in1.begin(), in1.end());
    std::sort(in2.begin(), in2.end());
    std::sort(st1.begin(), st1.end());
    std::sort(st2.begin(), st2.end());

    int n1 = static_cast<int>(t.nodes.size());
    t.nodes.push_back(TreeNode{in1, st1, nd.parent, {}});
    int n2 = static_cast<int>(t.nodes.size());
    t.nodes.push_back(TreeNode{in2, st2, nd.parent, {}});
    for (int c : nd.children) {
        int target = rng.chance(0.5) ? n1 : n2;
        t.nodes[static_cast<size_t>(c)].parent = target;
        t.nodes[static_cast<size_t>(target)].children.push_back(c);
    }
    auto& pc = t.nodes[static_cast<size_t>(nd.parent)].children;
    auto it = std::find(pc.begin(), pc.end(), v);
    *it = n1;
    pc.insert(it + 1, n2);
    TreeNode& removed = t.nodes[static_cast<size_t>(v)];
    removed.parent = -2;
    removed.inputs.clear();
    removed.states.clear();
    removed.children.clear();
    bool ok1 = repair_empty_leaf(t, n1, rng);
    bool ok2 = repair_empty_leaf(t, n2, rng);
    return ok1 && ok2;
}

bool op_couple_or_decouple(InputTree& t, Rng& rng) {
    if (t.m_inputs < 2) return false;
    int a = static_cast<int>(rng.below(static_cast<uint64_t>(t.m_inputs)));
    int b = static_cast<int>(rng.below(static_cast<uint64_t>(t.m_inputs - 1)));
    if (b >= a) ++b;
    int na = t.node_of_input(a), nb = t.node_of_input(b);
    if (na == nb) return op_decouple(t, na, a, b, rng);
    return op_couple(t, na, nb, rng);
}

}  // namespace

InputTree mutate(const InputTree& tree, Rng& rng, int retry_budget) {
    const std::string key0 = tree_key(tree);
    for (int attempt = 0; attempt < retry_budget; ++attempt) {
        InputTree work = tree;
        double d = rng.real01();
        bool applied;
        if (d < 0.25)
            applied = op_swap_states(work, rng);
        else if (d < 0.5)
            applied = op_move_state(work, rng);
        else if (d < 0.75)
            applied = op_move_subtree(work, rng);
        else
            applied = op_couple_or_decouple(work, rng);
        if (!applied) continue;
        InputTree result = compact(work);
        if (tree_key(result) == key0) continue;
        assert(validate(result).ok);
        return result;
    }
    return tree;
}

}  // namespace polydec
