#include "polydec/enumeration.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace polydec {

namespace {

BigInt bpow(BigInt base, int e) {
    if (e == 0) return 1;  // includes 0^0, which the census sums rely on
    BigInt acc = 1;
    while (e > 0) {
        if (e & 1) acc *= base;
        base *= base;
        e >>= 1;
    }
    return acc;
}

}  // namespace

BigInt binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    BigInt acc = 1;
    for (int i = 1; i <= k; ++i) {
        acc *= (n - k + i);
        acc /= i;
    }
    return acc;
}

BigInt surjections(int a, int b) {
    if (b < 0 || b > a) return 0;
    if (a == 0) return b == 0 ? 1 : 0;
    BigInt acc = 0;
    for (int c = 0; c < b; ++c) {
        BigInt term = binomial(b, c) * bpow(b - c, a);
        if (c & 1)
            acc -= term;
        else
            acc += term;
    }
    return acc;
}

BigInt stirling2(int m, int r) {
    if (r < 0 || r > m) return 0;
    BigInt fact = 1;
    for (int i = 2; i <= r; ++i) fact *= i;
    return surjections(m, r) / fact;
}

namespace {

// assignments of n states to r group labels that hit all k leaf labels
BigInt state_assignment_count(int n, int r, int k) {
    BigInt acc = 0;
    for (int i = 0; i <= n - k; ++i)
        acc += binomial(n, i) * surjections(n - i, k) * bpow(r - k, i);
    return acc;
}

// tree codes of length r-1 over labels {0..r} whose decoded tree, rooted at
// the virtual label r, has exactly k childless labels
BigInt shape_count(int r, int k) {
    return binomial(r, k) * (surjections(r - 1, r - k) + surjections(r - 1, r - k + 1));
}

}  // namespace

CountBreakdown count_decompositions(int n, int m) {
    if (n < 1) throw std::invalid_argument("count_decompositions: need at least one state");
    if (m < 2) throw std::invalid_argument("count_decompositions: need at least two inputs");
    CountBreakdown out;
    out.n = n;
    out.m = m;
    out.total = 0;
    for (int r = 2; r <= m; ++r) {
        BigInt groups = stirling2(m, r);
        for (int k = 1; k <= r; ++k) {
            BigInt c = groups * shape_count(r, k) * state_assignment_count(n, r, k);
            out.entries.push_back({r, k, c});
            out.total += c;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// shared tree-code machinery

namespace {

// Decode a code of length r-1 over vertices {0..r} into child lists of the
// tree rooted at vertex r. Children are listed in ascending label order.
std::vector<std::vector<int>> decode_code(const std::vector<int>& seq, int r) {
    const int V = r + 1;
    std::vector<int> deg(static_cast<size_t>(V), 1);
    for (int x : seq) deg[static_cast<size_t>(x)]++;
    std::set<int> leaves;
    for (int v = 0; v < V; ++v)
        if (deg[static_cast<size_t>(v)] == 1) leaves.insert(v);
    std::vector<std::vector<int>> adj(static_cast<size_t>(V));
    for (int x : seq) {
        int l = *leaves.begin();
        leaves.erase(leaves.begin());
        adj[static_cast<size_t>(l)].push_back(x);
        adj[static_cast<size_t>(x)].push_back(l);
        deg[static_cast<size_t>(l)] = 0;
        if (--deg[static_cast<size_t>(x)] == 1) leaves.insert(x);
    }
    int a = -1, b = -1;
    for (int v = 0; v < V; ++v) {
        if (deg[static_cast<size_t>(v)] == 1) {
            if (a < 0)
                a = v;
            else
                b = v;
        }
    }
    adj[static_cast<size_t>(a)].push_back(b);
    adj[static_cast<size_t>(b)].push_back(a);

    std::vector<std::vector<int>> children(static_cast<size_t>(V));
    std::vector<int> stack{r};
    std::vector<char> seen(static_cast<size_t>(V), 0);
    seen[static_cast<size_t>(r)] = 1;
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        auto& nb = adj[static_cast<size_t>(v)];
        std::sort(nb.begin(), nb.end());
        for (int w : nb) {
            if (seen[static_cast<size_t>(w)]) continue;
            seen[static_cast<size_t>(w)] = 1;
            children[static_cast<size_t>(v)].push_back(w);
            stack.push_back(w);
        }
    }
    return children;
}

InputTree build_tree(int n, int m, const std::vector<std::vector<int>>& blocks,
                     const std::vector<std::vector<int>>& children,
                     const std::vector<int>& state_label) {
    const int r = static_cast<int>(blocks.size());
    std::vector<std::vector<int>> states_of(static_cast<size_t>(r));
    for (int s = 0; s < n; ++s) states_of[static_cast<size_t>(state_label[static_cast<size_t>(s)])].push_back(s);

    InputTree t;
    t.n_states = n;
    t.m_inputs = m;
    t.nodes.resize(1);
    // preorder over labels starting from the virtual label r
    std::vector<std::pair<int, int>> stack;  // (label, parent node id)
    const auto& top = children[static_cast<size_t>(r)];
    for (auto it = top.rbegin(); it != top.rend(); ++it) stack.push_back({*it, 0});
    while (!stack.empty()) {
        auto [label, parent] = stack.back();
        stack.pop_back();
        int id = t.add_node(parent, blocks[static_cast<size_t>(label)], states_of[static_cast<size_t>(label)]);
        const auto& ch = children[static_cast<size_t>(label)];
        for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back({*it, id});
    }
    return t;
}

void gen_partitions(int m, int r, std::vector<int>& rgs, int pos, int used,
                    const std::function<void(const std::vector<int>&)>& emit) {
    if (pos == m) {
        if (used == r) emit(rgs);
        return;
    }
    // can't finish if remaining positions can't open the missing classes
    if (used + (m - pos) < r) return;
    for (int c = 0; c < std::min(used + 1, r); ++c) {
        rgs[static_cast<size_t>(pos)] = c;
        gen_partitions(m, r, rgs, pos + 1, std::max(used, c + 1), emit);
    }
}

}  // namespace

std::vector<InputTree> enumerate_all(int n, int m, uint64_t cap) {
    CountBreakdown census = count_decompositions(n, m);
    if (census.total > cap)
        throw std::runtime_error("enumerate_all: census " + census.total.str() + " exceeds cap " +
                                 std::to_string(cap));
    std::vector<InputTree> out;
    for (int r = 2; r <= m; ++r) {
        std::vector<int> rgs(static_cast<size_t>(m), 0);
        gen_partitions(m, r, rgs, 0, 0, [&](const std::vector<int>& labels) {
            std::vector<std::vector<int>> blocks(static_cast<size_t>(r));
            for (int i = 0; i < m; ++i) blocks[static_cast<size_t>(labels[static_cast<size_t>(i)])].push_back(i);

            const int seq_len = r - 1;
            std::vector<int> seq(static_cast<size_t>(seq_len), 0);
            for (;;) {
                auto children = decode_code(seq, r);
                std::vector<int> leaf_labels;
                for (int v = 0; v < r; ++v)
                    if (children[static_cast<size_t>(v)].empty()) leaf_labels.push_back(v);

                std::vector<int> assign(static_cast<size_t>(n), 0);
                for (;;) {
                    bool covered = true;
                    for (int lf : leaf_labels) {
                        if (std::find(assign.begin(), assign.end(), lf) == assign.end()) {
                            covered = false;
                            break;
                        }
                    }
                    if (covered) out.push_back(build_tree(n, m, blocks, children, assign));
                    int j = 0;
                    while (j < n && ++assign[static_cast<size_t>(j)] == r) {
                        assign[static_cast<size_t>(j)] = 0;
                        ++j;
                    }
                    if (j == n) break;
                }

                int j = 0;
                while (j < seq_len && ++seq[static_cast<size_t>(j)] == r + 1) {
                    seq[static_cast<size_t>(j)] = 0;
                    ++j;
                }
                if (j == seq_len) break;
                if (seq_len == 0) break;
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// uniform sampling

namespace {

BigInt uniform_big(Rng& rng, const BigInt& bound) {
    if (bound <= 0) throw std::invalid_argument("uniform_big: bound must be positive");
    if (bound == 1) return 0;
    const unsigned bits = boost::multiprecision::msb(bound - 1) + 1;
    const unsigned words = (bits + 63) / 64;
    for (;;) {
        BigInt x = 0;
        for (unsigned w = 0; w < words; ++w) {
            x <<= 64;
            x += rng.u64();
        }
        x >>= (words * 64 - bits);
        if (x < bound) return x;
    }
}

// Unrank the idx-th restricted-growth string over m elements with exactly r
// classes (lexicographic order).
std::vector<int> unrank_partition(int m, int r, BigInt idx) {
    // completions[i][j]: suffixes from position i when j classes are open
    std::vector<std::vector<BigInt>> completions(static_cast<size_t>(m + 1),
                                                 std::vector<BigInt>(static_cast<size_t>(r + 2), 0));
    for (int j = 0; j <= r + 1; ++j) completions[static_cast<size_t>(m)][static_cast<size_t>(j)] = (j == r) ? 1 : 0;
    for (int i = m - 1; i >= 1; --i) {
        for (int j = 1; j <= r; ++j) {
            BigInt c = BigInt(j) * completions[static_cast<size_t>(i + 1)][static_cast<size_t>(j)];
            if (j < r) c += completions[static_cast<size_t>(i + 1)][static_cast<size_t>(j + 1)];
            completions[static_cast<size_t>(i)][static_cast<size_t>(j)] = c;
        }
    }
    std::vector<int> rgs(static_cast<size_t>(m), 0);
    int used = 1;  // element 0 always opens class 0
    for (int i = 1; i < m; ++i) {
        BigInt per_existing = completions[static_cast<size_t>(i + 1)][static_cast<size_t>(used)];
        BigInt existing_total = BigInt(used) * per_existing;
        if (idx < existing_total) {
            int c = static_cast<int>(idx / per_existing);
            rgs[static_cast<size_t>(i)] = c;
            idx -= BigInt(c) * per_existing;
        } else {
            idx -= existing_total;
            rgs[static_cast<size_t>(i)] = used;
            ++used;
        }
    }
    if (used != r) throw std::logic_error("unrank_partition: class count mismatch");
    return rgs;
}

// uniform surjective sequence of given length onto alphabet (rejection)
std::vector<int> uniform_surjection(Rng& rng, int length, const std::vector<int>& alphabet) {
    const size_t a = alphabet.size();
    std::vector<int> seq(static_cast<size_t>(length));
    std::vector<char> hit(a);
    for (uint64_t attempt = 0; attempt < 10000000ull; ++attempt) {
        std::fill(hit.begin(), hit.end(), 0);
        size_t distinct = 0;
        for (int i = 0; i < length; ++i) {
            size_t c = static_cast<size_t>(rng.below(a));
            seq[static_cast<size_t>(i)] = alphabet[c];
            if (!hit[c]) {
                hit[c] = 1;
                ++distinct;
            }
        }
        if (distinct == a) return seq;
    }
    throw std::runtime_error("uniform_surjection: rejection budget exhausted");
}

std::vector<int> uniform_subset(Rng& rng, int universe, int size) {
    std::vector<int> pool(static_cast<size_t>(universe));
    for (int i = 0; i < universe; ++i) pool[static_cast<size_t>(i)] = i;
    for (int i = 0; i < size; ++i) {
        size_t j = static_cast<size_t>(i) + static_cast<size_t>(rng.below(static_cast<uint64_t>(universe - i)));
        std::swap(pool[static_cast<size_t>(i)], pool[j]);
    }
    std::vector<int> out(pool.begin(), pool.begin() + size);
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

UniformTreeSampler::UniformTreeSampler(int n, int m)
    : n_(n), m_(m), census_(count_decompositions(n, m)) {
    if (census_.total == 0) throw std::invalid_argument("no valid decompositions for these dimensions");
}

InputTree UniformTreeSampler::draw(Rng& rng) const {
    // joint (r, k) draw proportional to census weight
    BigInt x = uniform_big(rng, census_.total);
    const CountBreakdown::Entry* picked = nullptr;
    for (const auto& e : census_.entries) {
        if (x < e.count) {
            picked = &e;
            break;
        }
        x -= e.count;
    }
    const int r = picked->r, k = picked->k;

    // input partition
    BigInt pidx = uniform_big(rng, stirling2(m_, r));
    std::vector<int> rgs = unrank_partition(m_, r, pidx);
    std::vector<std::vector<int>> blocks(static_cast<size_t>(r));
    for (int i = 0; i < m_; ++i) blocks[static_cast<size_t>(rgs[static_cast<size_t>(i)])].push_back(i);

    // tree code: either the virtual label r stays out of the code (its node
    // keeps a single branch) or it appears (several branches); weights are
    // the surjection counts of the two families
    BigInt w_absent = surjections(r - 1, r - k);
    BigInt w_present = surjections(r - 1, r - k + 1);
    BigInt fam = uniform_big(rng, w_absent + w_present);
    std::vector<int> appearing = uniform_subset(rng, r, r - k);
    std::vector<int> seq;
    if (fam < w_absent) {
        seq = uniform_surjection(rng, r - 1, appearing);
    } else {
        appearing.push_back(r);
        seq = uniform_surjection(rng, r - 1, appearing);
    }
    auto children = decode_code(seq, r);
    std::vector<int> leaf_labels;
    for (int v = 0; v < r; ++v)
        if (children[static_cast<size_t>(v)].empty()) leaf_labels.push_back(v);
    if (static_cast<int>(leaf_labels.size()) != k)
        throw std::logic_error("tree code leaf count mismatch");

    // state labels: uniform with full leaf coverage
    std::vector<int> assign(static_cast<size_t>(n_));
    for (uint64_t attempt = 0;; ++attempt) {
        if (attempt >= 10000000ull) throw std::runtime_error("state labeling rejection budget exhausted");
        for (int s = 0; s < n_; ++s) assign[static_cast<size_t>(s)] = static_cast<int>(rng.below(static_cast<uint64_t>(r)));
        bool covered = true;
        for (int lf : leaf_labels) {
            if (std::find(assign.begin(), assign.end(), lf) == assign.end()) {
                covered = false;
                break;
            }
        }
        if (covered) break;
    }
    return build_tree(n_, m_, blocks, children, assign);
}

InputTree sample_uniform(int n, int m, Rng& rng) {
    UniformTreeSampler sampler(n, m);
    return sampler.draw(rng);
}

}  // namespace polydec
