#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace polydec {

// Deterministic RNG used everywhere. Bounded draws are rejection-based so the
// sequence of outputs depends only on the seed, not on the standard library's
// distribution internals.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t u64() { return eng_(); }

    // uniform integer in [0, n)
    uint64_t below(uint64_t n) {
        if (n == 0) throw std::invalid_argument("Rng::below(0)");
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do { x = eng_(); } while (x >= limit);
        return x % n;
    }

    // uniform double in [0, 1)
    double real01() { return (eng_() >> 11) * 0x1.0p-53; }

    bool chance(double p) { return real01() < p; }

    template <typename T>
    const T& pick(const std::vector<T>& v) {
        return v[static_cast<size_t>(below(v.size()))];
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[static_cast<size_t>(below(i))]);
    }

    // Derive an independent child stream (splitmix64 of seed ^ tag).
    Rng child(uint64_t tag) {
        uint64_t z = eng_() ^ (tag * 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return Rng(z ^ (z >> 31));
    }

private:
    std::mt19937_64 eng_;
};

uint64_t fnv1a64(const std::string& data);
std::string fnv1a64_hex(const std::string& data);

// Run fn(i) for i in [0, n). workers <= 1 runs inline. Results must not
// depend on execution order; each index owns its output slot.
void parallel_for(int64_t n, int workers, const std::function<void(int64_t)>& fn);

std::string trim(const std::string& s);
std::vector<std::string> split(const std::string& s, char sep);

}  // namespace polydec
