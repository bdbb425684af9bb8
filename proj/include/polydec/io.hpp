#pragma once

#include <cstdint>
#include <string>

#include "polydec/dp.hpp"
#include "polydec/systems.hpp"

namespace polydec {

inline constexpr const char* kToolVersion = "0.1.0";

// Flat key=value file, one pair per line, '#' starts a comment. Throws
// std::runtime_error on unreadable files and malformed lines.
KV load_config(const std::string& path);

// Stable hex digest of a canonicalized configuration (sorted key=value
// lines). Embedded in every artifact so runs can be matched to settings.
std::string config_digest(const KV& items);

// Prefixes relative output paths with $POLYDEC_OUT_DIR when set.
std::string resolve_out(const std::string& path);

// A solved decomposition plus everything needed to rebuild its context:
// the model registry name, config overrides, and the tree text.
struct PolicyArtifact {
    std::string model;
    KV overrides;
    std::string tree;
    int n = 0;
    int m = 0;
    uint64_t seed = 0;
    std::string digest;
    PolicyAssembly assembly;
};

// Versioned binary: "PDPB" magic, u32 version, length-prefixed JSON header
// (model, overrides, tree, per-node axes and stats), then per node the
// row-major control and value tables as little-endian doubles.
void save_policy(const std::string& path, const PolicyArtifact& art);
PolicyArtifact load_policy(const std::string& path);

// CSV writers. Leading '#' comment lines carry tool version plus the given
// meta pairs; the first uncommented line names the columns.
// Trajectory columns: t, x1..xn, u1..um.
void write_trajectory_csv(const std::string& path, const SimResult& result, int n, int m,
                          const KV& meta);
// Basin columns: one coordinate per swept state dim, then converged (0/1)
// and the final weighted deviation.
void write_basin_csv(const std::string& path, const BasinField& field, const KV& meta);

}  // namespace polydec
