#pragma once

#include <cstdint>
#include <string>

#include "sqed/fock.hpp"
#include "sqed/lattice.hpp"
#include "sqed/scattering.hpp"

namespace sqed {

// Resolved run description shared by every subcommand. Parsing fills in
// defaults for missing keys; unknown keys at any level are an error, so a
// typo never silently falls back to a default.

enum class Backend { Gaussian, Fock };

struct BackendConfig {
    Backend kind = Backend::Fock;
    int n_max = 4;
    Rep rep = Rep::Particle;
    std::int64_t max_dimension = 5'000'000;  // refuse Fock spaces above this
};

struct RunBlock {
    InteractionVariant variant = InteractionVariant::Full;
    int sign = -1;
    int n_samples = 64;
    double constraint_epsilon = 1e-3;
    bool truncation_check = true;
};

struct OutputConfig {
    std::uint64_t seed = 20260818ULL;
    std::string report_path;  // empty: stdout
    std::string trace_path;   // empty: trace not written
};

struct RunConfig {
    LatticeConfig lattice{1, 2, 1.0};
    BackendConfig backend;
    ScheduleParams schedule;
    WavepacketSpec in_state;  // default: scalar/antiscalar pair at rest
    RunBlock run;
    OutputConfig output;

    ScatterOptions scatter_options() const;
};

RunConfig default_run_config();

// Throws ConfigError naming the offending key path on unknown keys, type
// mismatches, or unrecognized enum spellings.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

// Canonical form: every block present, every field resolved, fixed key
// order. parse(serialize(c)) reproduces c bit for bit.
std::string serialize_config(const RunConfig& cfg);
std::uint64_t config_hash(const RunConfig& cfg);

const char* backend_name(Backend b);
const char* rep_name(Rep r);
const char* variant_name(InteractionVariant v);

}  // namespace sqed
