#pragma once

#include <cstdint>
#include <filesystem>

namespace isearch {

/// Knobs of the synthetic microdata generator. Three planted parent
/// age/education/income blobs sit among the families with small children;
/// childless couples are spread across ages with their own housing and
/// income mix; noise households (incomplete, disabled parent, older or too
/// many children) exercise the cohort filters.
struct SynthParams {
    std::uint64_t seed = 1;
    std::size_t families_per_blob = 120;
    std::size_t childless = 260;
    std::size_t noise = 60;
};

struct SynthOutput {
    std::filesystem::path microdata;
    std::filesystem::path schema;
    std::filesystem::path config;
};

/// Writes microdata.dat (fixed-width), schema.json and a ready-to-run
/// config.json into `dir`. Deterministic: the same params produce the same
/// bytes. The config's relative paths expect the pipeline to run from
/// `dir`.
SynthOutput write_synth_dataset(const std::filesystem::path& dir,
                                const SynthParams& params);

}
