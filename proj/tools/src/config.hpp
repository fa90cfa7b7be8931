#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include <json.hpp>

#include "bonelayer/laplace.hpp"
#include "bonelayer/registration.hpp"
#include "bonelayer/separator.hpp"
#include "bonelayer/synthesizer.hpp"

namespace bonelayer::cli {

using Json = nlohmann::ordered_json;

/// Parses a JSON config file; an absent path yields an empty object.
Json read_config(const std::optional<std::filesystem::path>& path);

// Each parser starts from the defaults, applies the keys present in `j` and
// rejects unknown keys or wrongly typed values with InvalidInput.
SolverConfig solver_from_json(const Json& j);
PhantomSpec phantom_from_json(const Json& j);
OverlapSpec overlap_from_json(const Json& j);
SeparatorConfig separator_from_json(const Json& j);
TrialSpec trial_from_json(const Json& j);

Json to_json(const SolverConfig& c);
Json to_json(const Capsule& c);
Json to_json(const PhantomSpec& s);
Json to_json(const OverlapSpec& s);
Json to_json(const SeparatorConfig& c);
Json to_json(const TrialSpec& s);

/// Seed precedence: flag, then the config file's "seed", then BONELAYER_SEED,
/// then 0.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, const Json& file);

/// Parses BONELAYER_SEED; nullopt when unset. Throws InvalidInput when set to
/// something other than a non-negative integer.
std::optional<std::uint64_t> env_seed();

}  // namespace bonelayer::cli
