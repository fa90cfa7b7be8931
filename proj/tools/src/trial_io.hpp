#pragma once

#include <filesystem>
#include <vector>

#include "bonelayer/registration.hpp"

namespace bonelayer::cli {

/// Trial directory layout: fixed.png, moving.png, fixed_mask_<bone>.png,
/// moving_mask_<bone>.png and trial.json (seed, search_radius, truth).
void write_trial(const std::filesystem::path& dir, const RegistrationTrial& trial);
RegistrationTrial read_trial(const std::filesystem::path& dir);

/// Reads every subdirectory of `root` that holds a trial.json, in name order.
std::vector<RegistrationTrial> read_trials(const std::filesystem::path& root);

}  // namespace bonelayer::cli
