#include "config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <string>

#include "bonelayer/error.hpp"

namespace bonelayer::cli {

namespace {

// Reads typed fields from one JSON object and remembers which keys were
// used, so leftovers can be reported.
class Fields {
 public:
  Fields(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw InvalidInput(where_ + ": expected a JSON object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  const Json& raw(const char* key) {
    used_.insert(key);
    return j_.at(key);
  }

  void read(const char* key, double& out) {
    if (!has(key)) return;
    const Json& v = raw(key);
    if (!v.is_number()) fail(key, "a number");
    out = v.get<double>();
  }

  void read(const char* key, int& out) {
    if (!has(key)) return;
    const Json& v = raw(key);
    if (!v.is_number_integer()) fail(key, "an integer");
    out = v.get<int>();
  }

  void read(const char* key, bool& out) {
    if (!has(key)) return;
    const Json& v = raw(key);
    if (!v.is_boolean()) fail(key, "a boolean");
    out = v.get<bool>();
  }

  void read(const char* key, std::uint64_t& out) {
    if (!has(key)) return;
    const Json& v = raw(key);
    if (!v.is_number_unsigned()) fail(key, "a non-negative integer");
    out = v.get<std::uint64_t>();
  }

  void read(const char* key, SolverConfig& out) {
    if (!has(key)) return;
    out = solver_from_json(raw(key));
  }

  /// Throws if the object holds keys that were never read.
  void finish() const {
    for (const auto& item : j_.items()) {
      if (!used_.contains(item.key())) {
        throw InvalidInput(where_ + ": unknown key \"" + item.key() + "\"");
      }
    }
  }

 private:
  [[noreturn]] void fail(const char* key, const char* expected) const {
    throw InvalidInput(where_ + ": \"" + key + "\" must be " + expected);
  }

  const Json& j_;
  std::string where_;
  std::set<std::string> used_;
};

}  // namespace

Json read_config(const std::optional<std::filesystem::path>& path) {
  if (!path) return Json::object();
  std::ifstream in(*path);
  if (!in) throw IoError(path->string(), "cannot open config file");
  try {
    Json j = Json::parse(in);
    if (!j.is_object()) throw IoError(path->string(), "config must be a JSON object");
    return j;
  } catch (const Json::parse_error& e) {
    throw IoError(path->string(), std::string("malformed JSON: ") + e.what());
  }
}

SolverConfig solver_from_json(const Json& j) {
  SolverConfig c;
  Fields f(j, "solver");
  f.read("tolerance", c.tolerance);
  f.read("max_iterations", c.max_iterations);
  f.read("relaxation", c.relaxation);
  if (f.has("order")) {
    const Json& v = f.raw("order");
    if (v == "forward") {
      c.order = SweepOrder::kForward;
    } else if (v == "reverse") {
      c.order = SweepOrder::kReverse;
    } else {
      throw InvalidInput("solver: \"order\" must be \"forward\" or \"reverse\"");
    }
  }
  f.finish();
  c.validate();
  return c;
}

PhantomSpec phantom_from_json(const Json& j) {
  int side = 256;
  if (j.is_object() && j.contains("side")) {
    if (!j["side"].is_number_integer()) throw InvalidInput("phantom: \"side\" must be an integer");
    side = j["side"].get<int>();
  }
  PhantomSpec s = PhantomSpec::with_side(side);
  Fields f(j, "phantom");
  f.read("side", s.side);
  f.read("rim_width", s.rim_width);
  f.read("rim_absorption", s.rim_absorption);
  f.read("interior_absorption", s.interior_absorption);
  f.read("texture_amplitude", s.texture_amplitude);
  f.read("texture_scale", s.texture_scale);
  f.read("soft_tissue_absorption", s.soft_tissue_absorption);
  f.read("soft_tissue_variation", s.soft_tissue_variation);
  f.read("seed", s.seed);
  if (f.has("bones")) {
    const Json& bones = f.raw("bones");
    if (!bones.is_array() || bones.size() != s.bones.size()) {
      throw InvalidInput("phantom: \"bones\" must be an array of two capsules");
    }
    for (std::size_t i = 0; i < s.bones.size(); ++i) {
      Capsule& c = s.bones[i];
      Fields b(bones[i], "phantom.bones[" + std::to_string(i) + "]");
      b.read("cx", c.cx);
      b.read("cy", c.cy);
      b.read("half_length", c.half_length);
      b.read("radius", c.radius);
      b.read("angle", c.angle);
      b.finish();
    }
  }
  f.finish();
  s.validate();
  return s;
}

OverlapSpec overlap_from_json(const Json& j) {
  OverlapSpec s;
  Fields f(j, "synthesize");
  f.read("shift_min", s.shift_min);
  f.read("shift_max", s.shift_max);
  f.read("seed", s.seed);
  f.read("require_overlap", s.require_overlap);
  f.read("max_retries", s.max_retries);
  f.read("solver", s.solver);
  f.finish();
  return s;
}

SeparatorConfig separator_from_json(const Json& j) {
  SeparatorConfig c;
  Fields f(j, "separate");
  f.read("step_size", c.step_size);
  f.read("max_iterations", c.max_iterations);
  f.read("relative_decrease", c.relative_decrease);
  f.read("decrease_window", c.decrease_window);
  f.read("w_rec", c.w_rec);
  f.read("w_cap", c.w_cap);
  f.read("w_tv", c.w_tv);
  f.read("init_solver", c.init_solver);
  f.finish();
  c.validate();
  return c;
}

TrialSpec trial_from_json(const Json& j) {
  TrialSpec s;
  Fields f(j, "trial");
  f.read("side", s.side);
  f.read("shift_max", s.shift_max);
  f.read("lateral_max", s.lateral_max);
  f.read("search_radius", s.search_radius);
  f.read("noise_sigma", s.noise_sigma);
  f.read("require_unequal", s.require_unequal);
  f.read("require_overlap", s.require_overlap);
  f.read("solver", s.solver);
  f.finish();
  s.validate();
  return s;
}

Json to_json(const SolverConfig& c) {
  return {{"tolerance", c.tolerance},
          {"max_iterations", c.max_iterations},
          {"relaxation", c.relaxation},
          {"order", c.order == SweepOrder::kForward ? "forward" : "reverse"}};
}

Json to_json(const Capsule& c) {
  return {{"cx", c.cx}, {"cy", c.cy}, {"half_length", c.half_length}, {"radius", c.radius},
          {"angle", c.angle}};
}

Json to_json(const PhantomSpec& s) {
  Json bones = Json::array();
  for (const auto& b : s.bones) bones.push_back(to_json(b));
  return {{"side", s.side},
          {"bones", bones},
          {"rim_width", s.rim_width},
          {"rim_absorption", s.rim_absorption},
          {"interior_absorption", s.interior_absorption},
          {"texture_amplitude", s.texture_amplitude},
          {"texture_scale", s.texture_scale},
          {"soft_tissue_absorption", s.soft_tissue_absorption},
          {"soft_tissue_variation", s.soft_tissue_variation},
          {"seed", s.seed}};
}

Json to_json(const OverlapSpec& s) {
  return {{"shift_min", s.shift_min},
          {"shift_max", s.shift_max},
          {"seed", s.seed},
          {"require_overlap", s.require_overlap},
          {"max_retries", s.max_retries},
          {"solver", to_json(s.solver)}};
}

Json to_json(const SeparatorConfig& c) {
  return {{"step_size", c.step_size},
          {"max_iterations", c.max_iterations},
          {"relative_decrease", c.relative_decrease},
          {"decrease_window", c.decrease_window},
          {"w_rec", c.w_rec},
          {"w_cap", c.w_cap},
          {"w_tv", c.w_tv},
          {"init_solver", to_json(c.init_solver)}};
}

Json to_json(const TrialSpec& s) {
  return {{"side", s.side},
          {"shift_max", s.shift_max},
          {"lateral_max", s.lateral_max},
          {"search_radius", s.search_radius},
          {"noise_sigma", s.noise_sigma},
          {"require_unequal", s.require_unequal},
          {"require_overlap", s.require_overlap},
          {"solver", to_json(s.solver)}};
}

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("BONELAYER_SEED");
  if (v == nullptr || *v == '\0') return std::nullopt;
  const std::string text(v);
  if (text.find_first_not_of("0123456789") != std::string::npos) {
    throw InvalidInput("BONELAYER_SEED must be a non-negative integer, got \"" + text + "\"");
  }
  try {
    return std::stoull(text);
  } catch (const std::out_of_range&) {
    throw InvalidInput("BONELAYER_SEED is out of range: " + text);
  }
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, const Json& file) {
  if (flag) return *flag;
  if (file.contains("seed")) {
    if (!file["seed"].is_number_unsigned()) {
      throw InvalidInput("config: \"seed\" must be a non-negative integer");
    }
    return file["seed"].get<std::uint64_t>();
  }
  if (auto e = env_seed()) return *e;
  return 0;
}

}  // namespace bonelayer::cli
