#pragma once

#include <string>
#include <vector>

#include "mf/scenegen.hpp"

namespace mf {

// Runs one CLI invocation (args exclude the program name). Returns the
// process exit code; failures print a one-line diagnostic to stderr.
int run_cli(const std::vector<std::string>& args);

// Scene file format (JSON): {seed, background: {color, depth}, spheres:
// [{center, radius, color, class}]}.
void save_scene_json(const std::string& path, const AnalyticScene& scene);
AnalyticScene load_scene_json(const std::string& path);

}  // namespace mf
