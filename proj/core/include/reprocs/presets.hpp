#ifndef REPROCS_PRESETS_HPP_
#define REPROCS_PRESETS_HPP_

#include <map>
#include <string>
#include <vector>

#include "reprocs/pipeline.hpp"

namespace reprocs {

// Flat key = value configuration. Section headers ([name]) group keys for
// readability only; keys are globally unique. '#' starts a comment.
using ConfigMap = std::map<std::string, std::string>;

std::vector<std::string> preset_names();

// Built-in desk-scale experiment configurations. Throws std::invalid_argument
// on an unknown name.
ConfigMap preset_config(const std::string& name);

ConfigMap parse_config_string(const std::string& text);
ConfigMap parse_config_file(const std::string& path);
std::string config_to_string(const ConfigMap& cfg);

struct RunPlan {
    ExperimentSpec spec;
    // Nonempty when the run consumes external data instead of the generator.
    std::string frames_file;
    std::string basis_checkpoint;
};

// Validates every key and builds the experiment. Error messages name the
// offending key.
RunPlan build_run(const ConfigMap& cfg);

}  // namespace reprocs

#endif  // REPROCS_PRESETS_HPP_
