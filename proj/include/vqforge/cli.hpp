#pragma once

// Command-line front end.
//
// Exit codes: 0 success, 1 unexpected failure, 2 input error, 3 repair
// failure (no code extracted), 4 backend failure.

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "vqforge/llm_gateway.hpp"
#include "vqforge/pipeline.hpp"

namespace vqforge {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUnexpected = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kExitRepair = 3;
inline constexpr int kExitBackend = 4;

/// Built-in configuration. Keys: backend, url, model, store, mock_script,
/// record, temperature, max_tokens, max_retries, templates, builtins,
/// exemplars, include_bare_attributes, exclude_names, runs, seeds, timeout_s,
/// parallelism, output_dir.
nlohmann::json default_config();

/// Overlays `overrides` onto `base`. Throws InvalidInput on an unknown key or
/// a value whose JSON type differs from the default's.
void merge_config(nlohmann::json& base, const nlohmann::json& overrides);

/// Converts a command-line string to the type of `key`'s default.
nlohmann::json parse_config_value(const std::string& key, const std::string& text);

/// Reads a config file and resolves relative paths against its directory.
nlohmann::json load_config_file(const std::filesystem::path& path);

/// Throws InvalidInput unless data paths exist and runs matches seeds.
/// Backend paths are checked when the gateway is built.
void validate_config(const nlohmann::json& cfg);

/// Backend selected by `cfg`; the API key comes from VQFORGE_API_KEY.
std::unique_ptr<LlmGateway> make_gateway(const nlohmann::json& cfg);

/// Templates, localizer settings, exemplars and decoding from `cfg`.
/// The gateway pointer is left null.
PipelineDeps make_pipeline_deps(const nlohmann::json& cfg, TemplateSet& templates_storage);

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace vqforge
