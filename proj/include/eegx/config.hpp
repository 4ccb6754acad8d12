#pragma once

// Run configuration files: "[section]" headers and "key = value" lines,
// '#' or ';' comments. Typed getters with defaults; unknown keys are
// rejected at assembly time so typos fail loudly.

#include <map>
#include <string>

#include "eegx/model.hpp"
#include "eegx/train.hpp"

namespace eegx {

class RunConfig {
 public:
  static RunConfig load(const std::string& path);
  static RunConfig from_string(const std::string& text);

  bool has(const std::string& section, const std::string& key) const;
  std::string get_str(const std::string& section, const std::string& key,
                      const std::string& fallback) const;
  long get_int(const std::string& section, const std::string& key,
               long fallback) const;
  real get_real(const std::string& section, const std::string& key,
                real fallback) const;
  bool get_bool(const std::string& section, const std::string& key,
                bool fallback) const;

  const std::map<std::string, std::map<std::string, std::string>>& sections()
      const {
    return sections_;
  }

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

struct RunSpec {
  ModelConfig model;
  TrainConfig train;
  std::string dataset_dir;
  std::string atlas_path;  // empty: bundled mesh
  std::string out_dir{"runs/out"};
};

// Assembles the typed run spec; throws on unknown sections or keys.
RunSpec parse_run_spec(const RunConfig& cfg);

// Serializes a spec back to config-file text (the format written next to
// training outputs for reproducibility).
std::string run_spec_to_text(const RunSpec& spec);

}  // namespace eegx
