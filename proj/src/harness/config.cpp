// Copyright 2026 The ViCA Engine Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>

#include "vica/errors.hpp"
#include "vica/harness.hpp"

namespace vica::harness {

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::kCost: return "cost";
    case Mode::kDiagnose: return "diagnose";
    case Mode::kEquivalence: return "equivalence";
    case Mode::kBench: return "bench";
  }
  return "?";
}

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  if (value.empty() || !std::all_of(value.begin(), value.end(), [](char c) {
        return c >= '0' && c <= '9';
      })) {
    throw ConfigError(key + ": expected a nonnegative integer, got '" + value + "'");
  }
  errno = 0;
  const unsigned long long v = std::strtoull(value.c_str(), nullptr, 10);
  if (errno == ERANGE) throw ConfigError(key + ": value out of range");
  return v;
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  return static_cast<std::size_t>(parse_u64(key, value));
}

double parse_double(const std::string& key, const std::string& value) {
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(value.c_str(), &end);
  if (value.empty() || end != value.c_str() + value.size() || errno == ERANGE) {
    throw ConfigError(key + ": expected a number, got '" + value + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError(key + ": expected true/false, got '" + value + "'");
}

std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  for (const auto& item : split(value, ',')) out.push_back(parse_size(key, item));
  if (out.empty()) throw ConfigError(key + ": expected a comma-separated list");
  return out;
}

std::vector<DropEvent> parse_drops(const std::string& value) {
  std::vector<DropEvent> out;
  for (const auto& item : split(value, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      throw ConfigError("drops: expected layer:keep pairs, got '" + item + "'");
    }
    out.push_back({parse_size("drops", trim(item.substr(0, colon))),
                   parse_double("drops", trim(item.substr(colon + 1)))});
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <typename T, typename F>
std::string join(const std::vector<T>& items, F&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ",";
    out += fmt(items[i]);
  }
  return out;
}

Mode parse_mode(const std::string& value) {
  for (Mode m : {Mode::kCost, Mode::kDiagnose, Mode::kEquivalence, Mode::kBench}) {
    if (mode_name(m) == value) return m;
  }
  throw ConfigError("mode: unknown mode '" + value + "'");
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> kSetters = {
      {"mode", [](auto& c, auto&, auto& v) { c.mode = parse_mode(v); }},
      {"preset", [](auto& c, auto&, auto& v) { c.preset = v; }},
      {"n_layers", [](auto& c, auto& k, auto& v) { c.n_layers = parse_size(k, v); }},
      {"n_heads", [](auto& c, auto& k, auto& v) { c.n_heads = parse_size(k, v); }},
      {"d_model", [](auto& c, auto& k, auto& v) { c.d_model = parse_size(k, v); }},
      {"d_ffn", [](auto& c, auto& k, auto& v) { c.d_ffn = parse_size(k, v); }},
      {"vocab", [](auto& c, auto& k, auto& v) { c.vocab = parse_size(k, v); }},
      {"schedule", [](auto& c, auto&, auto& v) { c.schedule = v; }},
      {"drops",
       [](auto& c, auto&, auto& v) {
         if (v == "none") {
           c.drops = std::vector<DropEvent>{};
         } else {
           c.drops = parse_drops(v);
         }
       }},
      {"drop_timing",
       [](auto& c, auto& k, auto& v) {
         if (v == "entry") {
           c.drop_timing = DropTiming::kAtEntry;
         } else if (v == "after") {
           c.drop_timing = DropTiming::kAfterLayer;
         } else {
           throw ConfigError(k + ": expected entry or after, got '" + v + "'");
         }
       }},
      {"scorer",
       [](auto& c, auto& k, auto& v) {
         if (v == "last_query") {
           c.scorer = ImportanceScorer::kLastQuery;
         } else if (v == "mean_all") {
           c.scorer = ImportanceScorer::kMeanAllQueries;
         } else {
           throw ConfigError(k + ": expected last_query or mean_all, got '" + v + "'");
         }
       }},
      {"n", [](auto& c, auto& k, auto& v) { c.n = parse_size(k, v); }},
      {"t_s", [](auto& c, auto& k, auto& v) { c.t_s = parse_size(k, v); }},
      {"t_q", [](auto& c, auto& k, auto& v) { c.t_q = parse_size(k, v); }},
      {"seed", [](auto& c, auto& k, auto& v) { c.seed = parse_u64(k, v); }},
      {"out_dir", [](auto& c, auto&, auto& v) { c.out_dir = v; }},
      {"golden", [](auto& c, auto& k, auto& v) { c.golden = parse_bool(k, v); }},
      {"batch", [](auto& c, auto& k, auto& v) { c.batch = parse_size(k, v); }},
      {"paths",
       [](auto& c, auto& k, auto& v) {
         c.paths.clear();
         for (const auto& item : split(v, ',')) c.paths.push_back(parse_path_kind(item));
         if (c.paths.empty()) throw ConfigError(k + ": expected at least one path");
       }},
      {"essential_k", [](auto& c, auto& k, auto& v) { c.essential_k = parse_size(k, v); }},
      {"grid_n", [](auto& c, auto& k, auto& v) { c.grid_n = parse_size_list(k, v); }},
      {"grid_t", [](auto& c, auto& k, auto& v) { c.grid_t = parse_size_list(k, v); }},
      {"grid_d", [](auto& c, auto& k, auto& v) { c.grid_d = parse_size_list(k, v); }},
      {"grid_heads", [](auto& c, auto& k, auto& v) { c.grid_heads = parse_size_list(k, v); }},
      {"grid_layers", [](auto& c, auto& k, auto& v) { c.grid_layers = parse_size_list(k, v); }},
      {"tolerance", [](auto& c, auto& k, auto& v) { c.tolerance = parse_double(k, v); }},
      {"self_test", [](auto& c, auto& k, auto& v) { c.self_test = parse_bool(k, v); }},
      {"warmup", [](auto& c, auto& k, auto& v) { c.warmup = parse_size(k, v); }},
      {"reps", [](auto& c, auto& k, auto& v) { c.reps = parse_size(k, v); }},
      {"vica_schedule", [](auto& c, auto&, auto& v) { c.vica_schedule = v; }},
      {"mac_tolerance", [](auto& c, auto& k, auto& v) { c.mac_tolerance = parse_double(k, v); }},
      {"decoupled", [](auto& c, auto& k, auto& v) { c.decoupled = parse_bool(k, v); }},
  };
  return kSetters;
}

bool is_mode_codes(const std::string& s) {
  return !s.empty() && s.find_first_not_of("BFVT") == std::string::npos;
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& [key, setter] : setters()) out.push_back(key);
  return out;
}

void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(cfg, key, value);
}

void parse_config(std::istream& in, ExperimentConfig& cfg) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    try {
      apply_setting(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void load_config_file(const std::filesystem::path& path, ExperimentConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  parse_config(in, cfg);
}

ExperimentConfig ExperimentConfig::defaults(Mode mode) {
  ExperimentConfig c;
  c.mode = mode;
  switch (mode) {
    case Mode::kCost:
      break;
    case Mode::kDiagnose:
      c.preset = "toy";
      c.n_layers = 4;
      c.n = 8;
      c.t_s = 2;
      c.t_q = 4;
      break;
    case Mode::kEquivalence:
      c.preset = "toy";
      break;
    case Mode::kBench:
      // 7B-shaped depth with hidden sizes scaled by 1/16.
      c.preset = "toy";
      c.n_layers = 32;
      c.n_heads = 2;
      c.d_model = 256;
      c.d_ffn = 688;
      break;
  }
  return c;
}

ModelConfig ExperimentConfig::model() const {
  ModelConfig m = preset == "toy" ? ModelConfig::toy(4, 2, 16, 32) : ModelConfig::preset(preset);
  if (n_layers) m.n_layers = *n_layers;
  if (n_heads) m.n_heads = *n_heads;
  if (d_model) m.d_model = *d_model;
  if (d_ffn) m.d_ffn = *d_ffn;
  if (vocab) m.vocab = *vocab;
  // Room for the configured sequence.
  m.max_positions = std::max(m.max_positions, n + t_s + t_q);
  m.validate();
  return m;
}

PolicySchedule ExperimentConfig::policy() const {
  const std::size_t layers = model().n_layers;
  PolicySchedule s;
  if (is_mode_codes(schedule)) {
    s = PolicySchedule::parse(schedule);
    if (s.size() != layers) {
      throw ConfigError("schedule '" + schedule + "' has " + std::to_string(s.size()) +
                        " layers, model has " + std::to_string(layers));
    }
  } else {
    s = PolicySchedule::preset(schedule, layers);
  }
  if (drops) s.set_drop_events(*drops);
  return s;
}

CostInputs ExperimentConfig::cost_inputs() const {
  return CostInputs::from_model(model(), n, t_s, t_q);
}

std::string ExperimentConfig::canonical() const {
  std::map<std::string, std::string> kv;
  const auto size_list = [](const std::vector<std::size_t>& v) {
    return join(v, [](std::size_t x) { return std::to_string(x); });
  };
  kv["mode"] = mode_name(mode);
  kv["preset"] = preset;
  if (n_layers) kv["n_layers"] = std::to_string(*n_layers);
  if (n_heads) kv["n_heads"] = std::to_string(*n_heads);
  if (d_model) kv["d_model"] = std::to_string(*d_model);
  if (d_ffn) kv["d_ffn"] = std::to_string(*d_ffn);
  if (vocab) kv["vocab"] = std::to_string(*vocab);
  kv["schedule"] = schedule;
  if (drops) {
    kv["drops"] = drops->empty() ? "none" : join(*drops, [](const DropEvent& e) {
      return std::to_string(e.layer) + ":" + format_double(e.keep_fraction);
    });
  }
  kv["drop_timing"] = drop_timing == DropTiming::kAtEntry ? "entry" : "after";
  kv["scorer"] = scorer == ImportanceScorer::kLastQuery ? "last_query" : "mean_all";
  kv["n"] = std::to_string(n);
  kv["t_s"] = std::to_string(t_s);
  kv["t_q"] = std::to_string(t_q);
  kv["seed"] = std::to_string(seed);
  kv["golden"] = golden ? "true" : "false";
  kv["batch"] = std::to_string(batch);
  kv["paths"] = join(paths, [](PathKind p) { return path_kind_name(p); });
  kv["essential_k"] = std::to_string(essential_k);
  kv["grid_n"] = size_list(grid_n);
  kv["grid_t"] = size_list(grid_t);
  kv["grid_d"] = size_list(grid_d);
  kv["grid_heads"] = size_list(grid_heads);
  kv["grid_layers"] = size_list(grid_layers);
  kv["tolerance"] = format_double(tolerance);
  kv["self_test"] = self_test ? "true" : "false";
  kv["warmup"] = std::to_string(warmup);
  kv["reps"] = std::to_string(reps);
  kv["vica_schedule"] = vica_schedule;
  kv["mac_tolerance"] = format_double(mac_tolerance);
  kv["decoupled"] = decoupled ? "true" : "false";

  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a64(canonical()); }

std::filesystem::path resolve_out_dir(const ExperimentConfig& cfg, bool explicit_out) {
  if (!explicit_out) {
    if (const char* env = std::getenv(kOutDirEnv); env != nullptr && *env != '\0') return env;
  }
  return cfg.out_dir;
}

}  // namespace vica::harness
