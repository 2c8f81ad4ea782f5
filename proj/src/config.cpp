#include "tlcorpus/pipeline.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>
#include <unistd.h>

namespace tlcorpus {

ConfigError::ConfigError(const std::string& message, int line, int column)
    : std::runtime_error(line > 0 ? "config line " + std::to_string(line) + ", column " + std::to_string(column) +
                                        ": " + message
                                  : "config: " + message),
      line_(line),
      column_(column) {}

SourceFormat source_format_from_string(std::string_view name) {
  if (name == "plain") return SourceFormat::Plain;
  if (name == "tsv") return SourceFormat::Tsv;
  if (name == "paired") return SourceFormat::Paired;
  throw std::invalid_argument("unknown source format '" + std::string(name) + "' (expected plain|tsv|paired)");
}

std::string_view to_string(SourceFormat format) {
  switch (format) {
    case SourceFormat::Plain: return "plain";
    case SourceFormat::Tsv: return "tsv";
    case SourceFormat::Paired: return "paired";
  }
  return "plain";
}

namespace {

[[noreturn]] void fail_at(const YAML::Node& node, const std::string& message) {
  const auto mark = node.Mark();
  if (mark.is_null()) throw ConfigError(message);
  throw ConfigError(message, mark.line + 1, mark.column + 1);
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& field) {
  if (!node.IsScalar()) fail_at(node, field + " must be a scalar");
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    fail_at(node, field + " has an invalid value '" + node.Scalar() + "'");
  }
}

std::size_t count(const YAML::Node& node, const std::string& field) {
  const auto v = scalar<long long>(node, field);
  if (v < 0) fail_at(node, field + " must not be negative");
  return static_cast<std::size_t>(v);
}

std::vector<std::string> string_list(const YAML::Node& node, const std::string& field) {
  if (!node.IsSequence()) fail_at(node, field + " must be a list");
  std::vector<std::string> out;
  for (const auto& item : node) out.push_back(scalar<std::string>(item, field + "[]"));
  return out;
}

// Visits each key of a mapping, recording keys the handler does not accept.
template <typename Fn>
void for_each_key(const YAML::Node& map, const std::string& prefix, std::vector<std::string>* unknown, Fn&& fn) {
  if (!map.IsMap()) fail_at(map, (prefix.empty() ? std::string("document") : prefix) + " must be a mapping");
  for (const auto& kv : map) {
    const std::string key = kv.first.as<std::string>();
    if (!fn(key, kv.second)) {
      const std::string name = prefix.empty() ? key : prefix + "." + key;
      if (!unknown) fail_at(kv.first, "unknown key '" + name + "'");
      const auto mark = kv.first.Mark();
      unknown->push_back(name + " (line " + std::to_string(mark.line + 1) + ")");
    }
  }
}

YAML::Node parse_document(const std::string& document) {
  try {
    return YAML::Load(document);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(e.msg, e.mark.line + 1, e.mark.column + 1);
  }
}

void read_filter(const YAML::Node& node, const std::string& prefix, FilterConfig& f, std::vector<std::string>* unknown) {
  auto name = [&](const char* key) { return prefix.empty() ? std::string(key) : prefix + "." + key; };
  for_each_key(node, prefix, unknown, [&](const std::string& key, const YAML::Node& v) {
    if (key == "nonlatin_max_ratio") {
      f.nonlatin_max_ratio = scalar<double>(v, name("nonlatin_max_ratio"));
    } else if (key == "min_tokens") {
      f.min_tokens = count(v, name("min_tokens"));
    } else if (key == "max_tokens") {
      f.max_tokens = count(v, name("max_tokens"));
    } else if (key == "punct_run_max") {
      f.punct_run_max = count(v, name("punct_run_max"));
    } else if (key == "awl_min") {
      f.awl_min = scalar<double>(v, name("awl_min"));
    } else if (key == "awl_max") {
      f.awl_max = scalar<double>(v, name("awl_max"));
    } else if (key == "html_patterns") {
      f.html_patterns = string_list(v, name("html_patterns"));
    } else {
      return false;
    }
    return true;
  });
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return (path.is_relative() && !base.empty()) ? base / path : path;
}

}  // namespace

FilterConfig parse_filter_config(const std::string& document) {
  FilterConfig cfg;
  const YAML::Node root = parse_document(document);
  if (root.IsNull()) return cfg;
  read_filter(root, "", cfg, nullptr);
  return cfg;
}

FilterConfig load_filter_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_filter_config(buf.str());
}

PipelineConfig parse_pipeline_config(const std::string& document, const fs::path& base_dir) {
  PipelineConfig cfg;
  const YAML::Node root = parse_document(document);
  if (root.IsNull()) throw ConfigError("empty config document");
  bool saw_version = false;

  for_each_key(root, "", &cfg.unknown_keys, [&](const std::string& key, const YAML::Node& v) {
    if (key == "version") {
      cfg.version = scalar<int>(v, "version");
      saw_version = true;
    } else if (key == "output_dir") {
      cfg.output_dir = resolve(base_dir, scalar<std::string>(v, "output_dir"));
    } else if (key == "seed") {
      cfg.seed = scalar<std::uint64_t>(v, "seed");
    } else if (key == "workers") {
      cfg.workers = static_cast<unsigned>(std::max<std::size_t>(1, count(v, "workers")));
    } else if (key == "sources") {
      if (!v.IsSequence()) fail_at(v, "sources must be a list");
      for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string prefix = "sources[" + std::to_string(i) + "]";
        SourceSpec src;
        for_each_key(v[i], prefix, &cfg.unknown_keys, [&](const std::string& k, const YAML::Node& sv) {
          try {
            if (k == "id") {
              src.id = scalar<std::string>(sv, prefix + ".id");
            } else if (k == "format") {
              src.format = source_format_from_string(scalar<std::string>(sv, prefix + ".format"));
            } else if (k == "path") {
              src.path = resolve(base_dir, scalar<std::string>(sv, prefix + ".path"));
            } else if (k == "target_path") {
              src.target_path = resolve(base_dir, scalar<std::string>(sv, prefix + ".target_path"));
            } else if (k == "side") {
              src.side = bitext_side_from_string(scalar<std::string>(sv, prefix + ".side"));
            } else {
              return false;
            }
          } catch (const std::invalid_argument& e) {
            fail_at(sv, e.what());
          }
          return true;
        });
        cfg.sources.push_back(std::move(src));
      }
    } else if (key == "filter") {
      read_filter(v, "filter", cfg.filter, &cfg.unknown_keys);
    } else if (key == "dedup") {
      for_each_key(v, "dedup", &cfg.unknown_keys, [&](const std::string& k, const YAML::Node& dv) {
        if (k == "external_sort") {
          cfg.external_dedup = scalar<bool>(dv, "dedup.external_sort");
        } else if (k == "chunk_records") {
          cfg.dedup_chunk_records = count(dv, "dedup.chunk_records");
        } else {
          return false;
        }
        return true;
      });
    } else if (key == "split") {
      SplitConfig split;
      for_each_key(v, "split", &cfg.unknown_keys, [&](const std::string& k, const YAML::Node& sv) {
        if (k == "ratio") {
          split.ratio = scalar<double>(sv, "split.ratio");
        } else if (k == "unit") {
          try {
            split.unit = split_unit_from_string(scalar<std::string>(sv, "split.unit"));
          } catch (const std::invalid_argument& e) {
            fail_at(sv, e.what());
          }
        } else if (k == "sources") {
          cfg.split_sources = string_list(sv, "split.sources");
        } else {
          return false;
        }
        return true;
      });
      cfg.split = split;
    } else if (key == "tokenizer") {
      TokenizerConfig tok;
      for_each_key(v, "tokenizer", &cfg.unknown_keys, [&](const std::string& k, const YAML::Node& tv) {
        if (k == "vocab_size") {
          tok.vocab_size = count(tv, "tokenizer.vocab_size");
        } else if (k == "character_coverage") {
          tok.character_coverage = scalar<double>(tv, "tokenizer.character_coverage");
        } else if (k == "case_preserving") {
          tok.case_preserving = scalar<bool>(tv, "tokenizer.case_preserving");
        } else if (k == "special_tokens") {
          tok.special_tokens = string_list(tv, "tokenizer.special_tokens");
        } else if (k == "unknown_token") {
          tok.unknown_token = scalar<std::string>(tv, "tokenizer.unknown_token");
        } else {
          return false;
        }
        return true;
      });
      cfg.tokenizer = tok;
    } else {
      return false;
    }
    return true;
  });

  if (!saw_version) throw ConfigError("missing required key 'version'");
  return cfg;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_pipeline_config(buf.str(), path.parent_path());
}

std::vector<ConfigViolation> validate_config(const PipelineConfig& cfg) {
  std::vector<ConfigViolation> out;
  if (cfg.version != PipelineConfig::kSchemaVersion) {
    out.push_back({"version", "unsupported schema version " + std::to_string(cfg.version) + " (expected " +
                                  std::to_string(PipelineConfig::kSchemaVersion) + ")"});
  }
  for (const auto& key : cfg.unknown_keys) {
    // Entries look like "split.colour (line 7)".
    const auto at = key.find(" (");
    out.push_back({key.substr(0, at), at == std::string::npos ? "unknown key" : "unknown key" + key.substr(at)});
  }

  std::map<std::string, std::size_t> first_use;
  for (std::size_t i = 0; i < cfg.sources.size(); ++i) {
    const auto& src = cfg.sources[i];
    const std::string field = "sources[" + std::to_string(i) + "]";
    if (src.id.empty()) {
      out.push_back({field + ".id", "source id must not be empty"});
    } else if (auto [it, inserted] = first_use.emplace(src.id, i); !inserted) {
      out.push_back({field + ".id", "sources[" + std::to_string(it->second) + "] and " + field +
                                        " share the source id '" + src.id + "'"});
    }
    if (src.path.empty()) {
      out.push_back({field + ".path", "path is required"});
    } else if (!fs::is_regular_file(src.path)) {
      out.push_back({field + ".path", "no such file: " + src.path.string()});
    }
    if (src.format == SourceFormat::Paired) {
      if (src.target_path.empty()) {
        out.push_back({field + ".target_path", "paired sources need target_path"});
      } else if (!fs::is_regular_file(src.target_path)) {
        out.push_back({field + ".target_path", "no such file: " + src.target_path.string()});
      }
    } else if (!src.target_path.empty()) {
      out.push_back({field + ".target_path", "target_path only applies to paired sources"});
    }
  }

  for (const auto& v : cfg.filter.violations()) out.push_back({"filter", v});
  if (cfg.dedup_chunk_records == 0) out.push_back({"dedup.chunk_records", "must be positive"});

  if (cfg.split) {
    for (const auto& v : cfg.split->violations()) out.push_back({"split.ratio", v});
    for (const auto& id : cfg.split_sources) {
      if (!first_use.contains(id)) out.push_back({"split.sources", "unknown source id '" + id + "'"});
    }
  } else if (!cfg.split_sources.empty()) {
    out.push_back({"split.sources", "split sources given without a split section"});
  }
  if (cfg.tokenizer) {
    for (const auto& v : cfg.tokenizer->violations()) out.push_back({"tokenizer", v});
  }

  if (cfg.output_dir.empty()) {
    out.push_back({"output_dir", "output_dir is required"});
  } else {
    fs::path probe = cfg.output_dir;
    if (!fs::exists(probe)) probe = probe.parent_path().empty() ? fs::path(".") : probe.parent_path();
    if (!fs::is_directory(probe) || ::access(probe.c_str(), W_OK) != 0) {
      out.push_back({"output_dir", "not writable: " + cfg.output_dir.string()});
    }
  }
  return out;
}

}  // namespace tlcorpus
