#pragma once

#include "tlcorpus/bpe.hpp"
#include "tlcorpus/filters.hpp"
#include "tlcorpus/ingest.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tlcorpus {

namespace fs = std::filesystem;

enum class SourceFormat { Plain, Tsv, Paired };

SourceFormat source_format_from_string(std::string_view name);
std::string_view to_string(SourceFormat format);

struct SourceSpec {
  std::string id;
  SourceFormat format = SourceFormat::Plain;
  fs::path path;         // plain / tsv file, or the source-language file when paired
  fs::path target_path;  // paired only
  BitextSide side = BitextSide::Target;
};

struct PipelineConfig {
  static constexpr int kSchemaVersion = 1;

  int version = kSchemaVersion;
  std::vector<SourceSpec> sources;
  FilterConfig filter;
  bool external_dedup = false;
  std::size_t dedup_chunk_records = 1u << 20;
  std::optional<SplitConfig> split;  // seed is derived from `seed`
  std::vector<std::string> split_sources;  // empty: split every source
  std::optional<TokenizerConfig> tokenizer;
  fs::path output_dir;
  std::uint64_t seed = 0;
  unsigned workers = 1;

  // Keys present in the document that the schema does not know.
  std::vector<std::string> unknown_keys;
};

/// Malformed config document; carries the 1-based location when known.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& message, int line = 0, int column = 0);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

/// Parses a YAML pipeline document. Relative paths resolve against `base_dir`.
PipelineConfig parse_pipeline_config(const std::string& document, const fs::path& base_dir = {});
PipelineConfig load_pipeline_config(const fs::path& path);

/// Parses a flat FilterConfig document (the keys of FilterConfig).
FilterConfig parse_filter_config(const std::string& document);
FilterConfig load_filter_config(const fs::path& path);

struct ConfigViolation {
  std::string field;
  std::string message;
};

/// Every invariant violation in `cfg`; empty when the config is usable.
std::vector<ConfigViolation> validate_config(const PipelineConfig& cfg);

/// Counters for one (source, stage) cell of a run.
struct StageStats {
  std::string source_id;
  std::string stage;
  std::uint64_t lines_in = 0;
  std::uint64_t lines_out = 0;
  std::map<std::string, std::uint64_t> rejects;
  std::uint64_t duplicates_dropped = 0;
  std::uint64_t diverted = 0;  // routed to the held-out split
  std::uint64_t bytes = 0;
  double wall_seconds = 0.0;  // not part of the deterministic report

  std::uint64_t total_rejects() const;
  /// Describes the broken counter when lines_in != lines_out + rejects +
  /// duplicates_dropped + diverted.
  std::optional<std::string> conservation_error() const;
};

struct PipelineStats {
  std::vector<StageStats> rows;  // source-major, stages in execution order
  std::uint64_t corpus_lines = 0;
  std::uint64_t heldout_lines = 0;
};

/// Stage-tagged failure of a pipeline run.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, std::string source_id, std::uint64_t line_no, const std::string& message);
  const std::string& stage() const { return stage_; }
  const std::string& source_id() const { return source_id_; }
  std::uint64_t line_no() const { return line_no_; }

 private:
  std::string stage_;
  std::string source_id_;
  std::uint64_t line_no_;
};

/// Output file names inside PipelineConfig::output_dir.
struct PipelineOutputs {
  static constexpr const char* kCorpus = "corpus.txt";
  static constexpr const char* kHeldout = "heldout.txt";
  static constexpr const char* kTokenizerPrefix = "tokenizer";
  static constexpr const char* kStats = "stats.jsonl";
  static constexpr const char* kTiming = "timing.jsonl";
};

/// ingest -> filter -> dedup -> split -> train tokenizer. Outputs are built
/// in a scratch directory and moved into place only after every stage
/// succeeded. Throws ConfigError for invalid configs and StageError for
/// stage failures.
PipelineStats run_pipeline(const PipelineConfig& cfg);

struct StatsReport {
  std::string records;  // JSON lines, one per source x stage
  std::string summary;  // human-readable table
};

/// Throws StatsError if any row breaks conservation.
StatsReport report_stats(const PipelineStats& stats);

class StatsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads the records part of a report back.
PipelineStats parse_stats_records(const std::string& jsonl);

/// Wall-clock timings as JSON lines (kept apart from the deterministic report).
std::string timing_records(const PipelineStats& stats);

}  // namespace tlcorpus
