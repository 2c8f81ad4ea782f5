#include "tlcorpus/pipeline.hpp"

#include "tlcorpus/dedup.hpp"

#include <json.hpp>

#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>
#include <unistd.h>
#include <unordered_map>

namespace tlcorpus {

StageError::StageError(std::string stage, std::string source_id, std::uint64_t line_no, const std::string& message)
    : std::runtime_error("[" + stage + "]" + (source_id.empty() ? "" : " source=" + source_id) +
                         (line_no ? " line=" + std::to_string(line_no) : "") + ": " + message),
      stage_(std::move(stage)),
      source_id_(std::move(source_id)),
      line_no_(line_no) {}

std::uint64_t StageStats::total_rejects() const {
  std::uint64_t n = 0;
  for (const auto& [reason, c] : rejects) n += c;
  return n;
}

std::optional<std::string> StageStats::conservation_error() const {
  const std::uint64_t accounted = lines_out + total_rejects() + duplicates_dropped + diverted;
  if (accounted == lines_in) return std::nullopt;
  return "source=" + source_id + " stage=" + stage + ": lines_in=" + std::to_string(lines_in) +
         " but lines_out+rejects+duplicates_dropped+diverted=" + std::to_string(accounted);
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Intermediate record files: "<doc_no>\t<line_no>\t<text>" per line.
void write_intermediate(std::ostream& out, const SentenceRecord& rec) {
  out << rec.doc_no << '\t' << rec.line_no << '\t' << rec.text << '\n';
}

bool read_intermediate(std::istream& in, std::string& line, SentenceRecord& rec) {
  if (!std::getline(in, line)) return false;
  const auto t1 = line.find('\t');
  const auto t2 = line.find('\t', t1 + 1);
  std::from_chars(line.data(), line.data() + t1, rec.doc_no);
  std::from_chars(line.data() + t1 + 1, line.data() + t2, rec.line_no);
  rec.text.assign(line, t2 + 1);
  return true;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  return in;
}

struct SourceResult {
  StageStats ingest;
  StageStats filter;
};

// Ingests one source, filters it, and writes survivors to `out_path`.
SourceResult ingest_and_filter(const SourceSpec& src, const FilterConfig& filter, const fs::path& out_path) {
  SourceResult r;
  r.ingest.source_id = r.filter.source_id = src.id;
  r.ingest.stage = "ingest";
  r.filter.stage = "filter";
  auto out = open_out(out_path);
  FilterCounts counts;
  const auto start = Clock::now();
  double filter_seconds = 0.0;

  auto handle = [&](const SentenceRecord& rec) {
    const auto t = Clock::now();
    ++r.filter.lines_in;
    r.filter.bytes += rec.text.size();
    const FilterVerdict v = apply_filters(rec.text, filter);
    counts.add(v);
    if (v.passed()) write_intermediate(out, rec);
    filter_seconds += seconds_since(t);
  };

  std::uint64_t line_no = 0;
  try {
    auto in = open_in(src.path);
    ReadCounts rc;
    if (src.format == SourceFormat::Plain) {
      PlainCorpusReader reader(in, src.id);
      while (auto rec = reader.next()) {
        line_no = rec->line_no;
        handle(*rec);
      }
      rc = reader.counts();
    } else {
      std::ifstream target_in;
      std::unique_ptr<TsvBitextReader> tsv;
      std::unique_ptr<PairedBitextReader> paired;
      if (src.format == SourceFormat::Tsv) {
        tsv = std::make_unique<TsvBitextReader>(in, src.id);
      } else {
        target_in = open_in(src.target_path);
        paired = std::make_unique<PairedBitextReader>(in, target_in, src.id);
      }
      while (auto bitext = tsv ? tsv->next() : paired->next()) {
        line_no = bitext->line_no;
        auto extracted = extract_bitext_side(std::span(&*bitext, 1), src.side, src.id);
        r.ingest.rejects["empty_side"] += extracted.skipped_empty;
        for (const auto& rec : extracted.records) handle(rec);
      }
      rc = tsv ? tsv->counts() : paired->counts();
    }
    r.ingest.lines_in = rc.lines;
    r.ingest.bytes = rc.bytes;
    if (rc.empty) r.ingest.rejects["empty"] = rc.empty;
    if (rc.malformed) r.ingest.rejects["malformed"] = rc.malformed;
    if (auto it = r.ingest.rejects.find("empty_side"); it != r.ingest.rejects.end() && it->second == 0) {
      r.ingest.rejects.erase(it);
    }
    r.ingest.lines_out = r.filter.lines_in;
  } catch (const EncodingError& e) {
    throw StageError("ingest", src.id, e.line_no(), e.what());
  } catch (const std::exception& e) {
    throw StageError("ingest", src.id, line_no, e.what());
  }

  r.filter.lines_out = counts.passed;
  for (auto reason : {RejectReason::NonLatin, RejectReason::Length, RejectReason::PunctRun, RejectReason::AvgWordLen,
                      RejectReason::Html}) {
    if (counts[reason]) r.filter.rejects[std::string(to_string(reason))] = counts[reason];
  }
  r.filter.wall_seconds = filter_seconds;
  r.ingest.wall_seconds = seconds_since(start) - filter_seconds;
  return r;
}

// Removes the scratch directory unless released.
class ScratchGuard {
 public:
  explicit ScratchGuard(fs::path p) : path_(std::move(p)) {}
  ~ScratchGuard() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  ScratchGuard(const ScratchGuard&) = delete;
  ScratchGuard& operator=(const ScratchGuard&) = delete;

 private:
  fs::path path_;
};

}  // namespace

PipelineStats run_pipeline(const PipelineConfig& cfg) {
  if (auto violations = validate_config(cfg); !violations.empty()) {
    std::string msg = "invalid pipeline config:";
    for (const auto& v : violations) msg += "\n  " + v.field + ": " + v.message;
    throw ConfigError(msg);
  }

  fs::create_directories(cfg.output_dir);
  const fs::path scratch = cfg.output_dir / (".tlcorpus-build-" + std::to_string(::getpid()));
  fs::remove_all(scratch);
  fs::create_directories(scratch);
  ScratchGuard guard(scratch);

  const std::size_t n_sources = cfg.sources.size();
  std::vector<SourceResult> results(n_sources);
  std::vector<fs::path> filtered(n_sources);
  for (std::size_t i = 0; i < n_sources; ++i) filtered[i] = scratch / ("filtered-" + std::to_string(i) + ".tsv");

  // Ingest and filter sources concurrently; results land by index so the
  // order of completion does not matter.
  {
    std::vector<std::exception_ptr> errors(n_sources);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < n_sources; i = next++) {
        try {
          results[i] = ingest_and_filter(cfg.sources[i], cfg.filter, filtered[i]);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    const unsigned workers = std::max(1u, std::min<unsigned>(cfg.workers, static_cast<unsigned>(n_sources)));
    {
      std::vector<std::jthread> pool;
      for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
      worker();
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  // Global keep-first dedup in source order.
  std::vector<StageStats> dedup_rows(n_sources);
  const fs::path deduped = scratch / "deduped.tsv";
  {
    const auto start = Clock::now();
    for (std::size_t i = 0; i < n_sources; ++i) {
      dedup_rows[i].source_id = cfg.sources[i].id;
      dedup_rows[i].stage = "dedup";
    }
    auto out = open_out(deduped);
    std::unordered_map<std::string, std::size_t> source_index;
    for (std::size_t i = 0; i < n_sources; ++i) source_index[cfg.sources[i].id] = i;

    auto emit = [&](std::size_t i, const SentenceRecord& rec) {
      ++dedup_rows[i].lines_out;
      out << i << '\t';
      write_intermediate(out, rec);
    };

    try {
      if (cfg.external_dedup) {
        RecordScan scan = [&](const RecordVisitor& visit) {
          std::string line;
          for (std::size_t i = 0; i < n_sources; ++i) {
            auto in = open_in(filtered[i]);
            SentenceRecord rec;
            rec.source_id = cfg.sources[i].id;
            while (read_intermediate(in, line, rec)) visit(rec);
          }
        };
        for (std::size_t i = 0; i < n_sources; ++i) {
          dedup_rows[i].lines_in = results[i].filter.lines_out;
          dedup_rows[i].bytes = results[i].filter.bytes;
        }
        dedup_external(scan, [&](const SentenceRecord& rec) { emit(source_index.at(rec.source_id), rec); },
                       {scratch, cfg.dedup_chunk_records});
      } else {
        Deduplicator seen;
        std::string line;
        for (std::size_t i = 0; i < n_sources; ++i) {
          auto in = open_in(filtered[i]);
          SentenceRecord rec;
          rec.source_id = cfg.sources[i].id;
          while (read_intermediate(in, line, rec)) {
            ++dedup_rows[i].lines_in;
            dedup_rows[i].bytes += rec.text.size();
            if (seen.insert(rec.text)) emit(i, rec);
          }
        }
      }
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError("dedup", "", 0, e.what());
    }
    for (auto& row : dedup_rows) row.duplicates_dropped = row.lines_in - row.lines_out;
    const double elapsed = seconds_since(start);
    for (auto& row : dedup_rows) row.wall_seconds = n_sources ? elapsed / static_cast<double>(n_sources) : 0.0;
  }

  // Optional split, then the final corpus files.
  std::vector<bool> split_source(n_sources, false);
  if (cfg.split) {
    for (std::size_t i = 0; i < n_sources; ++i) {
      split_source[i] = cfg.split_sources.empty() ||
                        std::find(cfg.split_sources.begin(), cfg.split_sources.end(), cfg.sources[i].id) !=
                            cfg.split_sources.end();
    }
  }
  std::vector<StageStats> split_rows;
  PipelineStats stats;
  {
    const auto start = Clock::now();
    std::vector<std::string> unit_keys;
    std::unordered_map<std::string, std::size_t> unit_index;
    std::vector<bool> in_a;
    SplitConfig split_cfg;
    std::string line;
    SentenceRecord rec;
    auto parse_deduped = [&](std::size_t& src) {
      const auto tab = line.find('\t');
      std::from_chars(line.data(), line.data() + tab, src);
      std::istringstream rest(line.substr(tab + 1));
      std::string inner;
      read_intermediate(rest, inner, rec);
      rec.source_id = cfg.sources[src].id;
    };

    if (cfg.split) {
      split_cfg = *cfg.split;
      split_cfg.seed = derive_seed(cfg.seed, "split");
      auto in = open_in(deduped);
      while (std::getline(in, line)) {
        std::size_t src = 0;
        parse_deduped(src);
        if (!split_source[src]) continue;
        std::string key = split_unit_key(rec, split_cfg.unit);
        if (unit_index.try_emplace(key, unit_keys.size()).second) unit_keys.push_back(std::move(key));
      }
      in_a = assign_split_units(unit_keys, split_cfg, cfg.workers);
      for (std::size_t i = 0; i < n_sources; ++i) {
        if (!split_source[i]) continue;
        StageStats row;
        row.source_id = cfg.sources[i].id;
        row.stage = "split";
        split_rows.push_back(row);
      }
    }

    auto corpus = open_out(scratch / PipelineOutputs::kCorpus);
    std::ofstream heldout;
    if (cfg.split) heldout = open_out(scratch / PipelineOutputs::kHeldout);
    std::unordered_map<std::size_t, std::size_t> split_row_of;
    for (std::size_t i = 0, r = 0; i < n_sources; ++i) {
      if (split_source[i]) split_row_of[i] = r++;
    }

    auto in = open_in(deduped);
    std::optional<std::pair<std::size_t, std::uint64_t>> last_heldout_doc;
    while (std::getline(in, line)) {
      std::size_t src = 0;
      parse_deduped(src);
      if (!split_source[src]) {
        corpus << rec.text << '\n';
        ++stats.corpus_lines;
        continue;
      }
      StageStats& row = split_rows[split_row_of.at(src)];
      ++row.lines_in;
      row.bytes += rec.text.size();
      if (in_a[unit_index.at(split_unit_key(rec, split_cfg.unit))]) {
        corpus << rec.text << '\n';
        ++stats.corpus_lines;
        ++row.lines_out;
      } else {
        const std::pair<std::size_t, std::uint64_t> doc{src, rec.doc_no};
        if (split_cfg.unit == SplitUnit::Document && last_heldout_doc && *last_heldout_doc != doc) heldout << '\n';
        last_heldout_doc = doc;
        heldout << rec.text << '\n';
        ++stats.heldout_lines;
        ++row.diverted;
      }
    }
    const double elapsed = seconds_since(start);
    for (auto& row : split_rows) row.wall_seconds = elapsed / static_cast<double>(split_rows.size());
  }

  if (cfg.tokenizer) {
    try {
      WordCounts words;
      auto in = open_in(scratch / PipelineOutputs::kCorpus);
      std::string line;
      while (std::getline(in, line)) words.add_text(line);
      if (words.empty()) throw std::runtime_error("corpus is empty after filtering and deduplication");
      learn_bpe(words, *cfg.tokenizer).save(scratch / PipelineOutputs::kTokenizerPrefix);
    } catch (const std::exception& e) {
      throw StageError("tokenize", "", 0, e.what());
    }
  }

  for (std::size_t i = 0; i < n_sources; ++i) {
    stats.rows.push_back(std::move(results[i].ingest));
    stats.rows.push_back(std::move(results[i].filter));
    stats.rows.push_back(std::move(dedup_rows[i]));
    if (split_source[i] && cfg.split) {
      for (auto& row : split_rows) {
        if (row.source_id == cfg.sources[i].id) stats.rows.push_back(row);
      }
    }
  }

  StatsReport report;
  try {
    report = report_stats(stats);
  } catch (const StatsError& e) {
    throw StageError("stats", "", 0, e.what());
  }
  open_out(scratch / PipelineOutputs::kStats) << report.records;
  open_out(scratch / PipelineOutputs::kTiming) << timing_records(stats);

  // Publish: every stage succeeded, so move outputs over any previous run.
  std::vector<std::string> produced{PipelineOutputs::kCorpus, PipelineOutputs::kStats, PipelineOutputs::kTiming};
  if (cfg.split) produced.emplace_back(PipelineOutputs::kHeldout);
  if (cfg.tokenizer) {
    produced.push_back(std::string(PipelineOutputs::kTokenizerPrefix) + ".merges");
    produced.push_back(std::string(PipelineOutputs::kTokenizerPrefix) + ".vocab");
  }
  for (const std::string stale : {std::string(PipelineOutputs::kHeldout),
                                  std::string(PipelineOutputs::kTokenizerPrefix) + ".merges",
                                  std::string(PipelineOutputs::kTokenizerPrefix) + ".vocab"}) {
    if (std::find(produced.begin(), produced.end(), stale) == produced.end()) fs::remove(cfg.output_dir / stale);
  }
  for (const auto& name : produced) fs::rename(scratch / name, cfg.output_dir / name);
  return stats;
}

// ---------------------------------------------------------------------------
// Reporting

namespace {

std::string percent(std::uint64_t part, std::uint64_t whole) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << (whole ? 100.0 * static_cast<double>(part) / static_cast<double>(whole) : 0.0)
     << '%';
  return os.str();
}

}  // namespace

StatsReport report_stats(const PipelineStats& stats) {
  for (const auto& row : stats.rows) {
    if (auto err = row.conservation_error()) throw StatsError("conservation violated: " + *err);
  }

  StatsReport report;
  std::ostringstream records;
  for (const auto& row : stats.rows) {
    nlohmann::ordered_json j;
    j["source"] = row.source_id;
    j["stage"] = row.stage;
    j["lines_in"] = row.lines_in;
    j["lines_out"] = row.lines_out;
    j["rejects"] = nlohmann::ordered_json::object();
    for (const auto& [reason, c] : row.rejects) j["rejects"][reason] = c;
    j["duplicates_dropped"] = row.duplicates_dropped;
    j["diverted"] = row.diverted;
    j["bytes"] = row.bytes;
    records << j.dump() << '\n';
  }
  report.records = records.str();

  // Per-stage totals across sources.
  std::vector<std::string> stage_order;
  std::map<std::string, StageStats> totals;
  std::uint64_t lines_read = 0;
  for (const auto& row : stats.rows) {
    if (!totals.contains(row.stage)) stage_order.push_back(row.stage);
    auto& t = totals[row.stage];
    t.lines_in += row.lines_in;
    t.lines_out += row.lines_out;
    t.duplicates_dropped += row.duplicates_dropped;
    t.diverted += row.diverted;
    for (const auto& [reason, c] : row.rejects) t.rejects[reason] += c;
    if (row.stage == "ingest") lines_read += row.lines_in;
  }

  std::ostringstream table;
  table << std::left << std::setw(8) << "stage" << std::right << std::setw(12) << "in" << std::setw(12) << "out"
        << std::setw(12) << "rejected" << std::setw(12) << "duplicates" << std::setw(12) << "diverted" << "  reasons\n";
  for (const auto& stage : stage_order) {
    const auto& t = totals[stage];
    table << std::left << std::setw(8) << stage << std::right << std::setw(12) << t.lines_in << std::setw(12)
          << t.lines_out << std::setw(12) << t.total_rejects() << std::setw(12) << t.duplicates_dropped << std::setw(12)
          << t.diverted << " ";
    for (const auto& [reason, c] : t.rejects) table << ' ' << reason << '=' << c;
    table << '\n';
  }
  table << "kept " << stats.corpus_lines << " / " << lines_read << " (" << percent(stats.corpus_lines, lines_read)
        << ")\n";
  if (stats.heldout_lines) table << "held out " << stats.heldout_lines << '\n';
  report.summary = table.str();
  return report;
}

PipelineStats parse_stats_records(const std::string& jsonl) {
  PipelineStats stats;
  std::istringstream in(jsonl);
  std::string line;
  std::size_t line_no = 0;
  std::map<std::string, std::uint64_t> last_out;
  std::vector<std::string> order;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      StageStats row;
      row.source_id = j.at("source").get<std::string>();
      row.stage = j.at("stage").get<std::string>();
      row.lines_in = j.at("lines_in").get<std::uint64_t>();
      row.lines_out = j.at("lines_out").get<std::uint64_t>();
      for (const auto& [reason, c] : j.at("rejects").items()) row.rejects[reason] = c.get<std::uint64_t>();
      row.duplicates_dropped = j.at("duplicates_dropped").get<std::uint64_t>();
      row.diverted = j.at("diverted").get<std::uint64_t>();
      row.bytes = j.at("bytes").get<std::uint64_t>();
      if (!last_out.contains(row.source_id)) order.push_back(row.source_id);
      last_out[row.source_id] = row.lines_out;
      stats.heldout_lines += row.diverted;
      stats.rows.push_back(std::move(row));
    } catch (const nlohmann::json::exception& e) {
      throw StatsError("stats line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  for (const auto& id : order) stats.corpus_lines += last_out[id];
  return stats;
}

std::string timing_records(const PipelineStats& stats) {
  std::ostringstream out;
  for (const auto& row : stats.rows) {
    nlohmann::ordered_json j;
    j["source"] = row.source_id;
    j["stage"] = row.stage;
    j["wall_seconds"] = row.wall_seconds;
    out << j.dump() << '\n';
  }
  return out.str();
}

}  // namespace tlcorpus
