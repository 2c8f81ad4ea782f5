#include "tlcorpus/pipeline.hpp"

#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

using namespace tlcorpus;

namespace {

// Fresh scratch directory per test case.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("tlcorpus-test-" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path operator/(const std::string& leaf) const { return path / leaf; }
};

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// One line per filter outcome plus a duplicate of the clean line.
const char* kFixture =
    "Ang bata ay naglalaro sa labas ng bahay.\n"
    "Это предложение полностью на русском языке.\n"
    "tatlong salita lang\n"
    "Ano ba ito /// talaga ngayon?\n"
    "Bisitahin ang www.balita.ph para sa iba pa.\n"
    "Ang bata ay naglalaro sa labas ng bahay.\n";

const StageStats* row(const PipelineStats& s, const std::string& source, const std::string& stage) {
  for (const auto& r : s.rows) {
    if (r.source_id == source && r.stage == stage) return &r;
  }
  return nullptr;
}

}  // namespace

TEST_CASE("minimal config parses and validates") {
  TempDir dir("cfg-min");
  write_file(dir / "a.txt", "x\n");
  const auto cfg = parse_pipeline_config(
      "version: 1\n"
      "output_dir: out\n"
      "sources:\n"
      "  - {id: a, format: plain, path: a.txt}\n",
      dir.path);
  CHECK(cfg.sources.size() == 1);
  CHECK(cfg.sources[0].path == dir / "a.txt");
  CHECK(cfg.output_dir == dir / "out");
  CHECK(validate_config(cfg).empty());
}

TEST_CASE("full config round trip of every section") {
  TempDir dir("cfg-full");
  write_file(dir / "s.txt", "x\n");
  write_file(dir / "t.txt", "y\n");
  const auto cfg = parse_pipeline_config(
      "version: 1\n"
      "seed: 18446744073709551615\n"
      "workers: 4\n"
      "output_dir: out\n"
      "sources:\n"
      "  - {id: bi, format: paired, path: s.txt, target_path: t.txt, side: source}\n"
      "filter: {nonlatin_max_ratio: 0.2, min_tokens: 2, html_patterns: ['.org']}\n"
      "dedup: {external_sort: true, chunk_records: 10}\n"
      "split: {ratio: 0.5, unit: line, sources: [bi]}\n"
      "tokenizer: {vocab_size: 100, character_coverage: 0.9995, special_tokens: ['<unk>', '<s>'], "
      "unknown_token: '<unk>'}\n",
      dir.path);
  CHECK(cfg.seed == 18446744073709551615ull);
  CHECK(cfg.workers == 4);
  CHECK(cfg.sources[0].format == SourceFormat::Paired);
  CHECK(cfg.sources[0].side == BitextSide::Source);
  CHECK(cfg.filter.nonlatin_max_ratio == doctest::Approx(0.2));
  CHECK(cfg.filter.min_tokens == 2);
  CHECK(cfg.filter.html_patterns == std::vector<std::string>{".org"});
  CHECK(cfg.external_dedup);
  CHECK(cfg.dedup_chunk_records == 10);
  REQUIRE(cfg.split);
  CHECK(cfg.split->unit == SplitUnit::Line);
  CHECK(cfg.split_sources == std::vector<std::string>{"bi"});
  REQUIRE(cfg.tokenizer);
  CHECK(cfg.tokenizer->vocab_size == 100);
  CHECK(cfg.tokenizer->special_tokens.size() == 2);
  CHECK(validate_config(cfg).empty());
}

TEST_CASE("duplicate source ids give one violation naming both entries") {
  TempDir dir("cfg-dup");
  write_file(dir / "a.txt", "x\n");
  const auto cfg = parse_pipeline_config(
      "version: 1\n"
      "output_dir: out\n"
      "sources:\n"
      "  - {id: a, path: a.txt}\n"
      "  - {id: a, path: a.txt}\n",
      dir.path);
  const auto v = validate_config(cfg);
  REQUIRE(v.size() == 1);
  CHECK(v[0].message.find("sources[0]") != std::string::npos);
  CHECK(v[0].message.find("sources[1]") != std::string::npos);
}

TEST_CASE("split ratio out of range is reported") {
  TempDir dir("cfg-ratio");
  const auto cfg = parse_pipeline_config("version: 1\noutput_dir: out\nsplit: {ratio: 1.5}\n", dir.path);
  const auto v = validate_config(cfg);
  REQUIRE(v.size() == 1);
  CHECK(v[0].field == "split.ratio");
}

TEST_CASE("validation lists every violation") {
  TempDir dir("cfg-many");
  const auto cfg = parse_pipeline_config(
      "version: 2\n"
      "output_dir: /etc/passwd/out\n"
      "colour: blue\n"
      "sources:\n"
      "  - {id: p, format: paired, path: missing.txt}\n"
      "filter: {min_tokens: 0}\n"
      "split: {sources: [nope]}\n",
      dir.path);
  const auto v = validate_config(cfg);
  std::set<std::string> fields;
  for (const auto& x : v) fields.insert(x.field);
  CHECK(fields.contains("version"));
  CHECK(fields.contains("colour"));
  CHECK(fields.contains("sources[0].path"));
  CHECK(fields.contains("sources[0].target_path"));
  CHECK(fields.contains("filter"));
  CHECK(fields.contains("split.sources"));
  CHECK(fields.contains("output_dir"));
}

TEST_CASE("malformed documents report a location") {
  try {
    parse_pipeline_config("sources: [\n  {id: a\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.line() > 0);
  }
  try {
    parse_pipeline_config("version: 1\nworkers: many\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse_pipeline_config("sources:\n  - {id: a, format: xml, path: a}\n"), ConfigError);
  CHECK_THROWS_AS(load_pipeline_config("/nonexistent/config.yaml"), ConfigError);
}

TEST_CASE("flat filter documents") {
  const auto f = parse_filter_config("punct_run_max: 3\nawl_max: 20\n");
  CHECK(f.punct_run_max == 3);
  CHECK(f.awl_max == doctest::Approx(20.0));
  CHECK(f.min_tokens == 4);
  CHECK_THROWS_AS(parse_filter_config("bogus: 1\n"), ConfigError);
}

TEST_CASE("fixture walk through every stage") {
  TempDir dir("run-fixture");
  write_file(dir / "fx.txt", kFixture);
  PipelineConfig cfg;
  cfg.sources.push_back({"fx", SourceFormat::Plain, dir / "fx.txt"});
  cfg.output_dir = dir / "out";
  const auto stats = run_pipeline(cfg);

  CHECK(read_file(dir / "out/corpus.txt") == "Ang bata ay naglalaro sa labas ng bahay.\n");
  const auto* filter = row(stats, "fx", "filter");
  REQUIRE(filter);
  CHECK(filter->rejects == std::map<std::string, std::uint64_t>{{"NonLatin", 1}, {"Length", 1}, {"PunctRun", 1},
                                                               {"Html", 1}});
  const auto* dedup = row(stats, "fx", "dedup");
  REQUIRE(dedup);
  CHECK(dedup->duplicates_dropped == 1);
  for (const auto& r : stats.rows) CHECK_FALSE(r.conservation_error());

  const auto report = report_stats(stats);
  CHECK(report.summary.find("kept 1 / 6 (16.7%)") != std::string::npos);
  CHECK(read_file(dir / "out/stats.jsonl") == report.records);
  CHECK(fs::exists(dir / "out/timing.jsonl"));
  CHECK_FALSE(fs::exists(dir / "out/heldout.txt"));
}

TEST_CASE("the fixture twice in one run equals the fixture once") {
  TempDir dir("run-twice");
  write_file(dir / "fx.txt", kFixture);
  write_file(dir / "fx2.txt", kFixture);
  PipelineConfig once;
  once.sources.push_back({"fx", SourceFormat::Plain, dir / "fx.txt"});
  once.output_dir = dir / "once";
  PipelineConfig twice = once;
  twice.sources.push_back({"fx2", SourceFormat::Plain, dir / "fx2.txt"});
  twice.output_dir = dir / "twice";
  run_pipeline(once);
  const auto stats = run_pipeline(twice);
  CHECK(read_file(dir / "once/corpus.txt") == read_file(dir / "twice/corpus.txt"));
  CHECK(row(stats, "fx2", "dedup")->duplicates_dropped == 2);
}

TEST_CASE("empty source list yields an empty corpus and zero stats") {
  TempDir dir("run-empty");
  PipelineConfig cfg;
  cfg.output_dir = dir / "out";
  const auto stats = run_pipeline(cfg);
  CHECK(stats.rows.empty());
  CHECK(read_file(dir / "out/corpus.txt").empty());
  const auto report = report_stats(stats);
  CHECK(report.records.empty());
  CHECK(report.summary.find("kept 0 / 0 (0.0%)") != std::string::npos);
}

TEST_CASE("bitext sources, split and tokenizer") {
  TempDir dir("run-full");
  std::string tsv, news;
  for (int i = 0; i < 40; ++i) tsv += "hello number " + std::to_string(i) + "\tkamusta bilang ikaw " + std::to_string(i) + "\n";
  tsv += "broken line without tab\n";
  for (int d = 0; d < 20; ++d) {
    for (int s = 0; s < 3; ++s) {
      news += "balita bilang " + std::to_string(d) + " pangungusap " + std::to_string(s) + " dito\n";
    }
    news += "\n";
  }
  write_file(dir / "bi.tsv", tsv);
  write_file(dir / "news.txt", news);

  PipelineConfig cfg;
  cfg.sources.push_back({"bi", SourceFormat::Tsv, dir / "bi.tsv"});
  cfg.sources.push_back({"news", SourceFormat::Plain, dir / "news.txt"});
  cfg.split = SplitConfig{};
  cfg.split_sources = {"news"};
  TokenizerConfig tok;
  tok.vocab_size = 60;
  cfg.tokenizer = tok;
  cfg.output_dir = dir / "out";
  cfg.seed = 5;
  const auto stats = run_pipeline(cfg);

  CHECK(row(stats, "bi", "ingest")->rejects.at("malformed") == 1);
  const auto* split = row(stats, "news", "split");
  REQUIRE(split);
  CHECK(split->lines_out == 12 * 3);
  CHECK(split->diverted == 8 * 3);
  CHECK(row(stats, "bi", "split") == nullptr);
  CHECK(stats.corpus_lines == 40 + 36);
  CHECK(stats.heldout_lines == 24);

  const auto heldout = read_file(dir / "out/heldout.txt");
  CHECK(std::count(heldout.begin(), heldout.end(), '\n') == 24 + 7);
  CHECK(fs::exists(dir / "out/tokenizer.merges"));
  CHECK(BpeModel::load(dir / "out/tokenizer").vocab_size() == 60);

  // Identical second run, with more workers.
  const auto first_corpus = read_file(dir / "out/corpus.txt");
  const auto first_stats = read_file(dir / "out/stats.jsonl");
  const auto first_merges = read_file(dir / "out/tokenizer.merges");
  cfg.workers = 4;
  run_pipeline(cfg);
  CHECK(read_file(dir / "out/corpus.txt") == first_corpus);
  CHECK(read_file(dir / "out/stats.jsonl") == first_stats);
  CHECK(read_file(dir / "out/tokenizer.merges") == first_merges);

  // External dedup produces the same outputs.
  cfg.external_dedup = true;
  cfg.dedup_chunk_records = 7;
  run_pipeline(cfg);
  CHECK(read_file(dir / "out/corpus.txt") == first_corpus);
  CHECK(read_file(dir / "out/stats.jsonl") == first_stats);
}

TEST_CASE("a failing stage names itself and leaves prior outputs alone") {
  TempDir dir("run-fail");
  write_file(dir / "fx.txt", kFixture);
  PipelineConfig cfg;
  cfg.sources.push_back({"fx", SourceFormat::Plain, dir / "fx.txt"});
  cfg.output_dir = dir / "out";
  run_pipeline(cfg);
  const auto before = read_file(dir / "out/corpus.txt");

  write_file(dir / "fx.txt", std::string(kFixture) + "bad \xFF line here\n");
  try {
    run_pipeline(cfg);
    FAIL("expected StageError");
  } catch (const StageError& e) {
    CHECK(e.stage() == "ingest");
    CHECK(e.source_id() == "fx");
    CHECK(e.line_no() == 7);
  }
  CHECK(read_file(dir / "out/corpus.txt") == before);
  for (const auto& entry : fs::directory_iterator(dir / "out")) {
    CHECK(entry.path().filename().string().rfind(".tlcorpus-build", 0) != 0);
  }
}

TEST_CASE("tokenizer on an empty corpus is a stage error") {
  TempDir dir("run-empty-tok");
  write_file(dir / "fx.txt", "x\n");
  PipelineConfig cfg;
  cfg.sources.push_back({"fx", SourceFormat::Plain, dir / "fx.txt"});
  cfg.tokenizer = TokenizerConfig{};
  cfg.output_dir = dir / "out";
  try {
    run_pipeline(cfg);
    FAIL("expected StageError");
  } catch (const StageError& e) {
    CHECK(e.stage() == "tokenize");
  }
  CHECK_FALSE(fs::exists(dir / "out/corpus.txt"));
}

TEST_CASE("invalid configs are refused before any work") {
  PipelineConfig cfg;
  cfg.sources.push_back({"x", SourceFormat::Plain, "/nonexistent/x.txt"});
  cfg.output_dir = fs::temp_directory_path() / "tlcorpus-never";
  CHECK_THROWS_AS(run_pipeline(cfg), ConfigError);
  CHECK_FALSE(fs::exists(cfg.output_dir));
}

TEST_CASE("report_stats refuses broken conservation") {
  PipelineStats stats;
  StageStats bad;
  bad.source_id = "s";
  bad.stage = "filter";
  bad.lines_in = 10;
  bad.lines_out = 7;
  bad.rejects["Length"] = 2;
  stats.rows.push_back(bad);
  try {
    report_stats(stats);
    FAIL("expected StatsError");
  } catch (const StatsError& e) {
    CHECK(std::string(e.what()).find("filter") != std::string::npos);
  }
  stats.rows[0].rejects["Html"] = 1;
  CHECK_NOTHROW(report_stats(stats));
}

TEST_CASE("stats records parse back") {
  PipelineStats stats;
  StageStats a{"s", "ingest", 5, 4, {{"empty", 1}}, 0, 0, 50, 0.0};
  StageStats b{"s", "filter", 4, 3, {{"Html", 1}}, 0, 0, 40, 0.0};
  StageStats c{"s", "dedup", 3, 2, {}, 1, 0, 30, 0.0};
  stats.rows = {a, b, c};
  stats.corpus_lines = 2;
  const auto report = report_stats(stats);
  const auto parsed = parse_stats_records(report.records);
  CHECK(report_stats(parsed).records == report.records);
  CHECK(parsed.corpus_lines == 2);
  CHECK_THROWS_AS(parse_stats_records("{not json}\n"), StatsError);
  CHECK(timing_records(stats).find("wall_seconds") != std::string::npos);
}
