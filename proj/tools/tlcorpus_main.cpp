// tlcorpus: batch command-line front end for the corpus toolkit.

#include "tlcorpus/bench_prep.hpp"
#include "tlcorpus/bpe.hpp"
#include "tlcorpus/dedup.hpp"
#include "tlcorpus/filters.hpp"
#include "tlcorpus/ingest.hpp"
#include "tlcorpus/pipeline.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace tlcorpus;

namespace {

std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  return in;
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

std::vector<SentenceRecord> read_records(const fs::path& p) {
  auto in = open_in(p);
  return read_plain_corpus(in, p.string());
}

std::vector<SentenceRecord> read_all(const std::vector<std::string>& paths) {
  std::vector<SentenceRecord> all;
  for (const auto& p : paths) {
    auto recs = read_records(p);
    all.insert(all.end(), std::make_move_iterator(recs.begin()), std::make_move_iterator(recs.end()));
  }
  return all;
}

// Articles are blocks of non-blank lines separated by blank lines.
std::vector<std::vector<std::string>> group_documents(std::span<const SentenceRecord> records) {
  std::vector<std::vector<std::string>> docs;
  const SentenceRecord* prev = nullptr;
  for (const auto& rec : records) {
    if (!prev || prev->doc_no != rec.doc_no || prev->source_id != rec.source_id) docs.emplace_back();
    docs.back().push_back(rec.text);
    prev = &rec;
  }
  return docs;
}

// Minimal RFC 4180 reader: quoted fields, doubled quotes, CRLF.
std::vector<std::vector<std::string>> read_csv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  char c;
  auto end_row = [&] {
    row.push_back(std::move(field));
    field.clear();
    if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
    row.clear();
    any = false;
  };
  while (in.get(c)) {
    any = true;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      end_row();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  if (quoted) throw std::runtime_error("unterminated quoted field");
  if (any) end_row();
  return rows;
}

bool parse_flag(const std::string& s, std::size_t row) {
  if (s == "1" || s == "true") return true;
  if (s == "0" || s == "false") return false;
  throw std::runtime_error("row " + std::to_string(row) + ": '" + s + "' is not a binary value");
}

std::string tsv_escape(std::string_view s) {
  std::string out(s);
  std::replace(out.begin(), out.end(), '\t', ' ');
  return out;
}

void print_filter_counts(const FilterCounts& counts) {
  std::cerr << "passed=" << counts.passed;
  for (auto r : {RejectReason::NonLatin, RejectReason::Length, RejectReason::PunctRun, RejectReason::AvgWordLen,
                 RejectReason::Html}) {
    std::cerr << ' ' << to_string(r) << '=' << counts[r];
  }
  std::cerr << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Corpus construction toolkit: ingest, filter, dedup, split, BPE, benchmark prep"};
  app.require_subcommand(1);
  std::string stage;
  std::function<void()> action;

  auto add = [&](const std::string& name, const std::string& help) {
    return app.add_subcommand(name, help);
  };

  // ingest
  std::string in_path, target_path, out_path, source_id, format = "plain", side = "target";
  {
    auto* sub = add("ingest", "Normalize a plain corpus or extract one side of a bitext");
    sub->add_option("--in", in_path, "Input file (source-language file for paired)")->required();
    sub->add_option("--target", target_path, "Target-language file for paired input");
    sub->add_option("--format", format, "plain, tsv or paired")->check(CLI::IsMember({"plain", "tsv", "paired"}));
    sub->add_option("--side", side, "Bitext side to keep")->check(CLI::IsMember({"source", "target"}));
    sub->add_option("--source-id", source_id, "Source id for diagnostics");
    sub->add_option("--out", out_path, "Output corpus")->required();
    sub->final_callback([&] {
      action = [&] {
        const std::string id = source_id.empty() ? in_path : source_id;
        auto in = open_in(in_path);
        auto out = open_out(out_path);
        ReadCounts counts;
        std::uint64_t empty_side = 0, written = 0;
        if (format == "plain") {
          auto recs = read_plain_corpus(in, id, &counts);
          write_records(out, recs, true);
          written = recs.size();
        } else {
          std::ifstream target;
          std::vector<BitextRecord> bitext;
          if (format == "tsv") {
            TsvBitextReader reader(in, id);
            while (auto r = reader.next()) bitext.push_back(std::move(*r));
            counts = reader.counts();
          } else {
            if (target_path.empty()) throw std::runtime_error("paired format needs --target");
            target = open_in(target_path);
            PairedBitextReader reader(in, target, id);
            while (auto r = reader.next()) bitext.push_back(std::move(*r));
            counts = reader.counts();
          }
          auto extracted = extract_bitext_side(bitext, bitext_side_from_string(side), id);
          write_records(out, extracted.records, false);
          empty_side = extracted.skipped_empty;
          written = extracted.records.size();
        }
        std::cerr << "lines=" << counts.lines << " records=" << written << " empty=" << counts.empty
                  << " malformed=" << counts.malformed << " empty_side=" << empty_side << '\n';
      };
    });
  }

  // filter
  std::string config_path, rejects_path;
  {
    auto* sub = add("filter", "Apply the quality filters");
    sub->add_option("--config", config_path, "Filter config (YAML); defaults when omitted");
    sub->add_option("--in", in_path, "Input corpus")->required();
    sub->add_option("--out", out_path, "Passing lines")->required();
    sub->add_option("--rejects", rejects_path, "reason<TAB>text audit file");
    sub->final_callback([&] {
      action = [&] {
        const FilterConfig cfg = config_path.empty() ? FilterConfig{} : load_filter_config(config_path);
        cfg.validate();
        auto in = open_in(in_path);
        auto out = open_out(out_path);
        std::ofstream rejects;
        if (!rejects_path.empty()) rejects = open_out(rejects_path);
        PlainCorpusReader reader(in, in_path);
        FilterCounts counts;
        std::optional<std::uint64_t> last_doc;
        while (auto rec = reader.next()) {
          const FilterVerdict v = apply_filters(rec->text, cfg);
          counts.add(v);
          if (v.passed()) {
            if (last_doc && *last_doc != rec->doc_no) out << '\n';
            last_doc = rec->doc_no;
            out << rec->text << '\n';
          } else if (rejects.is_open()) {
            rejects << to_string(v.reason()) << '\t' << rec->text << '\n';
          }
        }
        print_filter_counts(counts);
      };
    });
  }

  // dedup
  std::vector<std::string> in_paths;
  bool external = false;
  std::string tmp_dir;
  std::size_t chunk_records = 1u << 20;
  {
    auto* sub = add("dedup", "Exact keep-first deduplication across inputs");
    sub->add_option("--in", in_paths, "Input corpora, in priority order")->required();
    sub->add_option("--out", out_path, "Output corpus")->required();
    sub->add_flag("--external-sort", external, "Bound memory with on-disk sorted runs");
    sub->add_option("--tmp", tmp_dir, "Scratch directory for --external-sort");
    sub->add_option("--chunk-records", chunk_records, "Keys per sorted run")->check(CLI::PositiveNumber);
    sub->final_callback([&] {
      action = [&] {
        auto out = open_out(out_path);
        const SentenceRecord* prev = nullptr;
        SentenceRecord last;
        auto emit = [&](const SentenceRecord& rec) {
          if (prev && (last.doc_no != rec.doc_no || last.source_id != rec.source_id)) out << '\n';
          out << rec.text << '\n';
          last = rec;
          prev = &last;
        };
        DedupCounts counts;
        if (external) {
          RecordScan scan = [&](const RecordVisitor& visit) {
            for (const auto& p : in_paths) {
              auto in = open_in(p);
              PlainCorpusReader reader(in, p);
              while (auto rec = reader.next()) visit(*rec);
            }
          };
          const fs::path tmp = tmp_dir.empty() ? fs::temp_directory_path() : fs::path(tmp_dir);
          counts = dedup_external(scan, emit, {tmp, chunk_records});
        } else {
          Deduplicator seen;
          for (const auto& p : in_paths) {
            auto in = open_in(p);
            PlainCorpusReader reader(in, p);
            while (auto rec = reader.next()) {
              ++counts.read;
              if (seen.insert(rec->text)) {
                ++counts.kept;
                emit(*rec);
              } else {
                ++counts.dropped;
              }
            }
          }
        }
        std::cout << "read=" << counts.read << " kept=" << counts.kept << " dropped=" << counts.dropped << '\n';
      };
    });
  }

  // split
  double ratio = 0.6;
  std::uint64_t seed = 0;
  std::string unit = "document", out_a, out_b;
  unsigned workers = 1;
  {
    auto* sub = add("split", "Deterministic seeded split into subsets A and B");
    sub->add_option("--in", in_path, "Input corpus")->required();
    sub->add_option("--ratio", ratio, "Fraction of units in A");
    sub->add_option("--seed", seed, "Split seed");
    sub->add_option("--unit", unit, "document or line")->check(CLI::IsMember({"document", "line"}));
    sub->add_option("--out-a", out_a, "Subset A")->required();
    sub->add_option("--out-b", out_b, "Subset B")->required();
    sub->add_option("--workers", workers, "Hashing threads")->check(CLI::PositiveNumber);
    sub->final_callback([&] {
      action = [&] {
        SplitConfig cfg{ratio, seed, split_unit_from_string(unit)};
        if (auto v = cfg.violations(); !v.empty()) throw std::invalid_argument(v.front());
        const auto recs = read_records(in_path);
        const auto result = split_corpus(recs, cfg, workers);
        auto a = open_out(out_a);
        auto b = open_out(out_b);
        write_records(a, result.a, true);
        write_records(b, result.b, true);
        std::cerr << "a=" << result.a.size() << " b=" << result.b.size() << '\n';
      };
    });
  }

  // train-bpe
  TokenizerConfig tok_cfg;
  std::vector<std::string> specials, add_tokens;
  std::string model_path;
  {
    auto* sub = add("train-bpe", "Learn a BPE model, or add special tokens to an existing one");
    sub->add_option("--in", in_paths, "Training corpora");
    sub->add_option("--model", model_path, "Existing model prefix to extend with --add-tokens");
    sub->add_option("--vocab-size", tok_cfg.vocab_size, "Target vocabulary size");
    sub->add_option("--coverage", tok_cfg.character_coverage, "Character coverage in (0, 1]");
    sub->add_option("--special", specials, "Reserved special tokens (replaces the defaults)");
    sub->add_option("--unk", tok_cfg.unknown_token, "Unknown token");
    sub->add_option("--add-tokens", add_tokens, "Special tokens appended after training");
    sub->add_option("--out", out_path, "Output model prefix")->required();
    sub->final_callback([&] {
      action = [&] {
        if (!specials.empty()) tok_cfg.special_tokens = specials;
        if (in_paths.empty() == model_path.empty()) throw std::invalid_argument("give exactly one of --in or --model");
        BpeModel model = [&] {
          if (!model_path.empty()) return BpeModel::load(model_path);
          WordCounts words;
          for (const auto& p : in_paths) {
            auto in = open_in(p);
            std::string line;
            while (std::getline(in, line)) words.add_text(normalize_line(line, {p, 0}));
          }
          return learn_bpe(words, tok_cfg);
        }();
        if (!add_tokens.empty()) model = add_special_tokens(model, add_tokens);
        model.save(out_path);
        std::cerr << "vocab=" << model.vocab_size() << " merges=" << model.merges().size() << '\n';
      };
    });
  }

  // encode
  bool decode_mode = false;
  {
    auto* sub = add("encode", "Encode lines to space-separated ids, or decode them back");
    sub->add_option("--model", model_path, "Model prefix")->required();
    sub->add_option("--in", in_path, "Input file")->required();
    sub->add_option("--out", out_path, "Output file")->required();
    sub->add_flag("--decode", decode_mode, "Input holds ids; write text");
    sub->final_callback([&] {
      action = [&] {
        const BpeModel model = BpeModel::load(model_path);
        auto in = open_in(in_path);
        auto out = open_out(out_path);
        CachingEncoder encoder(model);
        std::string line;
        while (std::getline(in, line)) {
          if (decode_mode) {
            std::vector<TokenId> ids;
            std::istringstream ls(line);
            long long id;
            while (ls >> id) ids.push_back(static_cast<TokenId>(id));
            out << decode(model, ids) << '\n';
          } else {
            const auto ids = encoder.encode(normalize_line(line));
            for (std::size_t i = 0; i < ids.size(); ++i) out << (i ? " " : "") << ids[i];
            out << '\n';
          }
        }
      };
    });
  }

  // prep-tweets
  TweetPrepConfig tweet_cfg;
  {
    auto* sub = add("prep-tweets", "Normalize tweets in a text<TAB>label file");
    sub->add_option("--in", in_path, "Input TSV")->required();
    sub->add_option("--out", out_path, "Output TSV")->required();
    sub->add_option("--link-token", tweet_cfg.link_token);
    sub->add_option("--mention-token", tweet_cfg.mention_token);
    sub->add_option("--hashtag-token", tweet_cfg.hashtag_token);
    sub->final_callback([&] {
      action = [&] {
        if (auto v = tweet_cfg.violations(); !v.empty()) throw std::invalid_argument(v.front());
        auto in = open_in(in_path);
        auto out = open_out(out_path);
        std::string line;
        while (std::getline(in, line)) {
          if (!line.empty() && line.back() == '\r') line.pop_back();
          const auto tab = line.find('\t');
          const std::string_view text = std::string_view(line).substr(0, tab);
          out << preprocess_tweet(text, tweet_cfg);
          if (tab != std::string::npos) out << line.substr(tab);
          out << '\n';
        }
      };
    });
  }

  // encode-labels
  {
    auto* sub = add("encode-labels", "Binarize five Dengue label columns into one integer");
    sub->add_option("--in", in_path, "CSV with five 0/1 columns, optional header")->required();
    sub->add_option("--out", out_path, "CSV with one integer per row")->required();
    sub->final_callback([&] {
      action = [&] {
        auto in = open_in(in_path);
        auto rows = read_csv(in);
        std::array<std::size_t, 5> column{0, 1, 2, 3, 4};
        std::size_t first = 0;
        auto out = open_out(out_path);
        if (!rows.empty() && rows[0].size() >= 1 && rows[0][0] != "0" && rows[0][0] != "1" &&
            rows[0][0] != "true" && rows[0][0] != "false") {
          for (std::size_t k = 0; k < 5; ++k) {
            auto it = std::find(rows[0].begin(), rows[0].end(), DengueLabelVector::kNames[k]);
            if (it == rows[0].end()) {
              throw std::runtime_error("header lacks column '" + std::string(DengueLabelVector::kNames[k]) + "'");
            }
            column[k] = static_cast<std::size_t>(it - rows[0].begin());
          }
          first = 1;
          out << "label\n";
        }
        for (std::size_t r = first; r < rows.size(); ++r) {
          DengueLabelVector v;
          for (std::size_t k = 0; k < 5; ++k) {
            if (column[k] >= rows[r].size()) {
              throw std::runtime_error("row " + std::to_string(r + 1) + " has too few columns");
            }
            v.flags[k] = parse_flag(rows[r][column[k]], r + 1);
          }
          out << encode_dengue_labels(v) << '\n';
        }
      };
    });
  }

  // make-nli
  bool later_as_premise = false;
  std::vector<std::string> exclude;
  {
    auto* sub = add("make-nli", "Entailment/contradiction pairs from blank-line separated articles");
    sub->add_option("--in", in_path, "Article file")->required();
    sub->add_option("--seed", seed, "Sampling seed");
    sub->add_option("--out", out_path, "premise<TAB>hypothesis<TAB>label")->required();
    sub->add_flag("--later-as-premise", later_as_premise, "Use the later sentence as premise");
    sub->add_option("--exclude", exclude, "Drop sentences that also occur in these corpora");
    sub->final_callback([&] {
      action = [&] {
        auto recs = read_records(in_path);
        if (!exclude.empty()) recs = drop_shared_texts(recs, read_all(exclude));
        const auto articles = group_documents(recs);
        const auto result = make_nli_pairs(articles, {seed, later_as_premise});
        auto out = open_out(out_path);
        std::size_t entail = 0;
        for (const auto& p : result.pairs) {
          out << tsv_escape(p.premise) << '\t' << tsv_escape(p.hypothesis) << '\t' << to_string(p.label) << '\n';
          entail += p.label == NliLabel::Entailment;
        }
        std::cerr << "articles=" << articles.size() << " skipped=" << result.skipped_articles
                  << " entailment=" << entail << " contradiction=" << result.pairs.size() - entail << '\n';
        if (result.contradictions_impossible) {
          std::cerr << "warning: fewer than two usable articles; contradictions missing\n";
        }
      };
    });
  }

  // build
  std::optional<unsigned> build_workers;
  {
    auto* sub = add("build", "Run the full pipeline from a config document");
    sub->add_option("--config", config_path, "Pipeline config (YAML)")->required();
    sub->add_option("--workers", build_workers, "Override the configured worker count")->check(CLI::PositiveNumber);
    sub->final_callback([&] {
      action = [&] {
        PipelineConfig cfg = load_pipeline_config(config_path);
        if (build_workers) cfg.workers = *build_workers;
        const PipelineStats stats = run_pipeline(cfg);
        std::cout << report_stats(stats).summary;
      };
    });
  }

  // stats
  {
    auto* sub = add("stats", "Check and summarize a stats.jsonl report");
    sub->add_option("--in", in_path, "stats.jsonl")->required();
    sub->final_callback([&] {
      action = [&] {
        auto in = open_in(in_path);
        std::stringstream buf;
        buf << in.rdbuf();
        std::cout << report_stats(parse_stats_records(buf.str())).summary;
      };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  stage = app.get_subcommands().front()->get_name();

  try {
    action();
  } catch (const StageError& e) {
    std::cerr << "error " << e.what() << '\n';
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error [config] " << e.what() << '\n';
    return 2;
  } catch (const EncodingError& e) {
    std::cerr << "error [" << stage << "] " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error [" << stage << "] " << e.what() << '\n';
    return 1;
  }
  return 0;
}
