#include "tlcorpus/dedup.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <memory>
#include <queue>
#include <stdexcept>
#include <string>
#include <unistd.h>

namespace tlcorpus {

std::vector<SentenceRecord> dedup_stream(std::span<const SentenceRecord> records, DedupCounts* counts) {
  Deduplicator seen(records.size());
  std::vector<SentenceRecord> out;
  for (const auto& rec : records) {
    if (seen.insert(rec.text)) out.push_back(rec);
  }
  if (counts) {
    counts->read = records.size();
    counts->kept = out.size();
    counts->dropped = records.size() - out.size();
  }
  return out;
}

std::vector<SentenceRecord> drop_shared_texts(std::span<const SentenceRecord> records,
                                              std::span<const SentenceRecord> exclude) {
  Deduplicator excluded(exclude.size());
  for (const auto& rec : exclude) excluded.insert(rec.text);
  std::vector<SentenceRecord> out;
  for (const auto& rec : records) {
    if (!excluded.contains(rec.text)) out.push_back(rec);
  }
  return out;
}

namespace {

namespace fs = std::filesystem;

struct KeyEntry {
  Digest128 key;
  std::uint64_t index;
};

bool operator<(const KeyEntry& a, const KeyEntry& b) {
  return a.key != b.key ? a.key < b.key : a.index < b.index;
}

// Scratch directory removed on scope exit.
class ScratchDir {
 public:
  explicit ScratchDir(const fs::path& parent) {
    static std::atomic<unsigned> counter{0};
    const fs::path base = parent.empty() ? fs::temp_directory_path() : parent;
    path_ = base / ("tlcorpus-dedup-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  fs::path file(const std::string& stem, std::size_t n) const { return path_ / (stem + std::to_string(n) + ".bin"); }

 private:
  fs::path path_;
};

template <typename T>
void write_run(const fs::path& path, std::vector<T>& items) {
  std::sort(items.begin(), items.end());
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(items.data()), static_cast<std::streamsize>(items.size() * sizeof(T)));
  if (!out) throw std::runtime_error("dedup: failed writing run file " + path.string());
  items.clear();
}

template <typename T>
class RunReader {
 public:
  explicit RunReader(const fs::path& path) : in_(path, std::ios::binary) {
    if (!in_) throw std::runtime_error("dedup: cannot open run file " + path.string());
    advance();
  }
  bool done() const { return done_; }
  const T& head() const { return head_; }
  void advance() {
    if (!in_.read(reinterpret_cast<char*>(&head_), sizeof(T))) done_ = true;
  }

 private:
  std::ifstream in_;
  T head_{};
  bool done_ = false;
};

// K-way merge over sorted run files, invoking `fn` on items in order.
template <typename T, typename Fn>
void merge_runs(const std::vector<fs::path>& runs, Fn&& fn) {
  std::vector<std::unique_ptr<RunReader<T>>> readers;
  for (const auto& p : runs) readers.push_back(std::make_unique<RunReader<T>>(p));
  auto greater = [&](std::size_t a, std::size_t b) { return readers[b]->head() < readers[a]->head(); };
  std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(greater)> heap(greater);
  for (std::size_t i = 0; i < readers.size(); ++i) {
    if (!readers[i]->done()) heap.push(i);
  }
  while (!heap.empty()) {
    const std::size_t i = heap.top();
    heap.pop();
    fn(readers[i]->head());
    readers[i]->advance();
    if (!readers[i]->done()) heap.push(i);
  }
}

}  // namespace

DedupCounts dedup_external(const RecordScan& scan, const RecordVisitor& emit, const ExternalDedupOptions& options) {
  if (options.chunk_records == 0) throw std::invalid_argument("dedup: chunk_records must be positive");
  ScratchDir scratch(options.tmp_dir);
  DedupCounts counts;

  // Pass 1: sorted (digest, index) runs.
  std::vector<fs::path> key_runs;
  std::vector<KeyEntry> buffer;
  buffer.reserve(std::min<std::size_t>(options.chunk_records, 1u << 16));
  std::uint64_t index = 0;
  scan([&](const SentenceRecord& rec) {
    buffer.push_back({dedup_key(rec.text), index++});
    if (buffer.size() >= options.chunk_records) {
      key_runs.push_back(scratch.file("keys", key_runs.size()));
      write_run(key_runs.back(), buffer);
    }
  });
  if (!buffer.empty()) {
    key_runs.push_back(scratch.file("keys", key_runs.size()));
    write_run(key_runs.back(), buffer);
  }
  buffer.clear();
  buffer.shrink_to_fit();
  counts.read = index;

  // Every entry after the first in a digest group is a duplicate.
  std::vector<fs::path> drop_runs;
  std::vector<std::uint64_t> dropped;
  bool have_prev = false;
  Digest128 prev{};
  merge_runs<KeyEntry>(key_runs, [&](const KeyEntry& e) {
    if (have_prev && e.key == prev) {
      dropped.push_back(e.index);
      ++counts.dropped;
      if (dropped.size() >= options.chunk_records) {
        drop_runs.push_back(scratch.file("drop", drop_runs.size()));
        write_run(drop_runs.back(), dropped);
      }
    }
    prev = e.key;
    have_prev = true;
  });
  if (!dropped.empty()) {
    drop_runs.push_back(scratch.file("drop", drop_runs.size()));
    write_run(drop_runs.back(), dropped);
  }

  // Pass 2: replay and skip dropped indices, which arrive in increasing order.
  std::vector<std::unique_ptr<RunReader<std::uint64_t>>> readers;
  for (const auto& p : drop_runs) readers.push_back(std::make_unique<RunReader<std::uint64_t>>(p));
  auto next_dropped = [&]() -> std::uint64_t {
    std::uint64_t best = UINT64_MAX;
    RunReader<std::uint64_t>* from = nullptr;
    for (auto& r : readers) {
      if (!r->done() && r->head() < best) {
        best = r->head();
        from = r.get();
      }
    }
    if (from) from->advance();
    return best;
  };
  std::uint64_t skip = next_dropped();
  std::uint64_t position = 0;
  std::uint64_t replayed = 0;
  scan([&](const SentenceRecord& rec) {
    ++replayed;
    if (position++ == skip) {
      skip = next_dropped();
      return;
    }
    emit(rec);
    ++counts.kept;
  });
  if (replayed != counts.read) throw std::runtime_error("dedup: input changed between passes");
  return counts;
}

}  // namespace tlcorpus
