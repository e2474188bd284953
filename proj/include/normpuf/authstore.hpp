#pragma once

// Reference database and decision rule. A store is a directory:
//
//   config.json    {"threshold": τ, "version": 1}
//   index.jsonl    one {"id", "filename", "source", "enrolled_at"} object per line
//   rec_NNNNNN.nmap
//
// Templates are kept in the clear and `verify` hands the full similarity score
// back to the caller; both mirror how deployed norm-map systems behave.
//
// Timestamps are logical ticks from a per-store counter so that reruns
// produce byte-identical stores.

#include <atomic>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "normpuf/core.hpp"

namespace normpuf {

enum class SourceTag { scanner, mobile };

inline constexpr std::string_view to_string(SourceTag s) noexcept {
  return s == SourceTag::scanner ? "scanner" : "mobile";
}

inline SourceTag parse_source(std::string_view s) {
  if (s == "scanner") return SourceTag::scanner;
  if (s == "mobile") return SourceTag::mobile;
  throw Error(Errc::format_error, "unknown source tag: " + std::string(s));
}

struct TemplateRecord {
  std::string id;
  NormMap templ;
  std::uint64_t enrolled_at = 0;
  SourceTag source = SourceTag::scanner;
  std::string filename;
};

struct VerifyOutcome {
  bool accepted = false;
  SimilarityScore score{};
  std::optional<std::string> matched_id;
};

struct QueryLogEntry {
  std::uint64_t timestamp = 0;
  std::optional<std::string> id;
  SimilarityScore score{};
  bool accepted = false;
};

struct StoreConfig {
  double threshold = 0.3;
};

class TemplateStore {
 public:
  /// Memory-only store (no persistence).
  explicit TemplateStore(StoreConfig cfg = {}) : cfg_(cfg) { check_threshold(); }

  /// Opens the store at `dir`, creating it with `cfg` if it does not exist.
  /// An existing store keeps its own persisted configuration.
  static std::unique_ptr<TemplateStore> open(const std::filesystem::path& dir, StoreConfig cfg = {}) {
    auto s = std::unique_ptr<TemplateStore>(new TemplateStore(cfg));
    s->dir_ = dir;
    namespace fs = std::filesystem;
    std::error_code ec;
    if (!fs::exists(dir / "config.json")) {
      fs::create_directories(dir, ec);
      if (ec) throw Error(Errc::storage_failure, "cannot create store directory " + dir.string());
      s->write_config();
      std::ofstream(dir / "index.jsonl", std::ios::app).flush();
      return s;
    }
    s->load();
    return s;
  }

  TemplateStore(const TemplateStore&) = delete;
  TemplateStore& operator=(const TemplateStore&) = delete;

  double threshold() const noexcept { return cfg_.threshold; }
  bool persistent() const noexcept { return dir_.has_value(); }

  std::size_t size() const {
    std::shared_lock lk(records_mu_);
    return records_.size();
  }

  bool contains(std::string_view id) const {
    std::shared_lock lk(records_mu_);
    return find(id) != nullptr;
  }

  std::vector<std::string> ids() const {
    std::shared_lock lk(records_mu_);
    std::vector<std::string> out;
    for (const auto& r : records_) out.push_back(r.id);
    return out;
  }

  /// Stored template. Values are float32-rounded at enrollment so the
  /// in-memory copy matches the persisted one bit for bit.
  NormMap get(std::string_view id) const {
    std::shared_lock lk(records_mu_);
    const auto* r = find(id);
    if (!r) throw Error(Errc::unknown_id, std::string(id));
    return r->templ;
  }

  TemplateRecord record(std::string_view id) const {
    std::shared_lock lk(records_mu_);
    const auto* r = find(id);
    if (!r) throw Error(Errc::unknown_id, std::string(id));
    return *r;
  }

  void enroll(const std::string& id, const NormMap& templ, SourceTag source = SourceTag::scanner) {
    std::unique_lock lk(records_mu_);
    if (find(id)) throw Error(Errc::duplicate_id, id);
    TemplateRecord rec;
    rec.id = id;
    rec.templ = templ.float_rounded();
    rec.enrolled_at = tick();
    rec.source = source;
    rec.filename = record_filename(records_.size());
    if (dir_) persist(rec);
    by_id_.emplace(rec.id, records_.size());
    records_.push_back(std::move(rec));
  }

  /// With `id`: scores the query against that template. Without: searches the
  /// whole store and reports the record with the best min-component score
  /// (first enrolled wins ties). Every call is appended to the query log.
  VerifyOutcome verify(const NormMap& query, std::optional<std::string_view> id = std::nullopt) const {
    std::shared_lock lk(records_mu_);
    if (records_.empty()) throw Error(Errc::empty_store, "verify against an empty store");
    VerifyOutcome out;
    if (id) {
      const auto* r = find(*id);
      if (!r) throw Error(Errc::unknown_id, std::string(*id));
      out.score = score(query, r->templ);
      out.matched_id = r->id;
    } else {
      double best = -std::numeric_limits<double>::infinity();
      for (const auto& r : records_) {
        const auto s = score(query, r.templ);
        if (s.min() > best) {
          best = s.min();
          out.score = s;
          out.matched_id = r.id;
        }
      }
    }
    out.accepted = accepts(out.score, cfg_.threshold);

    std::lock_guard lg(log_mu_);
    QueryLogEntry e;
    e.timestamp = tick();
    if (id) e.id = std::string(*id);
    e.score = out.score;
    e.accepted = out.accepted;
    log_.push_back(std::move(e));
    return out;
  }

  std::vector<QueryLogEntry> query_log() const {
    std::lock_guard lg(log_mu_);
    return log_;
  }

  std::size_t query_count() const {
    std::lock_guard lg(log_mu_);
    return log_.size();
  }

  /// FNV-1a over ids and template bits; changes iff stored content changes.
  std::uint64_t fingerprint() const {
    std::shared_lock lk(records_mu_);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const void* p, std::size_t n) {
      const auto* b = static_cast<const unsigned char*>(p);
      for (std::size_t i = 0; i < n; ++i) {
        h ^= b[i];
        h *= 0x100000001b3ULL;
      }
    };
    for (const auto& r : records_) {
      mix(r.id.data(), r.id.size());
      for (double v : r.templ.nx()) mix(&v, sizeof v);
      for (double v : r.templ.ny()) mix(&v, sizeof v);
    }
    return h;
  }

  /// In-memory copy of the records with a fresh, empty query log. Used to give
  /// parallel attack runs their own audit trail.
  std::unique_ptr<TemplateStore> snapshot() const {
    std::shared_lock lk(records_mu_);
    auto s = std::make_unique<TemplateStore>(cfg_);
    s->records_ = records_;
    s->by_id_ = by_id_;
    s->clock_.store(clock_.load());
    return s;
  }

 private:
  void check_threshold() const {
    if (!(cfg_.threshold > 0.0 && cfg_.threshold < 1.0))
      throw Error(Errc::invalid_param, "threshold must lie in (0,1)");
  }

  std::uint64_t tick() const { return ++clock_; }

  const TemplateRecord* find(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    return it == by_id_.end() ? nullptr : &records_[it->second];
  }

  static std::string record_filename(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "rec_%06zu.nmap", index);
    return buf;
  }

  static nlohmann::json index_line(const TemplateRecord& r) {
    return nlohmann::json{{"id", r.id},
                          {"filename", r.filename},
                          {"source", std::string(to_string(r.source))},
                          {"enrolled_at", r.enrolled_at}};
  }

  void write_config() const {
    const nlohmann::json cfg{{"threshold", cfg_.threshold}, {"version", 1}};
    std::ofstream os(*dir_ / "config.json", std::ios::trunc);
    os << cfg.dump(2) << '\n';
    if (!os) throw Error(Errc::storage_failure, "cannot write store config");
  }

  /// Template file first, then the index is rewritten to a temp file and
  /// renamed over the old one, so a crash never leaves a dangling index line.
  void persist(const TemplateRecord& rec) const {
    namespace fs = std::filesystem;
    try {
      const auto tmp_rec = *dir_ / (rec.filename + ".tmp");
      save_nmap(tmp_rec, rec.templ);
      fs::rename(tmp_rec, *dir_ / rec.filename);

      const auto tmp_idx = *dir_ / "index.jsonl.tmp";
      {
        std::ofstream os(tmp_idx, std::ios::trunc);
        for (const auto& r : records_) os << index_line(r).dump() << '\n';
        os << index_line(rec).dump() << '\n';
        if (!os) throw Error(Errc::storage_failure, "cannot write index");
      }
      fs::rename(tmp_idx, *dir_ / "index.jsonl");
    } catch (const fs::filesystem_error& e) {
      throw Error(Errc::storage_failure, e.what());
    }
  }

  void load() {
    std::ifstream cfg_in(*dir_ / "config.json");
    if (!cfg_in) throw Error(Errc::storage_failure, "missing config.json in " + dir_->string());
    try {
      const auto cfg = nlohmann::json::parse(cfg_in);
      cfg_.threshold = cfg.at("threshold").get<double>();
      check_threshold();
      std::ifstream idx(*dir_ / "index.jsonl");
      std::string line;
      while (std::getline(idx, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        TemplateRecord rec;
        rec.id = j.at("id").get<std::string>();
        rec.filename = j.at("filename").get<std::string>();
        rec.source = parse_source(j.at("source").get<std::string>());
        rec.enrolled_at = j.at("enrolled_at").get<std::uint64_t>();
        rec.templ = load_nmap(*dir_ / rec.filename);
        if (by_id_.count(rec.id)) throw Error(Errc::duplicate_id, "index lists " + rec.id + " twice");
        clock_ = std::max(clock_.load(), rec.enrolled_at);
        by_id_.emplace(rec.id, records_.size());
        records_.push_back(std::move(rec));
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::format_error, std::string("store metadata: ") + e.what());
    }
  }

  StoreConfig cfg_;
  std::optional<std::filesystem::path> dir_;
  mutable std::shared_mutex records_mu_;
  std::vector<TemplateRecord> records_;
  std::map<std::string, std::size_t, std::less<>> by_id_;
  mutable std::mutex log_mu_;
  mutable std::vector<QueryLogEntry> log_;
  mutable std::atomic<std::uint64_t> clock_{0};
};

}  // namespace normpuf
