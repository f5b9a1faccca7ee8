#pragma once

// Keyed low-latency store: tables partitioned by camera id and sorted by
// timestamp. One writer, many readers; every read returns a snapshot copy.

#include <compare>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "svs/domain.hpp"
#include "svs/error.hpp"

namespace svs::gateway {

struct StoreKey {
  std::string camera_id;
  TimestampMs ts_ms = 0;

  friend auto operator<=>(const StoreKey&, const StoreKey&) = default;
  friend bool operator==(const StoreKey&, const StoreKey&) = default;
};

enum class TableKind {
  Counts,     // rows carry {count}
  Analytics,  // rows carry the analytics publication body
  Events,     // rows carry an anomaly event
  Heatmap,    // rows carry a heat map export
};

std::string_view to_string(TableKind kind);
TableKind table_kind_from_string(std::string_view text);

struct Row {
  StoreKey key;
  Json value;
};

class KvStore {
 public:
  void create_table(const std::string& name, TableKind kind);
  bool has_table(const std::string& name) const;
  TableKind kind(const std::string& name) const;
  std::vector<std::string> table_names() const;

  // Last write wins per key. Throws NotFoundError for a missing table and
  // ValidationError when the row lacks the fields its table kind requires.
  void put(const std::string& table, const StoreKey& key, Json row);
  std::optional<Json> get(const std::string& table, const StoreKey& key) const;
  // Rows with key.camera_id == camera_id and t0 <= ts_ms <= t1, ascending.
  std::vector<Row> range(const std::string& table, const std::string& camera_id, TimestampMs t0, TimestampMs t1) const;
  std::optional<Row> latest(const std::string& table, const std::string& camera_id) const;
  std::size_t size(const std::string& table) const;

  // Whole store as {table: {kind, rows: [{camera_id, ts_ms, value}]}}.
  Json dump() const;

 private:
  struct Table {
    TableKind kind;
    std::map<StoreKey, Json> rows;
  };
  const Table& table(const std::string& name) const;

  mutable std::shared_mutex mutex_;
  std::map<std::string, Table, std::less<>> tables_;
};

}  // namespace svs::gateway
