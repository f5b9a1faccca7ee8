#include "svs/gateway/kv_store.hpp"

#include <limits>
#include <mutex>

namespace svs::gateway {
namespace {

void require_fields(const Json& row, std::initializer_list<const char*> fields, TableKind kind) {
  if (!row.is_object()) throw ValidationError("row must be a document");
  for (const char* f : fields) {
    if (!row.contains(f)) {
      throw ValidationError(std::string(to_string(kind)) + " row is missing '" + f + "'");
    }
  }
}

void check_row(TableKind kind, const Json& row) {
  switch (kind) {
    case TableKind::Counts:
      require_fields(row, {"count"}, kind);
      break;
    case TableKind::Analytics:
      require_fields(row, {"count", "indicator"}, kind);
      break;
    case TableKind::Events:
      require_fields(row, {"kind", "message"}, kind);
      break;
    case TableKind::Heatmap:
      require_fields(row, {"cols", "rows", "cells"}, kind);
      break;
  }
}

}  // namespace

std::string_view to_string(TableKind kind) {
  switch (kind) {
    case TableKind::Counts:
      return "Counts";
    case TableKind::Analytics:
      return "Analytics";
    case TableKind::Events:
      return "Events";
    case TableKind::Heatmap:
      return "Heatmap";
  }
  return "?";
}

TableKind table_kind_from_string(std::string_view text) {
  if (text == "Counts") return TableKind::Counts;
  if (text == "Analytics") return TableKind::Analytics;
  if (text == "Events") return TableKind::Events;
  if (text == "Heatmap") return TableKind::Heatmap;
  throw ConfigError("unknown table kind '" + std::string(text) + "'");
}

void KvStore::create_table(const std::string& name, TableKind kind) {
  std::unique_lock lock(mutex_);
  auto [it, inserted] = tables_.try_emplace(name, Table{kind, {}});
  if (!inserted && it->second.kind != kind) throw ConfigError("table '" + name + "' exists with another kind");
}

bool KvStore::has_table(const std::string& name) const {
  std::shared_lock lock(mutex_);
  return tables_.contains(name);
}

TableKind KvStore::kind(const std::string& name) const {
  std::shared_lock lock(mutex_);
  return table(name).kind;
}

std::vector<std::string> KvStore::table_names() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [name, t] : tables_) out.push_back(name);
  return out;
}

const KvStore::Table& KvStore::table(const std::string& name) const {
  auto it = tables_.find(name);
  if (it == tables_.end()) throw NotFoundError("no table '" + name + "'");
  return it->second;
}

void KvStore::put(const std::string& name, const StoreKey& key, Json row) {
  std::unique_lock lock(mutex_);
  auto it = tables_.find(name);
  if (it == tables_.end()) throw NotFoundError("no table '" + name + "'");
  check_row(it->second.kind, row);
  it->second.rows.insert_or_assign(key, std::move(row));
}

std::optional<Json> KvStore::get(const std::string& name, const StoreKey& key) const {
  std::shared_lock lock(mutex_);
  const auto& rows = table(name).rows;
  auto it = rows.find(key);
  if (it == rows.end()) return std::nullopt;
  return std::optional<Json>(std::in_place, it->second);
}

std::vector<Row> KvStore::range(const std::string& name, const std::string& camera_id, TimestampMs t0,
                                TimestampMs t1) const {
  if (t0 > t1) throw ValidationError("range start is after its end");
  std::shared_lock lock(mutex_);
  const auto& rows = table(name).rows;
  std::vector<Row> out;
  for (auto it = rows.lower_bound(StoreKey{camera_id, t0}); it != rows.end(); ++it) {
    if (it->first.camera_id != camera_id || it->first.ts_ms > t1) break;
    out.push_back({it->first, it->second});
  }
  return out;
}

std::optional<Row> KvStore::latest(const std::string& name, const std::string& camera_id) const {
  std::shared_lock lock(mutex_);
  const auto& rows = table(name).rows;
  auto it = rows.upper_bound(StoreKey{camera_id, std::numeric_limits<TimestampMs>::max()});
  if (it == rows.begin()) return std::nullopt;
  --it;
  if (it->first.camera_id != camera_id) return std::nullopt;
  return Row{it->first, it->second};
}

std::size_t KvStore::size(const std::string& name) const {
  std::shared_lock lock(mutex_);
  return table(name).rows.size();
}

Json KvStore::dump() const {
  std::shared_lock lock(mutex_);
  Json out = Json::object();
  for (const auto& [name, t] : tables_) {
    Json rows = Json::array();
    for (const auto& [key, value] : t.rows) {
      rows.push_back({{"camera_id", key.camera_id}, {"ts_ms", key.ts_ms}, {"value", value}});
    }
    out[name] = {{"kind", std::string(to_string(t.kind))}, {"rows", std::move(rows)}};
  }
  return out;
}

}  // namespace svs::gateway
