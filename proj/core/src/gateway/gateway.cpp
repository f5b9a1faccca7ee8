#include "svs/gateway/gateway.hpp"

#include <fstream>

#include "svs/gateway/topic.hpp"

namespace svs::gateway {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

bool carries_forbidden_key(const Json& doc) {
  if (doc.is_object()) {
    for (const auto& [key, value] : doc.items()) {
      if (is_forbidden_key(key) || carries_forbidden_key(value)) return true;
    }
  } else if (doc.is_array()) {
    for (const auto& v : doc) {
      if (carries_forbidden_key(v)) return true;
    }
  }
  return false;
}

std::string scalar_text(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

}  // namespace

GatewayRule make_rule(std::string name, std::string topic_filter, std::string_view select, RuleAction action) {
  GatewayRule rule;
  rule.name = std::move(name);
  try {
    rule.select = parse_select(select);
  } catch (const SelectSyntaxError& e) {
    throw ConfigError("rule '" + rule.name + "': " + e.what());
  }
  if (topic_filter.empty()) {
    topic_filter = rule.select.from;
  } else if (topic_filter != rule.select.from) {
    throw ConfigError("rule '" + rule.name + "': topic_filter '" + topic_filter + "' differs from FROM '" +
                      rule.select.from + "'");
  }
  try {
    validate_topic_filter(topic_filter);
  } catch (const InvalidFilterError& e) {
    throw ConfigError("rule '" + rule.name + "': " + e.what());
  }
  rule.topic_filter = std::move(topic_filter);
  if (const auto* w = std::get_if<WriteTable>(&action); w && w->table.empty()) {
    throw ConfigError("rule '" + rule.name + "': WriteTable needs a table name");
  }
  if (const auto* n = std::get_if<Notify>(&action); n && n->title_template.empty()) {
    throw ConfigError("rule '" + rule.name + "': Notify needs a title");
  }
  rule.action = std::move(action);
  return rule;
}

RuleSet parse_rules(const Json& doc) {
  RuleSet set;
  const Json* rules = &doc;
  if (doc.is_object()) {
    require_allowed_keys(doc, {"tables", "rules"}, "rule file");
    if (auto it = doc.find("tables"); it != doc.end()) {
      if (!it->is_array()) throw ConfigError("'tables' must be an array");
      for (const auto& t : *it) {
        if (!t.is_object() || !t.contains("name") || !t.contains("kind")) {
          throw ConfigError("table entries need 'name' and 'kind'");
        }
        set.tables.push_back({t["name"].get<std::string>(), table_kind_from_string(t["kind"].get<std::string>())});
      }
    }
    if (!doc.contains("rules")) throw ConfigError("rule file needs a 'rules' array");
    rules = &doc.at("rules");
  }
  if (!rules->is_array()) throw ConfigError("rules must be an array");
  for (const auto& r : *rules) {
    if (!r.is_object()) throw ConfigError("rule must be an object");
    require_allowed_keys(r, {"name", "topic_filter", "select", "action"}, "rule");
    const auto name = r.value("name", std::string{});
    if (name.empty()) throw ConfigError("rule needs a name");
    if (!r.contains("select") || !r["select"].is_string()) throw ConfigError("rule '" + name + "' needs 'select'");
    if (!r.contains("action") || !r["action"].is_object()) throw ConfigError("rule '" + name + "' needs 'action'");
    const auto& a = r["action"];
    const auto type = a.value("type", std::string{});
    RuleAction action;
    if (type == "WriteTable") {
      action = WriteTable{a.value("table", std::string{})};
    } else if (type == "Notify") {
      action = Notify{a.value("title", std::string{})};
    } else {
      throw ConfigError("rule '" + name + "': unknown action type '" + type + "'");
    }
    set.rules.push_back(make_rule(name, r.value("topic_filter", std::string{}), r["select"].get<std::string>(),
                                  std::move(action)));
  }
  return set;
}

RuleSet load_rules(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open rule file '" + path + "'");
  Json doc = Json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ConfigError("rule file '" + path + "' is not valid JSON");
  return parse_rules(doc);
}

RuleSet default_rules() {
  RuleSet set;
  set.tables = {{"counts", TableKind::Counts},
                {"analytics", TableKind::Analytics},
                {"heatmaps", TableKind::Heatmap},
                {"behavioral_anomalies", TableKind::Events},
                {"statistical_anomalies", TableKind::Events}};
  set.rules.push_back(make_rule("store_counts", "counts/+", "SELECT count FROM 'counts/+'", WriteTable{"counts"}));
  set.rules.push_back(
      make_rule("store_analytics", "analytics/+", "SELECT * FROM 'analytics/+'", WriteTable{"analytics"}));
  set.rules.push_back(make_rule("store_heatmaps", "heatmap/+", "SELECT * FROM 'heatmap/+'", WriteTable{"heatmaps"}));
  set.rules.push_back(make_rule("store_behavioral", "anomaly/+",
                                "SELECT * FROM 'anomaly/+' WHERE kind = 'Behavioral'",
                                WriteTable{"behavioral_anomalies"}));
  set.rules.push_back(make_rule("store_statistical", "anomaly/+",
                                "SELECT * FROM 'anomaly/+' WHERE kind = 'Statistical'",
                                WriteTable{"statistical_anomalies"}));
  set.rules.push_back(make_rule("notify_anomaly", "anomaly/+", "SELECT message, value FROM 'anomaly/+'",
                                Notify{"{kind} anomaly on {camera_id}"}));
  return set;
}

Json to_json(const WireMessage& m) { return Json{{"topic", m.topic}, {"body", m.body}}; }

WireMessage wire_message_from_json(const Json& doc) {
  if (!doc.is_object() || !doc.contains("topic") || !doc["topic"].is_string() || !doc.contains("body")) {
    throw ValidationError("wire message needs 'topic' and 'body'");
  }
  require_allowed_keys(doc, {"topic", "body"}, "wire message");
  if (!doc["body"].is_object()) throw ValidationError("wire message body must be a document");
  return {doc["topic"].get<std::string>(), doc["body"]};
}

std::string render_title(std::string_view tmpl, const Json& body) {
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i);
      if (close != std::string_view::npos) {
        const std::string field(tmpl.substr(i + 1, close - i - 1));
        if (body.is_object() && body.contains(field)) {
          out += scalar_text(body[field]);
        } else {
          out += "?";
        }
        i = close + 1;
        continue;
      }
    }
    out += tmpl[i++];
  }
  return out;
}

std::optional<RoutedOutput> evaluate_rule(const GatewayRule& rule, const std::string& topic, const Json& message) {
  if (!match_topic(rule.topic_filter, topic)) return std::nullopt;
  if (rule.select.where && !evaluate(*rule.select.where, message)) return std::nullopt;
  Json projected = project(rule.select, message);

  if (const auto* w = std::get_if<WriteTable>(&rule.action)) {
    auto cam = message.find("camera_id");
    auto ts = message.find("ts_ms");
    if (cam == message.end() || !cam->is_string()) throw RuleEvaluationError("message has no string 'camera_id'");
    if (ts == message.end() || !ts->is_number_integer()) throw RuleEvaluationError("message has no integer 'ts_ms'");
    return RoutedOutput{rule.name, TableWrite{w->table, {cam->get<std::string>(), ts->get<TimestampMs>()},
                                              std::move(projected)}};
  }

  const auto& n = std::get<Notify>(rule.action);
  PushNotification push;
  push.title = render_title(n.title_template, message);
  if (auto m = projected.find("message"); m != projected.end() && m->is_string() && !m->get<std::string>().empty()) {
    push.message = m->get<std::string>();
  } else {
    push.message = projected.dump();
  }
  push.ts_ms = message.value("ts_ms", TimestampMs{0});
  push.camera_id = message.value("camera_id", std::string{});
  return RoutedOutput{rule.name, std::move(push)};
}

Gateway::Gateway(RuleSet rules, KvStore& store, NotificationSink sink)
    : rules_(std::move(rules.rules)), store_(store), sink_(std::move(sink)) {
  for (const auto& t : rules.tables) store_.create_table(t.name, t.kind);
}

std::vector<RoutedOutput> Gateway::process(const WireMessage& message) {
  const auto t0 = Clock::now();
  std::vector<RoutedOutput> outputs;
  std::vector<RuleError> errors;
  double store_ms = 0.0;
  std::size_t writes = 0;
  std::size_t notes = 0;

  if (carries_forbidden_key(message.body)) {
    errors.push_back({"", message.topic, "message rejected: carries a forbidden key"});
  } else {
    for (const auto& rule : rules_) {
      try {
        auto out = evaluate_rule(rule, message.topic, message.body);
        if (!out) continue;
        if (auto* w = std::get_if<TableWrite>(&out->output)) {
          const auto s0 = Clock::now();
          store_.put(w->table, w->key, w->row);
          store_ms += ms_since(s0);
          ++writes;
        } else {
          const auto& push = std::get<PushNotification>(out->output);
          if (sink_) sink_(push);
          ++notes;
        }
        outputs.push_back(std::move(*out));
      } catch (const Error& e) {
        errors.push_back({rule.name, message.topic, e.what()});
      }
    }
  }

  const double elapsed = ms_since(t0);
  std::lock_guard lock(mutex_);
  ++stats_.messages;
  stats_.writes += writes;
  stats_.notifications += notes;
  stats_.errors += errors.size();
  stats_.total_gateway_ms += elapsed;
  stats_.total_store_ms += store_ms;
  stats_.max_gateway_ms = std::max(stats_.max_gateway_ms, elapsed);
  for (auto& e : errors) errors_.push_back(std::move(e));
  return outputs;
}

std::vector<RuleError> Gateway::errors() const {
  std::lock_guard lock(mutex_);
  return errors_;
}

GatewayStats Gateway::stats() const {
  std::lock_guard lock(mutex_);
  return stats_;
}

}  // namespace svs::gateway
