#pragma once

// Rule-based message router: each rule pairs a topic filter and a SELECT
// statement with an action that writes a table row or raises a push
// notification. Every matching rule fires, in declaration order.

#include <chrono>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "svs/domain.hpp"
#include "svs/gateway/kv_store.hpp"
#include "svs/gateway/select.hpp"
#include "svs/notification.hpp"

namespace svs::gateway {

struct WriteTable {
  std::string table;
};

struct Notify {
  std::string title_template;  // "{field}" placeholders filled from the message
};

using RuleAction = std::variant<WriteTable, Notify>;

struct GatewayRule {
  std::string name;
  std::string topic_filter;
  SelectStatement select;
  RuleAction action;
};

// Builds a rule, taking the topic filter from the SELECT's FROM clause when
// `topic_filter` is empty. Throws ConfigError when both are given and differ.
GatewayRule make_rule(std::string name, std::string topic_filter, std::string_view select, RuleAction action);

struct TableSpec {
  std::string name;
  TableKind kind;
};

struct RuleSet {
  std::vector<TableSpec> tables;
  std::vector<GatewayRule> rules;
};

// {"tables": [{name, kind}], "rules": [{name, topic_filter, select, action: {type, table|title}}]}
// A bare array is read as the rule list with no table declarations.
RuleSet parse_rules(const Json& doc);
RuleSet load_rules(const std::string& path);
// Tables and rules used by the end-to-end pipeline when no file is given.
RuleSet default_rules();

struct WireMessage {
  std::string topic;
  Json body;
};

Json to_json(const WireMessage& m);
WireMessage wire_message_from_json(const Json& doc);

struct TableWrite {
  std::string table;
  StoreKey key;
  Json row;
};

struct RoutedOutput {
  std::string rule;
  std::variant<TableWrite, PushNotification> output;
};

std::string render_title(std::string_view title_template, const Json& body);

// Pure: never touches a store. nullopt when the topic does not match or the
// predicate is false. Throws RuleEvaluationError on a bad message.
std::optional<RoutedOutput> evaluate_rule(const GatewayRule& rule, const std::string& topic, const Json& message);

struct RuleError {
  std::string rule;
  std::string topic;
  std::string what;
};

struct GatewayStats {
  std::size_t messages = 0;
  std::size_t writes = 0;
  std::size_t notifications = 0;
  std::size_t errors = 0;
  double total_gateway_ms = 0.0;  // routing + store writes
  double total_store_ms = 0.0;    // store writes only
  double max_gateway_ms = 0.0;

  double mean_gateway_ms() const { return messages ? total_gateway_ms / static_cast<double>(messages) : 0.0; }
  double mean_store_ms() const { return writes ? total_store_ms / static_cast<double>(writes) : 0.0; }
};

class Gateway {
 public:
  using NotificationSink = std::function<void(const PushNotification&)>;

  Gateway(RuleSet rules, KvStore& store, NotificationSink sink = {});

  // Evaluates every rule against the message; rule errors are logged and
  // do not stop the remaining rules.
  std::vector<RoutedOutput> process(const WireMessage& message);

  std::vector<RuleError> errors() const;
  GatewayStats stats() const;
  const std::vector<GatewayRule>& rules() const noexcept { return rules_; }

 private:
  std::vector<GatewayRule> rules_;
  KvStore& store_;
  NotificationSink sink_;
  mutable std::mutex mutex_;
  std::vector<RuleError> errors_;
  GatewayStats stats_;
};

}  // namespace svs::gateway
