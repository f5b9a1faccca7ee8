#include "svs/gateway/topic.hpp"

#include <vector>

namespace svs::gateway {
namespace {

std::vector<std::string_view> split_levels(std::string_view s) {
  std::vector<std::string_view> levels;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find('/', start);
    if (pos == std::string_view::npos) {
      levels.push_back(s.substr(start));
      return levels;
    }
    levels.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace

void validate_topic_filter(std::string_view filter) {
  if (filter.empty()) throw InvalidFilterError("topic filter is empty");
  const auto levels = split_levels(filter);
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const auto level = levels[i];
    if (level.find('#') != std::string_view::npos) {
      if (level != "#") throw InvalidFilterError("'#' must occupy a whole level in '" + std::string(filter) + "'");
      if (i + 1 != levels.size()) {
        throw InvalidFilterError("'#' must be the last level in '" + std::string(filter) + "'");
      }
    }
    if (level.find('+') != std::string_view::npos && level != "+") {
      throw InvalidFilterError("'+' must occupy a whole level in '" + std::string(filter) + "'");
    }
  }
}

bool match_topic(std::string_view filter, std::string_view topic) {
  validate_topic_filter(filter);
  const auto f = split_levels(filter);
  const auto t = split_levels(topic);
  std::size_t i = 0;
  for (; i < f.size(); ++i) {
    if (f[i] == "#") return true;
    if (i >= t.size()) return false;
    if (f[i] != "+" && f[i] != t[i]) return false;
  }
  return i == t.size();
}

}  // namespace svs::gateway
