#pragma once

#include <string>
#include <string_view>

#include "svs/error.hpp"

namespace svs::gateway {

class InvalidFilterError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Levels split on '/'. '+' must fill a whole level; '#' must fill the last
// level. Throws InvalidFilterError otherwise.
void validate_topic_filter(std::string_view filter);

// '+' matches exactly one level, a trailing '#' matches the remaining levels
// (including none, so "a/#" matches "a").
bool match_topic(std::string_view filter, std::string_view topic);

}  // namespace svs::gateway
